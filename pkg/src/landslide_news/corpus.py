"""News documents: parsing, keyword pre-filter and per-country instances."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .reference import CountryReference, Rejected, normalize_country_code

DEFAULT_PERIOD = (dt.date(2000, 1, 1), dt.date(2024, 12, 31))

DEFAULT_KEYWORDS = (
    "Erdrutsch",
    "Felssturz",
    "Felsstürz",
    "Schlammlawine",
    "Massenbewegung",
    "Hangrutsch",
    "Hangbewegung",
    "Rutschung",
    "Bodenrutsch",
    "Hangabrutschung",
    "Murgang",
    "Gerölllawine",
    "Rutschhang",
    "Rutschhäng",
    "Rutschgefahr",
    "Felslawine",
    "Mure",
)

INSTANCE_COLUMNS = ("doc_id", "date", "outlet", "text_hash", "iso3", "text_type")


class UnreadableInput(Exception):
    pass


def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


def text_hash(body: str) -> str:
    """64-bit content hash of the normalized body, as 16 hex digits."""
    return hashlib.blake2b(normalize_text(body).encode("utf-8"), digest_size=8).hexdigest()


@dataclass(frozen=True, slots=True)
class NewsDocument:
    doc_id: str
    date: dt.date
    outlet: str
    title: str
    body: str
    text_type: str | None = None
    text_hash: str = ""

    def __post_init__(self):
        if not self.text_hash:
            object.__setattr__(self, "text_hash", text_hash(self.body))

    def to_json(self) -> str:
        return json.dumps({
            "id": self.doc_id, "date": self.date.isoformat(), "outlet": self.outlet,
            "title": self.title, "body": self.body, "type": self.text_type,
            "text_hash": self.text_hash,
        }, ensure_ascii=False, sort_keys=True)


@dataclass(frozen=True, slots=True)
class DataInstance:
    doc_id: str
    date: dt.date
    outlet: str
    text_hash: str
    iso3: str
    text_type: str | None = None


@dataclass
class RejectReport:
    counts: Counter = field(default_factory=Counter)
    lines: dict[str, list[int]] = field(default_factory=dict)

    def add(self, reason: str, line: int) -> None:
        self.counts[reason] += 1
        self.lines.setdefault(reason, []).append(line)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __bool__(self) -> bool:
        return self.total > 0

    def to_dict(self) -> dict:
        return {"total": self.total, "by_reason": dict(sorted(self.counts.items()))}


def _iter_lines(source):
    if isinstance(source, (str, Path)):
        try:
            with open(source, encoding="utf-8") as fh:
                yield from fh
        except (OSError, UnicodeDecodeError) as exc:
            raise UnreadableInput(f"{source}: {exc}") from exc
    else:
        try:
            yield from source
        except (OSError, UnicodeDecodeError) as exc:
            raise UnreadableInput(str(exc)) from exc


def parse_documents(source, period: tuple[dt.date, dt.date] = DEFAULT_PERIOD
                    ) -> tuple[list[NewsDocument], RejectReport]:
    """Parse line-delimited JSON documents.

    ``source`` is a path or an iterable of lines. Bad records are tallied in the
    returned report under BadJson, MissingId, DuplicateId, BadDate, OutOfPeriod
    or EmptyBody; they never abort the stream.
    """
    docs: list[NewsDocument] = []
    report = RejectReport()
    seen: set[str] = set()
    start, end = period
    for lineno, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            report.add("BadJson", lineno)
            continue
        if not isinstance(rec, dict):
            report.add("BadJson", lineno)
            continue
        doc_id = rec.get("id")
        if doc_id is None or str(doc_id).strip() == "":
            report.add("MissingId", lineno)
            continue
        doc_id = str(doc_id)
        if doc_id in seen:
            report.add("DuplicateId", lineno)
            continue
        try:
            date = dt.date.fromisoformat(str(rec.get("date", ""))[:10])
        except ValueError:
            report.add("BadDate", lineno)
            continue
        if not start <= date <= end:
            report.add("OutOfPeriod", lineno)
            continue
        body = rec.get("body")
        if not isinstance(body, str) or not body.strip():
            report.add("EmptyBody", lineno)
            continue
        text_type = rec.get("type")
        seen.add(doc_id)
        docs.append(NewsDocument(
            doc_id=doc_id,
            date=date,
            outlet=str(rec.get("outlet") or ""),
            title=str(rec.get("title") or ""),
            body=body,
            text_type=str(text_type) if text_type not in (None, "") else None,
        ))
    return docs, report


def write_documents(docs: Iterable[NewsDocument], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(doc.to_json() + "\n")


def keyword_filter(doc: NewsDocument, keywords: Sequence[str] = DEFAULT_KEYWORDS) -> bool:
    """True iff title or body contains any keyword, case-insensitively.

    Matching is on substrings so that German compounds ("Murgangsgefahr") hit.
    """
    if not keywords:
        raise ValueError("keyword list must not be empty")
    haystack = f"{doc.title}\n{doc.body}".casefold()
    return any(k.casefold() in haystack for k in keywords)


def mentions_home(doc: NewsDocument, home_terms: Sequence[str]) -> bool:
    """Crude check for domestic coverage: any home-country term in the title."""
    title = doc.title.casefold()
    return any(t.casefold() in title for t in home_terms)


def flag_concatenations(docs: Iterable[NewsDocument], max_chars: int) -> list[str]:
    """doc_ids whose body exceeds ``max_chars`` (likely several merged pieces)."""
    return [d.doc_id for d in docs if len(d.body) > max_chars]


def explode_instances(
    docs: Iterable[tuple[NewsDocument, Sequence[str]]],
    ref: CountryReference,
    tally: Counter | None = None,
) -> list[DataInstance]:
    """One instance per accepted (document, country) pair.

    Rejected codes are dropped; when ``tally`` is given it is updated with the
    rejection reason of each dropped code.
    """
    out: list[DataInstance] = []
    for doc, countries in docs:
        seen: set[str] = set()
        for raw in countries:
            code = normalize_country_code(raw, ref)
            if isinstance(code, Rejected):
                if tally is not None:
                    tally[code.reason.value] += 1
                continue
            if code in seen:
                continue
            seen.add(code)
            out.append(DataInstance(doc.doc_id, doc.date, doc.outlet, doc.text_hash, code,
                                    doc.text_type))
    return out


def write_instances(instances: Iterable[DataInstance], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INSTANCE_COLUMNS)
        for i in instances:
            w.writerow([i.doc_id, i.date.isoformat(), i.outlet, i.text_hash, i.iso3,
                        i.text_type or ""])


def read_instances(path) -> list[DataInstance]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [DataInstance(r["doc_id"], dt.date.fromisoformat(r["date"]), r["outlet"],
                             r["text_hash"], r["iso3"], r.get("text_type") or None)
                for r in reader]


@dataclass(frozen=True)
class GoldRecord:
    doc_id: str
    relevant: bool
    countries: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.relevant and self.countries:
            raise ValueError(f"{self.doc_id}: irrelevant gold record with countries")


def read_gold(path) -> list[GoldRecord]:
    """Read the gold annotation file {doc_id, relevant, countries}."""
    text = Path(path).read_text(encoding="utf-8-sig")
    first = text.splitlines()[0] if text else ""
    delimiter = "\t" if first.count("\t") > first.count(",") else ","
    reader = csv.DictReader(io.StringIO(text), delimiter=delimiter)
    out = []
    for row in reader:
        relevant = row["relevant"].strip().lower() in ("1", "true", "yes")
        codes = frozenset(c.strip().upper() for c in (row.get("countries") or "").split(";")
                          if c.strip())
        out.append(GoldRecord(row["doc_id"].strip(), relevant, codes))
    return out


def write_gold(records: Iterable[GoldRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "relevant", "countries"])
        for g in records:
            w.writerow([g.doc_id, int(g.relevant), ";".join(sorted(g.countries))])
