"""Aggregate tables and plot-ready figure data."""

from __future__ import annotations

import csv
import datetime as dt
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import DataInstance
from .events import NewsEvent
from .reference import (CONTINENTS, SUBREGIONS, CountryReference, Development, Income,
                        Risk)

DIMENSIONS = ("risk", "development", "continent", "subregion", "income")
_BUCKET_ORDER = {
    "risk": [r.value for r in Risk],
    "development": [d.value for d in Development],
    "continent": list(CONTINENTS),
    "subregion": list(SUBREGIONS),
    "income": [i.value for i in Income],
}


def bucket_of(ref: CountryReference, iso3: str, dimension: str) -> str:
    rec = ref[iso3]
    if dimension == "continent":
        return rec.continent
    if dimension == "subregion":
        return rec.subregion
    if dimension in ("risk", "development", "income"):
        return getattr(rec, dimension).value
    raise ValueError(f"unknown dimension {dimension!r}")


def _pct(part: float, total: float) -> float:
    return 100.0 * part / total if total else 0.0


@dataclass(frozen=True)
class TopRow:
    iso3: str
    n_events: int
    n_documents: int
    n_active_days: int


def top_countries(events: Sequence[NewsEvent], instances: Sequence[DataInstance],
                  k: int | None = None) -> list[TopRow]:
    """Countries ranked by events, then documents, then iso3."""
    n_events = Counter(e.iso3 for e in events)
    docs: dict[str, set] = defaultdict(set)
    days: dict[str, set] = defaultdict(set)
    for i in instances:
        docs[i.iso3].add(i.doc_id)
        days[i.iso3].add(i.date)
    codes = set(n_events) | set(docs)
    rows = [TopRow(c, n_events.get(c, 0), len(docs.get(c, ())), len(days.get(c, ())))
            for c in codes]
    rows.sort(key=lambda r: (-r.n_events, -r.n_documents, r.iso3))
    return rows if k is None else rows[:k]


@dataclass(frozen=True)
class DistributionRow:
    dimension: str
    bucket: str
    n_news_events: int
    pct_news: float
    pct_emdat: float
    pct_wbglhm: float


def distribution_table(events: Sequence[NewsEvent], ref: CountryReference,
                       dimension: str) -> list[DistributionRow]:
    """Share of events per bucket next to the EM-DAT and WB-GLHM shares.

    External shares are taken over the analyzable reference countries. Buckets
    are listed in canonical order; a bucket appears when some analyzable
    country or some event falls into it.
    """
    news: Counter = Counter(bucket_of(ref, e.iso3, dimension) for e in events)
    emdat: Counter = Counter()
    wb: defaultdict = defaultdict(float)
    present = set(news)
    for rec in ref.analyzable():
        b = bucket_of(ref, rec.iso3, dimension)
        present.add(b)
        emdat[b] += rec.emdat_count
        wb[b] += rec.wbglhm_freq
    total_news, total_emdat, total_wb = sum(news.values()), sum(emdat.values()), sum(wb.values())
    return [DistributionRow(dimension, b, news.get(b, 0), _pct(news.get(b, 0), total_news),
                            _pct(emdat.get(b, 0), total_emdat), _pct(wb.get(b, 0.0), total_wb))
            for b in _BUCKET_ORDER[dimension] if b in present]


@dataclass(frozen=True)
class YearlyDeviation:
    year: int
    subregion: str
    pct_news: float
    pct_external: float
    delta: float


def _shares(weights: dict[str, float]) -> dict[str, float]:
    total = sum(weights.values())
    return {k: _pct(v, total) for k, v in weights.items()}


def yearly_deviation(events: Sequence[NewsEvent], ref: CountryReference, source: str,
                     mode: str = "yearly") -> list[YearlyDeviation]:
    """Per year and subregion: share of that year's events minus the external share.

    WB-GLHM shares are constant. EM-DAT shares come from dated records per year
    when ``mode == "yearly"`` and the reference carries them, else from totals.
    Years without any news event are skipped.
    """
    source = source.upper()
    if source not in ("EMDAT", "WBGLHM"):
        raise ValueError(f"unknown source {source!r}")
    if mode not in ("yearly", "total"):
        raise ValueError(f"unknown mode {mode!r}")
    subregions = [s for s in SUBREGIONS if any(r.subregion == s for r in ref.analyzable())]
    analyzable = ref.analyzable()

    def external(year: int) -> dict[str, float]:
        w = {s: 0.0 for s in subregions}
        for rec in analyzable:
            if source == "WBGLHM":
                w[rec.subregion] += rec.wbglhm_freq
            elif mode == "yearly" and ref.emdat_by_year is not None:
                w[rec.subregion] += ref.emdat_by_year.get(rec.iso3, {}).get(year, 0)
            else:
                w[rec.subregion] += rec.emdat_count
        return _shares(w)

    by_year: dict[int, Counter] = defaultdict(Counter)
    for e in events:
        by_year[e.first_day.year][ref[e.iso3].subregion] += 1
    out = []
    for year in sorted(by_year):
        news = _shares({s: float(by_year[year].get(s, 0)) for s in subregions})
        ext = external(year)
        out.extend(YearlyDeviation(year, s, news[s], ext[s], news[s] - ext[s])
                   for s in subregions)
    return out


def deviation_boxplot(deviations: Sequence[YearlyDeviation]) -> list[dict]:
    """Five-number summary of yearly deltas per subregion."""
    by_sub: dict[str, list[float]] = defaultdict(list)
    for d in deviations:
        by_sub[d.subregion].append(d.delta)
    out = []
    for s in [s for s in SUBREGIONS if s in by_sub]:
        q = np.percentile(np.asarray(by_sub[s]), [0, 25, 50, 75, 100])
        out.append({"subregion": s, "n_years": len(by_sub[s]), "min": float(q[0]),
                    "q1": float(q[1]), "median": float(q[2]), "q3": float(q[3]),
                    "max": float(q[4])})
    return out


# -- figure data ---------------------------------------------------------------------

def daily_totals(instances: Iterable[DataInstance], period: tuple[dt.date, dt.date]
                 ) -> list[tuple[dt.date, int]]:
    """Distinct documents per day over the whole period (all countries together)."""
    start, end = period
    n = (end - start).days + 1
    seen: set[str] = set()
    counts = np.zeros(n, dtype=np.int64)
    for i in instances:
        if i.doc_id not in seen:
            seen.add(i.doc_id)
            counts[(i.date - start).days] += 1
    return [(start + dt.timedelta(days=k), int(c)) for k, c in enumerate(counts)]


def events_by_year_continent(events: Sequence[NewsEvent], ref: CountryReference
                             ) -> list[tuple[int, str, int]]:
    c = Counter((e.first_day.year, ref[e.iso3].continent) for e in events)
    return [(y, cont, n) for (y, cont), n in sorted(c.items())]


def outlet_continent(instances: Iterable[DataInstance], ref: CountryReference
                     ) -> list[tuple[str, str, int]]:
    """Documents per outlet and continent; a document counts once per continent."""
    seen = set()
    c: Counter = Counter()
    for i in instances:
        key = (i.doc_id, i.outlet, ref[i.iso3].continent)
        if key not in seen:
            seen.add(key)
            c[(i.outlet, key[2])] += 1
    return [(o, cont, n) for (o, cont), n in sorted(c.items())]


def corpus_overview(instances: Sequence[DataInstance], events: Sequence[NewsEvent],
                    period: tuple[dt.date, dt.date]) -> dict:
    """Headline counts of the geolocated dataset."""
    per_doc: Counter = Counter(i.doc_id for i in instances)
    n_docs = len(per_doc)
    hist = Counter(per_doc.values())
    totals = np.array([n for _, n in daily_totals(instances, period)])
    days: dict[str, set] = defaultdict(set)
    for i in instances:
        days[i.iso3].add(i.date)
    per_country_days = sorted(len(d) for d in days.values())
    return {
        "documents": n_docs,
        "unique_texts": len({i.text_hash for i in instances}),
        "outlets": len({i.outlet for i in instances}),
        "countries": len({i.iso3 for i in instances}),
        "instances": len(instances),
        "events": len(events),
        "pct_docs_one_country": round(_pct(hist.get(1, 0), n_docs), 4),
        "pct_docs_two_countries": round(_pct(hist.get(2, 0), n_docs), 4),
        "period_days": int(totals.size),
        "active_days": int(np.count_nonzero(totals)),
        "max_daily_documents": int(totals.max()) if totals.size else 0,
        "days_with_100_plus": int(np.count_nonzero(totals >= 100)),
        "active_days_quartiles": ([float(q) for q in np.percentile(per_country_days,
                                                                   [25, 50, 75])]
                                  if per_country_days else []),
    }


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
