"""Relevance and country extraction through a chat-completion endpoint.

Each document is sent once (or replayed from the on-disk cache) with
temperature 0; the reply is expected to be a JSON list of ISO-3 codes or
``N/A``. Results are merged in input order regardless of completion order.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from collections import Counter
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import requests

from .corpus import NewsDocument
from .reference import CountryReference, Rejected, RejectReason, normalize_country_code

logger = logging.getLogger(__name__)

SLOT = "{document}"
API_KEY_ENV = "LANDSLIDE_NEWS_API_KEY"
ENDPOINT_ENV = "LANDSLIDE_NEWS_ENDPOINT"
LONG_LIST = 3  # more countries than this get an audit entry


class TemplateError(ValueError):
    pass


class EndpointDown(RuntimeError):
    def __init__(self, message: str, partial: list | None = None):
        super().__init__(message)
        self.partial = partial or []


class Verdict(str, enum.Enum):
    RELEVANT = "Relevant"
    UNRELATED = "Unrelated"


def _default_prompt(name: str) -> str:
    return resources.files("landslide_news.data").joinpath(name).read_text("utf-8").strip()


@dataclass
class ClientConfig:
    endpoint_url: str = "http://localhost:1234/v1"
    model_name: str = "mistralai/devstral-small-2-2512"
    system_prompt: str = field(default_factory=lambda: _default_prompt(
        "system_prompt_paraphrase.txt"))
    instruction_template: str = field(default_factory=lambda: _default_prompt(
        "instruction_paraphrase.txt"))
    max_retries: int = 3
    timeout: float = 120.0
    max_inflight: int = 4
    char_budget: int = 8000
    backoff: float = 0.5
    abort_fraction: float = 0.5
    api_key: str | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")
        if self.char_budget < 1:
            raise ValueError("char_budget must be positive")


@dataclass(frozen=True)
class GeoResult:
    doc_id: str
    countries: tuple[str, ...]
    verdict: Verdict
    raw_response: str = ""

    def __post_init__(self):
        if (self.verdict is Verdict.UNRELATED) != (not self.countries):
            raise ValueError(f"{self.doc_id}: verdict {self.verdict} with {self.countries}")

    def to_json(self) -> str:
        return json.dumps({"doc_id": self.doc_id, "countries": list(self.countries),
                           "verdict": self.verdict.value, "raw_response": self.raw_response},
                          ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "GeoResult":
        d = json.loads(line)
        return cls(d["doc_id"], tuple(d["countries"]), Verdict(d["verdict"]),
                   d.get("raw_response", ""))


def write_results(results: Sequence[GeoResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in results:
            fh.write(r.to_json() + "\n")


def read_results(path) -> list[GeoResult]:
    with open(path, encoding="utf-8") as fh:
        return [GeoResult.from_json(line) for line in fh if line.strip()]


# -- prompt -------------------------------------------------------------------

def _truncate(text: str, budget: int) -> str:
    if len(text) <= budget:
        return text
    cut = text[:budget]
    if not text[budget].isspace():
        idx = max(cut.rfind(c) for c in (" ", "\n", "\t", "\r"))
        if idx > 0:
            cut = cut[:idx]
    return cut.rstrip()


def build_prompt(doc: NewsDocument, cfg: ClientConfig) -> tuple[str, str]:
    n = cfg.instruction_template.count(SLOT)
    if n != 1:
        raise TemplateError(f"instruction template must contain {SLOT} exactly once, found {n}")
    text = f"{doc.title}\n\n{doc.body}" if doc.title else doc.body
    return cfg.system_prompt, cfg.instruction_template.replace(SLOT, _truncate(text, cfg.char_budget))


def prompt_hash(cfg: ClientConfig, system_text: str, user_text: str) -> str:
    payload = json.dumps([cfg.model_name, system_text, user_text], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# -- response parsing -----------------------------------------------------------

_NA_RE = re.compile(r"(?<![A-Za-z])N/?A(?![A-Za-z])", re.IGNORECASE)
_decoder = json.JSONDecoder()


def _first_json(text: str):
    for i, ch in enumerate(text):
        if ch in "[{":
            try:
                value, _ = _decoder.raw_decode(text, i)
            except json.JSONDecodeError:
                continue
            return value
    raise ValueError("no JSON value")


def _is_na(value) -> bool:
    return isinstance(value, str) and value.strip().strip("\"'").upper() in ("N/A", "NA")


@dataclass
class Extraction:
    countries: tuple[str, ...]
    verdict: Verdict
    tally: Counter


def extract_countries(response_text: str, ref: CountryReference) -> Extraction:
    """Parse a model reply into accepted country codes and a verdict.

    Unparseable replies become Unrelated and are tallied as ``unparseable``.
    """
    tally: Counter = Counter()
    unrelated = Extraction((), Verdict.UNRELATED, tally)
    text = response_text or ""
    try:
        value = _first_json(text)
    except ValueError:
        if _NA_RE.search(text):
            tally["na"] += 1
        else:
            tally["unparseable"] += 1
        return unrelated

    if isinstance(value, dict):
        if len(value) != 1:
            tally["unparseable"] += 1
            return unrelated
        value = next(iter(value.values()))
    if _is_na(value) or value is None:
        tally["na"] += 1
        return unrelated
    if not isinstance(value, list):
        tally["unparseable"] += 1
        return unrelated

    countries: list[str] = []
    for item in value:
        if _is_na(item):
            continue
        code = normalize_country_code(item, ref)
        if isinstance(code, Rejected):
            tally[code.reason.value.lower()] += 1
        elif code not in countries:
            countries.append(code)
    if len(countries) > LONG_LIST:
        tally["long_list"] += 1
    if not countries:
        if not value or all(_is_na(v) for v in value):
            tally["na"] += 1
        return unrelated
    return Extraction(tuple(countries), Verdict.RELEVANT, tally)


# -- cache ------------------------------------------------------------------------

class ResponseCache:
    """Raw replies on disk, one JSON file per (doc_id, prompt hash)."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def _path(self, doc_id: str, phash: str) -> Path:
        key = hashlib.sha256(f"{doc_id}\0{phash}".encode("utf-8")).hexdigest()
        return self.directory / key[:2] / f"{key}.json"

    def get(self, doc_id: str, phash: str) -> str | None:
        path = self._path(doc_id, phash)
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)["response"]
        except (OSError, ValueError, KeyError):
            return None

    def put(self, doc_id: str, phash: str, response: str) -> None:
        path = self._path(doc_id, phash)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps({"doc_id": doc_id, "prompt_hash": phash,
                                   "response": response}, ensure_ascii=False),
                       encoding="utf-8")
        os.replace(tmp, path)


# -- client -----------------------------------------------------------------------

class RequestFailed(RuntimeError):
    pass


class ChatClient:
    def __init__(self, cfg: ClientConfig, session: requests.Session | None = None):
        self.cfg = cfg
        self.url = cfg.endpoint_url.rstrip("/") + "/chat/completions"
        self._local = threading.local()
        self._session = session
        key = cfg.api_key or os.environ.get(API_KEY_ENV)
        self.headers = {"Content-Type": "application/json"}
        if key:
            self.headers["Authorization"] = f"Bearer {key}"

    def _get_session(self) -> requests.Session:
        if self._session is not None:
            return self._session
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def complete(self, system_text: str, user_text: str) -> str:
        body = {
            "model": self.cfg.model_name,
            "messages": [{"role": "system", "content": system_text},
                         {"role": "user", "content": user_text}],
            "temperature": 0,
        }
        last = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                time.sleep(self.cfg.backoff * 2 ** (attempt - 1))
            try:
                resp = self._get_session().post(self.url, json=body, headers=self.headers,
                                                timeout=self.cfg.timeout)
            except requests.RequestException as exc:
                last = f"transport error: {exc}"
                logger.debug("attempt %d failed: %s", attempt + 1, last)
                continue
            if resp.status_code != 200:
                last = f"HTTP {resp.status_code}"
                logger.debug("attempt %d failed: %s", attempt + 1, last)
                continue
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError):
                last = "malformed completion payload"
                continue
        raise RequestFailed(last or "request failed")


@dataclass
class GeolocateRun:
    results: list[GeoResult]
    audit: Counter


def geolocate_corpus(
    docs: Sequence[NewsDocument],
    cfg: ClientConfig,
    ref: CountryReference,
    cache: ResponseCache | None = None,
    partial_path=None,
    client: ChatClient | None = None,
) -> GeolocateRun:
    """Geolocate every document, at most ``cfg.max_inflight`` requests at a time.

    A document whose request still fails after all retries becomes Unrelated
    and is audited as ``failed``. Once failures reach ``cfg.abort_fraction`` of
    the corpus the run stops; results obtained so far are written to
    ``partial_path`` (if given) and :class:`EndpointDown` is raised.
    """
    client = client or ChatClient(cfg)
    prompts = [build_prompt(d, cfg) for d in docs]
    hashes = [prompt_hash(cfg, s, u) for s, u in prompts]
    results: list[GeoResult | None] = [None] * len(docs)
    audit: Counter = Counter()
    max_failures = max(1, math.ceil(cfg.abort_fraction * len(docs)))

    def finish(i: int, raw: str) -> None:
        ex = extract_countries(raw, ref)
        audit.update(ex.tally)
        results[i] = GeoResult(docs[i].doc_id, ex.countries, ex.verdict, raw)

    pending = []
    for i, doc in enumerate(docs):
        raw = cache.get(doc.doc_id, hashes[i]) if cache else None
        if raw is not None:
            audit["cache_hits"] += 1
            finish(i, raw)
        else:
            pending.append(i)

    def work(i: int) -> str:
        return client.complete(*prompts[i])

    failures = 0
    if pending:
        with ThreadPoolExecutor(max_workers=cfg.max_inflight) as pool:
            futures = {pool.submit(work, i): i for i in pending}
            remaining = set(futures)
            while remaining:
                done, remaining = wait(remaining, return_when=FIRST_COMPLETED)
                for fut in sorted(done, key=futures.get):
                    i = futures[fut]
                    try:
                        raw = fut.result()
                    except RequestFailed as exc:
                        failures += 1
                        audit["failed"] += 1
                        logger.warning("%s: giving up (%s)", docs[i].doc_id, exc)
                        results[i] = GeoResult(docs[i].doc_id, (), Verdict.UNRELATED, "")
                        continue
                    audit["requests"] += 1
                    if cache:
                        cache.put(docs[i].doc_id, hashes[i], raw)
                    finish(i, raw)
                if failures >= max_failures and len(docs) > 0:
                    for fut in remaining:
                        fut.cancel()
                    pool.shutdown(wait=True, cancel_futures=True)
                    partial = [r for r in results if r is not None]
                    if partial_path is not None:
                        write_results(partial, partial_path)
                    raise EndpointDown(
                        f"{failures} of {len(docs)} documents failed after retries", partial)

    return GeolocateRun([r for r in results if r is not None], audit)
