"""Relevance and geolocation scores against the human gold standard."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .corpus import GoldRecord
from .geolocate import GeoResult, Verdict

__all__ = ["GoldRecord", "IdMismatch", "EvalReport", "relevance_metrics",
           "geolocation_accuracy", "evaluate"]


class IdMismatch(ValueError):
    def __init__(self, only_pred: set, only_gold: set):
        self.only_pred = sorted(only_pred)
        self.only_gold = sorted(only_gold)
        super().__init__(f"doc_id sets differ: {len(self.only_pred)} only in predictions "
                         f"{self.only_pred[:5]}, {len(self.only_gold)} only in gold "
                         f"{self.only_gold[:5]}")


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0


def _check_ids(preds: Sequence[GeoResult], gold: Sequence[GoldRecord]):
    p = {r.doc_id: r for r in preds}
    g = {r.doc_id: r for r in gold}
    if p.keys() != g.keys():
        raise IdMismatch(set(p) - set(g), set(g) - set(p))
    return p, g


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def relevance_metrics(preds: Sequence[GeoResult], gold: Sequence[GoldRecord]
                      ) -> tuple[float, float, float, Confusion]:
    p, g = _check_ids(preds, gold)
    c = Counter()
    for doc_id, gr in g.items():
        predicted = p[doc_id].verdict is Verdict.RELEVANT
        c[("t" if predicted == gr.relevant else "f") + ("p" if predicted else "n")] += 1
    conf = Confusion(c["tp"], c["fp"], c["fn"], c["tn"])
    return (*prf(conf.tp, conf.fp, conf.fn), conf)


def geolocation_accuracy(preds: Sequence[GeoResult], gold: Sequence[GoldRecord]
                         ) -> tuple[float, float, dict[str, dict[int, int]]]:
    """Exact and overlap accuracy over gold-relevant documents with countries.

    Documents predicted Relevant but annotated irrelevant are not part of this
    evaluation; they only show up as relevance false positives.
    """
    p, g = _check_ids(preds, gold)
    n = exact = overlap = 0
    hist_pred: Counter = Counter()
    hist_gold: Counter = Counter()
    for doc_id, gr in sorted(g.items()):
        if not gr.relevant or not gr.countries:
            continue
        pred = set(p[doc_id].countries)
        n += 1
        exact += pred == gr.countries
        overlap += bool(pred & gr.countries)
        hist_pred[len(pred)] += 1
        hist_gold[len(gr.countries)] += 1
    hists = {"predicted": dict(sorted(hist_pred.items())),
             "gold": dict(sorted(hist_gold.items()))}
    if n == 0:
        return 0.0, 0.0, hists
    return exact / n, overlap / n, hists


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    exact_accuracy: float
    overlap_accuracy: float
    counts: Confusion
    country_cardinality_histograms: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = asdict(self)
        d["country_cardinality_histograms"] = {
            side: {str(k): v for k, v in h.items()}
            for side, h in self.country_cardinality_histograms.items()}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        c = self.counts
        lines = [
            "relevance",
            f"  precision  {self.precision:.3f}",
            f"  recall     {self.recall:.3f}",
            f"  f1         {self.f1:.3f}",
            f"  tp={c.tp} fp={c.fp} fn={c.fn} tn={c.tn}",
            "geolocation",
            f"  exact      {self.exact_accuracy:.3f}",
            f"  overlap    {self.overlap_accuracy:.3f}",
            "countries per document   gold  predicted",
        ]
        hp = self.country_cardinality_histograms.get("predicted", {})
        hg = self.country_cardinality_histograms.get("gold", {})
        for k in sorted(set(hp) | set(hg)):
            lines.append(f"  {k:<22} {hg.get(k, 0):>5}  {hp.get(k, 0):>9}")
        return "\n".join(lines) + "\n"


def evaluate(preds: Sequence[GeoResult], gold: Sequence[GoldRecord]) -> EvalReport:
    p, r, f1, conf = relevance_metrics(preds, gold)
    exact, overlap, hists = geolocation_accuracy(preds, gold)
    return EvalReport(p, r, f1, exact, overlap, conf, hists)
