"""Salience scores, regression divergence and over/under-reporting categories."""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_BAND_FRACTION = 0.25


class DegenerateCohortWarning(UserWarning):
    pass


class SingularDesign(ValueError):
    pass


class Category(str, enum.Enum):
    OVERREPORTED = "Overreported"
    SIMILAR = "Similar"
    UNDERREPORTED = "Underreported"


class CohortMode(str, enum.Enum):
    ANY_NONZERO = "any-nonzero"
    ALL = "all"
    NONZERO_BOTH = "nonzero-both"


def salience_scores(values: Mapping[str, float]) -> dict[str, float]:
    """log1p followed by min-max scaling to [0, 1] over the cohort.

    A cohort whose values are all equal gets score 0 everywhere and a
    :class:`DegenerateCohortWarning`.
    """
    keys = list(values)
    raw = np.array([values[k] for k in keys], dtype=float)
    if np.any(raw < 0) or np.any(np.isnan(raw)):
        raise ValueError("salience inputs must be non-negative")
    if raw.size == 0:
        return {}
    logs = np.log1p(raw)
    lo, hi = logs.min(), logs.max()
    if hi == lo:
        warnings.warn(f"degenerate cohort: all {raw.size} values equal", DegenerateCohortWarning,
                      stacklevel=2)
        return {k: 0.0 for k in keys}
    scores = (logs - lo) / (hi - lo)
    return {k: float(s) for k, s in zip(keys, scores)}


@dataclass(frozen=True)
class RegressionFit:
    beta0: float
    beta1: float
    n: int

    def predict(self, x):
        return self.beta0 + self.beta1 * np.asarray(x, dtype=float)


def fit_regression(pairs: Sequence[tuple[float, float]]) -> RegressionFit:
    """Ordinary least squares of y on x with an intercept."""
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 pairs, got {len(pairs)}")
    arr = np.asarray(pairs, dtype=float)
    x, y = arr[:, 0], arr[:, 1]
    mx, my = x.mean(), y.mean()
    dx = x - mx
    sxx = float(dx @ dx)
    if sxx == 0.0 or np.ptp(x) == 0.0:
        raise SingularDesign("x has zero variance")
    beta1 = float(dx @ (y - my)) / sxx
    beta0 = float(my - beta1 * mx)
    return RegressionFit(beta0, beta1, len(pairs))


@dataclass(frozen=True)
class DivergenceRecord:
    iso3: str
    divergence: float
    band_halfwidth: float = math.nan
    category: Category | None = None


def divergence(fit: RegressionFit, pairs: Mapping[str, tuple[float, float]]
               ) -> list[DivergenceRecord]:
    """Residual news salience: observed minus the fitted line, per country."""
    return [DivergenceRecord(iso3, float(y - (fit.beta0 + fit.beta1 * x)))
            for iso3, (x, y) in pairs.items()]


def categorize(records: Sequence[DivergenceRecord],
               band_fraction: float = DEFAULT_BAND_FRACTION) -> list[DivergenceRecord]:
    """Band of +-band_fraction * max|divergence|; values on the band edge are Similar."""
    if not records:
        raise ValueError("no records to categorize")
    if not 0 < band_fraction < 1:
        raise ValueError("band_fraction must be in (0, 1)")
    extreme = max(abs(r.divergence) for r in records)
    band = band_fraction * extreme
    out = []
    for r in records:
        if r.divergence > band:
            cat = Category.OVERREPORTED
        elif r.divergence < -band:
            cat = Category.UNDERREPORTED
        else:
            cat = Category.SIMILAR
        out.append(replace(r, band_halfwidth=band, category=cat))
    return out


@dataclass(frozen=True)
class ScoreRow:
    iso3: str
    raw_news: int
    raw_ext: float
    salience_news: float
    salience_ext: float
    divergence: float
    category: Category
    source: str


SCORE_COLUMNS = ("iso3", "raw_news", "raw_ext", "salience_news", "salience_ext",
                 "divergence", "category", "source")


@dataclass
class CohortScores:
    source: str
    cohort_mode: CohortMode
    fit: RegressionFit
    band_halfwidth: float
    rows: list[ScoreRow]


def select_cohort(news: Mapping[str, int], ext: Mapping[str, float],
                  countries: Iterable[str], mode: CohortMode) -> list[str]:
    mode = CohortMode(mode)
    chosen = []
    for c in sorted(countries):
        n, e = news.get(c, 0), ext.get(c, 0.0)
        if (mode is CohortMode.ALL
                or (mode is CohortMode.ANY_NONZERO and (n > 0 or e > 0))
                or (mode is CohortMode.NONZERO_BOTH and n > 0 and e > 0)):
            chosen.append(c)
    return chosen


def score_cohort(news: Mapping[str, int], ext: Mapping[str, float], countries: Iterable[str],
                 source: str, mode: CohortMode = CohortMode.ANY_NONZERO,
                 band_fraction: float = DEFAULT_BAND_FRACTION) -> CohortScores:
    """Salience, divergence and category for every cohort country of one source."""
    mode = CohortMode(mode)
    cohort = select_cohort(news, ext, countries, mode)
    s_news = salience_scores({c: news.get(c, 0) for c in cohort})
    s_ext = salience_scores({c: ext.get(c, 0.0) for c in cohort})
    pairs = {c: (s_ext[c], s_news[c]) for c in cohort}
    fit = fit_regression(list(pairs.values()))
    recs = categorize(divergence(fit, pairs), band_fraction)
    rows = [ScoreRow(r.iso3, int(news.get(r.iso3, 0)), float(ext.get(r.iso3, 0.0)),
                     s_news[r.iso3], s_ext[r.iso3], r.divergence, r.category, source)
            for r in recs]
    return CohortScores(source, mode, fit, recs[0].band_halfwidth, rows)


def write_scores(rows: Iterable[ScoreRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_COLUMNS)
        for r in rows:
            w.writerow([r.iso3, r.raw_news, repr(r.raw_ext), repr(r.salience_news),
                        repr(r.salience_ext), repr(r.divergence), r.category.value, r.source])


def read_scores(path) -> list[ScoreRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [ScoreRow(r["iso3"], int(r["raw_news"]), float(r["raw_ext"]),
                         float(r["salience_news"]), float(r["salience_ext"]),
                         float(r["divergence"]), Category(r["category"]), r["source"])
                for r in csv.DictReader(fh)]
