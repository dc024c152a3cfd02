import math
import random
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from landslide_news.salience import (Category, CohortMode, DegenerateCohortWarning,
                                     DivergenceRecord, RegressionFit, SingularDesign,
                                     categorize, divergence, fit_regression, read_scores,
                                     salience_scores, score_cohort, select_cohort, write_scores)


def ols_exact(points):
    """Closed-form OLS over rationals."""
    pts = [(Fraction(x), Fraction(y)) for x, y in points]
    n = len(pts)
    mx = sum(x for x, _ in pts) / n
    my = sum(y for _, y in pts) / n
    b1 = sum((x - mx) * (y - my) for x, y in pts) / sum((x - mx) ** 2 for x, _ in pts)
    return my - b1 * mx, b1


def test_log_collinear_cohort():
    s = salience_scores({"A": 0, "B": 9, "C": 99})
    assert s["A"] == 0.0 and s["C"] == 1.0
    assert abs(s["B"] - 0.5) < 1e-12


def test_degenerate_cohort_warns():
    with pytest.warns(DegenerateCohortWarning):
        assert salience_scores({"A": 5, "B": 5}) == {"A": 0.0, "B": 0.0}


def test_negative_input_rejected():
    with pytest.raises(ValueError):
        salience_scores({"A": -1, "B": 2})


@given(st.dictionaries(st.text(min_size=1, max_size=3),
                       st.floats(0, 1e6, allow_nan=False), min_size=2, max_size=30))
def test_scores_bounded_and_monotone(values):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCohortWarning)
        s = salience_scores(values)
    assert all(0.0 <= v <= 1.0 for v in s.values())
    keys = sorted(values, key=values.get)
    for a, b in zip(keys, keys[1:]):
        assert s[a] <= s[b]
    if len(set(values.values())) > 1:
        assert s[max(values, key=values.get)] == 1.0


def test_affine_after_log_is_invariant():
    # v -> expm1(a*log1p(v) + b) is an increasing affine map in log space
    rng = random.Random(2)
    for _ in range(100):
        vals = {str(i): rng.uniform(0, 500) for i in range(rng.randint(2, 20))}
        a, b = rng.uniform(0.2, 3), rng.uniform(0, 2)
        moved = {k: math.expm1(a * math.log1p(v) + b) for k, v in vals.items()}
        s1, s2 = salience_scores(vals), salience_scores(moved)
        assert all(abs(s1[k] - s2[k]) < 1e-9 for k in vals)


def test_three_point_fit_matches_closed_form():
    pts = [(0, 0), (0.5, 1), (1, 0.5)]
    fit = fit_regression(pts)
    b0, b1 = ols_exact([(0, 0), (Fraction(1, 2), 1), (1, Fraction(1, 2))])
    assert (b0, b1) == (Fraction(1, 4), Fraction(1, 2))
    assert fit.beta1 == 0.5 and fit.beta0 == 0.25 and fit.n == 3


def test_affine_recovery():
    xs = np.linspace(0, 1, 11)
    fit = fit_regression([(x, 0.5 * x + 0.1) for x in xs])
    assert abs(fit.beta1 - 0.5) < 1e-12 and abs(fit.beta0 - 0.1) < 1e-12


def test_residual_identities_on_random_cohorts():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(3, 250))
        x, y = rng.random(n), rng.random(n)
        fit = fit_regression(list(zip(x, y)))
        r = y - fit.predict(x)
        assert abs(r.sum()) < 1e-9 * n
        assert abs((r * x).sum()) < 1e-9 * n


def test_fit_against_fraction_oracle():
    rng = random.Random(8)
    for _ in range(50):
        pts = [(rng.randint(0, 20) / 20, rng.randint(0, 20) / 20) for _ in range(rng.randint(3, 12))]
        if len({x for x, _ in pts}) < 2:
            continue
        b0, b1 = ols_exact(pts)
        fit = fit_regression(pts)
        assert abs(fit.beta0 - float(b0)) < 1e-12 and abs(fit.beta1 - float(b1)) < 1e-12


def test_fit_errors():
    with pytest.raises(SingularDesign):
        fit_regression([(0.3, 0), (0.3, 1), (0.3, 0.5)])
    with pytest.raises(ValueError):
        fit_regression([(0, 0), (1, 1)])


def test_divergence_examples():
    fit = RegressionFit(0.1, 0.5, 3)
    recs = divergence(fit, {"A": (0.6, 0.4), "B": (0.6, 1.0)})
    assert recs[0].divergence == 0.0
    assert abs(recs[1].divergence - 0.6) < 1e-15


def test_categorize_examples():
    recs = [DivergenceRecord(c, d) for c, d in (("A", -1.0), ("B", 0.1), ("C", 0.9))]
    out = categorize(recs, 0.25)
    assert [r.category for r in out] == [Category.UNDERREPORTED, Category.SIMILAR,
                                         Category.OVERREPORTED]
    assert all(r.band_halfwidth == 0.25 for r in out)


def test_categorize_edges_are_similar():
    recs = [DivergenceRecord(c, d) for c, d in (("A", -2.0), ("B", 0.5), ("C", -0.5))]
    assert [r.category for r in categorize(recs)][1:] == [Category.SIMILAR] * 2
    zeros = categorize([DivergenceRecord("A", 0.0), DivergenceRecord("B", 0.0)])
    assert {r.category for r in zeros} == {Category.SIMILAR}


def test_categorize_invalid():
    with pytest.raises(ValueError):
        categorize([])
    with pytest.raises(ValueError):
        categorize([DivergenceRecord("A", 1.0)], 1.5)


def test_select_cohort_modes():
    news = {"A": 3, "B": 0, "C": 1}
    ext = {"A": 0.0, "B": 2.0, "C": 4.0}
    countries = ["A", "B", "C", "D"]
    assert select_cohort(news, ext, countries, CohortMode.ALL) == ["A", "B", "C", "D"]
    assert select_cohort(news, ext, countries, CohortMode.ANY_NONZERO) == ["A", "B", "C"]
    assert select_cohort(news, ext, countries, "nonzero-both") == ["C"]


def test_score_cohort_and_round_trip(tmp_path):
    rng = random.Random(1)
    countries = [f"C{i:02d}" for i in range(40)]
    news = {c: rng.randint(0, 30) for c in countries}
    ext = {c: rng.choice([0, rng.uniform(0, 50)]) for c in countries}
    res = score_cohort(news, ext, countries, "EMDAT")
    top = max((r for r in res.rows), key=lambda r: r.raw_news)
    assert top.salience_news == 1.0
    assert abs(sum(r.divergence for r in res.rows)) < 1e-9 * len(res.rows)
    write_scores(res.rows, tmp_path / "s.csv")
    assert read_scores(tmp_path / "s.csv") == res.rows
