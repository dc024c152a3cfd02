import datetime as dt
import random

import pytest

from landslide_news.corpus import DataInstance
from landslide_news.events import NewsEvent
from landslide_news.reference import bundled_country_file, load_country_reference
from landslide_news.report import (DIMENSIONS, DistributionRow, corpus_overview, daily_totals,
                                   deviation_boxplot, distribution_table, outlet_continent,
                                   top_countries, write_rows, yearly_deviation)

from .conftest import D0, write_csv

TOY = [("AAA", "Alpha", "Southern Europe"), ("BBB", "Beta", "Southern Europe"),
       ("CCC", "Gamma", "South-eastern Asia"), ("DEU", "Germany", "Western Europe")]


def ev(iso3, day=0, year=None):
    d = D0 + dt.timedelta(days=day) if year is None else dt.date(year, 6, 1)
    return NewsEvent(iso3, d, d, d)


def inst(doc_id, iso3, day=0, outlet="taz"):
    return DataInstance(doc_id, D0 + dt.timedelta(days=day), outlet, "0" * 16, iso3, "")


@pytest.fixture
def toy(make_reference):
    return make_reference(TOY, indicators={
        "emdat": (["iso3", "count"], [("AAA", 1), ("BBB", 1), ("CCC", 2)]),
        "wbglhm": (["iso3", "frequency"], [("AAA", 3.0), ("BBB", 1.0), ("CCC", 4.0)]),
        "risk": (["iso3", "risk"], [("AAA", "High"), ("BBB", "High"), ("CCC", "Low")]),
    })


def test_top_countries_tie_rule():
    events = [ev("AAA", d) for d in range(3)] + [ev("BBB", d) for d in range(3)]
    insts = ([inst(f"a{i}", "AAA") for i in range(10)]
             + [inst(f"b{i}", "BBB", day=i) for i in range(8)])
    rows = top_countries(events, insts)
    assert [r.iso3 for r in rows] == ["AAA", "BBB"]
    assert (rows[0].n_documents, rows[0].n_active_days) == (10, 1)
    assert len(top_countries(events, insts, k=50)) == 2


def test_top_countries_documents_counted_once():
    insts = [inst("d", "AAA"), inst("d", "AAA"), inst("d", "BBB")]
    rows = top_countries([ev("AAA")], insts)
    assert rows[0].n_documents == 1


def test_distribution_hand_normalized(toy):
    rows = {r.bucket: r for r in distribution_table([ev("AAA"), ev("CCC")], toy, "risk")}
    assert rows["High"].pct_emdat == 50.0 and rows["Low"].pct_emdat == 50.0
    assert rows["High"].pct_wbglhm == 50.0
    assert rows["High"].pct_news == 50.0 and rows["High"].n_news_events == 1
    assert "Unknown" not in rows


def test_distribution_single_continent(toy):
    rows = {r.bucket: r for r in distribution_table([ev("AAA")] * 4, toy, "continent")}
    assert rows["Europe"].pct_news == 100.0
    assert rows["Asia"].pct_news == 0.0


def test_distribution_sums_and_merge(bundled_reference):
    rng = random.Random(6)
    codes = sorted(r.iso3 for r in bundled_reference.analyzable())
    events = [ev(rng.choice(codes), rng.randint(0, 9000)) for _ in range(500)]
    for dim in DIMENSIONS:
        rows = distribution_table(events, bundled_reference, dim)
        assert abs(sum(r.pct_news for r in rows) - 100) < 0.01
        assert sum(r.n_news_events for r in rows) == 500
    # merging two buckets equals recomputing with them relabelled
    rows = distribution_table(events, bundled_reference, "continent")
    a, b = rows[0], rows[1]
    merged = DistributionRow("continent", "merged", a.n_news_events + b.n_news_events,
                             a.pct_news + b.pct_news, a.pct_emdat + b.pct_emdat,
                             a.pct_wbglhm + b.pct_wbglhm)
    assert merged.pct_news == pytest.approx(100 * merged.n_news_events / 500, abs=1e-12)


def test_yearly_deviation_examples(toy):
    # 3 of 5 events in Southern Europe vs 50% EM-DAT share
    events = [ev("AAA", year=2005)] * 3 + [ev("CCC", year=2005)] * 2
    devs = {d.subregion: d for d in yearly_deviation(events, toy, "EMDAT", mode="total")}
    assert devs["Southern Europe"].pct_news == 60.0
    assert devs["Southern Europe"].delta == pytest.approx(10.0)
    assert devs["South-eastern Asia"].delta == pytest.approx(-10.0)


def test_yearly_deviation_zero_when_matching(make_reference):
    ref = make_reference([("AAA", "Alpha", "Southern Europe")],
                         indicators={"wbglhm": (["iso3", "frequency"], [("AAA", 2.0)])})
    (d,) = yearly_deviation([ev("AAA", year=2010)], ref, "WBGLHM")
    assert d.delta == 0.0


def test_yearly_emdat_modes(make_reference):
    ref = make_reference(TOY[:3], indicators={"emdat": (
        ["iso3", "year", "count"], [("AAA", 2003, 1), ("CCC", 2004, 3)])})
    events = [ev("AAA", year=2003), ev("CCC", year=2004)]
    yearly = {(d.year, d.subregion): d.pct_external for d in yearly_deviation(events, ref, "EMDAT")}
    assert yearly[(2003, "Southern Europe")] == 100.0
    assert yearly[(2004, "Southern Europe")] == 0.0
    total = {(d.year, d.subregion): d.pct_external
             for d in yearly_deviation(events, ref, "EMDAT", mode="total")}
    assert total[(2003, "Southern Europe")] == 25.0 == total[(2004, "Southern Europe")]


def test_yearly_deviations_sum_to_zero(tmp_path, bundled_reference):
    rng = random.Random(12)
    codes = sorted(r.iso3 for r in bundled_reference.analyzable())
    wb = write_csv(tmp_path / "wb.csv", ["iso3", "frequency"],
                   [(c, rng.uniform(0, 30)) for c in codes])
    ref = load_country_reference(bundled_country_file(), {"wbglhm": wb})
    events = [ev(rng.choice(codes), rng.randint(0, 9131)) for _ in range(400)]
    devs = yearly_deviation(events, ref, "WBGLHM")
    for year in {d.year for d in devs}:
        rows = [d for d in devs if d.year == year]
        assert abs(sum(d.pct_news for d in rows) - 100) < 0.01
        assert abs(sum(d.delta for d in rows)) < 0.01
    box = deviation_boxplot(devs)
    assert all(b["min"] <= b["q1"] <= b["median"] <= b["q3"] <= b["max"] for b in box)


def test_yearly_deviation_bad_source(toy):
    with pytest.raises(ValueError):
        yearly_deviation([], toy, "GDACS")


def test_figure_series(toy):
    insts = [inst("a", "AAA", 0, "taz"), inst("a", "CCC", 0, "taz"), inst("a", "BBB", 0, "taz"),
             inst("b", "AAA", 2, "Die Welt")]
    period = (D0, D0 + dt.timedelta(days=3))
    assert daily_totals(insts, period) == [(D0 + dt.timedelta(days=k), n)
                                           for k, n in enumerate([1, 0, 1, 0])]
    assert outlet_continent(insts, toy) == [("Die Welt", "Europe", 1), ("taz", "Asia", 1),
                                            ("taz", "Europe", 1)]
    ov = corpus_overview(insts, [ev("AAA")], period)
    assert ov["documents"] == 2 and ov["instances"] == 4 and ov["active_days"] == 2


def test_write_rows_float_repr(tmp_path):
    import numpy as np
    write_rows(tmp_path / "r.csv", ["a", "b"], [("x", np.float64(0.1)), ("y", 3)])
    assert (tmp_path / "r.csv").read_text() == "a,b\nx,0.1\ny,3\n"
