import random

import pytest

from landslide_news.corpus import GoldRecord
from landslide_news.evaluate import IdMismatch, evaluate, geolocation_accuracy, prf, \
    relevance_metrics
from landslide_news.geolocate import GeoResult, Verdict

REPORTED_P, REPORTED_R, REPORTED_F1 = 0.814, 0.947, 0.875


def reconstruct_counts(n_docs=450, relevant_share=0.586, fp=57):
    """Integer search for (tp, fn) consistent with the reported sample and scores."""
    share = relevant_share * n_docs
    hits = []
    for relevant in {int(share), -int(-share // 1)}:  # floor and ceil of the reported share
        for tp in range(relevant + 1):
            p, r, _ = prf(tp, fp, relevant - tp)
            if round(p, 3) == REPORTED_P and round(r, 3) == REPORTED_R:
                hits.append((tp, relevant - tp))
    return hits


def pred(doc_id, *countries):
    return GeoResult(doc_id, tuple(countries),
                     Verdict.RELEVANT if countries else Verdict.UNRELATED)


def gold(doc_id, *countries, relevant=None):
    rel = bool(countries) if relevant is None else relevant
    return GoldRecord(doc_id, rel, frozenset(countries))


def test_reconstructed_counts():
    # 263.7 relevant docs: both neighbours survive the precision/recall filter
    assert sorted(reconstruct_counts()) == [(249, 14), (250, 14)]
    for tp, fn in reconstruct_counts():
        assert abs(prf(tp, 57, fn)[2] - REPORTED_F1) <= 0.0015


def test_reported_scores_from_counts():
    p, r, f1 = prf(250, 57, 14)
    assert abs(p - REPORTED_P) <= 0.0015
    assert abs(r - REPORTED_R) <= 0.0015
    assert abs(f1 - REPORTED_F1) <= 0.0015


def test_textbook_confusion():
    preds = ([pred(f"tp{i}", "ITA") for i in range(3)] + [pred("fp", "ITA")]
             + [pred("fn")] + [pred(f"tn{i}") for i in range(5)])
    golds = ([gold(f"tp{i}", "ITA") for i in range(3)] + [gold("fp")]
             + [gold("fn", "PER")] + [gold(f"tn{i}") for i in range(5)])
    p, r, f1, c = relevance_metrics(preds, golds)
    assert (c.tp, c.fp, c.fn, c.tn) == (3, 1, 1, 5)
    assert (p, r, f1) == (0.75, 0.75, 0.75)


def test_all_correct():
    preds = [pred("a", "ITA"), pred("b")]
    rep = evaluate(preds, [gold("a", "ITA"), gold("b")])
    assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)
    assert rep.exact_accuracy == rep.overlap_accuracy == 1.0


def test_geolocation_examples():
    preds = [pred("a", "ITA"), pred("b", "ITA", "CHE"), pred("c", "FRA")]
    golds = [gold("a", "ITA"), gold("b", "ITA"), gold("c", "ITA")]
    exact, overlap, hists = geolocation_accuracy(preds, golds)
    assert exact == pytest.approx(1 / 3) and overlap == pytest.approx(2 / 3)
    assert hists == {"predicted": {1: 2, 2: 1}, "gold": {1: 3}}


def test_id_mismatch():
    with pytest.raises(IdMismatch) as exc:
        evaluate([pred("a", "ITA"), pred("x")], [gold("a", "ITA"), gold("y")])
    assert exc.value.only_pred == ["x"] and exc.value.only_gold == ["y"]


def _random_sets(rng, n):
    pool = ["ITA", "CHE", "PER", "NPL", "BRA", "CHN"]
    preds, golds = [], []
    for i in range(n):
        g = rng.sample(pool, rng.randint(0, 3))
        p = rng.sample(pool, rng.randint(0, 3))
        preds.append(pred(str(i), *p))
        golds.append(gold(str(i), *g))
    return preds, golds


def test_exact_le_overlap_and_permutation():
    rng = random.Random(9)
    for _ in range(300):
        preds, golds = _random_sets(rng, rng.randint(1, 30))
        rep = evaluate(preds, golds)
        assert rep.exact_accuracy <= rep.overlap_accuracy
        rng.shuffle(preds)
        assert evaluate(preds, golds) == rep


def test_swap_symmetry_of_f1():
    rng = random.Random(10)
    for _ in range(100):
        preds, golds = _random_sets(rng, 20)
        p, r, f1, _ = relevance_metrics(preds, golds)
        swapped_preds = [pred(g.doc_id, *sorted(g.countries)) for g in golds]
        swapped_gold = [gold(p_.doc_id, *p_.countries) for p_ in preds]
        p2, r2, f12, _ = relevance_metrics(swapped_preds, swapped_gold)
        assert (p2, r2) == (r, p) and f12 == pytest.approx(f1)


def test_report_serialisation():
    rep = evaluate([pred("a", "ITA")], [gold("a", "ITA")])
    assert '"precision": 1.0' in rep.to_json()
    assert "exact      1.000" in rep.table()
