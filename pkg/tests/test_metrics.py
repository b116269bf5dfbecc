import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mixiqa.errors import ConfigError, UndefinedCorrelationError
from mixiqa.metrics import (
    CorrelationResult,
    WeightedReport,
    average_ranks,
    median_over_splits,
    plcc,
    report_as_table,
    report_from_jsonl,
    report_to_jsonl,
    srcc,
    weighted_report,
)


# -- ranks --------------------------------------------------------------------

def test_average_ranks_no_ties():
    assert np.array_equal(average_ranks([30.0, 10.0, 20.0]), [3.0, 1.0, 2.0])


def test_average_ranks_with_ties():
    assert np.array_equal(average_ranks([1.0, 2.0, 2.0, 3.0]), [1.0, 2.5, 2.5, 4.0])
    assert np.array_equal(average_ranks([5.0, 5.0, 5.0]), [2.0, 2.0, 2.0])


def test_average_ranks_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(30):
        x = rng.integers(0, 6, size=12).astype(float)  # plenty of ties
        assert np.array_equal(average_ranks(x), stats.rankdata(x, method="average"))


# -- srcc ---------------------------------------------------------------------

def test_srcc_identity_and_reversal():
    pred = [1.0, 2.0, 3.0, 4.0]
    assert srcc(pred, pred) == 1.0
    assert srcc(pred, pred[::-1]) == -1.0


def test_srcc_hand_computed():
    # sum of squared rank differences = 6, n = 3: 1 - 6*6/(3*8) = -0.5
    assert srcc([1.0, 2.0, 3.0], [3.0, 1.0, 2.0]) == pytest.approx(-0.5, abs=1e-15)


def test_srcc_matches_scipy_with_ties():
    rng = np.random.default_rng(1)
    for _ in range(40):
        pred = rng.integers(0, 8, size=15).astype(float)
        truth = rng.integers(0, 8, size=15).astype(float)
        if np.unique(pred).size < 2 or np.unique(truth).size < 2:
            continue
        expected = stats.spearmanr(pred, truth).statistic
        assert srcc(pred, truth) == pytest.approx(expected, abs=1e-12)


def test_srcc_brute_force_rank_then_pearson():
    pred = np.array([2.0, 2.0, 5.0, 1.0, 5.0])
    truth = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
    rp, rt = average_ranks(pred), average_ranks(truth)
    expected = np.corrcoef(rp, rt)[0, 1]
    assert srcc(pred, truth) == pytest.approx(expected, abs=1e-14)


def test_srcc_errors():
    with pytest.raises(UndefinedCorrelationError):
        srcc([1.0], [1.0])
    with pytest.raises(UndefinedCorrelationError):
        srcc([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        srcc([1.0, 2.0], [1.0, 2.0, 3.0])


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["exp", "cube", "logit", "scale"]))
def test_srcc_invariant_under_strictly_monotone_transforms(seed, kind):
    rng = np.random.default_rng(seed)
    pred = rng.normal(size=20)
    truth = rng.normal(size=20)
    f = {
        "exp": np.exp,
        "cube": lambda v: v**3 + v,
        "logit": lambda v: 1 / (1 + np.exp(-3 * v)),
        "scale": lambda v: 0.1 * v + 7,
    }[kind]
    base = srcc(pred, truth)
    assert abs(srcc(f(pred), truth) - base) <= 1e-12
    assert abs(srcc(pred, f(truth)) - base) <= 1e-12


def test_srcc_symmetric():
    rng = np.random.default_rng(2)
    pred, truth = rng.normal(size=30), rng.normal(size=30)
    assert srcc(pred, truth) == srcc(truth, pred)
    assert plcc(pred, truth) == plcc(truth, pred)


# -- plcc ---------------------------------------------------------------------

def test_plcc_affine_and_reversal():
    pred = np.array([1.0, 2.0, 4.0, 8.0])
    assert plcc(pred, 2.0 * pred + 1.0) == pytest.approx(1.0, abs=1e-15)
    assert plcc(pred, -pred) == pytest.approx(-1.0, abs=1e-15)


def test_plcc_independent_vectors_near_zero():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=10_000), rng.normal(size=10_000)
    assert abs(plcc(a, b)) < 0.05


def test_plcc_affine_invariance():
    rng = np.random.default_rng(4)
    pred, truth = rng.normal(size=25), rng.normal(size=25)
    base = plcc(pred, truth)
    assert plcc(3.0 * pred + 5.0, truth) == pytest.approx(base, abs=1e-12)


def test_plcc_zero_variance_error():
    with pytest.raises(UndefinedCorrelationError):
        plcc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_plcc_matches_scipy():
    rng = np.random.default_rng(5)
    pred, truth = rng.normal(size=50), rng.normal(size=50)
    assert plcc(pred, truth) == pytest.approx(stats.pearsonr(pred, truth).statistic, abs=1e-12)


# -- aggregation --------------------------------------------------------------

def _result(s, p, n):
    return CorrelationResult(srcc=s, plcc=p, n=n)


def test_weighted_single_dataset():
    rep = weighted_report({"a": _result(0.7, 0.8, 50)})
    assert rep.weighted_srcc == 0.7
    assert rep.weighted_plcc == 0.8


def test_weighted_hand_computed():
    rep = weighted_report({"a": _result(1.0, 1.0, 100), "b": _result(0.5, 0.5, 300)})
    assert rep.weighted_srcc == pytest.approx(0.625, abs=1e-15)


def test_weighted_equal_sizes_is_plain_mean():
    rep = weighted_report({"a": _result(0.2, 0.4, 10), "b": _result(0.6, 0.8, 10)})
    assert rep.weighted_srcc == pytest.approx(0.4)
    assert rep.weighted_plcc == pytest.approx(0.6)


def test_weighted_rejects_empty():
    with pytest.raises(ConfigError):
        weighted_report({})


def _report(w, per=None):
    per = per or {"a": _result(w, w, 10)}
    return WeightedReport(per_dataset=per, weighted_srcc=w, weighted_plcc=w)


def test_median_single_report():
    rep = _report(0.5)
    med = median_over_splits([rep])
    assert med.weighted_srcc == 0.5
    assert med.per_dataset["a"].srcc == 0.5


def test_median_conventions():
    med = median_over_splits([_report(0.1), _report(0.2), _report(0.9)])
    assert med.weighted_srcc == pytest.approx(0.2)
    med = median_over_splits([_report(0.1), _report(0.3)])
    assert med.weighted_srcc == pytest.approx(0.2)


# -- serialization --------------------------------------------------------------

def test_report_jsonl_round_trip():
    rep = weighted_report({"a": _result(0.9, 0.85, 100), "b": _result(0.7, 0.75, 40)})
    text = report_to_jsonl(rep)
    lines = text.strip().split("\n")
    assert len(lines) == 3  # two dataset rows + weighted row
    back = report_from_jsonl(text)
    assert back == rep


def test_report_table_renders():
    rep = weighted_report({"a": _result(0.9, 0.85, 100)})
    table = report_as_table(rep, title="t")
    assert "dataset" in table and "weighted" in table
