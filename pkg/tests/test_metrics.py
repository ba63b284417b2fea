import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import entropy, per_sample_ece
from vsmooth.core import softmax
from vsmooth.errors import EmptyEvaluationSet, InvalidLabel, LengthMismatch
from vsmooth.metrics import (
    brier,
    cross_entropy,
    ece,
    evaluate,
    kl_to_uniform,
    predictive_entropy,
    reliability_bins,
)

distributions = st.integers(2, 40).flatmap(
    lambda K: arrays(np.float64, K, elements=st.floats(0, 1))
).filter(lambda w: w.sum() > 1e-6).map(lambda w: w / w.sum())


def test_entropy_examples():
    assert predictive_entropy([0.0, 1.0, 0.0]) == 0.0
    assert predictive_entropy(np.full(10, 0.1)) == pytest.approx(math.log(10), abs=1e-12)
    p = [0.731059, 0.268941]
    assert predictive_entropy(p) == pytest.approx(entropy(p), abs=1e-15)
    assert predictive_entropy(p) == pytest.approx(0.5822026875177713, abs=1e-12)


def test_kl_examples():
    assert kl_to_uniform(np.full(7, 1 / 7)) == pytest.approx(0.0, abs=1e-12)
    assert kl_to_uniform([1.0, 0.0]) == pytest.approx(0.6931471805599453, abs=1e-15)


@given(distributions)
def test_kl_direct_formula(p):
    K = p.size
    direct = sum(x * math.log(K * x) for x in p if x > 0)
    assert kl_to_uniform(p) == pytest.approx(direct, abs=1e-12)
    assert predictive_entropy(p) + kl_to_uniform(p) == pytest.approx(math.log(K), abs=1e-12)


def test_brier_examples():
    assert brier([1.0, 0.0, 0.0], 0) == 0.0
    assert brier([1.0, 0.0, 0.0], 1) == 2.0
    assert brier([0.5, 0.5], 0) == 0.5
    with pytest.raises(InvalidLabel):
        brier([0.5, 0.5], 2)


def test_brier_constant_predictor_decomposition(rng):
    p = softmax(rng.normal(size=4))
    y = rng.integers(0, 4, size=200)
    freq = np.bincount(y, minlength=4) / len(y)
    direct = np.mean([brier(p, int(t)) for t in y])
    # sum_k p_k^2 - 2 sum_k p_k f_k + 1
    assert direct == pytest.approx(np.sum(p ** 2) - 2 * np.sum(p * freq) + 1.0, abs=1e-12)


def test_cross_entropy_examples():
    a = cross_entropy([17, 0.05, 0.01, -0.05], 0)
    b = cross_entropy([17, -20, -20, -20], 0)
    assert a < 1e-6 and b < 1e-6 and abs(a - b) < 1e-6
    assert a == pytest.approx(1.2471771437247087e-07, rel=1e-6)
    assert cross_entropy([0.0, 0.0], 0) == pytest.approx(math.log(2), abs=1e-15)
    big = cross_entropy([1000.0, 0.0], 1)
    assert math.isfinite(big) and big == pytest.approx(1000.0, rel=1e-12)
    with pytest.raises(InvalidLabel):
        cross_entropy([0.0, 0.0], -1)


@given(arrays(np.float64, st.integers(2, 20), elements=st.floats(-1e300, 1e300)), st.data())
def test_cross_entropy_finite(z, data):
    label = data.draw(st.integers(0, z.size - 1))
    assert math.isfinite(cross_entropy(z, label))


def test_reliability_bins_examples():
    preds = [[0.95, 0.05]] * 4
    bins = reliability_bins(preds, [0] * 4, 10)
    full = [b for b in bins if b.count]
    assert len(full) == 1
    assert (full[0].lo, full[0].hi, full[0].empirical_accuracy) == (0.9, 1.0, 1.0)
    assert [b.lo for b in bins] == pytest.approx([i / 10 for i in range(10)])
    top = reliability_bins([[1.0, 0.0]], [0], 10)
    assert top[-1].count == 1
    assert math.isnan(bins[0].empirical_accuracy)
    with pytest.raises(LengthMismatch):
        reliability_bins(preds, [0, 0], 10)


def test_ece_examples():
    assert ece([[1.0, 0.0]] * 5, [0] * 5) == 0.0
    preds = [[0.9, 0.1]] * 10
    assert ece(preds, [0] * 5 + [1] * 5) == pytest.approx(0.4, abs=1e-12)


def test_ece_matches_per_sample_oracle(rng):
    for _ in range(25):
        K = int(rng.integers(2, 12))
        n = int(rng.integers(1, 300))
        P = softmax(rng.normal(size=(n, K)) * rng.uniform(0.1, 6))
        y = rng.integers(0, K, size=n)
        nb = int(rng.integers(2, 20))
        assert ece(P, y, nb) == pytest.approx(per_sample_ece(P.tolist(), y.tolist(), nb), abs=1e-12)


def test_evaluate_single_perfect_sample():
    rep = evaluate([[0.0, 1.0, 0.0]], [1], 10)
    assert (rep.ece, rep.brier, rep.accuracy, rep.mean_entropy, rep.n) == (0.0, 0.0, 1.0, 0.0, 1)


def test_evaluate_partition_and_duplication(rng):
    P = softmax(rng.normal(size=(200, 5)) * 2)
    y = rng.integers(0, 5, size=200)
    rep = evaluate(P, y, 10)
    assert sum(b.count for b in rep.bins) == rep.n == 200
    assert 0 <= rep.ece <= 1 and 0 <= rep.brier <= 2 and 0 <= rep.accuracy <= 1
    dup = evaluate(np.concatenate([P, P]), np.concatenate([y, y]), 10)
    assert dup.ece == pytest.approx(rep.ece, abs=1e-12)
    assert dup.brier == pytest.approx(rep.brier, abs=1e-12)
    assert dup.accuracy == rep.accuracy


def test_evaluate_is_order_independent(rng):
    P = softmax(rng.normal(size=(500, 6)) * 3)
    y = rng.integers(0, 6, size=500)
    perm = rng.permutation(500)
    a, b = evaluate(P, y), evaluate(P[perm], y[perm])
    assert a.ece == b.ece and a.brier == b.brier and a.mean_entropy == b.mean_entropy


def test_evaluate_empty():
    with pytest.raises(EmptyEvaluationSet):
        evaluate(np.zeros((0, 3)), [], 10)


def test_report_dict_marks_empty_bins():
    d = evaluate([[0.95, 0.05]], [0], 10).to_dict()
    assert d["bins"][0]["empirical_accuracy"] is None
    assert d["log_base"] == "e"
