import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saliency_attacks.metrics import (
    ImperceptibilityReport,
    aggregate,
    l0_fraction,
    l2,
    linf,
    measure,
)


def _pair(seed=0, shape=(16, 16, 3)):
    rng = np.random.default_rng(seed)
    x = rng.random(shape).astype(np.float32)
    return x


def test_l0_counts_locations_not_channels():
    x = np.zeros((10, 10, 3), dtype=np.float32)
    y = x.copy()
    y[0, 0, :] += 0.1  # all channels of one location
    y[3, 4, 1] += 0.1  # one channel of another
    y[7, 2, 0] += 0.1
    assert l0_fraction(x, y) == pytest.approx(3 / 100)


def test_l0_identity_and_full():
    x = _pair()
    assert l0_fraction(x, x) == 0.0
    assert l0_fraction(x, np.clip(x + 0.01, 0, 1)) == 1.0


def test_l2_linf_single_location():
    x = np.full((5, 5, 3), 0.5, dtype=np.float32)
    y = x.copy()
    y[2, 2] += 0.05
    assert l2(x, y) == pytest.approx(0.05 * np.sqrt(3), rel=1e-5)
    assert linf(x, y) == pytest.approx(0.05, rel=1e-5)
    assert l2(x, x) == 0.0 and linf(x, x) == 0.0


def test_l2_uniform_shift():
    x = np.full((4, 6, 3), 0.4, dtype=np.float32)
    y = np.full((4, 6, 3), 0.45, dtype=np.float32)
    assert l2(x, y) == pytest.approx(0.05 * np.sqrt(4 * 6 * 3), rel=1e-5)


def test_geometry_mismatch_rejected():
    with pytest.raises(ValueError):
        l2(np.zeros((2, 2, 1)), np.zeros((2, 3, 1)))
    with pytest.raises(ValueError):
        l0_fraction(np.zeros((2, 2, 1)), np.zeros((2, 2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_l2_matches_brute_resummation(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((6, 6, 3))
    y = rng.random((6, 6, 3))
    brute = np.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(x.ravel(), y.ravel())))
    assert l2(x, y) == pytest.approx(brute, rel=1e-12)


def _rep(mad, l2v=1.0, l0=0.1):
    return ImperceptibilityReport(l0_fraction=l0, l2=l2v, linf=0.05, mad=mad)


def test_aggregate_example():
    batch = [(True, _rep(10.0)), (True, _rep(40.0)), (False, _rep(5.0))]
    stats = aggregate(batch, mad_threshold=30.0)
    assert stats.sr == pytest.approx(2 / 3)
    assert stats.sr_true == pytest.approx(1 / 3)
    assert stats.n == 3


def test_aggregate_threshold_boundary_inclusive():
    batch = [(True, _rep(30.0)), (True, _rep(30.1))]
    stats = aggregate(batch, mad_threshold=30.0)
    assert stats.sr_true == pytest.approx(1 / 2)


def test_aggregate_all_failures():
    stats = aggregate([(False, _rep(5.0)), (False, _rep(1.0))])
    assert stats.sr == 0.0 and stats.sr_true == 0.0
    assert np.isnan(stats.l2_mean)


def test_aggregate_empty_rejected():
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_threshold_monotone():
    rng = np.random.default_rng(3)
    batch = [(bool(rng.integers(0, 2)), _rep(float(rng.uniform(0, 60)))) for _ in range(40)]
    values = [aggregate(batch, mad_threshold=t).sr_true for t in (20.0, 30.0, 40.0)]
    assert values[0] <= values[1] <= values[2]
    assert all(v <= aggregate(batch).sr for v in values)


def test_aggregate_permutation_invariant():
    rng = np.random.default_rng(4)
    batch = [(bool(rng.integers(0, 2)), _rep(float(rng.uniform(0, 50)), l2v=rng.uniform(0, 3))) for _ in range(25)]
    a = aggregate(batch)
    rng.shuffle(batch)
    b = aggregate(batch)
    assert a == b


def test_measure_bundles_all_four():
    x = _pair(7)
    y = np.clip(x + 0.02, 0, 1)
    rep = measure(x, y)
    assert rep.l0_fraction == 1.0
    assert rep.linf == pytest.approx(0.02, abs=1e-6)
    assert rep.l2 > 0 and rep.mad >= 0
