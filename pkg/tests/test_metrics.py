import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windrelief.errors import EmptyInput, LengthMismatch
from windrelief.metrics import compute_metrics, error_histogram


def test_identity_all_zero():
    r = compute_metrics([3.0, 4.5, 6.0], [3.0, 4.5, 6.0])
    assert (r.rmse, r.mae, r.mse, r.mape, r.nmse, r.nrmse) == (0, 0, 0, 0, 0, 0)


def test_hand_example():
    r = compute_metrics([2, 4], [1, 2])
    assert r.mae == 1.5
    assert r.rmse == pytest.approx(math.sqrt(2.5), abs=1e-15)
    assert r.rmse == pytest.approx(1.58114, abs=1e-5)
    assert r.mape == 100.0
    assert r.mse == 2.5
    # var([1, 2]) = 0.25, range = 1
    assert r.nmse == pytest.approx(10.0)
    assert r.nrmse == pytest.approx(math.sqrt(2.5))


def test_zero_actual_skipped():
    r = compute_metrics([1.0, 2.0, 3.0], [0.0, 1.0, 2.0])
    assert r.mape_skipped == 1
    assert r.mape == pytest.approx(100 * (1 / 1 + 1 / 2) / 2)


def test_zero_variance_reported_absent():
    r = compute_metrics([1.0, 2.0], [2.0, 2.0])
    assert r.nmse is None and r.nrmse is None
    assert r.rmse == pytest.approx(math.sqrt(0.5))
    assert "variance" in r.to_dict()["nmse_convention"]


def test_errors():
    with pytest.raises(LengthMismatch):
        compute_metrics([1, 2], [1])
    with pytest.raises(EmptyInput):
        compute_metrics([], [])


series = st.lists(st.floats(0.1, 50), min_size=2, max_size=30)


@settings(max_examples=100, deadline=None)
@given(series, st.integers(0, 2**31), st.floats(0.01, 100))
def test_scale_equivariance(actual, seed, c):
    a = np.array(actual)
    p = a + np.random.default_rng(seed).normal(size=len(a))
    r1, r2 = compute_metrics(p, a), compute_metrics(c * p, c * a)
    assert r2.rmse == pytest.approx(c * r1.rmse, rel=1e-9, abs=1e-12)
    assert r2.mae == pytest.approx(c * r1.mae, rel=1e-9, abs=1e-12)
    assert r2.mape == pytest.approx(r1.mape, rel=1e-9, abs=1e-9)
    if r1.nmse is not None and np.var(a) > 1e-6:
        assert r2.nmse == pytest.approx(r1.nmse, rel=1e-7)
        assert r2.nrmse == pytest.approx(r1.nrmse, rel=1e-7)


@settings(max_examples=100, deadline=None)
@given(series, st.integers(0, 2**31), st.floats(-20, 20))
def test_shift_invariance(actual, seed, shift):
    a = np.array(actual)
    p = a + np.random.default_rng(seed).normal(size=len(a))
    r1, r2 = compute_metrics(p, a), compute_metrics(p + shift, a + shift)
    assert r2.rmse == pytest.approx(r1.rmse, rel=1e-9, abs=1e-9)
    assert r2.mae == pytest.approx(r1.mae, rel=1e-9, abs=1e-9)


def test_histogram_degenerate_single_bin():
    h = error_histogram([0.7] * 9)
    assert h.counts == (9,) and h.n_bins == 1
    assert h.edges[0] < h.edges[1]


def test_histogram_uniform_counts():
    h = error_histogram(np.arange(1, 101), n_bins=20)
    assert h.counts == (5,) * 20
    assert h.edges[0] == 1 and h.edges[-1] == 100


@pytest.mark.parametrize("seed", range(10))
def test_histogram_conservation(seed):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=int(rng.integers(1, 500)))
    h = error_histogram(e, n_bins=int(rng.integers(1, 40)))
    assert sum(h.counts) == len(e)
    assert all(b > a for a, b in zip(h.edges, h.edges[1:]))


def test_histogram_max_in_last_bin():
    h = error_histogram([0.0, 1.0, 2.0], n_bins=2)
    assert h.counts == (1, 2)


def test_histogram_render_and_errors():
    text = error_histogram([-1.0, 0.0, 0.0, 2.0], n_bins=3).render(width=10)
    assert len(text.splitlines()) == 3 and "#" in text
    with pytest.raises(EmptyInput):
        error_histogram([])
