from __future__ import annotations

import math

import numpy as np
import pytest

from quantgranger.errors import DimensionError, DomainError, WindowError
from quantgranger.grid import QuantileGrid
from quantgranger.limitsim import NullSampler, simulate_fixed_tau_null
from quantgranger.process import SubsampleWindow
from quantgranger.stats import (
    DriftSpec, TestResult, cusum_objective, estimate_breakpoint, exp_cusum, exp_lm, exp_lm_sub, h,
    level_stats, lm_fixed_tau, sup_lm, sup_wald,
)

GRID = QuantileGrid(0.1, 0.9, 0.05)


def data(seed, n=300, gamma=0.0, a=0.0, corr=False):
    rng = np.random.default_rng(seed)
    w = rng.chisquare(3, n)
    eps = rng.standard_normal(n)
    eta = rng.standard_normal(n)
    z = -0.125 * (w - 3) + math.sqrt(1 - 6 * 0.125**2) * eta if corr else eta
    y = w + gamma * z + (1 + a * w) * eps
    return y, np.column_stack([z, np.ones(n), w])


def test_h():
    assert h(0.5) == pytest.approx(2.0)
    np.testing.assert_allclose(h(np.array([0.1, 0.9])), 1 / math.sqrt(0.09))


def test_drift_spec_validation():
    DriftSpec(lambda t: np.zeros(1), lambda t: 0.0, np.linspace(0, 1, 5))
    with pytest.raises(DomainError):
        DriftSpec(lambda t: np.zeros(1), lambda t: 0.0, np.array([0.0, np.inf]))


@pytest.mark.parametrize("c", [0.01, 7.0])
def test_statistics_invariant_to_response_scale(c):
    y, X = data(0)
    a = level_stats(y, X, 1, GRID, cusum=True)
    b = level_stats(c * y, X, 1, GRID, cusum=True)
    np.testing.assert_allclose(a.lm1, b.lm1, atol=1e-8)
    np.testing.assert_allclose(a.lm2, b.lm2, atol=1e-8)
    np.testing.assert_allclose(a.cus_exp, b.cus_exp, atol=1e-8)


def test_statistics_invariant_to_column_rescaling():
    y, X = data(1)
    D = np.array([3.0, 0.2, 40.0])
    a = level_stats(y, X, 1, GRID)
    b = level_stats(y, X * D, 1, GRID)
    np.testing.assert_allclose(a.total, b.total, atol=1e-8)
    assert abs(a.sup() - b.sup()) < 1e-8 and abs(a.exp() - b.exp()) < 1e-8


def test_window_statistics_invariant_to_response_and_control_rescaling():
    # the Gram-inverse window scaling is not invariant to rescaling the tested column
    y, X = data(2)
    w = SubsampleWindow(0.2, 0.7)
    lam1, o1 = cusum_objective(y, X, GRID, w, 1)
    lam2, o2 = cusum_objective(3 * y, X * np.array([1.0, 5.0, 0.5]), GRID, w, 1)
    np.testing.assert_array_equal(lam1, lam2)
    np.testing.assert_allclose(o1, o2, atol=1e-8)


def test_statistics_invariant_to_adding_controls_to_tested_column():
    # the tested coordinate of the triangular standardization is the residual of z on w
    y, X = data(3)
    X2 = X.copy()
    X2[:, 0] = 0.4 * X[:, 0] - 1.5 * X[:, 2] + 2.0
    a = level_stats(y, X, 1, GRID)
    b = level_stats(y, X2, 1, GRID)
    np.testing.assert_allclose(a.total, b.total, atol=1e-8)


def test_sup_dominates_every_level_and_exp_monotone():
    y, X = data(4)
    st = level_stats(y, X, 1, GRID)
    assert np.all(st.sup() >= st.total - 1e-15)
    from quantgranger.limitsim import combine

    assert combine("expLM", st.lm1 + 0.1, st.lm2, st.step) > st.exp()


def test_p_must_leave_controls():
    y, X = data(5)
    with pytest.raises(DimensionError):
        level_stats(y, X, 3, GRID)


@pytest.mark.parametrize("method", ["asy", "adj"])
def test_many_tau_results_are_consistent(method):
    y, X = data(6, gamma=0.0)
    for fn in (sup_lm, exp_lm):
        res = fn(y, X, GRID, 1, method=method, reps=999, seed=1)
        assert isinstance(res, TestResult)
        assert res.reject == (res.p_value <= res.level)
        assert 0 < res.p_value <= 1


def test_bootstrap_exp_lm_detects_strong_causality():
    y, X = data(7, gamma=0.6)
    res = exp_lm(y, X, GRID, 1, method="boot", B=199, seed=2)
    assert res.reject and res.p_value == pytest.approx(1 / 200)


def test_unknown_method():
    y, X = data(8)
    with pytest.raises(DomainError):
        sup_lm(y, X, GRID, 1, method="magic")


def test_fixed_tau_methods():
    y, X = data(9, a=3.0)
    r1 = lm_fixed_tau(y, X, 0.5, 1, method="asy", reps=999)
    r2 = lm_fixed_tau(y, X, 0.5, 1, method="adj", reps=999)
    assert r2.value <= r1.value + 1e-12  # rescaling only shrinks LM2
    assert "Q" in r2.details
    with pytest.raises(DomainError):
        lm_fixed_tau(y, X, 0.5, 1, method="boot")


def test_fixed_tau_p_two_adjusted_uses_q_null():
    rng = np.random.default_rng(10)
    n = 300
    X = np.column_stack([rng.standard_normal((n, 2)), np.ones(n), rng.chisquare(3, n)])
    y = X[:, 3] + rng.standard_normal(n)
    res = lm_fixed_tau(y, X, 0.3, 2, method="adj", reps=999)
    assert np.asarray(res.details["Q"]).shape == (2, 2)


def test_to_dict_round_trip_fields():
    y, X = data(11)
    res = sup_lm(y, X, GRID, 1, method="asy", reps=999)
    d = res.to_dict()
    assert d["value"] == res.value and d["reject"] == res.reject


def test_breakpoint_estimate_single_break():
    n = 1200
    y, X = data(12, n=n)
    g = np.where(np.arange(1, n + 1) > 400, 1.0, 0.0)
    y = y + g * X[:, 0]
    lam = estimate_breakpoint(y, X, GRID, SubsampleWindow(0, 1), 1)
    assert abs(lam - 1 / 3) < 0.05


def test_breakpoint_tie_breaks_to_smallest_lambda():
    y, X = data(13)
    lam, obj = cusum_objective(y, X, GRID, SubsampleWindow(0, 1), 1)
    # the objective at lambda = 0 and lambda = 1 is the flat base value
    assert obj[0] == obj[-1]
    assert estimate_breakpoint(y, X, GRID, SubsampleWindow(0, 1), 1) == lam[int(np.argmax(obj))]


def test_cusum_and_window_tests():
    n = 600
    y, X = data(14, n=n)
    y = y + np.where(np.arange(n) >= 300, 0.8, 0.0) * X[:, 0]
    res = exp_cusum(y, X, GRID, SubsampleWindow(0, 1), 1, reps=199)
    assert res.reject and abs(res.details["argmax"] - 0.5) < 0.08
    left = exp_lm_sub(y, X, GRID, SubsampleWindow(0, 0.5), 1, method="asy", reps=199)
    right = exp_lm_sub(y, X, GRID, SubsampleWindow(0.5, 1), 1, method="asy", reps=199)
    assert right.reject and right.value > left.value


def test_window_too_small():
    y, X = data(15, n=100)
    with pytest.raises(WindowError):
        exp_lm_sub(y, X, GRID, SubsampleWindow(0, 0.04), 1, method="asy", reps=199)


def test_sup_wald_under_null_and_alternative():
    y, X = data(16, n=300)
    r0 = sup_wald(y, X, GRID, 99, 1, reps=999)
    assert r0.reject == (r0.p_value <= 0.05)
    y1, X1 = data(17, n=300, gamma=1.0)
    r1 = sup_wald(y1, X1, GRID, 99, 1, reps=999)
    assert r1.reject
    with pytest.raises(DomainError):
        sup_wald(y, X, GRID, 20, 1)


@pytest.mark.slow
def test_fixed_tau_lm_null_quantile_at_large_n():
    # empirical 95% quantile of the fixed-level statistic against the simulated limit
    n, R, tau = 5000, 1000, 0.5
    vals = []
    for r in range(R):
        y, X = data(1000 + r, n=n)
        vals.append(lm_fixed_tau(y, X, tau, 1, method="asy", reps=999).value)
    s = NullSampler("LM_fixed", grid=QuantileGrid.single(tau), reps=9999, seed=3)
    limit = np.quantile(simulate_fixed_tau_null(s), 0.95)
    assert abs(np.quantile(vals, 0.95) - limit) < 0.08
