from __future__ import annotations

import math
from statistics import NormalDist

import numpy as np
import pytest

from quantgranger.errors import DomainError, SingularityError, UnsupportedRescalingError
from quantgranger.nuisance import (
    bandwidth, estimate_J, hall_sheather as hall_sheather_rate, estimate_nuisance, powell_H, projection, q_matrix, rescale_lm2,
    residual_scale, t_matrix,
)
from quantgranger.numcore import fit_restricted


def location_scale(seed, n, a=0.0):
    rng = np.random.default_rng(seed)
    w = rng.chisquare(3, n)
    z = rng.standard_normal(n)
    y = w + (1 + a * w) * rng.standard_normal(n)
    return y, np.column_stack([z, np.ones(n), w])


def hall_sheather(n, tau):
    N = NormalDist()
    z = N.inv_cdf(tau)
    return n ** (-1 / 3) * N.inv_cdf(0.975) ** (2 / 3) * (1.5 * N.pdf(z) ** 2 / (2 * z * z + 1)) ** (1 / 3)


@pytest.mark.parametrize("n,tau", [(100, 0.5), (1000, 0.1), (2000, 0.9), (5000, 0.25)])
def test_rate_matches_formula(n, tau):
    assert hall_sheather_rate(n, tau) == pytest.approx(hall_sheather(n, tau), rel=1e-12)


@pytest.mark.parametrize("n,tau,scale", [(100, 0.5, 1.0), (1000, 0.1, 2.0), (20000, 0.9, 0.5)])
def test_bandwidth_maps_rate_to_residual_scale(n, tau, scale):
    N = NormalDist()
    h = hall_sheather(n, tau)
    expected = scale * (N.inv_cdf(tau + h) - N.inv_cdf(tau - h))
    assert bandwidth(n, tau, scale) == pytest.approx(expected, rel=1e-10)


def test_bandwidth_frozen_value():
    assert bandwidth(1000, 0.5) == pytest.approx(0.4919846, abs=1e-6)


@pytest.mark.parametrize("tau", [0.05, 0.5, 0.8])
def test_bandwidth_rates(tau):
    assert hall_sheather_rate(4000, tau) / hall_sheather_rate(1000, tau) == pytest.approx(4 ** (-1 / 3), rel=1e-12)
    ns = [100, 1000, 10_000, 100_000]
    c = np.array([bandwidth(n, tau) for n in ns])
    assert np.all(np.diff(c) < 0)
    # sqrt(n) c_n grows
    assert np.all(np.diff(c * np.sqrt(ns)) > 0)


def test_bandwidth_stays_inside_unit_interval():
    assert np.isfinite(bandwidth(20, 0.02))


def test_bandwidth_domain():
    with pytest.raises(DomainError):
        bandwidth(1, 0.5)
    with pytest.raises(DomainError):
        bandwidth(10, 1.0)


def test_residual_scale_normal():
    u = np.random.default_rng(0).standard_normal(200_000)
    assert residual_scale(u) == pytest.approx(1.0, abs=0.01)


def test_q_zero_when_H_proportional_to_J():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((50, 4))
    J = A.T @ A / 50
    np.testing.assert_allclose(q_matrix(J, 0.37 * J, 1), 0.0, atol=1e-12)
    np.testing.assert_allclose(q_matrix(J, 2.0 * J, 2), 0.0, atol=1e-12)


def test_q_singular_block():
    J = np.eye(3)
    H = np.diag([1.0, 0.0, 1.0])
    with pytest.raises(SingularityError):
        q_matrix(J, H, 1)


def test_projection_and_t_matrix_identities():
    rng = np.random.default_rng(2)
    for p, k in [(1, 2), (2, 6), (3, 1)]:
        Q = rng.standard_normal((p, k))
        P = projection(Q)
        T = t_matrix(Q)
        np.testing.assert_allclose(P @ P, P, atol=1e-8)
        assert np.trace(P) == pytest.approx(k, abs=1e-6)
        D = T @ (np.eye(p + k) - P) @ np.linalg.inv(T)
        target = np.zeros((p + k, p + k))
        target[:p, :p] = np.eye(p)
        np.testing.assert_allclose(D, target, atol=1e-8)


def test_estimated_projections_are_idempotent():
    y, X = location_scale(3, 800, a=3.0)
    nu = estimate_nuisance(y, X, 1, [0.2, 0.5, 0.8])
    k = X.shape[1] - 1
    for Q, T in zip(nu.Q_hat, nu.T_hat):
        P = projection(Q)
        np.testing.assert_allclose(P @ P, P, atol=1e-8)
        assert np.trace(P) == pytest.approx(k, abs=1e-6)
        D = T @ (np.eye(k + 1) - P) @ np.linalg.inv(T)
        np.testing.assert_allclose(D, np.diag([1.0] + [0.0] * k), atol=1e-8)


def test_rescale_lm2():
    assert rescale_lm2(2.0, [[0.75]]) == pytest.approx(2.0 / 1.25)
    assert rescale_lm2(1.0, np.zeros((1, 3))) == 1.0
    with pytest.raises(UnsupportedRescalingError):
        rescale_lm2(1.0, np.zeros((2, 3)))


def test_estimate_J_rank():
    with pytest.raises(SingularityError):
        estimate_J(np.ones((10, 2)))


@pytest.mark.parametrize("tau", [0.25, 0.5, 0.75])
def test_powell_consistent_in_homoskedastic_design(tau):
    n = 20_000
    y, X = location_scale(0, n)
    fit = fit_restricted(y, X[:, 1:], tau, p=1)
    c_n = bandwidth(n, tau, residual_scale(fit.residuals))
    H = powell_H(y, X, fit.beta, tau, c_n)
    N = NormalDist()
    target = N.pdf(N.inv_cdf(tau)) * estimate_J(X)
    assert np.linalg.norm(H - target) <= 0.1 * np.linalg.norm(target)


@pytest.mark.parametrize("a", [0.0, 3.0])
def test_q_vanishes_under_mean_independence(a):
    # median over five samples, sampling noise of a single draw is close to 0.1
    norms = []
    for seed in range(5):
        y, X = location_scale(seed, 20_000, a)
        nu = estimate_nuisance(y, X, 1, [0.25, 0.5, 0.75])
        norms.append(np.linalg.norm(nu.Q_hat, axis=(1, 2)))
    assert np.all(np.median(norms, axis=0) < 0.1)


def correlated_design(seed, n, nonlinear):
    from scipy.stats import chi2, norm

    rng = np.random.default_rng(seed)
    w = rng.chisquare(3, n)
    eta = rng.standard_normal(n)
    if nonlinear:
        rho = -0.3285  # Gaussian copula, cov[z, w] close to -3/4
        z = rho * norm.ppf(chi2.cdf(w, 3)) + math.sqrt(1 - rho * rho) * eta
    else:
        c = -0.125 * math.sqrt(6)
        z = c * (w - 3) + math.sqrt(1 - 6 * c * c) * eta
    y = w + (1 + 3 * w) * rng.standard_normal(n)
    return y, np.column_stack([z, np.ones(n), w])


def test_q_nonzero_with_nonlinear_dependence():
    y, X = correlated_design(6, 20_000, nonlinear=True)
    nu = estimate_nuisance(y, X, 1, [0.5])
    assert np.linalg.norm(nu.Q_hat[0]) > 0.2


def test_q_zero_in_population_with_linear_dependence():
    # weighted and unweighted projections of z on (1, w) coincide when E[z|w] is linear
    _, X = correlated_design(7, 400_000, nonlinear=False)
    w = X[:, 2]
    H = (X / (1 + 3 * w)[:, None]).T @ X / X.shape[0]
    np.testing.assert_allclose(q_matrix(estimate_J(X), H, 1), 0.0, atol=0.01)


def test_powell_bandwidth_positive():
    with pytest.raises(DomainError):
        powell_H(np.zeros(3), np.ones((3, 1)), [0.0], 0.5, 0.0)
