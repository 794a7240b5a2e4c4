"""Nuisance objects for designs where the restricted fit is not orthogonal.

``Q(tau) = R' C(tau) Rbar H_alpha(tau)^{-1} J_alpha^{1/2}`` with
``C(tau) = J^{-1/2} H(tau)``.  ``Q = 0`` under homoskedasticity or when the
tested regressors are conditionally mean independent of the controls; then
all limiting nulls are pivotal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import DomainError, SingularityError, UnsupportedRescalingError
from .numcore import _validate_design, cholesky, fit_restricted, inv_sqrt, sqrt_upper


@dataclass(frozen=True)
class NuisanceSet:
    """Estimated ``J``, and per-level ``H``, ``Q``, ``T`` and bandwidths.

    Attributes
    ----------
    taus : ndarray, shape (T,)
    J_hat : ndarray, shape (m, m)
    H_hat, T_hat : ndarray, shape (T, m, m)
    Q_hat : ndarray, shape (T, p, k)
    bandwidth : ndarray, shape (T,)
    """

    taus: np.ndarray
    J_hat: np.ndarray
    H_hat: np.ndarray
    Q_hat: np.ndarray
    T_hat: np.ndarray
    bandwidth: np.ndarray


def estimate_J(X) -> np.ndarray:
    """``X'X / n``; raises on rank deficiency."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    J = X.T @ X / X.shape[0]
    J = 0.5 * (J + J.T)
    cholesky(J)
    return J


def powell_H(y, X, beta_tilde, tau: float, c_n: float) -> np.ndarray:
    """Kernel estimate ``(2 n c_n)^{-1} sum 1{|u_i| <= c_n} x_i x_i'``.

    ``u_i = y_i - x_i' beta_tilde``.
    """
    if not c_n > 0:
        raise DomainError(f"bandwidth must be positive, got {c_n}")
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    u = y - X @ np.asarray(beta_tilde, dtype=float)
    Xs = X[np.abs(u) <= c_n]
    return Xs.T @ Xs / (2.0 * X.shape[0] * c_n)


def hall_sheather(n: int, tau: float) -> float:
    """Hall-Sheather rate on the quantile scale.

    ``n^{-1/3} z_{0.975}^{2/3} (1.5 phi(z_tau)^2 / (2 z_tau^2 + 1))^{1/3}``.
    """
    if n < 2:
        raise DomainError("bandwidth needs n >= 2")
    if not (0.0 < tau < 1.0):
        raise DomainError("tau must lie in (0, 1)")
    z = norm.ppf(tau)
    rate = n ** (-1.0 / 3.0) * norm.ppf(0.975) ** (2.0 / 3.0)
    shape = (1.5 * norm.pdf(z) ** 2 / (2.0 * z * z + 1.0)) ** (1.0 / 3.0)
    return float(rate * shape)


def bandwidth(n: int, tau: float, scale: float = 1.0) -> float:
    """Residual-scale bandwidth ``scale * (Phi^{-1}(tau + h) - Phi^{-1}(tau - h))``.

    ``h`` is :func:`hall_sheather`, shrunk if needed so that ``tau +- h``
    stays inside ``(0, 1)``; use :func:`residual_scale` for ``scale``.
    """
    h = hall_sheather(n, tau)
    h = min(h, 0.999 * tau, 0.999 * (1.0 - tau))
    return float(scale * (norm.ppf(tau + h) - norm.ppf(tau - h)))


def residual_scale(u) -> float:
    """Interquartile range divided by 1.349 (a normal-consistent scale)."""
    q75, q25 = np.percentile(np.asarray(u, dtype=float), [75, 25])
    return float((q75 - q25) / 1.349)


def q_matrix(J_hat, H_hat_tau, p: int) -> np.ndarray:
    """``R' J^{-1/2} H Rbar H_alpha^{-1} J_alpha^{1/2}`` (p x k)."""
    J = np.asarray(J_hat, dtype=float)
    H = np.asarray(H_hat_tau, dtype=float)
    m = J.shape[0]
    if not (1 <= p < m):
        raise DomainError(f"need 1 <= p < m, got p={p}, m={m}")
    H_a = H[p:, p:]
    try:
        cholesky(0.5 * (H_a + H_a.T))
    except SingularityError as exc:
        raise SingularityError(f"H_alpha block is singular: {exc}", pivot=exc.pivot) from None
    C = inv_sqrt(J)
    J_a_half = sqrt_upper(J[p:, p:])
    return (C @ H)[:p, p:] @ np.linalg.solve(H_a, J_a_half)


def t_matrix(Q) -> np.ndarray:
    """``[[I_p, -Q], [0, I_k]]``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p, k = Q.shape
    T = np.eye(p + k)
    T[:p, p:] = -Q
    return T


def projection(Q) -> np.ndarray:
    """Oblique projection ``Rbar Rbar' + [[0, Q], [0, 0]]``; idempotent of rank k."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p, k = Q.shape
    P = np.zeros((p + k, p + k))
    P[p:, p:] = np.eye(k)
    P[:p, p:] = Q
    return P


def rescale_lm2(lm2: float, Q) -> float:
    """``LM_2 / sqrt(1 + Q Q')``; defined for a single tested regressor only."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] != 1:
        raise UnsupportedRescalingError(f"rescaling needs p = 1, got p = {Q.shape[0]}")
    return float(lm2 / math.sqrt(1.0 + float(np.sum(Q * Q))))


def estimate_nuisance(y, X, p: int, taus) -> NuisanceSet:
    """Estimate ``J``, ``H(tau)``, ``Q(tau)``, ``T(tau)`` at each level of ``taus``."""
    y, X = _validate_design(y, X)
    n = X.shape[0]
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    J = estimate_J(X)
    Hs, Qs, Ts, bws = [], [], [], []
    for tau in taus:
        fit = fit_restricted(y, X[:, p:], tau, p=p)
        c_n = bandwidth(n, tau, residual_scale(fit.residuals))
        H = powell_H(y, X, fit.beta, tau, c_n)
        Q = q_matrix(J, H, p)
        Hs.append(H)
        Qs.append(Q)
        Ts.append(t_matrix(Q))
        bws.append(c_n)
    return NuisanceSet(taus, J, np.array(Hs), np.array(Qs), np.array(Ts), np.array(bws))
