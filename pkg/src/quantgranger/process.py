"""Sequential subgradient processes.

All processes live on the natural grid ``lambda = i/n`` (``i = 0..n``);
they are step functions of ``lambda`` so nothing is lost by not
interpolating.  Row ``i`` of :attr:`ProcessPath.values` holds the process
after the first ``i`` observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionError, WindowError
from .numcore import _check_tau, _validate_design, inv_sqrt


@dataclass(frozen=True)
class ProcessPath:
    """A vector process on the grid ``{0, 1/n, ..., 1}`` at one quantile level.

    Attributes
    ----------
    n : int
        Number of observations (the path has ``n + 1`` rows).
    tau : float
        Quantile level.
    values : ndarray, shape (n + 1, m)
        Row ``i`` is the process at ``lambda = i / n``; row 0 is zero.
    standardizer : ndarray, shape (m, m)
        Matrix applied to every raw increment (identity for the raw score).
    """

    n: int
    tau: float
    values: np.ndarray
    standardizer: np.ndarray

    @property
    def lambdas(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n


@dataclass(frozen=True)
class SubsampleWindow:
    """Fractions ``0 <= a < b <= 1`` delimiting the rows ``floor(a n)+1 .. floor(b n)``."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 <= self.a < self.b <= 1.0):
            raise WindowError(f"need 0 <= a < b <= 1, got ({self.a}, {self.b})")

    def bounds(self, n: int) -> tuple[int, int]:
        """Zero-based slice ``[lo, hi)`` of the rows in the window."""
        lo = int(math.floor(self.a * n + 1e-9))
        hi = int(math.floor(self.b * n + 1e-9))
        if lo >= hi:
            raise WindowError(f"window ({self.a}, {self.b}) holds no rows at n={n}")
        return lo, hi

    def size(self, n: int) -> int:
        lo, hi = self.bounds(n)
        return hi - lo


def _scores(y, X, tau, beta):
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != X.shape[1]:
        raise DimensionError(f"beta has length {beta.shape[0]}, X has {X.shape[1]} columns")
    u = y - X @ beta
    return (u <= 0).astype(float) - tau


def _as_design(y, X):
    y = np.ascontiguousarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
    return y, X


def subgradient_path(y, X, tau: float, beta) -> ProcessPath:
    """Raw score process ``S_n(i/n) = n^{-1/2} sum_{j<=i} x_j psi_tau(y_j - x_j'beta)``."""
    tau = _check_tau(tau)
    y, X = _as_design(y, X)
    n, m = X.shape
    inc = X * _scores(y, X, tau, beta)[:, None] / math.sqrt(n)
    values = np.zeros((n + 1, m))
    np.cumsum(inc, axis=0, out=values[1:])
    return ProcessPath(n, tau, values, np.eye(m))


def standardized_path(y, X, tau: float, beta) -> ProcessPath:
    """``H_n = C S_n`` with ``C`` the upper-triangular inverse square root of ``X'X/n``."""
    y, X = _validate_design(y, X)
    C = inv_sqrt(X.T @ X / X.shape[0])
    S = subgradient_path(y, X, tau, beta)
    return ProcessPath(S.n, S.tau, S.values @ C.T, C)


def bridged_path(H: ProcessPath) -> ProcessPath:
    """``H(lambda) - lambda H(1)``; rows 0 and n are exactly zero."""
    lam = H.lambdas[:, None]
    values = H.values - lam * H.values[-1]
    values[0] = 0.0
    values[-1] = 0.0
    return ProcessPath(H.n, H.tau, values, H.standardizer)


def subsample_path(y, X, tau: float, beta, w: SubsampleWindow) -> ProcessPath:
    """Window process scaled by the inverse window Gram matrix.

    ``values[j]`` is ``(sum_{window} x x')^{-1} sum_{i=lo+1}^{lo+j} x_i psi_i``
    for ``j = 0..n_w``, i.e. the process at ``lambda = (lo + j)/n``.  There
    is no ``n^{-1/2}`` factor.  ``n`` of the returned path is the window size.
    """
    tau = _check_tau(tau)
    y, X = _as_design(y, X)
    n, m = X.shape
    lo, hi = w.bounds(n)
    if hi - lo <= m:
        raise WindowError(f"window ({w.a}, {w.b}) has {hi - lo} rows, need more than {m}")
    Xw, yw = X[lo:hi], y[lo:hi]
    G = Xw.T @ Xw
    Ginv = np.linalg.inv(G)
    inc = Xw * _scores(yw, Xw, tau, beta)[:, None]
    values = np.zeros((hi - lo + 1, m))
    np.cumsum(inc, axis=0, out=values[1:])
    return ProcessPath(hi - lo, tau, values @ Ginv.T, Ginv)


# --------------------------------------------------------------------------
# compiled reductions shared by statistics, bootstrap and null simulation
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _grid_reduce(V1, V2, ind, taus, step, cus_exp, cus_sup):
    """Reduce score processes over a grid of levels.

    For each level ``t`` the score of row ``i`` is ``ind[t, i] - taus[t]``.
    ``V1`` (n, p) weights the bridged cumulative process (LM_1) and ``V2``
    (n, p) weights the endpoint (LM_2); both already carry the standardizer
    restricted to the tested coordinates.  The bridge uses the relative
    position ``i / n``.

    Returns per-level ``max_lambda LM_1`` and ``LM_2``.  When ``cus_exp`` has
    length ``n + 1`` it accumulates ``step * exp(LM_1 / 2)`` per lambda and
    ``cus_sup`` the running maximum over levels of ``LM_1``.
    """
    n, p = V1.shape
    T = taus.shape[0]
    lm1 = np.empty(T)
    lm2 = np.empty(T)
    tot = np.empty(p)
    tot2 = np.empty(p)
    s = np.empty(p)
    col = np.zeros(p)
    col2 = np.zeros(p)
    for i in range(n):
        for j in range(p):
            col[j] += V1[i, j]
            col2[j] += V2[i, j]
    do_cus = cus_exp.shape[0] == n + 1
    for t in range(T):
        tau = taus[t]
        for j in range(p):
            tot[j] = -tau * col[j]
            tot2[j] = -tau * col2[j]
        for i in range(n):
            if ind[t, i]:
                for j in range(p):
                    tot[j] += V1[i, j]
                    tot2[j] += V2[i, j]
        a = 0.0
        for j in range(p):
            a = max(a, abs(tot2[j]))
        lm2[t] = a
        for j in range(p):
            s[j] = 0.0
        best = 0.0
        for i in range(n):
            sc = (1.0 if ind[t, i] else 0.0) - tau
            rel = (i + 1) / n
            v = 0.0
            for j in range(p):
                s[j] += V1[i, j] * sc
                v = max(v, abs(s[j] - rel * tot[j]))
            if i == n - 1:
                v = 0.0
            if v > best:
                best = v
            if do_cus:
                cus_exp[i + 1] += step * math.exp(0.5 * v)
                if v > cus_sup[i + 1]:
                    cus_sup[i + 1] = v
        if do_cus:
            cus_exp[0] += step
        lm1[t] = best
    return lm1, lm2
