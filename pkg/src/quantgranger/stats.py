"""Test statistics: fixed-level LM, sup/exp LM, subsample CUSUM and LM, sup-Wald.

Design matrices are ordered ``X = (z, w)``: the first ``p`` columns are the
tested regressors, the remaining ``k`` columns are controls (including the
intercept).  Every LM-type statistic is evaluated at the restricted fit
``(0_p, alpha(tau))`` obtained from regressing ``y`` on ``w`` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import limitsim
from .errors import DimensionError, DomainError, SingularityError, WindowError
from .grid import QuantileGrid, replication_rng
from .numcore import _check_tau, _validate_design, fit_restricted, inv_sqrt, quantile_path
from .process import SubsampleWindow, _grid_reduce, bridged_path, standardized_path

__all__ = [
    "QuantileGrid", "TestResult", "DriftSpec", "lm1_path", "lm2", "lm_fixed_tau",
    "sup_lm", "exp_lm", "exp_cusum", "exp_lm_sub", "sup_wald", "h",
]

METHODS = {"asy": "asymptotic", "asymptotic": "asymptotic", "adj": "adjusted",
           "adjusted": "adjusted", "boot": "bootstrap", "bootstrap": "bootstrap"}


def _method(name: str) -> str:
    try:
        return METHODS[name]
    except KeyError:
        raise DomainError(f"unknown method {name!r}") from None


@dataclass(frozen=True)
class TestResult:
    """Outcome of one test.

    ``reject`` holds when the statistic exceeds the critical value; this is
    the same decision as ``p_value <= level``.
    ``details`` carries family-specific extras such as the CUSUM argmax or
    the number of failed bootstrap fits.
    """

    __test__ = False

    family: str
    value: float
    critical_value: float
    p_value: float
    level: float
    method: str
    window: SubsampleWindow | None = None
    details: dict = field(default_factory=dict, compare=False)

    @property
    def reject(self) -> bool:
        return self.value > self.critical_value

    def to_dict(self) -> dict:
        out = {
            "family": self.family, "value": self.value, "critical_value": self.critical_value,
            "p_value": self.p_value, "level": self.level, "method": self.method,
            "reject": self.reject,
        }
        if self.window is not None:
            out["window"] = [self.window.a, self.window.b]
        for k, v in self.details.items():
            out[k] = v
        return out


@dataclass(frozen=True)
class DriftSpec:
    """Local-alternative drift: ``Delta(tau)``, ``delta(tau)`` and ``g`` on the lambda grid.

    Only used to generate data; the statistics never see it.
    """

    Delta: Callable[[float], np.ndarray]
    delta: Callable[[float], float]
    g: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.g)):
            raise DomainError("g must be finite on the grid")


def h(tau):
    """``1 / sqrt(tau (1 - tau))``."""
    tau = np.asarray(tau, dtype=float)
    out = 1.0 / np.sqrt(tau * (1.0 - tau))
    return float(out) if out.ndim == 0 else out


def _split(X, p: int):
    if not (1 <= p < X.shape[1]):
        raise DimensionError(f"need 1 <= p < m, got p={p}, m={X.shape[1]}")
    return X[:, :p], X[:, p:]


# --------------------------------------------------------------------------
# weights and per-level reductions
# --------------------------------------------------------------------------


def full_weights(X: np.ndarray, p: int) -> np.ndarray:
    """Rows ``n^{-1/2} R' C x_i`` with ``C = inv_sqrt(X'X/n)``."""
    n = X.shape[0]
    C = inv_sqrt(X.T @ X / n)
    return np.ascontiguousarray(X @ C[:p].T / math.sqrt(n))


def gram_weights(Xw: np.ndarray, p: int) -> np.ndarray:
    """Rows ``R' (sum x x')^{-1} x_i`` for the window scaling."""
    G = Xw.T @ Xw
    inv_sqrt(G / Xw.shape[0])  # rank check with a named pivot
    Ginv = np.linalg.inv(G)
    return np.ascontiguousarray(Xw @ Ginv[:p].T)


@dataclass(frozen=True)
class LevelStats:
    """Per-level pieces: ``lm1[t] = max_lambda LM_1``, ``lm2[t] = LM_2``."""

    taus: np.ndarray
    step: float
    lm1: np.ndarray
    lm2: np.ndarray
    cus_exp: np.ndarray | None = None
    cus_sup: np.ndarray | None = None

    @property
    def total(self) -> np.ndarray:
        return self.lm1 + self.lm2

    def sup(self) -> float:
        return limitsim.combine("supLM", self.lm1, self.lm2, self.step)

    def exp(self) -> float:
        return limitsim.combine("expLM", self.lm1, self.lm2, self.step)


def level_stats(y, X, p: int, grid: QuantileGrid, *, cusum: bool = False,
                validate: bool = True, weights: np.ndarray | None = None) -> LevelStats:
    """Compute ``max_lambda LM_1`` and ``LM_2`` at every grid level in one pass.

    ``weights`` overrides the full-sample standardization (used for windows).
    """
    if validate:
        y, X = _validate_design(y, X)
    _split(X, p)
    taus = grid.points
    path = quantile_path(y, X[:, p:], taus, validate=False)
    V = full_weights(X, p) if weights is None else weights
    n = X.shape[0]
    ce = np.zeros(n + 1) if cusum else np.zeros(0)
    cs = np.zeros(n + 1) if cusum else np.zeros(0)
    lm1, lm2 = _grid_reduce(V, V, path.nonpositive, taus, grid.step, ce, cs)
    return LevelStats(taus, grid.step, lm1, lm2, ce if cusum else None, cs if cusum else None)


# --------------------------------------------------------------------------
# fixed level
# --------------------------------------------------------------------------


def _restricted_H(y, X, tau, p):
    y, X = _validate_design(y, X)
    _, W = _split(X, p)
    fit = fit_restricted(y, W, tau, p=p)
    return standardized_path(y, X, tau, fit.beta)


def lm1_path(y, X, tau: float, p: int) -> np.ndarray:
    """``||R' Delta H_n(i/n, tau, beta_tilde)||_inf`` for ``i = 0..n``."""
    H = _restricted_H(y, X, _check_tau(tau), p)
    B = bridged_path(H)
    return np.max(np.abs(B.values[:, :p]), axis=1)


def lm2(y, X, tau: float, p: int) -> float:
    """``||R' H_n(1, tau, beta_tilde)||_inf``."""
    H = _restricted_H(y, X, _check_tau(tau), p)
    return float(np.max(np.abs(H.values[-1, :p])))


def _table_result(family, value, table, level, method, window=None, **details):
    cv = limitsim.critical_value(table, level)
    pv = limitsim.p_value(table, value)
    return TestResult(family, float(value), cv, pv, level, method, window, dict(details))


def lm_fixed_tau(y, X, tau: float, p: int, *, method: str = "adjusted", level: float = 0.05,
                 reps: int = 9999, seed: int = 0, lambda_steps: int = 1000) -> TestResult:
    """``h(tau) (max_lambda LM_1 + LM_2)`` with a simulated critical value.

    ``method="asymptotic"`` uses the pivotal null (``Q = 0``).  With
    ``method="adjusted"`` and ``p == 1`` the endpoint part is divided by
    ``sqrt(1 + Q Q')``, which makes the pivotal null valid; for ``p > 1`` the
    null is simulated with the estimated ``Q(tau)``.
    """
    from . import nuisance

    method = _method(method)
    if method == "bootstrap":
        raise DomainError("the fixed-level test uses asymptotic or adjusted critical values")
    tau = _check_tau(tau)
    y, X = _validate_design(y, X)
    H = _restricted_H(y, X, tau, p)
    part1 = float(np.max(np.abs(bridged_path(H).values[:, :p])))
    part2 = float(np.max(np.abs(H.values[-1, :p])))
    k = X.shape[1] - p
    Q = None
    details = {}
    if method == "adjusted":
        Q = nuisance.estimate_nuisance(y, X, p, [tau]).Q_hat[0]
        details["Q"] = Q.tolist()
        if p == 1:
            part2 = nuisance.rescale_lm2(part2, Q)
            Q = None
    value = h(tau) * (part1 + part2)
    sampler = limitsim.NullSampler(
        "LM_fixed", p=p, k=k, grid=QuantileGrid.single(tau), lambda_steps=lambda_steps,
        reps=reps, seed=seed, Q_curve=None if Q is None else Q[None],
    )
    table = limitsim.null_table(sampler)
    return _table_result("LM_fixed", value, table, level, method, tau=tau, **details)


# --------------------------------------------------------------------------
# continuum of levels
# --------------------------------------------------------------------------


def _many_tau(family, y, X, grid, p, method, level, B, seed, reps, threads, lambda_steps):
    method = _method(method)
    y, X = _validate_design(y, X)
    st = level_stats(y, X, p, grid, validate=False)
    value = st.sup() if family == "supLM" else st.exp()
    if method == "bootstrap":
        from .bootstrap import BootstrapConfig, bootstrap_distribution

        cfg = BootstrapConfig(B=B, seed=seed, grid=grid, family=family)
        dist = bootstrap_distribution(y, X, p, cfg, threads=threads)
        table = limitsim.CriticalValueTable((family, "bootstrap", B, seed), dist.samples[family])
        return _table_result(family, value, table, level, method, failures=dist.failures)
    Q = None
    if method == "adjusted":
        from . import nuisance

        Q = nuisance.estimate_nuisance(y, X, p, grid.points).Q_hat
    sampler = limitsim.NullSampler(
        family, p=p, k=X.shape[1] - p, grid=grid, lambda_steps=lambda_steps, reps=reps,
        seed=seed, Q_curve=Q,
    )
    return _table_result(family, value, limitsim.null_table(sampler), level, method)


def sup_lm(y, X, grid: QuantileGrid, p: int, *, method: str = "bootstrap", level: float = 0.05,
           B: int = 499, seed: int = 0, reps: int = 9999, threads: int = 1,
           lambda_steps: int = 1000) -> TestResult:
    """``max_tau (max_lambda LM_1 + LM_2)``."""
    return _many_tau("supLM", y, X, grid, p, method, level, B, seed, reps, threads, lambda_steps)


def exp_lm(y, X, grid: QuantileGrid, p: int, *, method: str = "bootstrap", level: float = 0.05,
           B: int = 499, seed: int = 0, reps: int = 9999, threads: int = 1,
           lambda_steps: int = 1000) -> TestResult:
    """``step * sum_tau exp((max_lambda LM_1 + LM_2) / 2)`` (left Riemann sum)."""
    return _many_tau("expLM", y, X, grid, p, method, level, B, seed, reps, threads, lambda_steps)


# --------------------------------------------------------------------------
# subsample statistics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowData:
    """Rows of one window with the weights of its statistics."""

    window: SubsampleWindow
    lo: int
    hi: int
    y: np.ndarray
    X: np.ndarray
    V: np.ndarray

    @property
    def size(self) -> int:
        return self.hi - self.lo


def window_data(y, X, w: SubsampleWindow, p: int) -> WindowData:
    n, m = X.shape
    lo, hi = w.bounds(n)
    if hi - lo < m + 2:
        raise WindowError(f"window ({w.a:.4f}, {w.b:.4f}) has {hi - lo} rows, need at least {m + 2}")
    yw = np.ascontiguousarray(y[lo:hi])
    Xw = np.ascontiguousarray(X[lo:hi])
    return WindowData(w, lo, hi, yw, Xw, gram_weights(Xw, p))


def window_stats(wd: WindowData, p: int, grid: QuantileGrid, cusum: bool = False) -> LevelStats:
    return level_stats(wd.y, wd.X, p, grid, cusum=cusum, validate=False, weights=wd.V)


def cusum_objective(y, X, grid: QuantileGrid, w: SubsampleWindow, p: int, kind: str = "exp"):
    """CUSUM objective per lambda on the window grid.

    Returns ``(lambdas, objective)``; ``objective[j]`` belongs to
    ``lambda = (lo + j) / n``.  ``kind="exp"`` gives
    ``step * sum_tau exp(LM_{a,b,1} / 2)``, ``kind="sup"`` the max over levels.
    """
    y, X = _validate_design(y, X)
    wd = window_data(y, X, w, p)
    st = window_stats(wd, p, grid, cusum=True)
    lam = (wd.lo + np.arange(wd.size + 1)) / X.shape[0]
    return lam, (st.cus_exp if kind == "exp" else st.cus_sup)


def estimate_breakpoint(y, X, grid: QuantileGrid, w: SubsampleWindow, p: int) -> float:
    """Argmax over the window of the exp CUSUM objective (smallest lambda on ties)."""
    lam, obj = cusum_objective(y, X, grid, w, p, "exp")
    return float(lam[int(np.argmax(obj))])


def exp_cusum(y, X, grid: QuantileGrid, w: SubsampleWindow, p: int, *, level: float = 0.05,
              reps: int = 999, seed: int = 0, kind: str = "exp", threads: int = 1) -> TestResult:
    """``sup_lambda int exp(LM_{a,b,1}(lambda, tau) / 2) dtau`` on window ``w``.

    The null is simulated with the window's own weights (see
    :func:`quantgranger.limitsim.simulate_window_null`).  ``details`` holds
    the argmax ``lambda``.
    """
    y, X = _validate_design(y, X)
    wd = window_data(y, X, w, p)
    st = window_stats(wd, p, grid, cusum=True)
    obj = st.cus_exp if kind == "exp" else st.cus_sup
    j = int(np.argmax(obj))
    family = "expCUSUM" if kind == "exp" else "supCUSUM"
    table = limitsim.simulate_window_null(
        [limitsim.WindowWeights(wd.V, wd.V)], grid.points, grid.step, family, reps, seed, threads
    )
    return _table_result(family, float(obj[j]), table, level, "asymptotic", w,
                         argmax=float((wd.lo + j) / X.shape[0]))


def _projected_weights(wd: WindowData, p: int) -> np.ndarray:
    # endpoint weights after removing the control span (restricted-fit effect)
    W = wd.X[:, p:]
    coef, *_ = np.linalg.lstsq(W, wd.V, rcond=None)
    return np.ascontiguousarray(wd.V - W @ coef)


def exp_lm_sub(y, X, grid: QuantileGrid, w: SubsampleWindow, p: int, *, method: str = "bootstrap",
               level: float = 0.05, B: int = 499, seed: int = 0, reps: int = 999,
               threads: int = 1) -> TestResult:
    """exp LM on window ``w`` with the window scaling and the window restricted fit.

    ``method="bootstrap"`` applies the semiparametric bootstrap to the
    window rows.  ``method="asymptotic"`` simulates the null with uniform
    scores whose endpoint weights are projected off the control span,
    which is exact for the restricted fit under homoskedasticity.
    """
    method = _method(method)
    y, X = _validate_design(y, X)
    wd = window_data(y, X, w, p)
    st = window_stats(wd, p, grid)
    value = st.exp()
    if method == "bootstrap":
        from .bootstrap import BootstrapConfig, bootstrap_distribution

        cfg = BootstrapConfig(B=B, seed=seed, grid=grid, family="expLM")
        dist = bootstrap_distribution(wd.y, wd.X, p, cfg, threads=threads, scaling="gram")
        table = limitsim.CriticalValueTable(("expLM_sub", "bootstrap", B, seed), dist.samples["expLM"])
        return _table_result("expLM_sub", value, table, level, method, w, failures=dist.failures)
    if method == "adjusted":
        raise DomainError("subsample exp LM supports asymptotic or bootstrap critical values")
    ww = limitsim.WindowWeights(wd.V, _projected_weights(wd, p))
    table = limitsim.simulate_window_null([ww], grid.points, grid.step, "expLM", reps, seed, threads)
    return _table_result("expLM_sub", value, table, level, method, w)


# --------------------------------------------------------------------------
# sup-Wald
# --------------------------------------------------------------------------


def sup_wald(y, X, grid: QuantileGrid, B: int, p: int, *, level: float = 0.05, seed: int = 0,
             reps: int = 9999, threads: int = 1) -> TestResult:
    """``max_tau n h^2 gamma' Omega^{-1} gamma`` with pairs-bootstrap ``Omega``.

    ``Omega(tau) = n h(tau)^2 Cov_b(gamma_b(tau))`` where ``gamma_b`` are the
    tested coefficients refitted on ``B`` row resamples, so the statistic
    reduces to ``gamma' Cov_b^{-1} gamma``.
    """
    if B < 99:
        raise DomainError("sup-Wald needs B >= 99")
    y, X = _validate_design(y, X)
    _split(X, p)
    n = X.shape[0]
    taus = grid.points
    gam = quantile_path(y, X, taus, validate=False).coef[:, :p]

    def draw(b):
        rng = replication_rng(seed, b)
        idx = rng.integers(0, n, n)
        try:
            return quantile_path(y[idx], X[idx], taus).coef[:, :p]
        except (SingularityError, DimensionError, ArithmeticError):
            return None

    from .grid import map_replications

    draws = [d for d in map_replications(draw, B, threads) if d is not None]
    if len(draws) < 0.99 * B:
        raise SingularityError(f"{B - len(draws)} of {B} pairs-bootstrap fits failed")
    G = np.stack(draws)  # (B, T, p)
    stat = np.empty(len(taus))
    for t in range(len(taus)):
        cov = np.atleast_2d(np.cov(G[:, t, :], rowvar=False))
        omega = n * h(taus[t]) ** 2 * cov
        try:
            L = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError:
            raise SingularityError(f"bootstrap covariance is singular at tau={taus[t]}") from None
        if np.min(np.diag(L)) <= 1e-12 * np.sqrt(np.trace(omega)):
            raise SingularityError(f"bootstrap covariance is near-singular at tau={taus[t]}")
        z = np.linalg.solve(L, gam[t])
        stat[t] = n * h(taus[t]) ** 2 * float(z @ z)
    value = float(np.max(stat))
    sampler = limitsim.NullSampler("supWald", p=p, k=X.shape[1] - p, grid=grid, reps=reps, seed=seed)
    return _table_result("supWald", value, limitsim.null_table(sampler), level, "bootstrap",
                         failures=B - len(draws))
