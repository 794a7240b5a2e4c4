"""Semiparametric bootstrap that enforces the null of no Granger causality.

One bootstrap sample draws the regressor rows with replacement and sets
``y_b = w_b' alpha_n(U)`` with ``U`` uniform, where ``alpha_n`` is the
restricted (controls-only) quantile fit.  The tested coefficients are
therefore zero in the bootstrap world, and statistics are recomputed from
scratch without centring.

``alpha_n`` is estimated on a fine grid (step 0.005 by default) and
uniform draws are snapped to the nearest grid level, clipped to the grid's
end points.  Quantile crossing is repaired by rearrangement: for every row
the values ``w_i' alpha_n(tau_j)`` are sorted in ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, QuantGrangerError
from .grid import QuantileGrid, map_replications, replication_rng
from .limitsim import CriticalValueTable, combine, critical_value, p_value
from .numcore import _validate_design, quantile_path


@dataclass(frozen=True)
class QuantileFunctionEstimate:
    """Restricted coefficient curves on a fine grid.

    Attributes
    ----------
    fine_grid : QuantileGrid
    alpha_curves : ndarray, shape (T, k)
        ``alpha_n(tau_j)`` per fine level.
    monotonized : bool
        Whether evaluations are rearranged in ``tau``.
    """

    fine_grid: QuantileGrid
    alpha_curves: np.ndarray
    monotonized: bool = True

    def evaluate(self, W) -> np.ndarray:
        """Matrix ``(w_i' alpha_n(tau_j))_{ij}``, rearranged per row when monotonized."""
        vals = np.asarray(W, dtype=float) @ self.alpha_curves.T
        if self.monotonized:
            vals.sort(axis=1)
        return vals

    def snap(self, U) -> np.ndarray:
        """Index of the fine level nearest to each uniform draw (clipped to the grid)."""
        g = self.fine_grid
        j = np.rint((np.asarray(U) - g.lo) / g.step).astype(np.int64)
        return np.clip(j, 0, len(g) - 1)


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings.

    ``B`` defaults to 499.  With ``multinomial=True`` the resample is drawn
    as multinomial counts over the rows, an equivalent formulation.
    """

    B: int = 499
    seed: int = 0
    grid: QuantileGrid = field(default_factory=QuantileGrid)
    family: str = "expLM"
    fine_grid: QuantileGrid = field(default_factory=lambda: QuantileGrid(0.005, 0.995, 0.005))
    multinomial: bool = False

    def __post_init__(self):
        if self.B < 99:
            raise DomainError("bootstrap needs B >= 99")
        if self.family not in ("supLM", "expLM"):
            raise DomainError(f"bootstrap family must be supLM or expLM, got {self.family!r}")


@dataclass(frozen=True)
class BootstrapDistribution:
    """Bootstrap statistics in replication order, for both sup and exp weighting."""

    samples: dict
    failures: int


def estimate_quantile_function(y, W, fine_grid: QuantileGrid | None = None) -> QuantileFunctionEstimate:
    """Fit the restricted regression at every fine-grid level."""
    fine_grid = fine_grid or QuantileGrid(0.005, 0.995, 0.005)
    path = quantile_path(y, W, fine_grid.points)
    return QuantileFunctionEstimate(fine_grid, path.coef, True)


def _draw_indices(n: int, rng, multinomial: bool) -> np.ndarray:
    if multinomial:
        counts = rng.multinomial(n, np.full(n, 1.0 / n))
        return np.repeat(np.arange(n), counts)
    return rng.integers(0, n, n)


def generate_bootstrap_sample(X, qfun: QuantileFunctionEstimate, rng, p: int | None = None,
                              multinomial: bool = False, table: np.ndarray | None = None):
    """One bootstrap sample ``(y_b, X_b)``.

    Parameters
    ----------
    X : ndarray, shape (n, m)
        Realized regressors ``(z, w)``; the controls are the last ``k``
        columns, where ``k`` is the length of the coefficient curves.
    table : ndarray, optional
        Precomputed :meth:`QuantileFunctionEstimate.evaluate` on the
        controls of ``X`` (saves work across replications).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    k = qfun.alpha_curves.shape[1]
    if table is None:
        table = qfun.evaluate(X[:, X.shape[1] - k:])
    idx = _draw_indices(n, rng, multinomial)
    j = qfun.snap(rng.random(n))
    return table[idx, j], X[idx]


def bootstrap_distribution(y, X, p: int, config: BootstrapConfig, *, threads: int = 1,
                           scaling: str = "full") -> BootstrapDistribution:
    """Bootstrap statistics (sup and exp) for ``B`` resamples.

    ``scaling="gram"`` uses the window (inverse Gram) scaling of the
    subsample statistics.  Failed refits are skipped and counted; more than
    1% failures raise.
    """
    from .stats import full_weights, gram_weights, level_stats

    y, X = _validate_design(y, X)
    n, m = X.shape
    qfun = estimate_quantile_function(y, X[:, p:], config.fine_grid)
    table = qfun.evaluate(X[:, p:])
    weights = gram_weights if scaling == "gram" else full_weights

    def one(b):
        rng = replication_rng(config.seed, b)
        yb, Xb = generate_bootstrap_sample(X, qfun, rng, p, config.multinomial, table)
        try:
            st = level_stats(yb, Xb, p, config.grid, validate=False, weights=weights(Xb, p))
        except (QuantGrangerError, ArithmeticError, np.linalg.LinAlgError):
            return None
        return st.sup(), st.exp()

    out = map_replications(one, config.B, threads)
    good = [o for o in out if o is not None]
    failures = config.B - len(good)
    if failures > 0.01 * config.B:
        raise QuantGrangerError(f"{failures} of {config.B} bootstrap fits failed")
    arr = np.array(good)
    return BootstrapDistribution({"supLM": arr[:, 0], "expLM": arr[:, 1]}, failures)


def bootstrap_test(y, X, p: int, config: BootstrapConfig, *, level: float = 0.05, threads: int = 1):
    """Observed sup/exp LM with bootstrap critical value and p-value."""
    from .stats import TestResult, level_stats

    y, X = _validate_design(y, X)
    st = level_stats(y, X, p, config.grid, validate=False)
    value = combine(config.family, st.lm1, st.lm2, config.grid.step)
    dist = bootstrap_distribution(y, X, p, config, threads=threads)
    table = CriticalValueTable((config.family, "bootstrap", config.B, config.seed), dist.samples[config.family])
    return TestResult(config.family, value, critical_value(table, level), p_value(table, value),
                      level, "bootstrap", None, {"failures": dist.failures})
