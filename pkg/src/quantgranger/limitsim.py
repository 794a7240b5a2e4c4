"""Simulated limiting null distributions and empirical critical values.

Every family is simulated replication by replication from its own random
stream (see :func:`~quantgranger.grid.replication_rng`), so a sampler with
a fixed seed always yields bit-identical samples, whatever the number of
worker threads.

Brownian objects in ``lambda`` use ``lambda_steps`` grid points.  The
Brownian sheet in ``(lambda, tau)`` is built from uniform draws,
``S_j(lambda, tau) = N^{-1/2} sum_{i <= lambda N} (1{U_ij <= tau} - tau)``,
which has the exact target covariance on the grid.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numba import njit

from . import __version__
from .errors import DatasetError, DomainError
from .grid import QuantileGrid, map_replications, replication_rng
from .process import _grid_reduce

FAMILIES = ("LM_fixed", "supLM", "expLM", "supWald", "expCUSUM", "supCUSUM")


@dataclass(frozen=True, eq=False)
class NullSampler:
    """Configuration of one null simulation.

    Attributes
    ----------
    family : str
        One of ``LM_fixed, supLM, expLM, supWald, expCUSUM, supCUSUM``.
    p, k : int
        Number of tested and control coordinates.
    grid : QuantileGrid
        Levels; for ``LM_fixed`` only ``grid.lo`` is used.
    lambda_steps : int
        Discretization of ``lambda``.
    reps : int
        Number of draws.
    seed : int
        Base seed.
    Q_curve : ndarray, shape (T, p, k), optional
        Nuisance matrices for adjusted nulls (one per grid level).
    copies : int
        Number of independent draws whose maximum is returned (2 gives the
        maximum of two pillows).
    bridge_correction : bool
        For ``LM_fixed``, add the exact Brownian-bridge excursion between
        grid points, so the supremum is that of the continuous process.
    """

    family: str
    p: int = 1
    k: int = 1
    grid: QuantileGrid = field(default_factory=QuantileGrid)
    lambda_steps: int = 1000
    reps: int = 9999
    seed: int = 0
    Q_curve: np.ndarray | None = None
    copies: int = 1
    bridge_correction: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}")
        if self.reps < 500:
            raise DomainError("reps must be at least 500")
        if self.lambda_steps < 200:
            raise DomainError("lambda_steps must be at least 200")
        if self.p < 1 or self.k < 0:
            raise DomainError("need p >= 1 and k >= 0")
        if self.Q_curve is not None:
            Q = np.asarray(self.Q_curve, dtype=float)
            T = 1 if self.family == "LM_fixed" else len(self.grid)
            if Q.shape != (T, self.p, self.k):
                raise DomainError(f"Q_curve must have shape {(T, self.p, self.k)}, got {Q.shape}")
            object.__setattr__(self, "Q_curve", Q)

    def q_digest(self) -> str:
        if self.Q_curve is None:
            return "none"
        return hashlib.sha256(np.ascontiguousarray(self.Q_curve).tobytes()).hexdigest()[:16]

    def key(self) -> tuple:
        g = self.grid
        return (
            self.family, self.p, self.k, g.lo, g.hi, g.step, self.lambda_steps,
            self.reps, self.seed, self.q_digest(), self.copies, self.bridge_correction,
        )

    def __eq__(self, other):
        return isinstance(other, NullSampler) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


_KEY_FIELDS = (
    "family", "p", "k", "lo", "hi", "step", "lambda_steps", "reps", "seed",
    "q_digest", "copies", "bridge_correction",
)


@dataclass(frozen=True)
class CriticalValueTable:
    """Sorted empirical null sample together with the key that produced it."""

    key: tuple
    samples: np.ndarray
    created_with: str = ""

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float))
        if s.size == 0:
            raise DomainError("empty null sample")
        object.__setattr__(self, "samples", s)

    def save(self, path) -> None:
        """Write the header line with the key, then one sample per line."""
        if len(self.key) != len(_KEY_FIELDS):
            raise DomainError("only simulated null tables with a full key can be saved")
        head = " ".join(f"{k}={v}" for k, v in zip(_KEY_FIELDS, self.key))
        with open(path, "w") as fh:
            fh.write(f"# quantgranger-cv {head} created_with={self.created_with}\n")
            for v in self.samples:
                fh.write(repr(float(v)) + "\n")

    @classmethod
    def load(cls, path) -> "CriticalValueTable":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# quantgranger-cv"):
            raise DatasetError(f"{path}: not a critical-value file")
        fields = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
        conv = (str, int, int, float, float, float, int, int, int, str, int, lambda s: s == "True")
        key = tuple(c(fields[name]) for c, name in zip(conv, _KEY_FIELDS))
        samples = np.array([float(v) for v in lines[1:] if v.strip()])
        return cls(key, samples, fields.get("created_with", ""))


def critical_value(table: CriticalValueTable, alpha: float) -> float:
    """Order statistic ``s_(R - K)`` with ``K = floor(alpha (R + 1)) - 1``.

    Rejecting when the statistic strictly exceeds this value is the same
    decision as ``p_value <= alpha``.  With ``K < 0`` (too few draws for
    the level) the critical value is infinite.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    s = table.samples
    K = int(math.floor(alpha * (s.size + 1) + 1e-9)) - 1
    if K < 0:
        return math.inf
    return float(s[s.size - K - 1])


def p_value(table: CriticalValueTable, observed: float) -> float:
    """``(1 + #{samples >= observed}) / (R + 1)``."""
    s = table.samples
    count = s.size - np.searchsorted(s, observed, side="left")
    return float((1 + count) / (s.size + 1))


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _sheet_reduce(U, p, taus, step, Q, use_q, cus_exp, cus_sup):
    """Per-level ``sup_lambda ||SS_p||`` and endpoint norm for one uniform sheet.

    ``U`` has shape (N, p) or (N, p + k) when ``use_q``; the endpoint is then
    ``S_p(1, tau) - Q[t] S_k(1, tau)``.
    """
    N, mm = U.shape
    T = taus.shape[0]
    k = mm - p
    sc = 1.0 / math.sqrt(N)
    lm1 = np.empty(T)
    lm2 = np.empty(T)
    tot = np.empty(mm)
    s = np.empty(p)
    do_cus = cus_exp.shape[0] == N + 1
    for t in range(T):
        tau = taus[t]
        for j in range(mm):
            c = 0
            for i in range(N):
                if U[i, j] <= tau:
                    c += 1
            tot[j] = (c - N * tau) * sc
        a = 0.0
        for j in range(p):
            v = tot[j]
            if use_q:
                for l in range(k):
                    v -= Q[t, j, l] * tot[p + l]
            a = max(a, abs(v))
        lm2[t] = a
        for j in range(p):
            s[j] = 0.0
        best = 0.0
        for i in range(N):
            rel = (i + 1) / N
            v = 0.0
            for j in range(p):
                s[j] += ((1.0 if U[i, j] <= tau else 0.0) - tau) * sc
                v = max(v, abs(s[j] - rel * tot[j]))
            if i == N - 1:
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


def _bridge_sup(path: np.ndarray, dt: float, rng) -> float:
    """Sup-norm of a bridge given on a grid, refined by exact excursions.

    Between neighbouring grid values ``a`` and ``b`` the maximum of a
    Brownian bridge with variance ``dt`` is
    ``(a + b + sqrt((b - a)^2 - 2 dt log V)) / 2`` with ``V`` uniform.
    """
    a, b = path[:-1], path[1:]
    v1 = rng.random(a.shape)
    v2 = rng.random(a.shape)
    d2 = (b - a) ** 2
    hi = 0.5 * (a + b + np.sqrt(d2 - 2.0 * dt * np.log(v1)))
    lo = 0.5 * (a + b - np.sqrt(d2 - 2.0 * dt * np.log(v2)))
    return float(max(hi.max(), -lo.min()))


# --------------------------------------------------------------------------
# simulations
# --------------------------------------------------------------------------


def _bridge_draw(N: int, p: int, rng, correction: bool) -> float:
    B = np.vstack([np.zeros((1, p)), np.cumsum(rng.standard_normal((N, p)) / math.sqrt(N), axis=0)])
    BB = B - (np.arange(N + 1)[:, None] / N) * B[-1]
    if correction:
        return max(_bridge_sup(BB[:, j], 1.0 / N, rng) for j in range(p))
    return float(np.max(np.abs(BB)))


def _fixed_tau_draw(s: NullSampler, rng) -> float:
    N, p, k = s.lambda_steps, s.p, s.k
    m = p + k if s.Q_curve is not None else p
    inc = rng.standard_normal((N, m)) / math.sqrt(N)
    B = np.vstack([np.zeros((1, m)), np.cumsum(inc, axis=0)])
    lam = np.arange(N + 1)[:, None] / N
    BB = B[:, :p] - lam * B[-1, :p]
    if s.bridge_correction:
        sup_bb = max(_bridge_sup(BB[:, j], 1.0 / N, rng) for j in range(p))
    else:
        sup_bb = float(np.max(np.abs(BB)))
    end = B[-1, :p].copy()
    if s.Q_curve is not None:
        end -= s.Q_curve[0] @ B[-1, p:]
    return sup_bb + float(np.max(np.abs(end)))


def simulate_bridge_sup(p: int = 1, lambda_steps: int = 1000, reps: int = 9999, seed: int = 0,
                        bridge_correction: bool = True, threads: int = 1) -> np.ndarray:
    """Draws of ``sup_lambda ||BB_p(lambda)||_inf`` (unsorted, replication order)."""
    vals = map_replications(
        lambda r: _bridge_draw(lambda_steps, p, replication_rng(seed, r), bridge_correction), reps, threads
    )
    return np.array(vals)


def sample_sheet(points, lambda_steps: int = 1000, reps: int = 9999, seed: int = 0) -> np.ndarray:
    """Values of the uniform-score sheet at ``points`` = [(lambda, tau), ...].

    ``S(lambda, tau) = N^{-1/2} sum_{i <= lambda N} (1{U_i <= tau} - tau)``
    has covariance ``min(l1, l2) (min(t1, t2) - t1 t2)``.  Returns an array
    of shape (reps, len(points)).
    """
    pts = np.asarray(points, dtype=float)
    idx = np.floor(pts[:, 0] * lambda_steps + 1e-9).astype(np.int64)
    taus = pts[:, 1]
    out = np.empty((reps, len(pts)))
    for r in range(reps):
        U = replication_rng(seed, r).random(lambda_steps)
        ind = (U[:, None] <= taus[None, :]) - taus[None, :]
        cs = np.vstack([np.zeros((1, len(pts))), np.cumsum(ind, axis=0)])
        out[r] = cs[idx, np.arange(len(pts))] / math.sqrt(lambda_steps)
    return out


def _sheet_draw(s: NullSampler, rng, cusum: bool):
    taus = s.grid.points
    use_q = s.Q_curve is not None and not cusum
    m = s.p + s.k if use_q else s.p
    U = rng.random((s.lambda_steps, m))
    Q = s.Q_curve if use_q else np.zeros((1, 1, 1))
    if cusum:
        ce = np.zeros(s.lambda_steps + 1)
        cs = np.zeros(s.lambda_steps + 1)
    else:
        ce = cs = np.zeros(0)
    lm1, lm2 = _sheet_reduce(U, s.p, taus, s.grid.step, Q, use_q, ce, cs)
    return lm1, lm2, ce, cs


def _draw(s: NullSampler, rep: int) -> float:
    rng = replication_rng(s.seed, rep)
    out = -np.inf
    for _ in range(s.copies):
        if s.family == "LM_fixed":
            v = _fixed_tau_draw(s, rng)
        elif s.family == "supWald":
            v = _sup_wald_draw(s, rng)
        elif s.family in ("supLM", "expLM"):
            lm1, lm2, _, _ = _sheet_draw(s, rng, cusum=False)
            v = combine(s.family, lm1, lm2, s.grid.step)
        else:
            _, _, ce, cs = _sheet_draw(s, rng, cusum=True)
            v = float(ce.max()) if s.family == "expCUSUM" else float(cs.max())
        out = max(out, v)
    return out


def _sup_wald_draw(s: NullSampler, rng) -> float:
    # Brownian bridge in tau, exact on the grid
    taus = s.grid.points
    t = np.concatenate([[0.0], taus, [1.0]])
    inc = rng.standard_normal((t.size - 1, s.p)) * np.sqrt(np.diff(t))[:, None]
    B = np.cumsum(inc, axis=0)
    BB = B[:-1] - taus[:, None] * B[-1]
    h2 = 1.0 / (taus * (1.0 - taus))
    return float(np.max(h2 * np.sum(BB**2, axis=1)))


def combine(family: str, lm1: np.ndarray, lm2: np.ndarray, step: float) -> float:
    """Apply the sup or exp weighting to per-level ``max_lambda LM_1 + LM_2``."""
    s = np.asarray(lm1) + np.asarray(lm2)
    if family.startswith("sup"):
        return float(np.max(s))
    return float(step * np.sum(np.exp(0.5 * s)))


def simulate(sampler: NullSampler, threads: int = 1) -> CriticalValueTable:
    """Draw ``sampler.reps`` values from the null of ``sampler.family``."""
    vals = map_replications(lambda r: _draw(sampler, r), sampler.reps, threads)
    return CriticalValueTable(sampler.key(), np.array(vals), f"{__version__}+seed{sampler.seed}")


def simulate_fixed_tau_null(sampler: NullSampler, threads: int = 1) -> np.ndarray:
    """``sup ||BB_p|| + ||B_p(1) - Q B_k(1)||`` draws (unsorted, replication order)."""
    if sampler.family != "LM_fixed":
        raise DomainError("fixed-tau null needs family LM_fixed")
    return np.array(map_replications(lambda r: _draw(sampler, r), sampler.reps, threads))


def simulate_many_tau_null(sampler: NullSampler, threads: int = 1) -> np.ndarray:
    """sup/exp weighted pinned-sheet draws (unsorted, replication order)."""
    if sampler.family not in ("supLM", "expLM"):
        raise DomainError("many-tau null needs family supLM or expLM")
    return np.array(map_replications(lambda r: _draw(sampler, r), sampler.reps, threads))


def simulate_cusum_null(sampler: NullSampler, threads: int = 1) -> np.ndarray:
    """``sup_lambda`` of the exp/sup weighted pillow norm."""
    if sampler.family not in ("expCUSUM", "supCUSUM"):
        raise DomainError("CUSUM null needs family expCUSUM or supCUSUM")
    return np.array(map_replications(lambda r: _draw(sampler, r), sampler.reps, threads))


def simulate_max_two_pillows(sampler: NullSampler, threads: int = 1) -> np.ndarray:
    """Maximum of two independent CUSUM null draws."""
    from dataclasses import replace

    return simulate_cusum_null(replace(sampler, copies=2), threads)


@lru_cache(maxsize=64)
def _cached(sampler: NullSampler) -> CriticalValueTable:
    return simulate(sampler)


def null_table(sampler: NullSampler, cache_dir=None) -> CriticalValueTable:
    """Simulated table, memoized in memory and optionally on disk.

    A file is reused only when its header key equals the sampler key.
    """
    if cache_dir is not None:
        path = Path(cache_dir) / f"cv_{hashlib.sha256(repr(sampler.key()).encode()).hexdigest()[:20]}.txt"
        if path.exists():
            table = CriticalValueTable.load(path)
            if table.key == sampler.key():
                return table
        table = _cached(sampler)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.save(path)
        return table
    return _cached(sampler)


# --------------------------------------------------------------------------
# design-weighted nulls for the subsample statistics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowWeights:
    """Weights of one subsample statistic: ``V1`` for the bridged part, ``V2`` for the endpoint."""

    V1: np.ndarray
    V2: np.ndarray


def simulate_window_null(windows, taus, step, family, reps=999, seed=0, threads=1) -> CriticalValueTable:
    """Null of a subsample statistic computed under its own scaling.

    The score ``psi_i`` of each row is replaced by ``1{U_i <= tau} - tau``
    with ``U_i`` uniform, and the same weights, bridge and weighting as
    the observed statistic are applied.  With several windows the draws
    are independent and the maximum is returned.

    Parameters
    ----------
    windows : list of WindowWeights
    family : {"expCUSUM", "supCUSUM", "expLM", "supLM"}
    """
    taus = np.ascontiguousarray(taus, dtype=float)

    def one(r):
        rng = replication_rng(seed, r)
        best = -np.inf
        for w in windows:
            n = w.V1.shape[0]
            U = rng.random(n)
            ind = U[None, :] <= taus[:, None]
            if family in ("expCUSUM", "supCUSUM"):
                ce = np.zeros(n + 1)
                cs = np.zeros(n + 1)
                _grid_reduce(w.V1, w.V2, ind, taus, step, ce, cs)
                v = float(ce.max()) if family == "expCUSUM" else float(cs.max())
            else:
                lm1, lm2 = _grid_reduce(w.V1, w.V2, ind, taus, step, np.zeros(0), np.zeros(0))
                v = combine(family, lm1, lm2, step)
            best = max(best, v)
        return best

    vals = map_replications(one, reps, threads)
    rows = sum(w.V1.shape[0] for w in windows)
    key = (family, windows[0].V1.shape[1], 0, float(taus[0]), float(taus[-1]), float(step), rows, reps, seed,
           "design", len(windows), False)
    return CriticalValueTable(key, np.array(vals), f"{__version__}+seed{seed}")
