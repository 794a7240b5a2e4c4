"""Simulation designs and a deterministic experiment harness.

Designs
-------
Location-scale model ``y = w + gamma_i z + (1 + a w) eps`` with
``w ~ chi2(3)`` and ``z, eps ~ N(0, 1)``; columns ordered ``(z, 1, w)``.
With ``correlated=True``, ``z = c (w - 3) + sqrt(1 - 6 c^2) eta`` with
``c = -sqrt(6)/8`` so that ``cov[z, w] = -3/4`` and ``var[z] = 1``.

Quantile ADL model with two tested regressors (an AR(1) series and a
chi2(4) series) and controls ``(1, y_{i-1}, y_{i-2}, i/n, (i/n)^2, w_1)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, QuantGrangerError
from .grid import QuantileGrid, map_replications, replication_rng

CORR_A = -0.125
CORR_B = math.sqrt(1.0 - 6.0 * CORR_A**2)
QADL_ALPHA = np.array([0.0, 1.0 / 3.0, 0.25, 0.5, 0.5, 0.5])
QADL_BURN = 200


@dataclass(frozen=True)
class DgpSpec:
    """One data-generating process.

    ``gamma_path`` has length ``n``; for ``kind="qadl"`` it may also have
    shape ``(n, 2)``.
    """

    kind: str
    n: int
    alpha_scale: float = 0.0
    correlated: bool = False
    gamma_path: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("location_scale", "qadl"):
            raise DomainError(f"unknown design kind {self.kind!r}")
        g = np.zeros(self.n) if self.gamma_path is None else np.asarray(self.gamma_path, dtype=float)
        if g.shape[0] != self.n:
            raise DomainError(f"gamma_path has length {g.shape[0]}, expected {self.n}")
        object.__setattr__(self, "gamma_path", g)

    @property
    def p(self) -> int:
        return 1 if self.kind == "location_scale" else 2

    def generate(self, rng):
        if self.kind == "location_scale":
            return gen_location_scale(self, rng)
        return gen_qadl(self.n, self.gamma_path, rng)


@dataclass(frozen=True)
class ScenarioSpec:
    """Break scenario: ``A``, ``B``, ``C`` or a regime tuple ``(a, b, c)`` over thirds."""

    name: str | tuple
    gamma: float
    breaks: tuple = ()

    def path(self, n: int) -> np.ndarray:
        return gamma_path(self.name, self.gamma, n)


def gamma_path(scenario, gamma: float, n: int) -> np.ndarray:
    """Granger coefficients over time.

    ``A``: ``+gamma`` for ``i <= floor(n/2)``, ``-gamma`` after.  ``B``: 0
    then ``gamma``.  ``C``: constant.  A tuple ``(a, b, c)`` of multipliers
    of ``gamma`` switches at ``floor(n/3)`` and ``floor(2n/3)``.
    """
    i = np.arange(1, n + 1)
    if isinstance(scenario, str):
        if scenario == "A":
            return np.where(i <= n // 2, gamma, -gamma).astype(float)
        if scenario == "B":
            return np.where(i <= n // 2, 0.0, gamma)
        if scenario == "C":
            return np.full(n, float(gamma))
        raise DomainError(f"unknown scenario {scenario!r}")
    a, b, c = scenario
    out = np.full(n, c * gamma, dtype=float)
    out[i <= (2 * n) // 3] = b * gamma
    out[i <= n // 3] = a * gamma
    return out


def gen_location_scale(spec: DgpSpec, rng):
    """Draw ``(y, X)`` from the location-scale design; ``X = (z, 1, w)``."""
    n = spec.n
    w = rng.chisquare(3, n)
    eps = rng.standard_normal(n)
    eta = rng.standard_normal(n)
    if spec.correlated:
        z = CORR_A * (w - 3.0) + CORR_B * eta
    else:
        z = eta
    y = w + spec.gamma_path * z + (1.0 + spec.alpha_scale * w) * eps
    return y, np.column_stack([z, np.ones(n), w])


def gen_qadl(n: int, gamma_path, rng):
    """Draw ``(y, X)`` from the quantile ADL design, ``X = (z1, z2, 1, y_1, y_2, t, t^2, w1)``."""
    if n < 50:
        raise DomainError("the ADL design needs n >= 50")
    g = np.asarray(gamma_path, dtype=float)
    if g.ndim == 1:
        g = np.column_stack([g, g])
    N = n + QADL_BURN
    u = rng.standard_normal(N)
    e1 = rng.standard_normal(N)
    z2 = rng.chisquare(4, N)
    w1 = rng.chisquare(3, N)
    z1 = np.empty(N)
    z1[0] = e1[0] / math.sqrt(1.0 - 1.0 / 9.0)
    for i in range(1, N):
        z1[i] = z1[i - 1] / 3.0 + e1[i]
    gam = np.vstack([np.zeros((QADL_BURN, 2)), g])
    t = np.concatenate([np.zeros(QADL_BURN), np.arange(1, n + 1) / n])
    y = np.zeros(N + 2)  # two leading zeros as initial lags
    a = QADL_ALPHA
    for i in range(N):
        y[i + 2] = (gam[i, 0] * z1[i] + gam[i, 1] * z2[i] + a[0] + a[1] * y[i + 1]
                    + a[2] * y[i] + a[3] * t[i] + a[4] * t[i] ** 2 + a[5] * w1[i] + u[i])
    s = slice(QADL_BURN, N)
    yy = y[2:][s]
    X = np.column_stack([z1[s], z2[s], np.ones(n), y[1:-1][s], y[:-2][s], t[s], t[s] ** 2, w1[s]])
    return yy, X


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TestSpec:
    """One column of an experiment: statistic family and critical-value method."""

    __test__ = False

    family: str
    method: str = "asymptotic"
    tau: float | None = None

    @property
    def label(self) -> str:
        base = self.family if self.tau is None else f"{self.family}@{self.tau:g}"
        return f"{base}/{self.method}"


@dataclass
class ExperimentResult:
    """Rejection rates per test, plus break statistics for regime runs."""

    rejection_rates: dict
    reps: int
    seeds: list
    break_stats: dict = field(default_factory=dict)
    detection_breakdown: dict = field(default_factory=dict)
    failures: int = 0


@dataclass(frozen=True)
class Design:
    """Experiment design: a DGP template plus the tests to run."""

    dgp: DgpSpec
    grid: QuantileGrid = field(default_factory=QuantileGrid)
    level: float = 0.05
    B: int = 499
    B_wald: int = 199
    null_reps: int = 9999
    true_breaks: int | None = None


def _null_tables(design: Design, tests, p: int, k: int):
    from .limitsim import NullSampler, null_table

    out = {}
    for t in tests:
        if t.method == "asymptotic" and t.family in ("supLM", "expLM"):
            out[t] = null_table(NullSampler(t.family, p=p, k=k, grid=design.grid, reps=design.null_reps, seed=1))
    return out


def _one_replication(design: Design, tests, tables, base_seed: int, r: int) -> dict:
    from .bootstrap import BootstrapConfig, bootstrap_distribution
    from .limitsim import CriticalValueTable, critical_value
    from .stats import level_stats, lm_fixed_tau, sup_wald

    rng = replication_rng(base_seed, r)
    dgp = design.dgp
    y, X = dgp.generate(rng)
    p = dgp.p
    out = {}
    need_grid = any(t.family in ("supLM", "expLM") for t in tests)
    st = level_stats(y, X, p, design.grid) if need_grid else None
    boot = None
    for t in tests:
        if t.family in ("supLM", "expLM"):
            value = st.sup() if t.family == "supLM" else st.exp()
            if t.method == "asymptotic":
                cv = critical_value(tables[t], design.level)
            else:
                if boot is None:
                    cfg = BootstrapConfig(B=design.B, seed=base_seed * 100_003 + r, grid=design.grid)
                    boot = bootstrap_distribution(y, X, p, cfg)
                cv = critical_value(CriticalValueTable(("boot",), boot.samples[t.family]), design.level)
            out[t.label] = value > cv
        elif t.family == "LM_fixed":
            res = lm_fixed_tau(y, X, t.tau, p, method=t.method, level=design.level,
                               reps=design.null_reps, seed=1)
            out[t.label] = res.reject
        elif t.family == "supWald":
            res = sup_wald(y, X, design.grid, design.B_wald, p, level=design.level, seed=base_seed * 7 + r,
                           reps=design.null_reps)
            out[t.label] = res.reject
        elif t.family == "regimes":
            from .regimes import detect_regimes

            rep = detect_regimes(y, X, design.grid, p, alpha=design.level, method=t.method,
                                 B=design.B, reps=design.null_reps, seed=base_seed * 31 + r)
            out[t.label] = rep
        else:
            raise DomainError(f"unknown test family {t.family!r}")
    return out


def run_experiment(design: Design, tests, reps: int, base_seed: int = 0, threads: int = 1,
                   progress=None) -> ExperimentResult:
    """Run ``reps`` replications and aggregate decisions.

    Replication ``r`` draws data from its own stream derived from
    ``(base_seed, r)``, so results are reproducible and independent of the
    number of threads.  Failed replications are counted and skipped.
    """
    if reps < 100:
        raise DomainError("experiments need reps >= 100")
    tests = list(tests)
    dgp = design.dgp
    k = 6 if dgp.kind == "qadl" else 2
    tables = _null_tables(design, tests, dgp.p, k)

    def one(r):
        try:
            res = _one_replication(design, tests, tables, base_seed, r)
        except (QuantGrangerError, ArithmeticError, np.linalg.LinAlgError):
            res = None
        if progress is not None:
            progress(r)
        return res

    results = map_replications(one, reps, threads)
    good = [x for x in results if x is not None]
    failures = reps - len(good)
    if not good:
        raise QuantGrangerError("every replication failed")
    rates, breaks, breakdown = {}, {}, {}
    for t in tests:
        if t.family == "regimes":
            breaks, breakdown, rates[t.label] = _regime_summary([g[t.label] for g in good], design.true_breaks)
        else:
            rates[t.label] = float(np.mean([g[t.label] for g in good]))
    return ExperimentResult(rates, len(good), [base_seed], breaks, breakdown, failures)


def _regime_summary(reports, true_breaks):
    nb = np.array([rep.n_breaks for rep in reports])
    inc = np.array([rep.inconclusive for rep in reports])
    tb = 0 if true_breaks is None else true_breaks
    breakdown = {
        "=": float(np.mean((nb == tb) & ~inc)),
        "<": float(np.mean((nb < tb) & ~inc)),
        ">": float(np.mean((nb > tb) & ~inc)),
        "?": float(np.mean(inc)),
    }
    stats = {}
    for j in (0, 1):
        lam = np.array([rep.breakpoints[j].fraction for rep in reports if rep.n_breaks > j])
        if lam.size:
            stats[f"lambda{j + 1}"] = {
                "mean": float(lam.mean()), "median": float(np.median(lam)),
                "var": float(lam.var()), "count": int(lam.size),
            }
    lm_rate = float(np.mean([rep.trace[0].decision == "reject" for rep in reports]))
    cus_rate = float(np.mean([
        any(t.step == "2" and t.decision == "reject" for t in rep.trace) for rep in reports
    ]))
    stats["LM"] = lm_rate
    stats["CUSUM"] = cus_rate
    return stats, breakdown, breakdown["="]


# --------------------------------------------------------------------------
# profiles
# --------------------------------------------------------------------------

TABLE1_TAUS = (0.05, 0.25, 0.5, 0.75, 0.95)
PANELS = {"a": (0.0, False), "b": (3.0, False), "c": (3.0, True)}
SCALES = {
    "desk": {"reps": 500, "B": 299, "n": (300, 2000), "fig_reps": 300, "fig_n": (150, 300, 500),
             "alg_reps": 200, "alg_n": (1000,), "adl_n": (1000,)},
    "full": {"reps": 2000, "B": 499, "n": (150, 300, 1000, 2000), "fig_reps": 2000, "fig_n": (150, 300, 500),
             "alg_reps": 2000, "alg_n": (500, 1000, 2000, 4000), "adl_n": (150, 300, 1000, 2000)},
}
FIG_GAMMAS = tuple(round(0.05 * i, 2) for i in range(7))


def table1_tests():
    tests = []
    for tau in TABLE1_TAUS:
        tests += [TestSpec("LM_fixed", "adjusted", tau), TestSpec("LM_fixed", "asymptotic", tau)]
    tests += [TestSpec("supLM", "bootstrap"), TestSpec("expLM", "bootstrap"),
              TestSpec("supLM", "asymptotic"), TestSpec("expLM", "asymptotic")]
    return tests


def profile_rows(profile: str, scale: str = "desk"):
    """Configurations of a named profile: list of (row-dict, Design, tests, reps)."""
    if scale not in SCALES:
        raise DomainError(f"unknown scale {scale!r}")
    sc = SCALES[scale]
    rows = []
    if profile == "table1":
        for panel, (a, corr) in PANELS.items():
            for n in sc["n"]:
                d = Design(DgpSpec("location_scale", n, a, corr), B=sc["B"])
                rows.append(({"panel": panel, "n": n}, d, table1_tests() + [TestSpec("supWald", "bootstrap")], sc["reps"]))
    elif profile == "fig3":
        for scen in ("A", "B", "C"):
            for n in sc["fig_n"]:
                for g in FIG_GAMMAS:
                    d = Design(DgpSpec("location_scale", n, gamma_path=gamma_path(scen, g, n)), B=sc["B"])
                    tests = [TestSpec("supLM", "bootstrap"), TestSpec("expLM", "bootstrap"),
                             TestSpec("supWald", "bootstrap")]
                    rows.append(({"scenario": scen, "n": n, "gamma": g}, d, tests, sc["fig_reps"]))
    elif profile == "table3":
        tuples = {(0, 0, 1): 1, (1, 0, 0): 1, (1, 0, 1): 2, (0, 1, 0): 2}
        for tup, nb in tuples.items():
            for n in sc["alg_n"]:
                d = Design(DgpSpec("location_scale", n, gamma_path=gamma_path(tup, 0.5, n)), B=sc["B"],
                           null_reps=999, true_breaks=nb)
                rows.append(({"design": str(tup), "n": n}, d, [TestSpec("regimes", "bootstrap")], sc["alg_reps"]))
    elif profile == "appB":
        for kind in ("size", "power"):
            for n in sc["adl_n"]:
                if kind == "size":
                    g = np.zeros(n)
                else:
                    g = np.where(np.arange(1, n + 1) < n // 2, 1.0 / math.sqrt(n), 0.0)
                d = Design(DgpSpec("qadl", n, gamma_path=g), B=sc["B"])
                tests = [TestSpec("supLM", "asymptotic"), TestSpec("expLM", "asymptotic"),
                         TestSpec("supLM", "bootstrap"), TestSpec("expLM", "bootstrap")]
                rows.append(({"study": kind, "n": n}, d, tests, sc["reps"]))
    else:
        raise DomainError(f"unknown profile {profile!r}")
    return rows


def run_profile(profile: str, scale: str = "desk", seed: int = 0, threads: int = 1):
    """Run every configuration of a profile; returns a list of row dicts."""
    table = []
    for i, (row, design, tests, reps) in enumerate(profile_rows(profile, scale)):
        res = run_experiment(design, tests, reps, base_seed=seed * 1000 + i, threads=threads)
        out = dict(row)
        out.update({k: round(v, 4) for k, v in res.rejection_rates.items()})
        for name, val in res.break_stats.items():
            if isinstance(val, dict):
                out.update({f"{name}_{k}": round(v, 4) for k, v in val.items()})
            else:
                out[name] = round(val, 4)
        out.update({f"detect{k}": round(v, 4) for k, v in res.detection_breakdown.items()})
        out["reps"] = res.reps
        out["failures"] = res.failures
        table.append(out)
    return table


def to_delimited(rows, delimiter: str = ",") -> str:
    """Rows (list of dicts) as a delimited table with a header line."""
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=keys, delimiter=delimiter, lineterminator="\n")
    wr.writeheader()
    wr.writerows(rows)
    return buf.getvalue()


def plot_data(rows) -> str:
    """Long-format ``scenario,n,gamma,test,rate`` lines for external plotting."""
    lines = ["scenario,n,gamma,test,rate"]
    for r in rows:
        for k, v in r.items():
            if "/" in k:
                lines.append(f"{r['scenario']},{r['n']},{r['gamma']},{k},{v}")
    return "\n".join(lines) + "\n"
