"""Sequential identification of Granger-causality regimes (at most two breaks).

The procedure runs an exp LM test on the full sample, then an exp CUSUM
test for instability, announces breakpoints at CUSUM argmaxima and tests
the resulting windows with subsample exp LM statistics.  Step ``s`` is
carried out at the Sidak level ``1 - (1 - alpha)^(1/d)`` with ``d`` taken
from :data:`LEVEL_EXPONENTS`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, QuantGrangerError, WindowError
from .grid import QuantileGrid
from .limitsim import WindowWeights, simulate_window_null
from .numcore import _validate_design
from .process import SubsampleWindow
from .stats import (
    _method, _table_result, exp_lm, exp_lm_sub, window_data, window_stats,
)

GC, NOGC, INCONCLUSIVE = "GC", "noGC", "inconclusive"
NOT_REJECTED = "noGC (not rejected)"

# step -> d
LEVEL_EXPONENTS = {"1": 1, "2": 2, "3": 4, "3.2": 5, "3.2b": 7, "3.3": 5, "3.3b": 7, "3.4": 5, "3.4b": 7}


def sidak_level(alpha: float, d: int) -> float:
    """``1 - (1 - alpha)^(1/d)``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    if d < 1:
        raise DomainError("d must be at least 1")
    return 1.0 - (1.0 - alpha) ** (1.0 / d)


@dataclass(frozen=True)
class LevelSchedule:
    """Per-step levels derived from an initial level ``alpha``."""

    alpha: float = 0.05
    exponents: dict = field(default_factory=lambda: dict(LEVEL_EXPONENTS))

    def level(self, step: str) -> float:
        return sidak_level(self.alpha, self.exponents[step])


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    label: str


@dataclass(frozen=True)
class Breakpoint:
    fraction: float
    index: int
    label: str | None = None


@dataclass(frozen=True)
class TraceEntry:
    step: str
    family: str
    window: tuple
    level: float
    statistic: float
    critical_value: float
    p_value: float
    decision: str


@dataclass
class RegimeReport:
    """Segments with labels, announced breakpoints, and every decision taken."""

    segments: list
    breakpoints: list
    trace: list
    notes: list = field(default_factory=list)

    @property
    def inconclusive(self) -> bool:
        return any(s.label == INCONCLUSIVE for s in self.segments)

    @property
    def n_breaks(self) -> int:
        return len(self.breakpoints)

    def to_dict(self) -> dict:
        return {
            "segments": [asdict(s) for s in self.segments],
            "breakpoints": [asdict(b) for b in self.breakpoints],
            "trace": [asdict(t) | {"window": list(t.window)} for t in self.trace],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RegimeReport":
        return cls(
            [Segment(**s) for s in d["segments"]],
            [Breakpoint(**b) for b in d["breakpoints"]],
            [TraceEntry(**(t | {"window": tuple(t["window"])})) for t in d["trace"]],
            list(d.get("notes", [])),
        )

    def to_text(self) -> str:
        lines = ["Regimes of Granger causality", ""]
        for s in self.segments:
            lines.append(f"  [{s.start:.4f}, {s.end:.4f}]  {s.label}")
        if self.breakpoints:
            lines.append("")
            lines.append("Breakpoints")
            for b in self.breakpoints:
                extra = f"  ({b.label})" if b.label else ""
                lines.append(f"  lambda = {b.fraction:.4f}  index {b.index}{extra}")
        lines.append("")
        lines.append("Trace")
        lines.append(f"  {'step':<6}{'statistic':<12}{'window':<20}{'level':>9}{'value':>12}{'crit':>12}{'p':>8}  decision")
        for t in self.trace:
            w = f"[{t.window[0]:.3f}, {t.window[1]:.3f}]"
            lines.append(
                f"  {t.step:<6}{t.family:<12}{w:<20}{t.level:>9.5f}{t.statistic:>12.5g}"
                f"{t.critical_value:>12.5g}{t.p_value:>8.4f}  {t.decision}"
            )
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


class _Runner:
    def __init__(self, y, X, grid, p, alpha, method, B, reps, seed, threads):
        self.y, self.X = y, X
        self.n = X.shape[0]
        self.grid, self.p = grid, p
        self.sched = LevelSchedule(alpha)
        self.method = method
        self.B, self.reps, self.seed, self.threads = B, reps, seed, threads
        self.trace: list[TraceEntry] = []
        self.notes: list[str] = []
        self._calls = 0

    def _seed(self):
        self._calls += 1
        return (self.seed * 1_000_003 + self._calls) % (2**62)

    def _log(self, step, res, window):
        self.trace.append(TraceEntry(
            step, res.family, (float(window.a), float(window.b)), res.level, res.value,
            res.critical_value, res.p_value, "reject" if res.reject else "not rejected",
        ))
        return res.reject

    def full_exp_lm(self, step):
        level = self.sched.level(step)
        seed = self._seed()
        # pivotal tables do not depend on the data, so a fixed seed lets them be reused
        res = exp_lm(self.y, self.X, self.grid, self.p, method=self.method, level=level,
                     B=self.B, seed=seed if self.method == "bootstrap" else 1, threads=self.threads)
        return self._log(step, res, SubsampleWindow(0.0, 1.0))

    def sub_exp_lm(self, step, a, b):
        """True / False, or None when the window is too small."""
        w = SubsampleWindow(a, b)
        level = self.sched.level(step)
        meth = "bootstrap" if self.method != "asymptotic" else "asymptotic"
        try:
            res = exp_lm_sub(self.y, self.X, self.grid, w, self.p, method=meth, level=level,
                             B=self.B, seed=self._seed(), reps=self.reps, threads=self.threads)
        except (WindowError, QuantGrangerError, ArithmeticError) as exc:
            self.notes.append(f"step {step} on [{a:.4f}, {b:.4f}]: {exc}")
            return None
        return self._log(step, res, w)

    def cusum(self, step, windows):
        """Max of exp CUSUM over ``windows``; returns (reject, argmax) or (None, None)."""
        level = self.sched.level(step)
        try:
            wds = [window_data(self.y, self.X, SubsampleWindow(a, b), self.p) for a, b in windows]
        except (WindowError, QuantGrangerError, ArithmeticError) as exc:
            self.notes.append(f"step {step}: {exc}")
            return None, None
        best, arg = -np.inf, None
        for wd in wds:
            st = window_stats(wd, self.p, self.grid, cusum=True)
            j = int(np.argmax(st.cus_exp))
            if st.cus_exp[j] > best:
                best, arg = float(st.cus_exp[j]), (wd.lo + j) / self.n
        table = simulate_window_null(
            [WindowWeights(wd.V, wd.V) for wd in wds], self.grid.points, self.grid.step,
            "expCUSUM", self.reps, self._seed(), self.threads,
        )
        w = SubsampleWindow(windows[0][0], windows[-1][1])
        res = _table_result("expCUSUM", best, table, level, "asymptotic", w)
        entry_family = "expCUSUM" if len(windows) == 1 else "maxExpCUSUM"
        self.trace.append(TraceEntry(
            step, entry_family, (float(w.a), float(w.b)), level, res.value, res.critical_value,
            res.p_value, "reject" if res.reject else "not rejected",
        ))
        return res.reject, arg

    def bp(self, lam):
        return Breakpoint(float(lam), int(round(lam * self.n)))


def _second_level(run, step, lo, mid, hi):
    """Tests on [lo, mid] and [mid, hi]; returns the two labels."""
    r1 = run.sub_exp_lm(step, lo, mid)
    r2 = run.sub_exp_lm(step, mid, hi)
    if r1 is None or r2 is None or (not r1 and not r2):
        return None
    return (GC if r1 else NOGC), (GC if r2 else NOGC)


def detect_regimes(y, X, grid: QuantileGrid, p: int, *, alpha: float = 0.05,
                   method: str = "bootstrap", B: int = 499, reps: int = 999, seed: int = 0,
                   refine: bool = False, threads: int = 1, labels=None) -> RegimeReport:
    """Label segments of the sample as GC, noGC or inconclusive.

    Parameters
    ----------
    method : {"bootstrap", "asymptotic", "adjusted"}
        Critical values of the exp LM statistics.  CUSUM statistics always
        use simulated nulls under their own window scaling.
    refine : bool
        After two breakpoints, rerun the CUSUM test on ``[0, lambda_2]``
        and ``[lambda_1, 1]`` and record the outcome in the trace.
    labels : sequence, optional
        Row labels (e.g. dates) attached to breakpoints.
    """
    method = _method(method)
    y, X = _validate_design(y, X)
    run = _Runner(y, X, grid, p, alpha, method, B, reps, seed, threads)

    def report(segments, bps):
        if labels is not None:
            bps = [Breakpoint(b.fraction, b.index, str(labels[min(max(b.index - 1, 0), len(labels) - 1)]))
                   for b in bps]
        return RegimeReport(segments, bps, run.trace, run.notes)

    # step 1
    if not run.full_exp_lm("1"):
        return report([Segment(0.0, 1.0, NOT_REJECTED)], [])
    # step 2
    rej, lam1 = run.cusum("2", [(0.0, 1.0)])
    if rej is None:
        return report([Segment(0.0, 1.0, INCONCLUSIVE)], [])
    if not rej:
        return report([Segment(0.0, 1.0, GC)], [])
    b1 = run.bp(lam1)
    # step 3
    left = run.sub_exp_lm("3", 0.0, lam1)
    right = run.sub_exp_lm("3", lam1, 1.0)
    if left is None or right is None or (not left and not right):
        return report([Segment(0.0, 1.0, INCONCLUSIVE)], [b1])

    if left != right:
        # cases 2 and 3: one side without GC, look for a second break on the other
        if right:
            quiet, active, step = (0.0, lam1), (lam1, 1.0), "3.2"
        else:
            quiet, active, step = (lam1, 1.0), (0.0, lam1), "3.3"
        rej2, lam2 = run.cusum(step, [active])
        segs = [Segment(*quiet, NOGC)]
        if rej2 is None:
            segs.append(Segment(*active, INCONCLUSIVE))
            return report(sorted(segs, key=lambda s: s.start), [b1])
        if not rej2:
            segs.append(Segment(*active, GC))
            return report(sorted(segs, key=lambda s: s.start), [b1])
        b2 = run.bp(lam2)
        lab = _second_level(run, step + "b", active[0], lam2, active[1])
        if lab is None:
            segs.append(Segment(*active, INCONCLUSIVE))
        else:
            segs += [Segment(active[0], lam2, lab[0]), Segment(lam2, active[1], lab[1])]
        out = report(sorted(segs, key=lambda s: s.start), sorted([b1, b2], key=lambda b: b.fraction))
    else:
        # case 4: both sides show GC
        rej2, lam2 = run.cusum("3.4", [(0.0, lam1), (lam1, 1.0)])
        if rej2 is None:
            return report([Segment(0.0, lam1, GC), Segment(lam1, 1.0, INCONCLUSIVE)], [b1])
        if not rej2:
            return report([Segment(0.0, lam1, GC), Segment(lam1, 1.0, GC)], [b1])
        b2 = run.bp(lam2)
        if lam2 >= lam1:
            fixed, lo, hi = Segment(0.0, lam1, GC), lam1, 1.0
        else:
            fixed, lo, hi = Segment(lam1, 1.0, GC), 0.0, lam1
        lab = _second_level(run, "3.4b", lo, lam2, hi)
        segs = [fixed]
        if lab is None:
            segs.append(Segment(lo, hi, INCONCLUSIVE))
        else:
            segs += [Segment(lo, lam2, lab[0]), Segment(lam2, hi, lab[1])]
        out = report(sorted(segs, key=lambda s: s.start), sorted([b1, b2], key=lambda b: b.fraction))

    if refine and len(out.breakpoints) == 2:
        l1, l2 = out.breakpoints[0].fraction, out.breakpoints[1].fraction
        run.cusum("3.2", [(0.0, l2)])
        run.trace[-1] = _relabel(run.trace[-1], "refine")
        run.cusum("3.2", [(l1, 1.0)])
        run.trace[-1] = _relabel(run.trace[-1], "refine")
    return out


def _relabel(entry: TraceEntry, step: str) -> TraceEntry:
    d = asdict(entry)
    d["step"] = step
    d["window"] = entry.window
    return TraceEntry(**d)
