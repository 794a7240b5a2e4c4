from __future__ import annotations

import json

import numpy as np
import pytest

from quantgranger.errors import DomainError
from quantgranger.grid import QuantileGrid, replication_rng
from quantgranger.montecarlo import DgpSpec, gamma_path
from quantgranger.process import SubsampleWindow
from quantgranger.regimes import (
    GC, INCONCLUSIVE, LEVEL_EXPONENTS, NOGC, NOT_REJECTED, LevelSchedule, RegimeReport, detect_regimes,
    sidak_level,
)
from quantgranger.stats import estimate_breakpoint

GRID = QuantileGrid()

# step -> d, as written in the algorithm
SCHEDULE = {"1": 1, "2": 2, "3": 4, "3.2": 5, "3.2b": 7, "3.3": 5, "3.3b": 7, "3.4": 5, "3.4b": 7}


def sample(regimes, gamma, n, rep, seed=0):
    spec = DgpSpec("location_scale", n, gamma_path=gamma_path(regimes, gamma, n))
    return spec.generate(replication_rng(seed, rep))


@pytest.mark.parametrize("alpha, d, expected", [
    (0.05, 1, 0.05),
    (0.05, 2, 0.025320565519103666),
    (0.10, 5, 0.020851637639023),
])
def test_sidak_examples(alpha, d, expected):
    assert sidak_level(alpha, d) == pytest.approx(expected, abs=1e-12)
    assert sidak_level(alpha, d) == pytest.approx(1 - (1 - alpha) ** (1 / d), abs=1e-15)


@pytest.mark.parametrize("alpha, d", [(0.0, 1), (1.0, 1), (0.05, 0)])
def test_sidak_domain(alpha, d):
    with pytest.raises(DomainError):
        sidak_level(alpha, d)


def test_schedule_matches_table():
    assert LEVEL_EXPONENTS == SCHEDULE
    assert sorted(set(SCHEDULE.values())) == [1, 2, 4, 5, 7]
    s = LevelSchedule(0.05)
    levels = [s.level(k) for k in ("1", "2", "3", "3.2", "3.2b")]
    assert all(a > b for a, b in zip(levels, levels[1:]))


def check_report(rep: RegimeReport, alpha=0.05):
    segs = rep.segments
    assert 1 <= len(segs) <= 3
    assert segs[0].start == 0.0 and segs[-1].end == 1.0
    for a, b in zip(segs, segs[1:]):
        assert a.end == b.start
    sched = LevelSchedule(alpha)
    for t in rep.trace:
        step = "3.2" if t.step == "refine" else t.step
        assert t.level == sched.level(step)
    assert len(rep.trace) >= 1
    bps = [0.0] + [b.fraction for b in rep.breakpoints] + [1.0]
    for t in rep.trace:
        lo, hi = t.window
        assert any(abs(lo - v) < 1e-12 for v in bps) and any(abs(hi - v) < 1e-12 for v in bps)


def test_null_data_stops_at_first_step():
    y, X = sample((0, 0, 0), 0.0, 400, 0)
    rep = detect_regimes(y, X, GRID, 1, method="asy", reps=199)
    assert [s.label for s in rep.segments] == [NOT_REJECTED]
    assert len(rep.trace) == 1 and rep.trace[0].step == "1"
    check_report(rep)


def test_single_late_regime_detected():
    y, X = sample((0, 0, 1), 0.5, 1000, 0)
    rep = detect_regimes(y, X, GRID, 1, method="asy", reps=199)
    check_report(rep)
    assert [s.label for s in rep.segments] == [NOGC, GC]
    assert abs(rep.breakpoints[0].fraction - 2 / 3) < 0.05


def test_report_round_trip_is_exact():
    y, X = sample((1, 0, 1), 0.6, 900, 1)
    rep = detect_regimes(y, X, GRID, 1, method="asy", reps=199, labels=[f"t{i}" for i in range(900)])
    check_report(rep)
    text = rep.to_json()
    back = RegimeReport.from_dict(json.loads(text))
    assert back.to_json() == text
    assert back.segments == rep.segments and back.trace == rep.trace
    assert all(b.label.startswith("t") for b in back.breakpoints)
    assert "Trace" in rep.to_text()


def test_every_label_has_a_decision():
    y, X = sample((1, 0, 0), 0.6, 900, 2)
    rep = detect_regimes(y, X, GRID, 1, method="asy", reps=199)
    check_report(rep)
    for s in rep.segments:
        if s.label in (GC, NOGC, INCONCLUSIVE):
            assert any(t.step != "1" for t in rep.trace)


def test_refine_adds_trace_entries():
    y, X = sample((1, 0, 1), 0.8, 900, 3)
    rep = detect_regimes(y, X, GRID, 1, method="asy", reps=199, refine=True)
    check_report(rep)
    if rep.n_breaks == 2:
        assert [t.step for t in rep.trace[-2:]] == ["refine", "refine"]


def test_determinism():
    y, X = sample((0, 1, 1), 0.5, 600, 4)
    a = detect_regimes(y, X, GRID, 1, method="boot", B=99, reps=199, seed=3)
    b = detect_regimes(y, X, GRID, 1, method="boot", B=99, reps=199, seed=3)
    assert a.to_json() == b.to_json()


def test_breakpoint_estimate_is_deterministic():
    y, X = sample((1, 0, 0), 0.5, 300, 5)
    est = [estimate_breakpoint(y, X, GRID, SubsampleWindow(0, 1), 1) for _ in range(2)]
    assert est[0] == est[1]


@pytest.mark.slow
def test_breakpoint_mean_near_one_third():
    est = []
    for r in range(200):
        y, X = sample((1, 0, 0), 0.5, 4000, r, seed=7)
        est.append(estimate_breakpoint(y, X, GRID, SubsampleWindow(0, 1), 1))
    assert abs(np.mean(est) - 1 / 3) < 0.02


@pytest.mark.slow
def test_family_wise_error_under_null():
    # step 1 uses asymptotic critical values here to keep the run short
    hits = 0
    for r in range(500):
        y, X = sample((0, 0, 0), 0.0, 1000, r, seed=11)
        rep = detect_regimes(y, X, GRID, 1, method="asy", reps=999)
        hits += any(s.label == GC for s in rep.segments)
    assert hits / 500 <= 0.05 + 0.03
