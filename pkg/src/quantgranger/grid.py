"""Quantile-level grids and deterministic replication streams."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class QuantileGrid:
    """Equally spaced levels ``lo, lo + step, ..., hi`` inside ``(0, 1)``.

    Parameters
    ----------
    lo, hi : float
        End points, ``0 < lo <= hi < 1``.
    step : float
        Spacing; ``(hi - lo) / step`` must be (numerically) an integer.
    """

    lo: float = 0.05
    hi: float = 0.95
    step: float = 0.01
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.lo <= self.hi < 1.0):
            raise DomainError(f"grid end points must satisfy 0 < lo <= hi < 1, got {self.lo}, {self.hi}")
        if self.step <= 0:
            raise DomainError("grid step must be positive")
        count = (self.hi - self.lo) / self.step
        steps = int(round(count))
        if abs(count - steps) > 1e-6:
            raise DomainError(f"step {self.step} does not divide [{self.lo}, {self.hi}]")
        pts = np.round(self.lo + self.step * np.arange(steps + 1), 12)
        object.__setattr__(self, "points", pts)

    @classmethod
    def single(cls, tau: float) -> "QuantileGrid":
        return cls(tau, tau, 0.01)

    @classmethod
    def parse(cls, text: str) -> "QuantileGrid":
        """Parse ``"lo:hi:step"``."""
        try:
            lo, hi, step = (float(v) for v in text.split(":"))
        except ValueError as exc:
            raise DomainError(f"expected lo:hi:step, got {text!r}") from exc
        return cls(lo, hi, step)

    def __len__(self) -> int:
        return self.points.shape[0]

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lo, self.hi, self.step)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent generator for replication ``rep`` of a run seeded by ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**63 - 1), int(rep)])))


def map_replications(fn, reps: int, threads: int = 1) -> list:
    """``[fn(r) for r in range(reps)]``, optionally spread over threads.

    Each replication draws from its own stream, so the result does not
    depend on ``threads``.
    """
    if threads is None or threads <= 1 or reps < 2:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(reps)))
