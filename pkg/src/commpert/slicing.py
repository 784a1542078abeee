"""Uniform time slicing of [0, t] and Richardson refinement over slice counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SliceGrid:
    """``n_slices`` equal slices of ``[0, horizon]`` sampled at their midpoints."""

    horizon: float
    n_slices: int

    def __post_init__(self):
        if int(self.n_slices) < 1:
            raise ValueError("a slice grid needs at least one slice")
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        object.__setattr__(self, "n_slices", int(self.n_slices))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_slices

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.n_slices) + 0.5) * self.dt

    def refined(self) -> "SliceGrid":
        return SliceGrid(self.horizon, 2 * self.n_slices)


@dataclass
class Refinement:
    """Outcome of :func:`refine`."""

    value: np.ndarray
    n_slices: int
    change: float
    converged: bool
    raw: list[np.ndarray] = field(default_factory=list)
    slice_counts: list[int] = field(default_factory=list)


def refine(evaluate: Callable[[int], np.ndarray], n_start: int = 64, n_max: int = 2**14,
           tolerance: float = 1e-10, power_step: int = 1, max_columns: int = 8,
           min_levels: int = 2) -> Refinement:
    """Double the slice count and Richardson-extrapolate until stable.

    ``evaluate(n)`` returns an array computed on ``n`` slices whose error
    expands in powers ``power_step, 2 power_step, ...`` of ``1/n``. Each level
    adds a column to a Romberg table; convergence is declared once every entry
    of the extrapolated estimate moves by less than ``tolerance`` between two
    successive levels.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    raws: list[np.ndarray] = []
    counts: list[int] = []
    table: list[list[np.ndarray]] = []
    best = prev_best = None
    change = np.inf
    n = int(n_start)
    while True:
        raw = np.asarray(evaluate(n))
        raws.append(raw)
        counts.append(n)
        row = [raw]
        for j in range(1, min(len(table), max_columns - 1) + 1):
            factor = 2.0 ** (power_step * j) - 1.0
            row.append(row[j - 1] + (row[j - 1] - table[-1][j - 1]) / factor)
        table.append(row)
        prev_best, best = best, row[-1]
        if prev_best is not None:
            change = float(np.max(np.abs(best - prev_best))) if best.size else 0.0
            if change < tolerance and len(table) >= min(min_levels, _levels(n_start, n_max)):
                return Refinement(best, n, change, True, raws, counts)
        if 2 * n > n_max:
            return Refinement(best, n, change, False, raws, counts)
        n *= 2


def _levels(n_start: int, n_max: int) -> int:
    levels, n = 1, n_start
    while 2 * n <= n_max:
        n *= 2
        levels += 1
    return levels
