"""Nested-commutator perturbation series for expectation values.

For a constant Hamiltonian the order-``m`` term of ``<O>(t)`` is
``(i t)^m / m! <[H, [H, ..., O]]>``. For a time-dependent Hamiltonian the
order-``m`` term is the ``m``-fold time-ordered integral of
``(1/i)^m <[[[O, H(t1)], H(t2)], ..., H(tm)]>`` with ``t1 > t2 > ... > tm``;
the first bracket is taken with the Hamiltonian at the latest time.

The time-dependent terms are computed by slicing ``[0, t]`` and sweeping the
slices from the latest to the earliest, accumulating one commutator per slice
per order. That is first order in the slice width, so :func:`converge_series`
refines the grid and Richardson-extrapolates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonians import HamiltonianSpec, SliceHamiltonians
from .hilbert import (
    OperatorMatrix,
    SpaceMismatchError,
    StateVector,
    edge_indices,
)
from .slicing import SliceGrid, refine

REALITY_ATOL = 1e-10


@dataclass(frozen=True)
class SeriesResult:
    order_terms: np.ndarray
    partial_sums: np.ndarray
    n_slices: int | None
    leakage: float
    converged: bool
    method: str

    @classmethod
    def from_terms(cls, terms, n_slices, leakage, converged, method) -> "SeriesResult":
        terms = np.asarray(terms, dtype=complex)
        return cls(terms, np.cumsum(terms), n_slices, float(leakage), bool(converged), method)

    @property
    def max_order(self) -> int:
        return len(self.order_terms) - 1

    @property
    def value(self) -> complex:
        return complex(self.partial_sums[-1])


def _check_spaces(*objs):
    spaces = {o.space for o in objs}
    if len(spaces) != 1:
        raise SpaceMismatchError("operands live on different spaces")


def _check_reality(terms: np.ndarray, op: OperatorMatrix):
    if not op.hermitian:
        return
    bad = np.abs(terms.imag) >= REALITY_ATOL * max(1.0, op.max_entry())
    if np.any(bad):
        m = int(np.flatnonzero(bad)[0])
        raise ArithmeticError(f"order {m} term of a Hermitian observable has "
                              f"imaginary part {terms[m].imag:.3e}")


def _leakage(ops: list[np.ndarray], state: StateVector) -> float:
    edge = edge_indices(state.space)
    if not len(ops) or not len(edge):
        return 0.0
    return max(float(np.linalg.norm((op @ state.amplitudes)[edge])) for op in ops)


def _expectations(ops: list[np.ndarray], psi: np.ndarray) -> np.ndarray:
    return np.array([np.vdot(psi, op @ psi) for op in ops], dtype=complex)


def bch_series(H: OperatorMatrix, O: OperatorMatrix, state: StateVector, t: float,
               max_order: int) -> SeriesResult:
    """Constant-Hamiltonian series ``sum_m (i t)^m / m! <C_m>`` with
    ``C_0 = O`` and ``C_m = [H, C_{m-1}]``."""
    _check_spaces(H, O, state)
    if not H.hermitian:
        raise ValueError("bch_series needs a Hermitian Hamiltonian")
    h = H.entries
    nested = [np.array(O.entries)]
    for _ in range(max_order):
        c = nested[-1]
        nested.append(h @ c - c @ h)
    weights = np.array([(1j * t) ** m / math.factorial(m) for m in range(max_order + 1)])
    terms = weights * _expectations(nested, state.amplitudes)
    _check_reality(terms, O)
    return SeriesResult.from_terms(terms, None, _leakage(nested[1:], state), True, "bch")


def _nested_sweep(spec: HamiltonianSpec, O: np.ndarray, grid: SliceGrid,
                  max_order: int) -> list[np.ndarray]:
    """S_1..S_max after the latest-first sweep (S_0 = O is not returned)."""
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    n = O.shape[0]
    acc = [np.array(O, dtype=complex)] + [np.zeros((n, n), dtype=complex)
                                         for _ in range(max_order)]
    if not spec.terms:
        return acc[1:]
    hams = SliceHamiltonians(spec, grid.times)
    factor = grid.dt / 1j
    for k in range(grid.n_slices - 1, -1, -1):
        h = hams[k]
        # descending m: acc[m - 1] still excludes slice k, so times stay strictly ordered
        for m in range(max_order, 0, -1):
            prev = acc[m - 1]
            acc[m] += factor * (prev @ h - h @ prev)
    return acc[1:]


def nested_series_expectation(spec: HamiltonianSpec, O: OperatorMatrix, state: StateVector,
                              t: float, max_order: int, grid: SliceGrid | None = None,
                              ) -> SeriesResult:
    _check_spaces(spec, O, state)
    grid = grid or SliceGrid(t, 64)
    if not math.isclose(grid.horizon, t):
        raise ValueError("slice grid horizon does not match t")
    ops = _nested_sweep(spec, O.entries, grid, max_order)
    psi = state.amplitudes
    terms = np.concatenate([[np.vdot(psi, O.entries @ psi)], _expectations(ops, psi)])
    _check_reality(terms, O)
    return SeriesResult.from_terms(terms, grid.n_slices, _leakage(ops, state), False, "nested")


def heisenberg_expansion(spec: HamiltonianSpec, O: OperatorMatrix, t: float, max_order: int,
                         grid: SliceGrid | None = None) -> list[OperatorMatrix]:
    """Per-order operators ``S_1..S_max`` with ``O + sum_m S_m ~ U^dag O U``."""
    _check_spaces(spec, O)
    grid = grid or SliceGrid(t, 64)
    return [OperatorMatrix(O.space, s) for s in _nested_sweep(spec, O.entries, grid, max_order)]


def converge_series(spec: HamiltonianSpec, O: OperatorMatrix, state: StateVector, t: float,
                    max_order: int, tolerance: float = 1e-10, max_slices: int = 2**14,
                    n_start: int = 64) -> SeriesResult:
    """Per-order terms refined by slice doubling plus Richardson extrapolation.

    Every order term must move by less than ``tolerance`` between successive
    levels. Hitting ``max_slices`` leaves ``converged`` false instead of raising.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    leak = {}

    def evaluate(n):
        res = nested_series_expectation(spec, O, state, t, max_order, SliceGrid(t, n))
        leak["value"] = res.leakage
        return res.order_terms

    ref = refine(evaluate, n_start=n_start, n_max=max_slices, tolerance=tolerance)
    terms = ref.value.copy()
    _check_reality(terms, O)
    return SeriesResult.from_terms(terms, ref.n_slices, leak["value"], ref.converged,
                                   "nested-extrapolated")


def converge_expansion(spec: HamiltonianSpec, O: OperatorMatrix, t: float, max_order: int,
                       tolerance: float = 1e-10, max_slices: int = 2**13,
                       n_start: int = 64) -> tuple[list[OperatorMatrix], bool]:
    """:func:`heisenberg_expansion` refined the same way as :func:`converge_series`."""

    def evaluate(n):
        return np.stack([s.entries for s in heisenberg_expansion(spec, O, t, max_order,
                                                                 SliceGrid(t, n))])

    ref = refine(evaluate, n_start=n_start, n_max=max_slices, tolerance=tolerance)
    return [OperatorMatrix(O.space, s) for s in ref.value], ref.converged
