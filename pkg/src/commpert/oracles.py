"""Reference computations used to cross-check the nested-commutator series.

* exact time-sliced propagation (product of slice exponentials),
* Dyson perturbation series for the state vector and its expectation cross terms,
* the Heisenberg-picture Hamiltonian and the series obtained by iterating the
  Heisenberg equation of motion (an expansion in ``H_H(t)``, not ``H(t)``),
* a finite-difference check of the Heisenberg equation of motion,
* residual-ratio probes of the perturbative order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .hamiltonians import HamiltonianSpec, SliceHamiltonians, evaluate_hamiltonian
from .hilbert import OperatorMatrix, StateVector
from .series import converge_series
from .slicing import SliceGrid, refine

UNITARITY_ATOL = 1e-10
DYSON_MAX_ORDER = 4


class UnitarityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PropagatorResult:
    U: OperatorMatrix
    n_slices: int
    unitarity_defect: float

    def __post_init__(self):
        if not self.unitarity_defect < UNITARITY_ATOL:
            raise UnitarityError(f"propagator unitarity defect {self.unitarity_defect:.3e}")


@dataclass(frozen=True)
class DysonResult:
    state_corrections: list[np.ndarray]
    grouped_expectation_terms: np.ndarray
    n_slices: int | None = None
    converged: bool = False


@dataclass(frozen=True)
class ExactValue:
    value: float | complex
    error_estimate: float
    n_slices: int
    converged: bool


def _slice_exponential(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i h dt) for Hermitian ``h`` via its eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def _propagate(spec: HamiltonianSpec, t: float, n_slices: int) -> np.ndarray:
    n = spec.space.total_dim
    u = np.eye(n, dtype=complex)
    if not spec.terms or t == 0:
        return u
    grid = SliceGrid(t, n_slices)
    hams = SliceHamiltonians(spec, grid.times)
    for k in range(grid.n_slices):
        u = _slice_exponential(hams[k], grid.dt) @ u
    return u


def _unitarity_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(len(u)))))


def exact_propagator(spec: HamiltonianSpec, t: float, n_slices: int) -> PropagatorResult:
    """Product of midpoint slice exponentials, earliest slice applied first."""
    if n_slices < 1:
        raise ValueError("n_slices must be at least 1")
    u = _propagate(spec, t, n_slices)
    return PropagatorResult(OperatorMatrix(spec.space, u), n_slices, _unitarity_defect(u))


def heisenberg_operator(O: OperatorMatrix, U: OperatorMatrix) -> OperatorMatrix:
    return OperatorMatrix(O.space, U.entries.conj().T @ O.entries @ U.entries, O.hermitian)


def exact_expectation(spec: HamiltonianSpec, O: OperatorMatrix, state: StateVector, t: float,
                      n_slices_sequence: Sequence[int] | None = None,
                      tolerance: float = 1e-10) -> ExactValue:
    """<psi0| U^dag O U |psi0> stabilized over increasing slice counts.

    With ``n_slices_sequence=None`` the count doubles from 16 to 2**14 and the
    midpoint-product error (even powers of the slice width) is removed by
    Richardson extrapolation. An explicit sequence is evaluated as given and
    the last value is returned unextrapolated.
    """
    psi = state.amplitudes

    def evaluate(n):
        res = exact_propagator(spec, t, n)
        phi = res.U.entries @ psi
        return np.array(np.vdot(phi, O.entries @ phi))

    if spec.is_time_independent() and n_slices_sequence is None:
        n_slices_sequence = [1]
    if n_slices_sequence is not None:
        values = [complex(evaluate(n)) for n in n_slices_sequence]
        delta = abs(values[-1] - values[-2]) if len(values) > 1 else 0.0
        value, n_final, ok = values[-1], n_slices_sequence[-1], delta < tolerance
    else:
        ref = refine(evaluate, n_start=16, n_max=2**14, tolerance=tolerance, power_step=2)
        value, delta, n_final, ok = complex(ref.value), ref.change, ref.n_slices, ref.converged
    if O.hermitian:
        value = value.real
    return ExactValue(value, float(delta), n_final, ok)


# ---------------------------------------------------------------------------
# Dyson series


def dyson_series_expectation(spec: HamiltonianSpec, O: OperatorMatrix, state: StateVector,
                             t: float, max_order: int, grid: SliceGrid | None = None,
                             ) -> DysonResult:
    """State corrections psi^(p) and grouped cross terms sum_{p+q=m} <psi^(p)|O|psi^(q)>.

    ``psi^(p)`` accumulates ``(dt/i) H(t_k) psi^(p-1)`` sweeping the slices
    earliest-first, so later Hamiltonians act on the left.
    """
    if max_order > DYSON_MAX_ORDER:
        raise ValueError(f"Dyson order is capped at {DYSON_MAX_ORDER}")
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    grid = grid or SliceGrid(t, 64)
    corrections = [np.array(state.amplitudes)] + [np.zeros(state.space.total_dim, dtype=complex)
                                                  for _ in range(max_order)]
    if spec.terms and max_order:
        hams = SliceHamiltonians(spec, grid.times)
        factor = grid.dt / 1j
        for k in range(grid.n_slices):
            h = hams[k]
            for p in range(max_order, 0, -1):
                corrections[p] += factor * (h @ corrections[p - 1])
    o_kets = [O.entries @ c for c in corrections]
    grouped = np.zeros(max_order + 1, dtype=complex)
    for m in range(max_order + 1):
        grouped[m] = sum(np.vdot(corrections[p], o_kets[m - p]) for p in range(m + 1))
    return DysonResult(corrections, grouped, grid.n_slices, False)


def converge_dyson(spec: HamiltonianSpec, O: OperatorMatrix, state: StateVector, t: float,
                   max_order: int, tolerance: float = 1e-10, max_slices: int = 2**14,
                   n_start: int = 64) -> DysonResult:
    """Dyson grouped terms refined by slice doubling and Richardson extrapolation."""
    dim = state.space.total_dim

    def evaluate(n):
        res = dyson_series_expectation(spec, O, state, t, max_order, SliceGrid(t, n))
        return np.concatenate([res.grouped_expectation_terms, np.concatenate(res.state_corrections)])

    ref = refine(evaluate, n_start=n_start, n_max=max_slices, tolerance=tolerance)
    grouped = ref.value[: max_order + 1]
    flat = ref.value[max_order + 1:]
    corrections = [flat[p * dim:(p + 1) * dim] for p in range(max_order + 1)]
    return DysonResult(corrections, grouped, ref.n_slices, ref.converged)


# ---------------------------------------------------------------------------
# Heisenberg picture


def heisenberg_hamiltonian(spec: HamiltonianSpec, t_eval: float, n_slices: int) -> OperatorMatrix:
    """U^dag(t) H(t) U(t)."""
    U = exact_propagator(spec, t_eval, n_slices).U
    return heisenberg_operator(evaluate_hamiltonian(spec, t_eval), U)


def _midpoint_heisenberg_hamiltonians(spec: HamiltonianSpec, grid: SliceGrid):
    """H_H at every slice midpoint, propagating on the half-slice grid."""
    n = spec.space.total_dim
    half = grid.dt / 2.0
    # half-slice k spans [k*half, (k+1)*half]; its exponential uses its own midpoint
    half_times = (np.arange(2 * grid.n_slices) + 0.5) * half
    half_hams = SliceHamiltonians(spec, half_times)
    mid_hams = SliceHamiltonians(spec, grid.times)
    u = np.eye(n, dtype=complex)
    out = []
    for k in range(grid.n_slices):
        if k > 0:
            u = _slice_exponential(half_hams[2 * k - 1], half) @ u
        u = _slice_exponential(half_hams[2 * k], half) @ u
        out.append(u.conj().T @ mid_hams[k] @ u)
    return out


def heisenberg_iteration_series(spec: HamiltonianSpec, O: OperatorMatrix, t: float,
                                max_order: int, grid: SliceGrid | None = None,
                                ) -> list[OperatorMatrix]:
    """Terms of the iterated Heisenberg equation, an expansion in ``H_H``.

    Order ``m`` is ``(1/i)^m`` times the ordered integral of
    ``[[O, H_H(t_m)], ..., H_H(t_1)]`` with ``t_m < ... < t_1``: here the first
    bracket uses the *earliest* time, so the sweep runs earliest-first.
    """
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    grid = grid or SliceGrid(t, 64)
    n = spec.space.total_dim
    acc = [np.array(O.entries)] + [np.zeros((n, n), dtype=complex) for _ in range(max_order)]
    if spec.terms:
        factor = grid.dt / 1j
        for hh in _midpoint_heisenberg_hamiltonians(spec, grid):
            for m in range(max_order, 0, -1):
                prev = acc[m - 1]
                acc[m] += factor * (prev @ hh - hh @ prev)
    return [OperatorMatrix(O.space, a) for a in acc[1:]]


def converge_iteration_series(spec: HamiltonianSpec, O: OperatorMatrix, t: float, max_order: int,
                              tolerance: float = 1e-10, max_slices: int = 2**13,
                              n_start: int = 64) -> tuple[list[OperatorMatrix], bool]:
    def evaluate(n):
        return np.stack([s.entries for s in heisenberg_iteration_series(
            spec, O, t, max_order, SliceGrid(t, n))])

    ref = refine(evaluate, n_start=n_start, n_max=max_slices, tolerance=tolerance)
    return [OperatorMatrix(O.space, s) for s in ref.value], ref.converged


def heisenberg_eom_check(spec: HamiltonianSpec, O: OperatorMatrix, t: float, n_slices: int,
                         dt_fd: float) -> float:
    """Max-entry residual of the central difference of O_H against (1/i)[O_H, H_H]."""
    if not 0 < dt_fd <= t:
        raise ValueError("need 0 < dt_fd <= t")
    o_plus = heisenberg_operator(O, exact_propagator(spec, t + dt_fd, n_slices).U).entries
    o_minus = heisenberg_operator(O, exact_propagator(spec, t - dt_fd, n_slices).U).entries
    U = exact_propagator(spec, t, n_slices).U
    o_now = heisenberg_operator(O, U).entries
    h_now = heisenberg_operator(evaluate_hamiltonian(spec, t), U).entries
    derivative = (o_plus - o_minus) / (2.0 * dt_fd)
    rhs = (o_now @ h_now - h_now @ o_now) / 1j
    return float(np.max(np.abs(derivative - rhs)))


# ---------------------------------------------------------------------------
# perturbative-order probes


@dataclass(frozen=True)
class ScalingRow:
    order: int
    lambda_hi: float
    lambda_lo: float
    residual_hi: float
    residual_lo: float
    ratio: float  # nan when a residual sits at the floating-point floor
    expected: float


def order_scaling_probe(spec_family: Callable[[float], HamiltonianSpec], O: OperatorMatrix,
                        state: StateVector, t: float, orders: Sequence[int],
                        lambdas: Sequence[float], floor: float = 1e-13,
                        tolerance: float = 1e-13) -> list[ScalingRow]:
    """Residual ratios ``|exact - partial_sum_m|`` between adjacent couplings."""
    lambdas = [float(x) for x in lambdas]
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be strictly decreasing")
    if any(x < 0 for x in lambdas):
        raise ValueError("lambdas must be non-negative")
    top = max(orders)
    residuals = {}
    for lam in lambdas:
        spec = spec_family(lam)
        exact = exact_expectation(spec, O, state, t, tolerance=tolerance * 0.1).value
        series = converge_series(spec, O, state, t, top, tolerance=tolerance)
        residuals[lam] = {m: abs(exact - series.partial_sums[m]) for m in orders}
    rows = []
    for hi, lo in zip(lambdas, lambdas[1:]):
        for m in orders:
            r_hi, r_lo = residuals[hi][m], residuals[lo][m]
            ratio = r_hi / r_lo if min(r_hi, r_lo) > floor else math.nan
            expected = (hi / lo) ** (m + 1) if lo > 0 else math.inf
            rows.append(ScalingRow(m, hi, lo, r_hi, r_lo, ratio, expected))
    return rows


def square_triangle_sums(f: Sequence[float], g: Sequence[float]):
    """Exact rational sums behind the square/triangle split of a double integral.

    Returns ``(square, f_later, g_later)`` where ``square = sum_{i,j} f_i g_j``,
    ``f_later = sum_{i >= j} f_i g_j`` and ``g_later = sum_{j > i} g_j f_i``;
    ``square == f_later + g_later`` holds exactly.
    """
    fq = [Fraction(float(x)) for x in f]
    gq = [Fraction(float(x)) for x in g]
    if len(fq) != len(gq):
        raise ValueError("envelopes must be sampled on the same slices")
    square = sum(fq, Fraction(0)) * sum(gq, Fraction(0))
    f_later = Fraction(0)
    g_later = Fraction(0)
    g_upto = Fraction(0)  # sum of g_j for j <= i
    f_before = Fraction(0)  # sum of f_i for i < j
    for k in range(len(fq)):
        g_upto += gq[k]
        f_later += fq[k] * g_upto
        g_later += gq[k] * f_before
        f_before += fq[k]
    return square, f_later, g_later

