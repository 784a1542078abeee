"""Commutator closure in finite operator subspaces, and symbolic bracket expansion.

Closure identities such as ``[a, a^dag] = 1`` fail on a truncated Fock space
only at the truncation edge, so every residual here is measured after
compressing to the safe subspace (all occupations at most ``dim - 1 - buffer``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hamiltonians import HamiltonianSpec, evaluate_hamiltonian
from .hilbert import (
    OperatorBasis,
    OperatorMatrix,
    SpaceMismatchError,
    StateVector,
    compress,
    hs_project,
    safe_indices,
)

CLOSURE_TOL = 1e-9


class ClosureError(ValueError):
    """Raised when an operation needs commutator closure that does not hold."""


@dataclass(frozen=True)
class ClosureReport:
    closed: bool
    max_residual: float
    per_time_residuals: dict[float, float]
    basis_label: str
    depth: int
    depth_residuals: list[float] = field(default_factory=list)
    # largest HS norm of a level's commutators on the safe subspace
    depth_norms: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class StructureMatrix:
    entries: np.ndarray
    basis: OperatorBasis
    t: float
    residual: float


def _restricted_basis(basis: OperatorBasis, idx: np.ndarray) -> OperatorBasis:
    return OperatorBasis(f"{basis.label}|safe", tuple(compress(b, idx) for b in basis.elements))


def _bracket(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    return x @ h - h @ x


def closure_check(O: OperatorMatrix, spec: HamiltonianSpec, basis: OperatorBasis,
                  sample_times: Sequence[float], depth: int, tolerance: float = CLOSURE_TOL,
                  buffer: int = 1) -> ClosureReport:
    """Bracket ``O`` with ``H(t)`` repeatedly and project each level onto ``basis``.

    Level ``k`` holds the in-span parts of all level ``k-1`` operators bracketed
    with ``H(t)`` at every sampled time, reduced to a linearly independent set,
    so the work per level is bounded by the basis size.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if O.space != basis.space or spec.space != basis.space:
        raise SpaceMismatchError("operator, Hamiltonian and basis must share a space")
    idx = safe_indices(basis.space, buffer)
    if not len(idx):
        raise ValueError(f"safe subspace is empty for buffer {buffer}")
    restricted = _restricted_basis(basis, idx)
    times = [float(t) for t in sample_times]
    hams = [evaluate_hamiltonian(spec, t).entries for t in times]
    n = basis.space.total_dim

    per_time = {t: 0.0 for t in times}
    depth_residuals, depth_norms = [], []
    level = [O.entries]
    for _ in range(depth):
        coeff_rows = []
        worst = norm = 0.0
        for x in level:
            for t, h in zip(times, hams):
                c = OperatorMatrix(basis.space, _bracket(x, h))
                c_safe = compress(c, idx)
                coeffs, residual = hs_project(c_safe, restricted)
                per_time[t] = max(per_time[t], residual)
                worst = max(worst, residual)
                norm = max(norm, c_safe.norm())
                coeff_rows.append(coeffs)
        depth_residuals.append(worst)
        depth_norms.append(norm)
        level = [basis.combine(v).entries for v in _independent(coeff_rows)]
        if not level:
            level = [np.zeros((n, n), dtype=complex)]
    max_residual = max(depth_residuals)
    return ClosureReport(max_residual < tolerance, max_residual, per_time, basis.label, depth,
                         depth_residuals, depth_norms)


def _independent(rows: list[np.ndarray], rtol: float = 1e-12) -> list[np.ndarray]:
    """Orthonormal vectors spanning ``rows`` (empty when all rows vanish)."""
    mat = np.array(rows, dtype=complex)
    if not mat.size:
        return []
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    if not s.size or s[0] == 0.0:
        return []
    keep = s > rtol * s[0]
    return list(vh[keep].conj())


def _structure(basis: OperatorBasis, h: np.ndarray, idx: np.ndarray,
               restricted: OperatorBasis) -> tuple[np.ndarray, float]:
    size = len(basis)
    mat = np.zeros((size, size), dtype=complex)
    worst = 0.0
    for alpha, b in enumerate(basis.elements):
        c = compress(OperatorMatrix(basis.space, _bracket(b.entries, h) / 1j), idx)
        coeffs, residual = hs_project(c, restricted)
        mat[:, alpha] = coeffs
        worst = max(worst, residual)
    return mat, worst


def structure_matrix(basis: OperatorBasis, spec: HamiltonianSpec, t: float,
                     tolerance: float = CLOSURE_TOL, buffer: int = 1) -> StructureMatrix:
    """Column ``alpha`` holds the coefficients of ``[B_alpha, H(t)] / i``."""
    idx = safe_indices(basis.space, buffer)
    restricted = _restricted_basis(basis, idx)
    mat, residual = _structure(basis, evaluate_hamiltonian(spec, t).entries, idx, restricted)
    if residual >= tolerance:
        raise ClosureError(f"basis {basis.label!r} not closed at t={t} (residual {residual:.3e})")
    return StructureMatrix(mat, basis, float(t), residual)


def subspace_expectation(O: OperatorMatrix, spec: HamiltonianSpec, basis: OperatorBasis,
                         state: StateVector, t: float, n_steps: int = 1000,
                         tolerance: float = CLOSURE_TOL, buffer: int = 1):
    """<O>(t) by propagating the coefficients of ``O`` inside a closed subspace.

    Writing ``W(s) = U(t, s)^dag O U(t, s) = sum_a w_a(s) B_a`` gives
    ``dw/ds = -M(s) w`` with ``w(t)`` the coefficients of ``O``; the system is
    integrated from ``s = t`` back to ``0`` with classical RK4 and the result
    is ``sum_a w_a(0) <psi0|B_a|psi0>``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    idx = safe_indices(basis.space, buffer)
    restricted = _restricted_basis(basis, idx)
    w, residual = hs_project(compress(O, idx), restricted)
    if residual >= tolerance:
        raise ClosureError(f"observable lies outside span of {basis.label!r} "
                           f"(residual {residual:.3e})")

    # M(s) = sum_c f_c(s) M_c; closure of every component implies closure at every s
    parts = []
    for op in spec.component_operators():
        mat, res = _structure(basis, op, idx, restricted)
        if res >= tolerance:
            raise ClosureError(f"Hamiltonian component leaves span of {basis.label!r} "
                               f"(residual {res:.3e})")
        parts.append(mat)
    size = len(basis)
    parts = np.stack(parts) if parts else np.zeros((0, size, size), dtype=complex)

    def generator(s):
        coeffs = spec.component_coefficients([s])[0]
        return np.tensordot(coeffs, parts, axes=1) if len(parts) else np.zeros((size, size))

    # tau = t - s runs forward: dw/dtau = M(t - tau) w
    h = t / n_steps
    w = np.array(w, dtype=complex)
    for k in range(n_steps):
        s0 = t - k * h
        m0, mh, m1 = generator(s0), generator(s0 - h / 2), generator(max(s0 - h, 0.0))
        k1 = m0 @ w
        k2 = mh @ (w + 0.5 * h * k1)
        k3 = mh @ (w + 0.5 * h * k2)
        k4 = m1 @ (w + h * k3)
        w = w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    psi = state.amplitudes
    initial = np.array([np.vdot(psi, b.entries @ psi) for b in basis.elements])
    value = complex(w @ initial)
    return value.real if O.hermitian else value


def c_number_test(O: OperatorMatrix, buffer: int = 1) -> tuple[complex, float]:
    """Best scalar multiple of the identity on the safe subspace and the max-entry misfit."""
    idx = safe_indices(O.space, buffer)
    if not len(idx):
        raise ValueError(f"safe subspace is empty for buffer {buffer}")
    block = O.entries[np.ix_(idx, idx)]
    scalar = complex(np.trace(block) / len(idx))
    residual = float(np.max(np.abs(block - scalar * np.eye(len(idx)))))
    return scalar, residual


# ---------------------------------------------------------------------------
# symbolic expansion


@dataclass(frozen=True, order=True)
class SignedWord:
    symbols: tuple[str, ...]
    sign: int = 1

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("a word needs at least one symbol")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "symbols", tuple(self.symbols))

    def __str__(self):
        return ("+" if self.sign > 0 else "-") + "".join(self.symbols)


def _bracket_words(x: list[SignedWord], y: list[SignedWord]) -> list[SignedWord]:
    out = [SignedWord(a.symbols + b.symbols, a.sign * b.sign) for a in x for b in y]
    out += [SignedWord(b.symbols + a.symbols, -a.sign * b.sign) for a in x for b in y]
    return out


def expand_nested_commutator(pattern: str, symbols: Sequence[str]) -> list[SignedWord]:
    """Expand a nested bracket into signed products, sorted by symbol sequence.

    ``left_nested`` with ``(O, A, B, C)`` is ``[[[O, A], B], C]``;
    ``right_nested`` with ``(A, B, C, O)`` is ``[A, [B, [C, O]]]``.
    """
    symbols = [str(s) for s in symbols]
    if len(symbols) < 2:
        raise ValueError("need at least two symbols")
    if pattern == "left_nested":
        words = [SignedWord((symbols[0],))]
        for s in symbols[1:]:
            words = _bracket_words(words, [SignedWord((s,))])
    elif pattern == "right_nested":
        words = [SignedWord((symbols[-1],))]
        for s in reversed(symbols[:-1]):
            words = _bracket_words([SignedWord((s,))], words)
    else:
        raise ValueError(f"unknown pattern {pattern!r}")
    return sorted(words)


def word_sets_disjoint(left: Iterable[SignedWord], right: Iterable[SignedWord]) -> bool:
    """True when no symbol sequence (sign ignored) occurs in both lists."""
    return not ({w.symbols for w in left} & {w.symbols for w in right})


def evaluate_words(words: Iterable[SignedWord], mapping: Mapping[str, np.ndarray]) -> np.ndarray:
    total = None
    for w in words:
        prod = mapping[w.symbols[0]]
        for s in w.symbols[1:]:
            prod = prod @ mapping[s]
        total = w.sign * prod if total is None else total + w.sign * prod
    return total


def nested_commutator_matrix(pattern: str, matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Direct numerical nested commutator, ordered as in :func:`expand_nested_commutator`."""
    if pattern == "left_nested":
        out = matrices[0]
        for m in matrices[1:]:
            out = out @ m - m @ out
        return out
    if pattern == "right_nested":
        out = matrices[-1]
        for m in reversed(matrices[:-1]):
            out = m @ out - out @ m
        return out
    raise ValueError(f"unknown pattern {pattern!r}")
