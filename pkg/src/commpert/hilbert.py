"""Truncated multi-mode Fock spaces, dense operators and states.

Everything here works in units with hbar = 1. Operators are dense complex
matrices; a mode of local dimension ``d`` keeps Fock levels ``0 .. d-1`` and
the raising operator sends the top level to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

DEFAULT_DIM_CAP = 4096
HERMITIAN_ATOL = 1e-12
DEFAULT_GRAM_COND_BOUND = 1e10


class SpaceMismatchError(ValueError):
    """Raised when operands live on different Hilbert spaces."""


class IllConditionedBasisError(ValueError):
    """Raised when an operator basis is (numerically) linearly dependent."""


@dataclass(frozen=True)
class HilbertSpace:
    mode_dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "mode_dims", tuple(int(d) for d in self.mode_dims))

    @property
    def total_dim(self) -> int:
        return math.prod(self.mode_dims)

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    def index(self, occupations: Sequence[int]) -> int:
        """Flattened (row-major) basis index of an occupation tuple."""
        return int(np.ravel_multi_index(tuple(occupations), self.mode_dims))

    def occupations(self) -> np.ndarray:
        """Occupation table of shape ``(total_dim, n_modes)``."""
        grids = np.indices(self.mode_dims).reshape(self.n_modes, -1)
        return grids.T.copy()


def build_space(mode_dims: Sequence[int], dim_cap: int = DEFAULT_DIM_CAP) -> HilbertSpace:
    dims = [int(d) for d in mode_dims]
    if not dims:
        raise ValueError("mode_dims must be nonempty")
    if any(d < 2 for d in dims):
        raise ValueError(f"every mode dimension must be >= 2, got {dims}")
    total = math.prod(dims)
    if total > dim_cap:
        raise ValueError(f"total dimension {total} exceeds the cap of {dim_cap}")
    return HilbertSpace(tuple(dims))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense operator on a :class:`HilbertSpace`.

    ``hermitian`` is a contract set by the constructor; it is validated, never
    inferred.
    """

    space: HilbertSpace
    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        entries = _frozen(self.entries)
        n = self.space.total_dim
        if entries.shape != (n, n):
            raise ValueError(f"operator shape {entries.shape} does not match dimension {n}")
        if self.hermitian:
            defect = np.max(np.abs(entries - entries.conj().T)) if n else 0.0
            scale = max(1.0, float(np.max(np.abs(entries))))
            if defect >= HERMITIAN_ATOL * scale:
                raise ValueError(f"operator flagged Hermitian has defect {defect:.3e}")
        object.__setattr__(self, "entries", entries)

    @property
    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.entries.conj().T, self.hermitian)

    def _check(self, other: "OperatorMatrix"):
        if self.space != other.space:
            raise SpaceMismatchError(f"{self.space.mode_dims} vs {other.space.mode_dims}")

    def __add__(self, other):
        self._check(other)
        return OperatorMatrix(self.space, self.entries + other.entries,
                              self.hermitian and other.hermitian)

    def __sub__(self, other):
        self._check(other)
        return OperatorMatrix(self.space, self.entries - other.entries,
                              self.hermitian and other.hermitian)

    def __neg__(self):
        return OperatorMatrix(self.space, -self.entries, self.hermitian)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        return OperatorMatrix(self.space, scalar * self.entries,
                              self.hermitian and scalar.imag == 0.0)

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        return OperatorMatrix(self.space, self.entries @ other.entries)

    def norm(self) -> float:
        """Hilbert-Schmidt (Frobenius) norm."""
        return float(np.linalg.norm(self.entries))

    def max_entry(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.shape != (self.space.total_dim,):
            raise ValueError("amplitude vector length does not match the space")
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) >= 1e-12:
            raise ValueError(f"state is not normalized (norm {nrm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, space: HilbertSpace, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(amps)
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(space, amps / nrm)


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    label: str
    elements: tuple[OperatorMatrix, ...]
    _matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("an operator basis needs at least one element")
        space = elements[0].space
        for el in elements[1:]:
            if el.space != space:
                raise SpaceMismatchError("basis elements must share one space")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "_matrix",
                           np.stack([el.entries.reshape(-1) for el in elements], axis=1))

    @property
    def space(self) -> HilbertSpace:
        return self.elements[0].space

    def __len__(self):
        return len(self.elements)

    def gram(self) -> np.ndarray:
        return self._matrix.conj().T @ self._matrix

    def condition_number(self) -> float:
        """Condition number of the Hilbert-Schmidt Gram matrix."""
        s = np.linalg.svd(self._matrix, compute_uv=False)
        if s[-1] == 0.0:
            return math.inf
        return float((s[0] / s[-1]) ** 2)

    def combine(self, coefficients) -> OperatorMatrix:
        coefficients = np.asarray(coefficients, dtype=complex)
        n = self.space.total_dim
        return OperatorMatrix(self.space, (self._matrix @ coefficients).reshape(n, n))


# ---------------------------------------------------------------------------
# constructors


def identity(space: HilbertSpace) -> OperatorMatrix:
    return OperatorMatrix(space, np.eye(space.total_dim), hermitian=True)


def zero_operator(space: HilbertSpace) -> OperatorMatrix:
    return OperatorMatrix(space, np.zeros((space.total_dim,) * 2), hermitian=True)


def _local_ladder(d: int, kind: str) -> np.ndarray:
    lower = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1)
    if kind == "lower":
        return lower
    if kind == "raise":
        return lower.T.copy()
    if kind == "number":
        return np.diag(np.arange(d, dtype=float))
    raise ValueError(f"unknown ladder kind {kind!r}")


def _embed(space: HilbertSpace, mode: int, local: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1))
    for m, d in enumerate(space.mode_dims):
        out = np.kron(out, local if m == mode else np.eye(d))
    return out


def ladder_operator(space: HilbertSpace, mode: int, kind: str) -> OperatorMatrix:
    """Lowering, raising or number operator on one tensor factor.

    Truncation: ``raise`` maps the top level ``|d-1>`` to the zero vector.
    """
    if not 0 <= mode < space.n_modes:
        raise IndexError(f"mode {mode} out of range for {space.n_modes} modes")
    local = _local_ladder(space.mode_dims[mode], kind)
    return OperatorMatrix(space, _embed(space, mode, local), hermitian=(kind == "number"))


def fock_state(space: HilbertSpace, occupations: Sequence[int]) -> StateVector:
    occ = [int(n) for n in occupations]
    if len(occ) != space.n_modes:
        raise ValueError(f"expected {space.n_modes} occupations, got {len(occ)}")
    for n, d in zip(occ, space.mode_dims):
        if not 0 <= n < d:
            raise ValueError(f"occupation {n} outside truncation 0..{d - 1}")
    amps = np.zeros(space.total_dim, dtype=complex)
    amps[space.index(occ)] = 1.0
    return StateVector(space, amps)


# ---------------------------------------------------------------------------
# algebra


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    if a.space != b.space:
        raise SpaceMismatchError(f"{a.space.mode_dims} vs {b.space.mode_dims}")
    return OperatorMatrix(a.space, a.entries @ b.entries - b.entries @ a.entries)


def expectation(state: StateVector, op: OperatorMatrix):
    """<psi|O|psi>; real (float) when ``op`` is flagged Hermitian."""
    if state.space != op.space:
        raise SpaceMismatchError(f"{state.space.mode_dims} vs {op.space.mode_dims}")
    psi = state.amplitudes
    value = complex(np.vdot(psi, op.entries @ psi))
    if op.hermitian:
        if abs(value.imag) >= HERMITIAN_ATOL * max(1.0, op.max_entry()):
            raise ArithmeticError(f"Hermitian expectation has imaginary part {value.imag:.3e}")
        return value.real
    return value


def hs_inner(a: OperatorMatrix, b: OperatorMatrix) -> complex:
    return complex(np.vdot(a.entries, b.entries))


def hs_project(op: OperatorMatrix, basis: OperatorBasis,
               cond_bound: float = DEFAULT_GRAM_COND_BOUND) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of ``op`` in ``basis`` under the HS norm.

    Returns ``(coefficients, residual_norm)``; a zero residual means ``op``
    lies in the span.
    """
    if op.space != basis.space:
        raise SpaceMismatchError("operator and basis live on different spaces")
    cond = basis.condition_number()
    if not cond < cond_bound:
        raise IllConditionedBasisError(f"basis {basis.label!r} Gram condition {cond:.3e}")
    target = op.entries.reshape(-1)
    coeffs, *_ = np.linalg.lstsq(basis._matrix, target, rcond=None)
    residual = float(np.linalg.norm(target - basis._matrix @ coeffs))
    return coeffs, residual


# ---------------------------------------------------------------------------
# truncation edge


def safe_indices(space: HilbertSpace, buffer: int) -> np.ndarray:
    """Basis indices whose every occupation is at most ``dim - 1 - buffer``."""
    occ = space.occupations()
    limits = np.array(space.mode_dims) - 1 - int(buffer)
    return np.flatnonzero(np.all(occ <= limits, axis=1))


def edge_indices(space: HilbertSpace) -> np.ndarray:
    """Basis indices with at least one mode on its top Fock level."""
    occ = space.occupations()
    return np.flatnonzero(np.any(occ == np.array(space.mode_dims) - 1, axis=1))


def compress(op: OperatorMatrix, indices: np.ndarray) -> OperatorMatrix:
    """P O P for the coordinate projector P onto ``indices`` (full-size result)."""
    mask = np.zeros(op.space.total_dim, dtype=bool)
    mask[indices] = True
    entries = np.where(np.outer(mask, mask), op.entries, 0.0)
    return OperatorMatrix(op.space, entries, op.hermitian)


def bilinear_basis(space: HilbertSpace, include_identity: bool = True) -> OperatorBasis:
    """{a_i^dag a_j for all i, j} (row-major in (i, j)), optionally plus identity."""
    lowers = [ladder_operator(space, m, "lower") for m in range(space.n_modes)]
    elements = [lowers[i].dag @ lowers[j]
                for i, j in product(range(space.n_modes), repeat=2)]
    if include_identity:
        elements.append(identity(space))
    return OperatorBasis("bilinear", tuple(elements))


def linear_basis(space: HilbertSpace, modes: Sequence[int] | None = None) -> OperatorBasis:
    """{identity} followed by a_k, a_k^dag for each mode."""
    modes = range(space.n_modes) if modes is None else modes
    elements = [identity(space)]
    for m in modes:
        a = ladder_operator(space, m, "lower")
        elements += [a, a.dag]
    return OperatorBasis("linear", tuple(elements))
