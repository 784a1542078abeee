"""Time-dependent Hamiltonians as sums of envelope-weighted constant operators.

Two scenario builders are provided:

``stimulated_emission``
    Classical currents driving field modes, ``H(t) = sum_k g_k(t) a_k^dag + h.c.``,
    where every drive is tagged with the current it belongs to (``"c"`` or
    ``"ext"``) so the Hamiltonian splits as ``H_c + H_ext``.
``mode_network``
    A passive coupled-mode (beam-splitter) network,
    ``H(t) = sum_i w_i(t) n_i + sum_{i<j} e_ij(t) (a_i^dag a_j + a_j^dag a_i)``.
    Zero-point constants are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .hilbert import (
    HERMITIAN_ATOL,
    HilbertSpace,
    OperatorBasis,
    OperatorMatrix,
    StateVector,
    bilinear_basis,
    build_space,
    fock_state,
    ladder_operator,
    linear_basis,
)

ENVELOPE_KINDS = ("constant", "sinusoid", "gaussian_pulse", "piecewise_constant")


class HorizonError(ValueError):
    """Raised when a Hamiltonian is evaluated outside [0, horizon]."""


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        re, im = value
        return complex(re, im)
    return complex(value)


@dataclass(frozen=True)
class EnvelopeSpec:
    """Scalar time profile of a Hamiltonian term.

    ``constant``            amplitude
    ``sinusoid``            amplitude * sin(frequency * t + phase)
    ``gaussian_pulse``      amplitude * exp(-(t - center)^2 / (2 width^2))
                            * cos(frequency * t + phase)
    ``piecewise_constant``  values[j] on [breakpoints[j-1], breakpoints[j]);
                            ``len(values) == len(breakpoints) + 1``
    """

    kind: str = "constant"
    amplitude: complex = 1.0
    frequency: float = 0.0
    phase: float = 0.0
    center: float = 0.0
    width: float = 1.0
    breakpoints: tuple[float, ...] = ()
    values: tuple[complex, ...] = ()

    def __post_init__(self):
        if self.kind not in ENVELOPE_KINDS:
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        object.__setattr__(self, "amplitude", _as_complex(self.amplitude))
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "values", tuple(_as_complex(v) for v in self.values))
        if self.kind == "gaussian_pulse" and not self.width > 0:
            raise ValueError("gaussian width must be positive")
        if self.kind == "piecewise_constant":
            if len(self.values) != len(self.breakpoints) + 1:
                raise ValueError("piecewise envelope needs len(values) == len(breakpoints) + 1")
            if np.any(np.diff(self.breakpoints) <= 0):
                raise ValueError("breakpoints must be strictly increasing")

    @property
    def is_real(self) -> bool:
        if self.kind == "piecewise_constant":
            return all(v.imag == 0 for v in self.values)
        return self.amplitude.imag == 0

    def __call__(self, t):
        """Evaluate at a scalar or an array of times (always complex)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full(t.shape, self.amplitude, dtype=complex)
        elif self.kind == "sinusoid":
            out = self.amplitude * np.sin(self.frequency * t + self.phase)
        elif self.kind == "gaussian_pulse":
            shape = np.exp(-((t - self.center) ** 2) / (2.0 * self.width**2))
            out = self.amplitude * shape * np.cos(self.frequency * t + self.phase)
        else:
            idx = np.searchsorted(self.breakpoints, t, side="right")
            out = np.asarray(self.values, dtype=complex)[idx]
        return np.asarray(out, dtype=complex)

    def scaled(self, factor) -> "EnvelopeSpec":
        factor = complex(factor)
        if self.kind == "piecewise_constant":
            return replace(self, values=tuple(factor * v for v in self.values))
        return replace(self, amplitude=factor * self.amplitude)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "piecewise_constant":
            d["breakpoints"] = list(self.breakpoints)
            d["values"] = [[v.real, v.imag] for v in self.values]
            return d
        d["amplitude"] = [self.amplitude.real, self.amplitude.imag]
        if self.kind in ("sinusoid", "gaussian_pulse"):
            d["frequency"] = self.frequency
            d["phase"] = self.phase
        if self.kind == "gaussian_pulse":
            d["center"] = self.center
            d["width"] = self.width
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvelopeSpec":
        allowed = {"kind", "amplitude", "frequency", "phase", "center", "width",
                   "breakpoints", "values"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown envelope fields {sorted(unknown)}")
        return cls(**d)


def constant(amplitude=1.0) -> EnvelopeSpec:
    return EnvelopeSpec("constant", amplitude)


def sinusoid(amplitude, frequency=1.0, phase=0.0) -> EnvelopeSpec:
    return EnvelopeSpec("sinusoid", amplitude, frequency=frequency, phase=phase)


@dataclass(frozen=True)
class HamiltonianTerm:
    """One summand ``f(t) A`` or, with ``hermitize``, ``f(t) A + conj(f(t)) A^dag``.

    ``group`` tags which physical source the term belongs to; evaluation sums
    terms group by group so a spec split by source adds up exactly.
    """

    envelope: EnvelopeSpec
    operator: OperatorMatrix
    hermitize: bool = False
    group: str = ""

    def components(self) -> list[tuple[EnvelopeSpec | None, OperatorMatrix]]:
        """(envelope, operator) pairs; a ``None`` envelope means the conjugate of the
        preceding one."""
        if self.hermitize:
            return [(self.envelope, self.operator), (None, self.operator.dag)]
        return [(self.envelope, self.operator)]


@dataclass(frozen=True)
class HamiltonianSpec:
    space: HilbertSpace
    terms: tuple[HamiltonianTerm, ...] = ()
    label: str = ""
    horizon: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if term.operator.space != self.space:
                raise ValueError("term operator lives on a different space")

    def scaled(self, factor: float) -> "HamiltonianSpec":
        """Every envelope multiplied by ``factor``."""
        terms = tuple(replace(t, envelope=t.envelope.scaled(factor)) for t in self.terms)
        return replace(self, terms=terms)

    def only_groups(self, *groups: str) -> "HamiltonianSpec":
        terms = tuple(t for t in self.terms if t.group in groups)
        return replace(self, terms=terms)

    def groups(self) -> list[str]:
        seen = []
        for t in self.terms:
            if t.group not in seen:
                seen.append(t.group)
        return seen

    def component_operators(self) -> list[np.ndarray]:
        """Constant operators ``A_c`` such that ``H(t) = sum_c f_c(t) A_c``."""
        ops = []
        for term in self.terms:
            ops += [op.entries for _, op in term.components()]
        return ops

    def component_coefficients(self, times) -> np.ndarray:
        """Envelope values ``f_c(t)`` with shape ``(len(times), n_components)``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        self._check_times(times)
        cols = []
        for term in self.terms:
            f = term.envelope(times)
            cols.append(f)
            if term.hermitize:
                cols.append(f.conj())
        if not cols:
            return np.zeros((len(times), 0), dtype=complex)
        return np.stack(cols, axis=1)

    def _check_times(self, times: np.ndarray):
        if times.size and (times.min() < 0.0 or times.max() > self.horizon):
            raise HorizonError(f"time outside [0, {self.horizon}]")

    def is_time_independent(self) -> bool:
        return all(t.envelope.kind == "constant" for t in self.terms)


def evaluate_hamiltonian(spec: HamiltonianSpec, t: float) -> OperatorMatrix:
    spec._check_times(np.array([t], dtype=float))
    n = spec.space.total_dim
    total = np.zeros((n, n), dtype=complex)
    for group in spec.groups():
        partial = np.zeros((n, n), dtype=complex)
        for term in spec.terms:
            if term.group != group:
                continue
            f = complex(term.envelope(t))
            partial += f * term.operator.entries
            if term.hermitize:
                partial += f.conjugate() * term.operator.entries.conj().T
        total += partial
    defect = float(np.max(np.abs(total - total.conj().T))) if n else 0.0
    if defect >= HERMITIAN_ATOL * max(1.0, float(np.max(np.abs(total)))):
        raise ValueError(f"Hamiltonian {spec.label!r} is not Hermitian at t={t} "
                         f"(defect {defect:.3e})")
    return OperatorMatrix(spec.space, total, hermitian=True)


class SliceHamiltonians:
    """Fast repeated evaluation of ``H(t)`` as a linear combination of the
    component operators (no Hermiticity re-check per call)."""

    def __init__(self, spec: HamiltonianSpec, times):
        self.times = np.atleast_1d(np.asarray(times, dtype=float))
        self.coefficients = spec.component_coefficients(self.times)
        ops = spec.component_operators()
        n = spec.space.total_dim
        self._ops = np.stack(ops) if ops else np.zeros((0, n, n), dtype=complex)
        self._n = n
        # spot check Hermiticity at a few of the requested times
        for t in self.times[:: max(1, len(self.times) // 4)][:5]:
            evaluate_hamiltonian(spec, float(t))

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k: int) -> np.ndarray:
        if not len(self._ops):
            return np.zeros((self._n, self._n), dtype=complex)
        return np.tensordot(self.coefficients[k], self._ops, axes=1)


# ---------------------------------------------------------------------------
# scenarios

SCENARIOS = ("stimulated_emission", "mode_network")


@dataclass(frozen=True)
class Drive:
    mode: int
    envelope: EnvelopeSpec
    source: str = "c"


@dataclass(frozen=True)
class Frequency:
    mode: int
    envelope: EnvelopeSpec


@dataclass(frozen=True)
class Coupling:
    modes: tuple[int, int]
    envelope: EnvelopeSpec


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of one of the two scenarios.

    ``initial_superposition`` (list of ``(amplitude, occupations)``) overrides
    ``initial_occupations`` when given; it is normalized on build.
    ``observable`` is ``{"kind": "number", "mode": i}`` or
    ``{"kind": "quadrature", "coefficients": [[mode, re, im], ...]}``.
    """

    scenario: str
    mode_dims: tuple[int, ...]
    drives: tuple[Drive, ...] = ()
    frequencies: tuple[Frequency, ...] = ()
    couplings: tuple[Coupling, ...] = ()
    initial_occupations: tuple[int, ...] | None = None
    initial_superposition: tuple[tuple[complex, tuple[int, ...]], ...] = ()
    observable: dict = field(default_factory=dict)
    horizon: float = math.inf

    def __post_init__(self):
        # make the default observable explicit so configs round-trip
        object.__setattr__(self, "observable", dict(self.observable_spec()))

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        n = len(self.mode_dims)

        def check_mode(m):
            if not (isinstance(m, (int, np.integer)) and 0 <= m < n):
                raise ValueError(f"mode {m!r} does not exist (have {n} modes)")

        for d in self.drives:
            check_mode(d.mode)
        for f in self.frequencies:
            check_mode(f.mode)
        seen = set()
        for c in self.couplings:
            i, j = c.modes
            check_mode(i)
            check_mode(j)
            if i == j:
                raise ValueError("a coupling needs two distinct modes")
            key = frozenset((i, j))
            if key in seen:
                # e_ij and e_ji describe the same symmetric coupling
                raise ValueError(f"coupling between modes {i} and {j} given twice")
            seen.add(key)
        if self.scenario == "stimulated_emission" and (self.couplings or self.frequencies):
            raise ValueError("stimulated_emission takes drives only")
        if self.scenario == "mode_network" and self.drives:
            raise ValueError("mode_network takes frequencies and couplings only")
        if self.initial_occupations is not None:
            if len(self.initial_occupations) != n:
                raise ValueError("initial_occupations length does not match mode count")
        for _, occ in self.initial_superposition:
            if len(occ) != n:
                raise ValueError("superposition occupations length does not match mode count")
        kind = self.observable_spec()["kind"]
        if kind == "number":
            check_mode(self.observable_spec()["mode"])
        elif kind == "quadrature":
            for m, *_ in self.observable_spec()["coefficients"]:
                check_mode(m)
        else:
            raise ValueError(f"unknown observable kind {kind!r}")

    def observable_spec(self) -> dict:
        if self.observable:
            return self.observable
        if self.scenario == "mode_network":
            return {"kind": "number", "mode": 1}
        return {"kind": "quadrature", "coefficients": [[0, 1.0, 0.0]]}

    def only_sources(self, *sources: str) -> "ScenarioConfig":
        return replace(self, drives=tuple(d for d in self.drives if d.source in sources))

    def with_initial(self, occupations: Sequence[int]) -> "ScenarioConfig":
        return replace(self, initial_occupations=tuple(occupations), initial_superposition=())

    def scaled(self, factor: float) -> "ScenarioConfig":
        return replace(
            self,
            drives=tuple(replace(d, envelope=d.envelope.scaled(factor)) for d in self.drives),
            frequencies=tuple(replace(f, envelope=f.envelope.scaled(factor))
                              for f in self.frequencies),
            couplings=tuple(replace(c, envelope=c.envelope.scaled(factor))
                            for c in self.couplings),
        )

    # -- (de)serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = {"scenario": self.scenario, "mode_dims": list(self.mode_dims)}
        if self.drives:
            d["drives"] = [{"mode": x.mode, "source": x.source,
                            "envelope": x.envelope.to_dict()} for x in self.drives]
        if self.frequencies:
            d["frequencies"] = [{"mode": x.mode, "envelope": x.envelope.to_dict()}
                                for x in self.frequencies]
        if self.couplings:
            d["couplings"] = [{"modes": list(x.modes), "envelope": x.envelope.to_dict()}
                              for x in self.couplings]
        if self.initial_occupations is not None:
            d["initial_occupations"] = list(self.initial_occupations)
        if self.initial_superposition:
            d["initial_superposition"] = [
                {"amplitude": [complex(a).real, complex(a).imag], "occupations": list(o)}
                for a, o in self.initial_superposition]
        d["observable"] = self.observable_spec()
        if math.isfinite(self.horizon):
            d["horizon"] = self.horizon
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        allowed = {"scenario", "mode_dims", "drives", "frequencies", "couplings",
                   "initial_occupations", "initial_superposition", "observable", "horizon"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown scenario fields {sorted(unknown)}")
        try:
            cfg = cls(
                scenario=d["scenario"],
                mode_dims=tuple(int(x) for x in d["mode_dims"]),
                drives=tuple(Drive(x["mode"], EnvelopeSpec.from_dict(x["envelope"]),
                                   x.get("source", "c")) for x in d.get("drives", ())),
                frequencies=tuple(Frequency(x["mode"], EnvelopeSpec.from_dict(x["envelope"]))
                                  for x in d.get("frequencies", ())),
                couplings=tuple(Coupling(tuple(x["modes"]), EnvelopeSpec.from_dict(x["envelope"]))
                                for x in d.get("couplings", ())),
                initial_occupations=(tuple(d["initial_occupations"])
                                     if "initial_occupations" in d else None),
                initial_superposition=tuple(
                    (_as_complex(x["amplitude"]), tuple(x["occupations"]))
                    for x in d.get("initial_superposition", ())),
                observable=dict(d.get("observable", {})),
                horizon=float(d.get("horizon", math.inf)),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed scenario config: {exc}") from exc
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class Scenario:
    spec: HamiltonianSpec
    initial: StateVector
    observable: OperatorMatrix
    closure_basis: OperatorBasis


def _initial_state(config: ScenarioConfig, space: HilbertSpace) -> StateVector:
    if config.initial_superposition:
        amps = np.zeros(space.total_dim, dtype=complex)
        for amp, occ in config.initial_superposition:
            amps += complex(amp) * fock_state(space, occ).amplitudes
        return StateVector.normalized(space, amps)
    occ = config.initial_occupations or (0,) * space.n_modes
    return fock_state(space, occ)


def _observable(config: ScenarioConfig, space: HilbertSpace) -> OperatorMatrix:
    obs = config.observable_spec()
    if obs["kind"] == "number":
        return ladder_operator(space, obs["mode"], "number")
    entries = np.zeros((space.total_dim,) * 2, dtype=complex)
    for mode, re, im in obs["coefficients"]:
        a = ladder_operator(space, mode, "lower").entries
        c = complex(re, im)
        entries += c * a + c.conjugate() * a.conj().T
    return OperatorMatrix(space, entries, hermitian=True)


def build_scenario(config: ScenarioConfig) -> Scenario:
    config.validate()
    space = build_space(config.mode_dims)
    terms = []
    if config.scenario == "stimulated_emission":
        for d in config.drives:
            # g(t) a^dag + conj(g(t)) a
            a_dag = ladder_operator(space, d.mode, "raise")
            terms.append(HamiltonianTerm(d.envelope, a_dag, hermitize=True, group=d.source))
        modes = sorted({d.mode for d in config.drives}
                       | {c[0] for c in config.observable_spec().get("coefficients", [])})
        basis = linear_basis(space, modes)
    else:
        for f in config.frequencies:
            n = ladder_operator(space, f.mode, "number")
            if f.envelope.is_real:
                terms.append(HamiltonianTerm(f.envelope, n, group="network"))
            else:
                raise ValueError("mode frequencies must be real")
        for c in config.couplings:
            i, j = c.modes
            hop = ladder_operator(space, i, "raise") @ ladder_operator(space, j, "lower")
            terms.append(HamiltonianTerm(c.envelope, hop, hermitize=True, group="network"))
        basis = bilinear_basis(space)
    spec = HamiltonianSpec(space, tuple(terms), label=config.scenario, horizon=config.horizon)
    return Scenario(spec, _initial_state(config, space), _observable(config, space), basis)


def stimulated_emission_config(mode_dims: Sequence[int], drives: Sequence[Drive],
                               probe: Sequence[tuple[int, complex]] = ((0, 1.0),),
                               horizon: float = math.inf) -> ScenarioConfig:
    coeffs = [[m, complex(c).real, complex(c).imag] for m, c in probe]
    return ScenarioConfig("stimulated_emission", tuple(mode_dims), drives=tuple(drives),
                          observable={"kind": "quadrature", "coefficients": coeffs},
                          horizon=horizon)


def mode_network_config(mode_dims: Sequence[int], couplings: Sequence[Coupling],
                        frequencies: Sequence[Frequency] = (),
                        initial_occupations: Sequence[int] | None = None,
                        output_mode: int = 1, horizon: float = math.inf) -> ScenarioConfig:
    occ = tuple(initial_occupations) if initial_occupations is not None else None
    return ScenarioConfig("mode_network", tuple(mode_dims), frequencies=tuple(frequencies),
                          couplings=tuple(couplings), initial_occupations=occ,
                          observable={"kind": "number", "mode": output_mode}, horizon=horizon)
