import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from commpert.hamiltonians import (
    Coupling,
    Drive,
    EnvelopeSpec,
    Frequency,
    HamiltonianSpec,
    HamiltonianTerm,
    HorizonError,
    ScenarioConfig,
    SliceHamiltonians,
    build_scenario,
    constant,
    evaluate_hamiltonian,
    mode_network_config,
    sinusoid,
    stimulated_emission_config,
)
from commpert.hilbert import build_space, identity, ladder_operator
from commpert.oracles import exact_expectation
from commpert.suites import drive_pair_config, three_mode_network


def test_envelope_kinds():
    assert constant(2.0)(0.3) == 2.0
    assert sinusoid(2.0, 3.0, 0.1)(0.5) == pytest.approx(2.0 * math.sin(1.6))
    g = EnvelopeSpec("gaussian_pulse", 1.5, frequency=2.0, center=1.0, width=0.5)
    assert g(1.2) == pytest.approx(1.5 * math.exp(-0.08) * math.cos(2.4))
    p = EnvelopeSpec("piecewise_constant", breakpoints=(1.0, 2.0), values=(1, 2j, 3))
    assert list(p(np.array([0.5, 1.0, 1.5, 2.5]))) == [1, 2j, 2j, 3]


@pytest.mark.parametrize("kwargs", [
    dict(kind="wavelet"),
    dict(kind="gaussian_pulse", width=0.0),
    dict(kind="piecewise_constant", breakpoints=(2.0, 1.0), values=(1, 2, 3)),
    dict(kind="piecewise_constant", breakpoints=(1.0,), values=(1,)),
])
def test_envelope_validation(kwargs):
    with pytest.raises(ValueError):
        EnvelopeSpec(**kwargs)


def test_envelope_round_trip():
    env = EnvelopeSpec("gaussian_pulse", 0.5 + 0.25j, frequency=2.0, phase=0.3, center=1.0,
                       width=0.2)
    assert EnvelopeSpec.from_dict(env.to_dict()) == env


def test_constant_term_is_constant(space4):
    h0 = ladder_operator(space4, 0, "number")
    spec = HamiltonianSpec(space4, (HamiltonianTerm(constant(1.0), h0),))
    for t in (0.0, 0.7, 3.0):
        assert np.array_equal(evaluate_hamiltonian(spec, t).entries, h0.entries)


def test_hermitized_real_envelope(space4):
    a = ladder_operator(space4, 0, "lower")
    spec = HamiltonianSpec(space4, (HamiltonianTerm(constant(0.3), a, hermitize=True),))
    assert np.allclose(evaluate_hamiltonian(spec, 1.0).entries, 0.3 * (a + a.dag).entries)


def test_non_hermitian_term_rejected(space4):
    a = ladder_operator(space4, 0, "lower")
    spec = HamiltonianSpec(space4, (HamiltonianTerm(constant(1.0), a),))
    with pytest.raises(ValueError):
        evaluate_hamiltonian(spec, 0.0)


def test_horizon_enforced(space4):
    spec = HamiltonianSpec(space4, (HamiltonianTerm(constant(1.0), identity(space4)),),
                           horizon=1.0)
    with pytest.raises(HorizonError):
        evaluate_hamiltonian(spec, 1.5)


def test_constant_network_is_beam_splitter():
    eps = 0.7
    sc = build_scenario(mode_network_config([3, 3], (Coupling((0, 1), constant(eps)),)))
    s = sc.spec.space
    hop = ladder_operator(s, 0, "raise") @ ladder_operator(s, 1, "lower")
    expected = eps * (hop.entries + hop.entries.conj().T)
    assert np.allclose(evaluate_hamiltonian(sc.spec, 0.4).entries, expected)


def test_stimulated_emission_displacement():
    g0, t = 0.2, 1.0
    sc = build_scenario(stimulated_emission_config([14], (Drive(0, constant(1j * g0)),)))
    assert exact_expectation(sc.spec, sc.observable, sc.initial, t).value == pytest.approx(
        2 * g0 * t, abs=1e-10)
    assert len(sc.closure_basis) == 3


def test_beam_splitter_rotation():
    eps, t = 0.5, 1.3
    sc = build_scenario(mode_network_config([3, 3], (Coupling((0, 1), constant(eps)),),
                                            initial_occupations=(1, 0)))
    value = exact_expectation(sc.spec, sc.observable, sc.initial, t).value
    assert value == pytest.approx(math.sin(eps * t) ** 2, abs=1e-10)


def test_zero_drive_is_static():
    sc = build_scenario(stimulated_emission_config([6], (Drive(0, constant(0.0)),)))
    assert not np.any(evaluate_hamiltonian(sc.spec, 0.5).entries)
    assert exact_expectation(sc.spec, sc.observable, sc.initial, 2.0).value == 0.0


@pytest.mark.parametrize("bad", [
    dict(scenario="stimulated_emission", mode_dims=[4], drives=[
        {"mode": 3, "envelope": {"kind": "constant"}}]),
    dict(scenario="mode_network", mode_dims=[3, 3], couplings=[
        {"modes": [0, 0], "envelope": {"kind": "constant"}}]),
    dict(scenario="mode_network", mode_dims=[3, 3], couplings=[
        {"modes": [0, 2], "envelope": {"kind": "constant"}}]),
    dict(scenario="black_hole", mode_dims=[3]),
    dict(scenario="mode_network", mode_dims=[3, 3], observable={"kind": "number", "mode": 5}),
])
def test_inconsistent_mode_references(bad):
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict(bad)


def test_scenario_config_round_trip():
    cfg = three_mode_network()
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    cfg = drive_pair_config()
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg


def test_slice_hamiltonians_match_direct_evaluation():
    sc = build_scenario(three_mode_network())
    times = np.linspace(0.05, 1.9, 9)
    fast = SliceHamiltonians(sc.spec, times)
    for k, t in enumerate(times):
        assert np.allclose(fast[k], evaluate_hamiltonian(sc.spec, t).entries, atol=1e-14)


# -- properties ---------------------------------------------------------------

amplitudes = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
reals = st.floats(-3, 3)


@settings(max_examples=25, deadline=None)
@given(amplitudes, amplitudes, reals, st.lists(st.floats(0, 20), min_size=1, max_size=100))
def test_hamiltonian_hermitian_at_random_times(g1, g2, w, times):
    cfg = stimulated_emission_config([3, 3], (Drive(0, sinusoid(g1, 1.7)),
                                              Drive(1, constant(g2), "ext")))
    spec = build_scenario(cfg).spec
    net = build_scenario(mode_network_config(
        [3, 3], (Coupling((0, 1), sinusoid(w, 0.9)),), (Frequency(0, constant(w)),))).spec
    for t in times:
        for s in (spec, net):
            h = evaluate_hamiltonian(s, t).entries
            assert np.max(np.abs(h - h.conj().T)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(amplitudes, amplitudes, st.floats(0.1, 2.0), st.floats(0, 5))
def test_source_additivity_is_exact(gc, gext, freq, t):
    cfg = stimulated_emission_config([5], (Drive(0, sinusoid(gc, freq), "c"),
                                           Drive(0, constant(gext), "ext")))
    full = evaluate_hamiltonian(build_scenario(cfg).spec, t).entries
    hc = evaluate_hamiltonian(build_scenario(cfg.only_sources("c")).spec, t).entries
    hext = evaluate_hamiltonian(build_scenario(cfg.only_sources("ext")).spec, t).entries
    assert np.array_equal(full, hc + hext)


@settings(max_examples=25, deadline=None)
@given(reals, reals, reals, st.floats(0, 5))
def test_network_conserves_photon_number(e01, e12, w, t):
    cfg = mode_network_config([3, 3, 3], (Coupling((0, 1), sinusoid(e01, 1.1)),
                                          Coupling((1, 2), constant(e12))),
                              (Frequency(2, sinusoid(w, 0.4)),))
    sc = build_scenario(cfg)
    s = sc.spec.space
    total_n = sum(ladder_operator(s, m, "number").entries for m in range(3))
    h = evaluate_hamiltonian(sc.spec, t).entries
    assert np.max(np.abs(h @ total_n - total_n @ h)) < 1e-12
