"""Named verification suites (``linearity``, ``scaling``, ``closure``, ``distinctness``).

Each suite returns a list of checks with the measured value, the threshold
and a pass flag. The reference scenarios used by the suites are exposed as
plain functions so tests and notebooks can reuse them.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .algebra import (
    c_number_test,
    closure_check,
    expand_nested_commutator,
    nested_commutator_matrix,
    subspace_expectation,
    word_sets_disjoint,
)
from .hamiltonians import (
    Coupling,
    Drive,
    Frequency,
    ScenarioConfig,
    build_scenario,
    constant,
    evaluate_hamiltonian,
    mode_network_config,
    sinusoid,
    stimulated_emission_config,
)
from .hilbert import commutator, compress, safe_indices
from .oracles import exact_expectation, order_scaling_probe

SUITES = ("linearity", "scaling", "closure", "distinctness")


def drive_pair_config(g_c: float = 0.04, g_ext: float = 2.0, dim: int = 40) -> ScenarioConfig:
    """One field mode driven by a weak current ``c`` and a strong current ``ext``."""
    drives = (
        Drive(0, sinusoid(1j * g_c, 1.3, 0.4), "c"),
        Drive(0, sinusoid(g_ext * np.exp(0.7j), 0.9, 1.1), "ext"),
    )
    return stimulated_emission_config([dim], drives)


def three_mode_network(initial=(1, 1, 0)) -> ScenarioConfig:
    return mode_network_config(
        [4, 4, 4],
        couplings=(Coupling((0, 1), sinusoid(0.4, 1.0)),
                   Coupling((1, 2), sinusoid(0.3, 0.7, 1.0)),
                   Coupling((0, 2), constant(0.15))),
        frequencies=(Frequency(0, constant(0.2)), Frequency(2, sinusoid(0.1, 0.5))),
        initial_occupations=initial,
    )


def scaling_network(lam: float) -> ScenarioConfig:
    """Two-mode network ``lam * sin(t) (a_1^dag a_2 + h.c.)`` fed one photon in a
    complex superposition of the two modes.

    A real Fock input would make every odd order vanish, leaving nothing to
    measure at m = 1 and m = 3.
    """
    cfg = mode_network_config([3, 3], couplings=(Coupling((0, 1), sinusoid(1.0, 1.0)),))
    cfg = replace(cfg, initial_superposition=(
        (math.cos(math.pi / 6), (1, 0)), (1j * math.sin(math.pi / 6), (0, 1))))
    return cfg.scaled(lam)


def _check(name, measured, threshold, passed, **detail) -> dict:
    return {"name": name, "measured": measured, "threshold": threshold,
            "passed": bool(passed), **detail}


def linearity_suite(seed: int = 0) -> list[dict]:
    t = 1.0
    cfg = drive_pair_config()
    both = build_scenario(cfg)
    only_c = build_scenario(cfg.only_sources("c"))
    only_ext = build_scenario(cfg.only_sources("ext"))
    n = 256
    x_both, x_c, x_ext = (exact_expectation(s.spec, s.observable, s.initial, t, [n]).value
                          for s in (both, only_c, only_ext))
    superposition = abs(x_both - (x_c + x_ext)) / abs(x_both)
    attributable = abs((x_both - x_ext) - x_c)

    net = three_mode_network()
    outputs = []
    for n1 in (0, 1, 2):
        s = build_scenario(net.with_initial((n1, 1, 0)))
        outputs.append(exact_expectation(s.spec, s.observable, s.initial, 1.5, [n]).value)
    second_difference = abs(outputs[2] - 2 * outputs[1] + outputs[0])
    return [
        _check("superposition_relative_residual", superposition, 1e-10, superposition < 1e-10,
               values={"both": x_both, "c": x_c, "ext": x_ext}),
        _check("c_contribution_change_under_strong_ext", attributable, 1e-9, attributable < 1e-9),
        _check("fock_input_second_difference", second_difference, 1e-8,
               second_difference < 1e-8, outputs=outputs),
    ]


def scaling_suite(seed: int = 0) -> list[dict]:
    base = build_scenario(scaling_network(1.0))
    rows = order_scaling_probe(lambda lam: build_scenario(scaling_network(lam)).spec,
                               base.observable, base.initial, 1.0, [1, 2, 3], [0.2, 0.1])
    return [_check(f"order_{r.order}_residual_ratio", r.ratio, [0.75 * r.expected, 1.25 * r.expected],
                   abs(r.ratio / r.expected - 1.0) <= 0.25,
                   lambdas=[r.lambda_hi, r.lambda_lo], residuals=[r.residual_hi, r.residual_lo])
            for r in rows]


def closure_suite(seed: int = 0) -> list[dict]:
    stim = build_scenario(stimulated_emission_config([10], (Drive(0, sinusoid(0.3j, 1.3)),)))
    X = stim.observable
    h1, h2 = (evaluate_hamiltonian(stim.spec, s) for s in (0.4, 0.9))
    _, cnum = c_number_test(commutator(X, h1))
    second = compress(commutator(commutator(X, h1), h2), safe_indices(X.space, 1)).max_entry()

    net = build_scenario(three_mode_network())
    rep = closure_check(net.observable, net.spec, net.closure_basis, [0.1, 0.6, 1.3], 4)
    sub = subspace_expectation(net.observable, net.spec, net.closure_basis, net.initial, 1.5,
                               n_steps=2000)
    exact = exact_expectation(net.spec, net.observable, net.initial, 1.5).value
    return [
        _check("first_commutator_c_number_residual", cnum, 1e-10, cnum < 1e-10),
        _check("second_commutator_max_entry", second, 1e-10, second < 1e-10),
        _check("bilinear_closure_depth4_residual", rep.max_residual, 1e-9, rep.closed),
        _check("subspace_vs_exact", abs(sub - exact), 1e-7, abs(sub - exact) < 1e-7),
    ]


def distinctness_suite(seed: int = 0) -> list[dict]:
    left = expand_nested_commutator("left_nested", "OABC")
    right = expand_nested_commutator("right_nested", "ABCO")
    rng = np.random.default_rng(seed)
    mats = {s: rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for s in "OABC"}
    lm = nested_commutator_matrix("left_nested", [mats[s] for s in "OABC"])
    rm = nested_commutator_matrix("right_nested", [mats[s] for s in "ABCO"])
    gap = float(np.linalg.norm(lm - rm))
    disjoint = word_sets_disjoint(left, right)
    return [
        _check("word_sets_disjoint", disjoint, True, disjoint,
               left=[str(w) for w in left], right=[str(w) for w in right]),
        _check("random_matrix_norm_gap", gap, 1e-4, gap > 1e-4),
    ]


def run_suite(name: str, out_dir=None, seed: int = 0) -> dict:
    runners = {"linearity": linearity_suite, "scaling": scaling_suite,
               "closure": closure_suite, "distinctness": distinctness_suite}
    if name not in runners:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    checks = runners[name](seed)
    summary = {"suite": name, "seed": seed, "passed": all(c["passed"] for c in checks),
               "checks": checks}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"suite_{name}.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return summary


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
