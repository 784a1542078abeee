"""Batch experiment driver: JSON config in, ``report.json`` and ``orders.csv`` out."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algebra import closure_check, subspace_expectation
from .hamiltonians import ScenarioConfig, build_scenario, evaluate_hamiltonian
from .oracles import DYSON_MAX_ORDER, converge_dyson, converge_iteration_series, \
    dyson_series_expectation, exact_expectation, heisenberg_iteration_series
from .series import bch_series, converge_series, nested_series_expectation
from .slicing import SliceGrid

METHODS = ("nested", "bch", "dyson", "heisenberg_iteration", "subspace", "exact")
CSV_HEADER = ["method", "order", "term_real", "term_imag", "partial_sum",
              "residual_vs_exact", "n_slices"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SlicePolicy:
    initial: int = 64
    max: int = 2**13
    tolerance: float = 1e-10
    fixed: int | None = None  # a fixed slice count disables refinement


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    time: float
    methods: tuple[str, ...] = ("nested", "exact")
    max_order: int = 3
    slices: SlicePolicy = field(default_factory=SlicePolicy)
    out_dir: str = "out"
    seed: int = 0
    closure_depth: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        allowed = {"scenario", "time", "methods", "max_order", "slices", "output", "seed",
                   "closure_depth"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        try:
            scenario = ScenarioConfig.from_dict(d["scenario"])
            methods = tuple(d.get("methods", ("nested",)))
            bad = [m for m in methods if m not in METHODS]
            if bad or not methods:
                raise ConfigError(f"unknown or empty methods {bad}")
            if "exact" not in methods:
                methods = methods + ("exact",)
            slices = SlicePolicy(**d.get("slices", {}))
            t = float(d.get("time", scenario.horizon))
            if not math.isfinite(t) or t < 0:
                raise ConfigError("a finite, non-negative evaluation time is required")
            if t > scenario.horizon:
                raise ConfigError("evaluation time lies beyond the scenario horizon")
            max_order = int(d.get("max_order", 3))
            if max_order < 1:
                raise ConfigError("max_order must be at least 1")
            return cls(scenario, t, methods, max_order, slices,
                       str(d.get("output", {}).get("dir", "out")), int(d.get("seed", 0)),
                       d.get("closure_depth"))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "time": self.time,
            "methods": list(self.methods),
            "max_order": self.max_order,
            "slices": {"initial": self.slices.initial, "max": self.slices.max,
                       "tolerance": self.slices.tolerance, "fixed": self.slices.fixed},
            "output": {"dir": self.out_dir},
            "seed": self.seed,
            "closure_depth": self.closure_depth,
        }


def load_config(path, order: int | None = None, slices: int | None = None,
                seed: int | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = ExperimentConfig.from_dict(raw)
    if order is not None:
        cfg = replace(cfg, max_order=int(order))
    if slices is not None:
        cfg = replace(cfg, slices=replace(cfg.slices, fixed=int(slices)))
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    return cfg


def _pair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _series_entry(terms, n_slices, converged, exact, extra=None) -> dict:
    terms = np.asarray(terms, dtype=complex)
    partial = np.cumsum(terms)
    entry = {
        "status": "ok",
        "order_terms": [_pair(z) for z in terms],
        "partial_sums": [_pair(z) for z in partial],
        "residuals_vs_exact": [float(abs(exact - p)) for p in partial],
        "n_slices": n_slices,
        "converged": bool(converged),
    }
    entry.update(extra or {})
    return entry


def _is_constant(spec, t) -> bool:
    if spec.is_time_independent():
        return True
    samples = np.linspace(0.0, t, 7)
    h0 = evaluate_hamiltonian(spec, 0.0).entries
    return all(np.array_equal(evaluate_hamiltonian(spec, s).entries, h0) for s in samples)


def _run_method(method, cfg: ExperimentConfig, sc, exact) -> dict:
    spec, O, psi, t, order = sc.spec, sc.observable, sc.initial, cfg.time, cfg.max_order
    pol = cfg.slices
    if method == "nested":
        if pol.fixed:
            res = nested_series_expectation(spec, O, psi, t, order, SliceGrid(t, pol.fixed))
        else:
            res = converge_series(spec, O, psi, t, order, pol.tolerance, pol.max, pol.initial)
        return _series_entry(res.order_terms, res.n_slices, res.converged or bool(pol.fixed),
                             exact, {"leakage": res.leakage})
    if method == "bch":
        if not _is_constant(spec, t):
            raise ValueError("bch requires a time-independent Hamiltonian")
        res = bch_series(evaluate_hamiltonian(spec, 0.0), O, psi, t, order)
        return _series_entry(res.order_terms, None, True, exact, {"leakage": res.leakage})
    if method == "dyson":
        if order > DYSON_MAX_ORDER:
            raise ValueError(f"dyson is capped at order {DYSON_MAX_ORDER}")
        if pol.fixed:
            res = dyson_series_expectation(spec, O, psi, t, order, SliceGrid(t, pol.fixed))
            ok = True
        else:
            res = converge_dyson(spec, O, psi, t, order, pol.tolerance, pol.max, pol.initial)
            ok = res.converged
        return _series_entry(res.grouped_expectation_terms, res.n_slices, ok, exact)
    if method == "heisenberg_iteration":
        if pol.fixed:
            ops = heisenberg_iteration_series(spec, O, t, order, SliceGrid(t, pol.fixed))
            ok, n = True, pol.fixed
        else:
            ops, ok = converge_iteration_series(spec, O, t, order, pol.tolerance, pol.max,
                                                pol.initial)
            n = None
        a = psi.amplitudes
        terms = [np.vdot(a, O.entries @ a)] + [np.vdot(a, s.entries @ a) for s in ops]
        return _series_entry(terms, n, ok, exact)
    if method == "subspace":
        value = subspace_expectation(O, spec, sc.closure_basis, psi, t, n_steps=2000)
        return {"status": "ok", "value": _pair(value), "residual_vs_exact": float(abs(exact - value))}
    raise ValueError(f"unknown method {method!r}")


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run every requested method against the exact reference; write report and CSV."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.random.seed(cfg.seed)
    sc = build_scenario(cfg.scenario)
    timing = {}

    start = time.perf_counter()
    ex = exact_expectation(sc.spec, sc.observable, sc.initial, cfg.time)
    timing["exact"] = time.perf_counter() - start
    exact = ex.value
    methods = {"exact": {"status": "ok", "value": _pair(exact), "error_estimate": ex.error_estimate,
                         "n_slices": ex.n_slices, "converged": ex.converged}}

    for method in cfg.methods:
        if method == "exact":
            continue
        start = time.perf_counter()
        try:
            methods[method] = _run_method(method, cfg, sc, exact)
        except (ValueError, ArithmeticError) as exc:
            methods[method] = {"status": "failed", "reason": str(exc)}
        timing[method] = time.perf_counter() - start

    depth = cfg.closure_depth or cfg.max_order
    try:
        rep = closure_check(sc.observable, sc.spec, sc.closure_basis,
                            np.linspace(0.0, cfg.time, 5), depth)
        closure = {"closed": rep.closed, "max_residual": rep.max_residual,
                   "basis": rep.basis_label, "depth": rep.depth,
                   "depth_residuals": rep.depth_residuals}
    except ValueError as exc:
        closure = {"closed": None, "reason": str(exc)}

    report = {
        "provenance": {
            "config": cfg.to_dict(),
            "seed": cfg.seed,
            "versions": {"commpert": _version(), "numpy": np.__version__,
                         "python": platform.python_version()},
        },
        "time": cfg.time,
        "methods": methods,
        "closure": closure,
        "timing": timing,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_csv(out / "orders.csv", methods)
    requested = [m for m in cfg.methods if m != "exact"]
    report["all_failed"] = bool(requested) and all(
        methods[m]["status"] == "failed" for m in requested)
    return report


def _write_csv(path: Path, methods: dict):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for name, entry in methods.items():
            if entry["status"] != "ok":
                continue
            if "order_terms" in entry:
                for m, (term, partial, resid) in enumerate(zip(
                        entry["order_terms"], entry["partial_sums"], entry["residuals_vs_exact"])):
                    writer.writerow([name, m, repr(term[0]), repr(term[1]),
                                     repr(partial[0]), repr(resid),
                                     "" if entry["n_slices"] is None else entry["n_slices"]])
            else:
                # scalar methods: a single row with an empty order column
                value = entry["value"][0]
                writer.writerow([name, "", repr(value), repr(entry["value"][1]), repr(value),
                                 repr(entry.get("residual_vs_exact", 0.0)),
                                 entry.get("n_slices", "")])


def _version() -> str:
    from . import __version__
    return __version__
