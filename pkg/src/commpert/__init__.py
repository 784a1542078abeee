"""Expectation values from nested-commutator perturbation series."""

__version__ = "0.1.0"
