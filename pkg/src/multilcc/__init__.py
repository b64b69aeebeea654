"""Lagrange coded evaluation of several matrix polynomials on one dataset."""

from .field import PrimeField
from .funcspec import PolySpec, TaskSpec, parse_polynomial, plaintext_outputs

__all__ = ["PrimeField", "PolySpec", "TaskSpec", "parse_polynomial", "plaintext_outputs"]
