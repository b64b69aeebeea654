"""Berlekamp-Welch decoding of Reed-Solomon codewords at arbitrary points.

Matrix-valued codewords are decoded entry by entry. All entries are first
tried together as an error-free codeword (interpolate, then check the surplus
observations); only entries that fail that check go through the full
Berlekamp-Welch solve, trying error-locator degrees 0, 1, ..., A in turn so
the lowest-degree locator wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import PrimeField, solve, vandermonde_inverse
from .matspace import DimensionMismatch


class DecodeFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Observation:
    point: int
    value: np.ndarray


@dataclass(frozen=True)
class DecodedPoly:
    coeffs: np.ndarray  # shape (K, rows, cols), lowest degree first
    error_points: tuple[int, ...]

    def __call__(self, field: PrimeField, x: int) -> np.ndarray:
        return horner(field, self.coeffs, x)


def horner(field: PrimeField, coeffs, x: int):
    acc = coeffs[-1] % field.q if isinstance(coeffs, np.ndarray) else coeffs[-1]
    x %= field.q
    for c in coeffs[-2::-1]:
        acc = (acc * x + c) % field.q
    return acc


def _poly_divmod(q: int, num: list[int], den: list[int]) -> tuple[list[int], list[int]]:
    num = list(num)
    inv_lead = pow(den[-1], -1, q)
    quot = [0] * max(len(num) - len(den) + 1, 1)
    for k in range(len(num) - len(den), -1, -1):
        c = num[k + len(den) - 1] * inv_lead % q
        quot[k] = c
        if c:
            for t, dt in enumerate(den):
                num[k + t] = (num[k + t] - c * dt) % q
    rem = num[: len(den) - 1]
    return quot, rem


def _bw_attempt(field: PrimeField, xs: Sequence[int], ys: Sequence[int], k: int, e: int) -> list[int] | None:
    """Solve y*E(x) = N(x) with E monic of degree e and deg N < k + e."""
    q = field.q
    rows, rhs = [], []
    for x, y in zip(xs, ys):
        powers = [pow(x, t, q) for t in range(k + e)]
        rows.append([y * powers[t] % q for t in range(e)] + [(-p) % q for p in powers])
        rhs.append((-y * pow(x, e, q)) % q)
    sol = solve(field, rows, rhs)
    if sol is None:
        return None
    err_loc = sol[:e] + [1]
    numer = sol[e:]
    quot, rem = _poly_divmod(q, numer, err_loc)
    if any(rem):
        return None
    quot = (quot + [0] * k)[:k]
    return quot


def bw_decode_scalar(field: PrimeField, obs: Sequence[tuple[int, int]], k: int, max_errors: int) -> tuple[list[int], tuple[int, ...]]:
    """Coefficients (length k) of the unique degree < k polynomial within distance ``max_errors``.

    Returns ``(coeffs, error_points)``. Raises DecodeFailure when no such
    polynomial exists among the supplied observations.
    """
    if len(obs) < k + 2 * max_errors:
        raise DecodeFailure(f"need {k + 2 * max_errors} observations, got {len(obs)}")
    xs = [int(x) % field.q for x, _ in obs]
    ys = [int(y) % field.q for _, y in obs]
    if len(set(xs)) != len(xs):
        raise ValueError("observation points must be distinct")
    for e in range(max_errors + 1):
        coeffs = _bw_attempt(field, xs, ys, k, e)
        if coeffs is None:
            continue
        bad = tuple(x for x, y in zip(xs, ys) if horner(field, coeffs, x) != y)
        if len(bad) <= max_errors:
            return coeffs, bad
    raise DecodeFailure(f"no degree<{k} polynomial within {max_errors} errors")


def decode_matrix_codeword(field: PrimeField, obs: Sequence[Observation], k: int, max_errors: int) -> DecodedPoly:
    """Decode a matrix-valued codeword from exactly the supplied observations."""
    if len(obs) < k + 2 * max_errors:
        raise DecodeFailure(f"need {k + 2 * max_errors} observations, got {len(obs)}")
    shapes = {o.value.shape for o in obs}
    if len(shapes) != 1:
        raise DimensionMismatch("observations must share one shape")
    (shape,) = shapes
    q = field.q
    order = sorted(range(len(obs)), key=lambda t: obs[t].point)
    points = [obs[t].point % q for t in order]
    values = np.stack([obs[t].value for t in order]).reshape(len(obs), -1)

    # Error-free attempt for every entry at once: interpolate through k points,
    # compare against the rest.
    base = tuple(points[:k])
    coeffs = field.dot(vandermonde_inverse(q, base), values[:k])
    fine = np.ones(values.shape[1], dtype=bool)
    if len(points) > k:
        vander = field.array([[pow(x, t, q) for t in range(k)] for x in points[k:]])
        predicted = field.dot(vander, coeffs)
        fine = np.all(predicted == values[k:], axis=0)

    errors: set[int] = set()
    if not fine.all():
        coeffs = coeffs.copy()
        for entry in np.flatnonzero(~fine):
            col = [(x, int(values[r, entry])) for r, x in enumerate(points)]
            entry_coeffs, bad = bw_decode_scalar(field, col, k, max_errors)
            coeffs[:, entry] = field.array(entry_coeffs)
            errors.update(bad)
    return DecodedPoly(coeffs.reshape((k,) + shape), tuple(sorted(errors)))
