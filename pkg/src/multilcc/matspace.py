"""Matrices over F_q with instrumented multiplication counters.

Two kinds of multiplication are counted, matching the cost tables:

* ``scalar_mults`` -- one unit per field element times matrix (the "." count);
* ``mat_mults`` -- one unit per matrix times matrix (the "x" count), keyed by
  the dimension of the operands so n-by-n and (n+1)-by-(n+1) work can be told
  apart.

Matrix addition is not counted.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import PrimeField


class DimensionMismatch(ValueError):
    pass


@dataclass
class OpCounter:
    scalar_mults: int = 0
    mat_mults: Counter = dc_field(default_factory=Counter)

    @property
    def total_mat_mults(self) -> int:
        return sum(self.mat_mults.values())

    def merge(self, other: "OpCounter") -> "OpCounter":
        out = OpCounter(self.scalar_mults + other.scalar_mults, Counter(self.mat_mults))
        out.mat_mults.update(other.mat_mults)
        return out

    def snapshot(self) -> dict:
        return {"scalar_mults": self.scalar_mults, "mat_mults": {str(k): v for k, v in sorted(self.mat_mults.items())}}


def mat_mul(field: PrimeField, a: np.ndarray, b: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    if a.shape[-1] != b.shape[-2]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    if counter is not None:
        counter.mat_mults[a.shape[-1]] += 1
    return field.dot(a, b)


def mat_scalar_mul(field: PrimeField, c: int, a: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    if counter is not None:
        counter.scalar_mults += 1
    return (int(c) % field.q * a) % field.q


def mat_add(field: PrimeField, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot add {a.shape} and {b.shape}")
    return (a + b) % field.q


def mat_sub(field: PrimeField, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot subtract {a.shape} and {b.shape}")
    return (a - b) % field.q


def mat_vec(field: PrimeField, a: np.ndarray, v: np.ndarray, side: str = "right") -> np.ndarray:
    """``a @ v`` for side="right", ``v.T @ a`` for side="left"."""
    if side == "right":
        if a.shape[1] != v.shape[0]:
            raise DimensionMismatch(f"cannot multiply {a.shape} by vector of length {v.shape[0]}")
        return field.dot(a, v)
    if side == "left":
        if a.shape[0] != v.shape[0]:
            raise DimensionMismatch(f"cannot multiply vector of length {v.shape[0]} by {a.shape}")
        return field.dot(v, a)
    raise ValueError(f"side must be 'left' or 'right', not {side!r}")


def identity(field: PrimeField, n: int) -> np.ndarray:
    return np.eye(n, dtype=np.int64).astype(field.dtype)


def lin_comb(field: PrimeField, weights, mats: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """``sum_r weights[r] * mats[r]`` where ``mats`` stacks tuples of matrices.

    ``mats`` has shape ``(m, s, rows, cols)``: m tuples of s matrices each.
    Counts one scalar multiplication per (weight, matrix) pair, i.e. ``m * s``.
    """
    m = mats.shape[0]
    if len(weights) != m:
        raise DimensionMismatch(f"{len(weights)} weights for {m} tuples")
    if counter is not None:
        counter.scalar_mults += m * mats.shape[1]
    w = field.array(list(weights)).reshape(1, m)
    flat = mats.reshape(m, -1)
    return field.dot(w, flat).reshape(mats.shape[1:])
