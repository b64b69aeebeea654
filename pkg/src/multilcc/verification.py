"""Result verification for the one-round scheme.

4A ships a companion computation whose inputs are the data scaled by powers of
a secret nonzero ``v``; after decoding, every companion result must equal
``v**lcm_j`` times the base result.

4B borders every input matrix with ``u_j^T M`` / ``M v_j`` depending on its
position inside each monomial, so every recovered (n+1)x(n+1) block carries
``M v``, ``u^T M`` and ``u^T M v`` next to ``M``; the master checks these with
matrix-vector products only.

Keys are drawn by the master and never leave it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import PrimeField
from .funcspec import (
    FIRST,
    LAST,
    MIDDLE,
    Degree1Monomial,
    DegreeDecomposition,
    OccurrenceExpansion,
    PolySpec,
    TaskSpec,
    degree_decompose,
    occurrence_expand,
    split_linear,
)
from .matspace import OpCounter, mat_vec


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    checks: tuple[bool, ...]  # one per computation, task order
    failing: tuple[tuple[int, int], ...]

    @classmethod
    def from_checks(cls, task: TaskSpec, checks: Sequence[bool]) -> "Verdict":
        failing = tuple(ji for ji, ok in zip(task.computations(), checks) if not ok)
        return cls(not failing, tuple(bool(c) for c in checks), failing)


# -- 4A -----------------------------------------------------------------------


@dataclass(frozen=True)
class KeyA:
    v: int

    def __post_init__(self):
        if self.v == 0:
            raise ValueError("verification key must be nonzero")


@dataclass(frozen=True)
class CompanionTask:
    decompositions: tuple[DegreeDecomposition, ...]
    polys: tuple[PolySpec, ...]
    data: tuple[np.ndarray, ...]  # per group: (ell_j, s_hat_j, n, n)

    @property
    def lcms(self) -> tuple[int, ...]:
        return tuple(dec.lcm for dec in self.decompositions)


def draw_key_a(field: PrimeField, rng: np.random.Generator) -> KeyA:
    return KeyA(field.random_nonzero(rng))


def va_transform(field: PrimeField, task: TaskSpec, key: KeyA, counter: OpCounter | None = None) -> CompanionTask:
    decs = tuple(degree_decompose(g.poly) for g in task.groups)
    data = []
    for j, dec in enumerate(decs):
        rows = [np.stack(dec.companion_inputs(field, task.tuple_matrices(j, i), key.v, counter)) for i in range(len(task.groups[j].inputs))]
        data.append(np.stack(rows))
    return CompanionTask(decs, tuple(d.companion for d in decs), tuple(data))


def va_check(field: PrimeField, task: TaskSpec, base: Sequence[np.ndarray], companion: Sequence[np.ndarray], key: KeyA, lcms: Sequence[int]) -> Verdict:
    """Accept iff every companion result equals ``v**lcm_j`` times its base result."""
    checks = []
    for (j, _), c, cv in zip(task.computations(), base, companion):
        scale = field.pow(key.v, lcms[j])
        checks.append(bool(np.array_equal((scale * c) % field.q, cv % field.q)))
    return Verdict.from_checks(task, checks)


# -- 4B -----------------------------------------------------------------------


@dataclass(frozen=True)
class KeyB:
    u: tuple[np.ndarray, ...]  # per group
    v: tuple[np.ndarray, ...]

    def __post_init__(self):
        for vec in self.u + self.v:
            if not np.any(vec):
                raise ValueError("verification vectors must be nonzero")


def draw_key_b(field: PrimeField, L: int, n: int, rng: np.random.Generator) -> KeyB:
    u = tuple(field.random_nonzero_vector(rng, n) for _ in range(L))
    v = tuple(field.random_nonzero_vector(rng, n) for _ in range(L))
    return KeyB(u, v)


def augment(field: PrimeField, m: np.ndarray, tag: str, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Border ``m`` for its position: first -> [[M,0],[u^T M,0]], last -> [[M,Mv],[0,0]], middle -> [[M,0],[0,0]]."""
    n = m.shape[0]
    out = field.zeros((n + 1, n + 1))
    out[:n, :n] = m
    if tag == FIRST:
        out[n, :n] = mat_vec(field, m, u, side="left")
    elif tag == LAST:
        out[:n, n] = mat_vec(field, m, v, side="right")
    elif tag != MIDDLE:
        raise ValueError(f"unknown position tag {tag!r}")
    return out


def bordered_result(field: PrimeField, m: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``[[M, Mv], [u^T M, u^T M v]]``: the block an honest augmented evaluation yields."""
    n = m.shape[0]
    out = field.zeros((n + 1, n + 1))
    out[:n, :n] = m
    mv = mat_vec(field, m, v, side="right")
    out[:n, n] = mv
    out[n, :n] = mat_vec(field, m, u, side="left")
    out[n, n] = int(field.dot(u, mv)) % field.q
    return out


@dataclass(frozen=True)
class AugmentedTask:
    expansions: tuple[OccurrenceExpansion, ...]
    polys: tuple[PolySpec, ...]
    data: tuple[np.ndarray, ...]  # per group: (ell_j, s_hat_j, n+1, n+1)
    linear: tuple[PolySpec | None, ...]  # degree-1 remainder evaluated by the master


def vb_build(field: PrimeField, task: TaskSpec, key: KeyB) -> AugmentedTask:
    expansions, linear, data = [], [], []
    for j, g in enumerate(task.groups):
        high, low = split_linear(g.poly)
        if high is None:
            raise Degree1Monomial(f"group {j + 1} has no monomial of degree >= 2 to distribute")
        exp = occurrence_expand(high)
        rows = []
        for i in range(len(g.inputs)):
            tagged = exp.expand_inputs(task.tuple_matrices(j, i))
            rows.append(np.stack([augment(field, m, tag, key.u[j], key.v[j]) for m, tag in tagged]))
        expansions.append(exp)
        linear.append(low)
        data.append(np.stack(rows))
    return AugmentedTask(tuple(expansions), tuple(e.expanded for e in expansions), tuple(data), tuple(linear))


def vb_check_block(field: PrimeField, block: np.ndarray, u: np.ndarray, v: np.ndarray) -> bool:
    n = block.shape[0] - 1
    m = block[:n, :n]
    mv = mat_vec(field, m, v, side="right")
    if not np.array_equal(mv, block[:n, n] % field.q):
        return False
    if not np.array_equal(mat_vec(field, m, u, side="left"), block[n, :n] % field.q):
        return False
    return int(field.dot(u, mv)) % field.q == int(block[n, n]) % field.q


def vb_check(field: PrimeField, task: TaskSpec, blocks: Sequence[np.ndarray], key: KeyB) -> Verdict:
    checks = [vb_check_block(field, b, key.u[j], key.v[j]) for (j, _), b in zip(task.computations(), blocks)]
    return Verdict.from_checks(task, checks)
