"""Evaluation points, Lagrange weights and T-secure sharing polynomials."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .field import FieldTooSmall, PrimeField, rank
from .funcspec import TaskSpec
from .matspace import OpCounter, lin_comb


class DuplicatePoint(ValueError):
    pass


@dataclass(frozen=True)
class EvalPointPlan:
    data_points: tuple[tuple[int, ...], ...]  # per group
    anchors: tuple[int, ...]
    workers: tuple[int, ...]

    def __post_init__(self):
        pts = [p for g in self.data_points for p in g] + list(self.anchors) + list(self.workers)
        if len(set(pts)) != len(pts):
            raise DuplicatePoint("evaluation points must be pairwise distinct")

    @property
    def d(self) -> int:
        return len(self.workers)

    @property
    def T(self) -> int:
        return len(self.anchors)

    @property
    def all_data_points(self) -> tuple[int, ...]:
        return tuple(p for g in self.data_points for p in g)

    def support(self, j: int | None = None) -> tuple[int, ...]:
        """Interpolation support of group j's sharing polynomial (all groups if None)."""
        data = self.all_data_points if j is None else self.data_points[j]
        return tuple(data) + self.anchors

    def other_data_points(self, j: int) -> tuple[int, ...]:
        return tuple(p for k, g in enumerate(self.data_points) if k != j for p in g)


def plan_points(field: PrimeField, ell_per_group: Sequence[int], T: int, d: int) -> EvalPointPlan:
    """Data points 1..ell grouped consecutively, then T anchors, then d worker points."""
    ell = sum(ell_per_group)
    if field.q <= ell + T + d:
        raise FieldTooSmall(f"q={field.q} cannot host {ell + T + d} distinct nonzero points")
    groups = []
    nxt = 1
    for lj in ell_per_group:
        groups.append(tuple(range(nxt, nxt + lj)))
        nxt += lj
    anchors = tuple(range(nxt, nxt + T))
    workers = tuple(range(nxt + T, nxt + T + d))
    return EvalPointPlan(tuple(groups), anchors, workers)


@lru_cache(maxsize=65536)
def _lagrange_cached(q: int, support: tuple[int, ...], x: int) -> tuple[int, ...]:
    if x in support:
        return tuple(int(s == x) for s in support)
    full = 1
    for s in support:
        full = full * (x - s) % q
    out = []
    for r, sr in enumerate(support):
        den = 1
        for k, sk in enumerate(support):
            if k != r:
                den = den * (sr - sk) % q
        num = full * pow((x - sr) % q, -1, q) % q
        out.append(num * pow(den, -1, q) % q)
    return tuple(out)


def lagrange_coeffs(field: PrimeField, support: Sequence[int], x: int) -> list[int]:
    """Weights w with sum_r w[r] * value[r] = f(x) for the interpolant through ``support``."""
    support = tuple(int(s) % field.q for s in support)
    if len(set(support)) != len(support):
        raise DuplicatePoint(f"repeated point in support {support}")
    return list(_lagrange_cached(field.q, support, int(x) % field.q))


def lagrange_matrix(field: PrimeField, support: Sequence[int], xs: Sequence[int]) -> np.ndarray:
    return field.array([lagrange_coeffs(field, support, x) for x in xs])


@dataclass(frozen=True)
class SharingPoly:
    """Polynomial through ``values[r]`` at ``support[r]``; values stack tuples as (m, s, rows, cols)."""

    support: tuple[int, ...]
    values: np.ndarray

    @property
    def degree_bound(self) -> int:
        return len(self.support) - 1

    def at(self, field: PrimeField, x: int, counter: OpCounter | None = None) -> np.ndarray:
        return lin_comb(field, lagrange_coeffs(field, self.support, x), self.values, counter)


def make_sharing_poly(field: PrimeField, data: np.ndarray, anchors: Sequence[int], points: Sequence[int], rng: np.random.Generator) -> SharingPoly:
    """Interpolate ``data`` (stacked tuples) at ``points`` plus fresh uniform tuples at ``anchors``."""
    T = len(anchors)
    z = field.random_matrix(rng, (T,) + data.shape[1:])
    values = np.concatenate([data, z], axis=0) if T else data
    return SharingPoly(tuple(points) + tuple(anchors), values)


@dataclass(frozen=True)
class SharePacket:
    worker: int
    alpha: int
    shares: tuple[np.ndarray, ...]  # per group, shape (s_j, rows, cols)
    companions: tuple[np.ndarray, ...] = ()

    def upload_size(self) -> int:
        """Number of field elements carried by this packet."""
        return sum(int(s.size) for s in self.shares) + sum(int(s.size) for s in self.companions)

    def matrix_count(self) -> int:
        return sum(s.shape[0] for s in self.shares) + sum(s.shape[0] for s in self.companions)


def stack_group_data(task: TaskSpec, j: int) -> np.ndarray:
    return np.stack([np.stack(task.tuple_matrices(j, i)) for i in range(len(task.groups[j].inputs))])


def group_sharing_polys(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, rng: np.random.Generator) -> list[SharingPoly]:
    return [make_sharing_poly(field, stack_group_data(task, j), plan.anchors, plan.data_points[j], rng) for j in range(task.L)]


def build_shares(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, T: int, rng: np.random.Generator, counter: OpCounter | None = None, workers: Sequence[int] | None = None) -> list[SharePacket]:
    """Packets ``(f_1(alpha_i), ..., f_L(alpha_i))`` for every worker (or the listed ones).

    All anchor randomness is drawn before any share is computed.
    """
    if T != plan.T:
        raise ValueError(f"plan has {plan.T} anchors, expected T={T}")
    if plan.data_points and [len(g) for g in plan.data_points] != task.ell_per_group:
        raise ValueError("plan does not match the task's group sizes")
    polys = group_sharing_polys(field, task, plan, rng)
    idx = range(plan.d) if workers is None else workers
    return [SharePacket(i, plan.workers[i], tuple(p.at(field, plan.workers[i], counter) for p in polys)) for i in idx]


def generator_bottom(field: PrimeField, plan: EvalPointPlan, j: int | None, workers: Sequence[int]) -> list[list[int]]:
    """Rows: anchor Lagrange basis polynomials; columns: the given workers' points."""
    support = plan.support(j)
    n_data = len(support) - plan.T
    cols = [lagrange_coeffs(field, support, plan.workers[c]) for c in workers]
    return [[col[n_data + r] for col in cols] for r in range(plan.T)]


def security_rank_check(field: PrimeField, plan: EvalPointPlan, j: int | None, colluders: Sequence[int]) -> bool:
    """True iff the anchor rows of the generator restricted to ``colluders`` have full column rank."""
    colluders = list(colluders)
    if not colluders:
        return True
    if len(colluders) > plan.T:
        return False
    return rank(field, generator_bottom(field, plan, j, colluders)) == len(colluders)
