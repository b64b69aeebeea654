"""Encoders, worker programs and decoders for the four coded computation schemes.

Scheme 1 folds every polynomial into one padded polynomial and runs a single
Lagrange code. Scheme 2 splits the workers into one group per polynomial.
Scheme 3 gives every worker all polynomials and downloads them round by round.
Scheme 4 asks each worker for one masked sum whose evaluation at each data
point isolates one requested computation (up to a known nonzero factor).

Every deployment exposes the same surface: ``packets`` (what is uploaded),
``respond`` (the worker program), ``streams`` (which codewords the master
decodes, from whom, and where to read results) and ``recover``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

import numpy as np

from .field import PrimeField
from .funcspec import PolySpec, TaskSpec, poly_eval
from .matspace import OpCounter, mat_add, mat_scalar_mul
from .rscode import Observation, decode_matrix_codeword
from .sharing import (
    EvalPointPlan,
    SharePacket,
    SharingPoly,
    group_sharing_polys,
    make_sharing_poly,
    stack_group_data,
)
from .verification import (
    AugmentedTask,
    CompanionTask,
    KeyA,
    KeyB,
    Verdict,
    va_check,
    va_transform,
    vb_build,
    vb_check,
)


class InsufficientWorkers(ValueError):
    pass


class InsufficientResponses(RuntimeError):
    pass


# -- thresholds and closed forms ---------------------------------------------


def k_scheme1(task: TaskSpec, T: int) -> int:
    return max(task.degrees) * (task.ell + T - 1) + 1


def k_per_group(task: TaskSpec, T: int, degrees: Sequence[int] | None = None) -> list[int]:
    degrees = task.degrees if degrees is None else degrees
    return [D * (lj + T - 1) + 1 for D, lj in zip(degrees, task.ell_per_group)]


def k_scheme4(task: TaskSpec, T: int, degrees: Sequence[int] | None = None) -> int:
    degrees = task.degrees if degrees is None else degrees
    ell = task.ell
    return max(D * (lj + T - 1) + ell - lj for D, lj in zip(degrees, task.ell_per_group)) + 1


def recovery_threshold(scheme: str, task: TaskSpec, T: int):
    """K for schemes 1 and 4, the per-group list for schemes 2 and 3."""
    scheme = str(scheme)
    if scheme == "1":
        return k_scheme1(task, T)
    if scheme in ("2", "3"):
        return k_per_group(task, T)
    if scheme.startswith("4"):
        return k_scheme4(task, T)
    raise ValueError(f"unknown scheme {scheme!r}")


def scheme2_partition(d: int, ks: Sequence[int], A: int) -> list[int]:
    """Group sizes maximising the smallest slack ``d_j - K_j - 2A``; ties favour lower groups."""
    need = [k + 2 * A for k in ks]
    extra = d - sum(need)
    if extra < 0:
        raise InsufficientWorkers(f"scheme 2 needs at least {sum(need)} workers, have {d}")
    share, rem = divmod(extra, len(ks))
    return [c + share + (1 if j < rem else 0) for j, c in enumerate(need)]


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form metric values for one configuration; counts are field elements or operations."""

    SR: int
    UC: int
    DC: int
    MN_dot: tuple[int, ...]  # per worker share; one entry per group for scheme 2
    WN_dot: tuple[int, ...]
    WN_matmul: tuple[int, ...]
    matmul_dim: int


def _dot_count(polys: Sequence[PolySpec], q: int) -> int:
    return sum(p.scalar_mult_count(q) for p in polys)


def closed_form(label: str, task: TaskSpec, d: int, A: int, T: int, q: int) -> ClosedForm:
    n = task.n
    ell_j, s = task.ell_per_group, task.arities
    polys = [g.poly for g in task.groups]
    L = task.L
    e = n * n
    if label == "1":
        K = k_scheme1(task, T)
        return ClosedForm(d - K - 2 * A, d * sum(s) * e, (K + 2 * A) * e, ((task.ell + T) * sum(s),),
                          (_dot_count(polys, q),), (sum(p.mat_mult_count for p in polys),), n)
    if label == "2":
        ks = k_per_group(task, T)
        sizes = scheme2_partition(d, ks, A)
        sr = min(dj - k - 2 * A for dj, k in zip(sizes, ks))
        return ClosedForm(sr, sum(dj * sj for dj, sj in zip(sizes, s)) * e, sum(k + 2 * A for k in ks) * e,
                          tuple((lj + T) * sj for lj, sj in zip(ell_j, s)),
                          tuple(p.scalar_mult_count(q) for p in polys), tuple(p.mat_mult_count for p in polys), n)
    if label == "3":
        ks = k_per_group(task, T)
        return ClosedForm(d - max(ks) - 2 * A, d * sum(s) * e, sum(k + 2 * A for k in ks) * e,
                          (sum((lj + T) * sj for lj, sj in zip(ell_j, s)),),
                          (_dot_count(polys, q),), (sum(p.mat_mult_count for p in polys),), n)
    if label == "4":
        K = k_scheme4(task, T)
        return ClosedForm(d - K - 2 * A, d * sum(s) * e, (K + 2 * A) * e,
                          (sum((lj + T) * sj for lj, sj in zip(ell_j, s)),),
                          (L + _dot_count(polys, q),), (sum(p.mat_mult_count for p in polys),), n)
    if label == "4A":
        from .funcspec import degree_decompose

        comp = [degree_decompose(p).companion for p in polys]
        s_hat = [c.arity for c in comp]
        K = k_scheme4(task, T)
        return ClosedForm(d - K - 2 * A, d * (sum(s) + sum(s_hat)) * e, 2 * (K + 2 * A) * e,
                          (sum((lj + T) * (sj + sh) for lj, sj, sh in zip(ell_j, s, s_hat)),),
                          (2 * L + _dot_count(polys, q) + _dot_count(comp, q),),
                          (sum(p.mat_mult_count for p in polys) + sum(c.mat_mult_count for c in comp),), n)
    if label == "4B":
        from .funcspec import occurrence_expand, split_linear

        exp = [occurrence_expand(split_linear(p)[0]).expanded for p in polys]
        s_hat = [x.arity for x in exp]
        K = k_scheme4(task, T, [x.degree for x in exp])
        e1 = (n + 1) ** 2
        return ClosedForm(d - K - 2 * A, d * sum(s_hat) * e1, (K + 2 * A) * e1,
                          (sum((lj + T) * sh for lj, sh in zip(ell_j, s_hat)),),
                          (L + _dot_count(exp, q),), (sum(x.mat_mult_count for x in exp),), n + 1)
    raise ValueError(f"unknown scheme {label!r}")


# -- deployments --------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    """Read computation (group, index) from a decoded stream at ``point``, divided by ``gamma``."""

    group: int
    index: int
    point: int
    gamma: int = 1


@dataclass(frozen=True)
class Stream:
    name: str
    K: int
    eligible: tuple[int, ...]
    targets: tuple[Target, ...]


@dataclass
class Recovery:
    values: dict[str, list[np.ndarray]]
    consumed: dict[str, tuple[int, ...]]
    error_points: dict[str, tuple[int, ...]]
    download: int


@dataclass
class Deployment:
    label: str
    field: PrimeField
    task: TaskSpec
    plan: EvalPointPlan
    T: int
    packets: list[SharePacket]
    streams: list[Stream]
    master_cost: list[OpCounter]  # share construction per worker
    setup_cost: OpCounter = dc_field(default_factory=OpCounter)  # one-off master work

    @property
    def d(self) -> int:
        return self.plan.d

    @property
    def upload(self) -> int:
        return sum(p.upload_size() for p in self.packets)

    def respond(self, worker: int, counter: OpCounter | None = None) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def needed(self, A: int) -> dict[str, int]:
        return {s.name: s.K + 2 * A for s in self.streams}

    def check_capacity(self, A: int) -> None:
        for s in self.streams:
            if len(s.eligible) < s.K + 2 * A:
                raise InsufficientWorkers(f"stream {s.name} needs {s.K + 2 * A} workers, has {len(s.eligible)}")

    def recover(self, responses: Mapping[int, Mapping[str, np.ndarray]], arrival: Sequence[int], A: int) -> Recovery:
        """Decode every stream from the first ``K + 2A`` eligible arrivals."""
        field = self.field
        values, consumed, errors = {}, {}, {}
        download = 0
        for s in self.streams:
            eligible = set(s.eligible)
            need = s.K + 2 * A
            chosen = [w for w in arrival if w in eligible and w in responses][:need]
            if len(chosen) < need:
                raise InsufficientResponses(f"stream {s.name}: {len(chosen)} responses, need {need}")
            obs = [Observation(self.plan.workers[w], responses[w][s.name]) for w in chosen]
            poly = decode_matrix_codeword(field, obs, s.K, A)
            vals = []
            for t in s.targets:
                raw = poly(field, t.point)
                vals.append(raw if t.gamma == 1 else (field.inv(t.gamma) * raw) % field.q)
            values[s.name] = vals
            consumed[s.name] = tuple(chosen)
            errors[s.name] = poly.error_points
            download += need * int(obs[0].value.size)
        return Recovery(values, consumed, errors, download)

    def outputs(self, rec: Recovery) -> list[np.ndarray]:
        """Requested results in task order."""
        by_key = {}
        for s in self.streams:
            for t, v in zip(s.targets, rec.values[s.name]):
                by_key.setdefault((t.group, t.index), v)
        return [by_key[ji] for ji in self.task.computations()]

    def verify(self, rec: Recovery) -> Verdict | None:
        return None


def _per_worker_shares(field: PrimeField, polys: Sequence[SharingPoly], alphas: Sequence[int]):
    counters, packets = [], []
    for i, a in enumerate(alphas):
        c = OpCounter()
        shares = tuple(p.at(field, a, c) for p in polys)
        counters.append(c)
        packets.append(shares)
    return packets, counters


def _data_targets(task: TaskSpec, plan: EvalPointPlan, groups=None) -> tuple[Target, ...]:
    groups = range(task.L) if groups is None else groups
    return tuple(Target(j, i, plan.data_points[j][i]) for j in groups for i in range(task.ell_per_group[j]))


# Scheme 1


def padded_polynomial(task: TaskSpec) -> PolySpec:
    """Sum of all group polynomials over disjoint variable blocks."""
    terms, names, offset = [], [], 0
    for j, g in enumerate(task.groups):
        terms.extend((m.coeff, [offset + v for v in m.vars]) for m in g.poly.monomials)
        names.extend(f"{g.poly.var_name(v)}_{j + 1}" for v in range(g.poly.arity))
        offset += g.poly.arity
    return PolySpec.build(terms, arity=offset, names=names)


def padded_tuples(field: PrimeField, task: TaskSpec) -> np.ndarray:
    """Every computation's inputs placed in its group's block, zeros elsewhere; shape (ell, sum s, n, n)."""
    n = task.n
    total = sum(task.arities)
    out = field.zeros((task.ell, total, n, n))
    offsets = np.cumsum([0] + task.arities)
    for row, (j, i) in enumerate(task.computations()):
        for k, m in enumerate(task.tuple_matrices(j, i)):
            out[row, offsets[j] + k] = m
    return out


@dataclass
class Scheme1(Deployment):
    big_poly: PolySpec = None

    def respond(self, worker, counter=None):
        return {"h": poly_eval(self.field, self.big_poly, list(self.packets[worker].shares[0]), counter)}


def scheme1_build(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, T: int, rng: np.random.Generator, A: int = 0) -> Scheme1:
    K = k_scheme1(task, T)
    if plan.d < K + 2 * A:
        raise InsufficientWorkers(f"scheme 1 needs d >= {K + 2 * A}, have {plan.d}")
    poly = make_sharing_poly(field, padded_tuples(field, task), plan.anchors, plan.all_data_points, rng)
    shares, costs = _per_worker_shares(field, [poly], plan.workers)
    packets = [SharePacket(i, a, s) for i, (a, s) in enumerate(zip(plan.workers, shares))]
    stream = Stream("h", K, tuple(range(plan.d)), _data_targets(task, plan))
    return Scheme1("1", field, task, plan, T, packets, [stream], costs, big_poly=padded_polynomial(task))


# Scheme 2


@dataclass
class Scheme2(Deployment):
    group_of: tuple[int, ...] = ()
    group_sizes: tuple[int, ...] = ()

    def respond(self, worker, counter=None):
        j = self.group_of[worker]
        share = self.packets[worker].shares[0]
        return {f"h{j + 1}": poly_eval(self.field, self.task.groups[j].poly, list(share), counter)}


def scheme2_build(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, T: int, rng: np.random.Generator, A: int = 0, group_sizes: Sequence[int] | None = None) -> Scheme2:
    ks = k_per_group(task, T)
    sizes = list(group_sizes) if group_sizes is not None else scheme2_partition(plan.d, ks, A)
    if sum(sizes) != plan.d or len(sizes) != task.L:
        raise ValueError(f"group sizes {sizes} do not split {plan.d} workers into {task.L} groups")
    for j, (dj, k) in enumerate(zip(sizes, ks)):
        if dj < k + 2 * A:
            raise InsufficientWorkers(f"group {j + 1} needs {k + 2 * A} workers, has {dj}")
    polys = group_sharing_polys(field, task, plan, rng)
    group_of = [j for j, dj in enumerate(sizes) for _ in range(dj)]
    packets, costs, streams = [], [], []
    for i, a in enumerate(plan.workers):
        c = OpCounter()
        packets.append(SharePacket(i, a, (polys[group_of[i]].at(field, a, c),)))
        costs.append(c)
    start = 0
    for j, dj in enumerate(sizes):
        streams.append(Stream(f"h{j + 1}", ks[j], tuple(range(start, start + dj)), _data_targets(task, plan, [j])))
        start += dj
    return Scheme2("2", field, task, plan, T, packets, streams, costs, group_of=tuple(group_of), group_sizes=tuple(sizes))


# Scheme 3


@dataclass
class Scheme3(Deployment):
    def respond(self, worker, counter=None):
        shares = self.packets[worker].shares
        return {f"h{j + 1}": poly_eval(self.field, g.poly, list(shares[j]), counter) for j, g in enumerate(self.task.groups)}


def scheme3_build(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, T: int, rng: np.random.Generator, A: int = 0) -> Scheme3:
    ks = k_per_group(task, T)
    if plan.d < max(ks) + 2 * A:
        raise InsufficientWorkers(f"scheme 3 needs d >= {max(ks) + 2 * A}, have {plan.d}")
    polys = group_sharing_polys(field, task, plan, rng)
    shares, costs = _per_worker_shares(field, polys, plan.workers)
    packets = [SharePacket(i, a, s) for i, (a, s) in enumerate(zip(plan.workers, shares))]
    everyone = tuple(range(plan.d))
    streams = [Stream(f"h{j + 1}", ks[j], everyone, _data_targets(task, plan, [j])) for j in range(task.L)]
    return Scheme3("3", field, task, plan, T, packets, streams, costs)


# Scheme 4 (optionally with verification)


def mask_factor(field: PrimeField, plan: EvalPointPlan, j: int, x: int) -> int:
    """Product of (x - beta) over the other groups' data points."""
    out = 1
    for b in plan.other_data_points(j):
        out = out * (x - b) % field.q
    return out


def masked_sum(field: PrimeField, polys: Sequence[PolySpec], shares: Sequence[np.ndarray], masks: Sequence[int], counter: OpCounter | None = None) -> np.ndarray:
    total = None
    for psi, share, mask in zip(polys, shares, masks):
        term = mat_scalar_mul(field, mask, poly_eval(field, psi, list(share), counter), counter)
        total = term if total is None else mat_add(field, total, term)
    return total


@dataclass
class Scheme4(Deployment):
    polys: tuple[PolySpec, ...] = ()
    masks: tuple[tuple[int, ...], ...] = ()  # per worker, shipped with the task
    companion: CompanionTask | None = None
    augmented: AugmentedTask | None = None
    key_a: KeyA | None = None
    key_b: KeyB | None = None

    def respond(self, worker, counter=None):
        pkt = self.packets[worker]
        masks = self.masks[worker]
        out = {"h": masked_sum(self.field, self.polys, pkt.shares, masks, counter)}
        if self.companion is not None:
            out["hv"] = masked_sum(self.field, self.companion.polys, pkt.companions, masks, counter)
        return out

    def outputs(self, rec: Recovery) -> list[np.ndarray]:
        vals = rec.values["h"]
        if self.augmented is None:
            return list(vals)
        n = self.task.n
        out = []
        for (j, i), block in zip(self.task.computations(), vals):
            m = block[:n, :n] % self.field.q
            low = self.augmented.linear[j]
            if low is not None:
                m = mat_add(self.field, m, poly_eval(self.field, low, self.task.tuple_matrices(j, i)))
            out.append(m)
        return out

    def verify(self, rec: Recovery) -> Verdict | None:
        if self.companion is not None:
            return va_check(self.field, self.task, rec.values["h"], rec.values["hv"], self.key_a, self.companion.lcms)
        if self.augmented is not None:
            return vb_check(self.field, self.task, rec.values["h"], self.key_b)
        return None


def scheme4_build(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, T: int, rng: np.random.Generator, A: int = 0,
                  verify: str = "none", key_a: KeyA | None = None, key_b: KeyB | None = None) -> Scheme4:
    """Scheme 4; ``verify`` selects plain ("none"), companion ("4A") or bordered ("4B") inputs."""
    setup = OpCounter()
    companion = augmented = None
    if verify == "none":
        polys = tuple(g.poly for g in task.groups)
        data = [stack_group_data(task, j) for j in range(task.L)]
    elif verify == "4A":
        if key_a is None:
            raise ValueError("4A needs a key")
        polys = tuple(g.poly for g in task.groups)
        data = [stack_group_data(task, j) for j in range(task.L)]
        companion = va_transform(field, task, key_a, setup)
    elif verify == "4B":
        if key_b is None:
            raise ValueError("4B needs a key")
        augmented = vb_build(field, task, key_b)
        polys = augmented.polys
        data = list(augmented.data)
    else:
        raise ValueError(f"unknown verification mode {verify!r}")

    K = k_scheme4(task, T, [p.degree for p in polys])
    if plan.d < K + 2 * A:
        raise InsufficientWorkers(f"scheme 4 needs d >= {K + 2 * A}, have {plan.d}")

    # Base anchors first, companion anchors second: the two draws are independent.
    base = [make_sharing_poly(field, data[j], plan.anchors, plan.data_points[j], rng) for j in range(task.L)]
    comp = []
    if companion is not None:
        comp = [make_sharing_poly(field, companion.data[j], plan.anchors, plan.data_points[j], rng) for j in range(task.L)]

    packets, costs, masks = [], [], []
    for i, a in enumerate(plan.workers):
        c = OpCounter()
        shares = tuple(p.at(field, a, c) for p in base)
        comps = tuple(p.at(field, a, c) for p in comp)
        packets.append(SharePacket(i, a, shares, comps))
        costs.append(c)
        masks.append(tuple(mask_factor(field, plan, j, a) for j in range(task.L)))

    targets = tuple(Target(j, i, plan.data_points[j][i], mask_factor(field, plan, j, plan.data_points[j][i])) for j, i in task.computations())
    everyone = tuple(range(plan.d))
    streams = [Stream("h", K, everyone, targets)]
    if companion is not None:
        streams.append(Stream("hv", K, everyone, targets))
    label = "4" if verify == "none" else verify
    return Scheme4(label, field, task, plan, T, packets, streams, costs, setup,
                   polys=polys, masks=tuple(masks), companion=companion, augmented=augmented, key_a=key_a, key_b=key_b)


def scheme4_worker_eval(field: PrimeField, packet: SharePacket, plan: EvalPointPlan, task: TaskSpec, counter: OpCounter | None = None) -> np.ndarray:
    """``h(alpha) = sum_j psi_j(f_j(alpha)) * prod(alpha - beta)`` over other groups' data points."""
    masks = [mask_factor(field, plan, j, packet.alpha) for j in range(task.L)]
    return masked_sum(field, [g.poly for g in task.groups], packet.shares, masks, counter)


def gamma(field: PrimeField, plan: EvalPointPlan, j: int, i: int) -> int:
    return mask_factor(field, plan, j, plan.data_points[j][i])


BUILDERS = {"1": scheme1_build, "2": scheme2_build, "3": scheme3_build, "4": scheme4_build}
