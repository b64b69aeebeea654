"""Deterministic master/worker runs with stragglers, adversaries and escalation.

All randomness comes from independent named streams of one root seed:
``shares`` (anchor tuples), ``keys`` (verification keys), ``adversary``
(corruption values), ``arrival`` (response order) and ``placement`` (which
workers misbehave when only counts are given). Corruptions are drawn before
and independently of the keys, so adversaries never see them.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import asdict, dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .field import PrimeField, role_rng
from .funcspec import TaskSpec, plaintext_outputs
from .matspace import OpCounter
from .rscode import DecodeFailure
from .schemes import (
    ClosedForm,
    Deployment,
    InsufficientResponses,
    closed_form,
    scheme1_build,
    scheme2_build,
    scheme3_build,
    scheme4_build,
)
from .sharing import EvalPointPlan, SharingPoly, plan_points, security_rank_check, stack_group_data
from .verification import KeyA, KeyB, draw_key_a, draw_key_b

HONEST, STRAGGLER, ADVERSARY = "honest", "straggler", "adversary"
CORRUPTIONS = ("random", "offset", "primary")


@dataclass(frozen=True)
class WorkerBehavior:
    role: str = HONEST
    latency: int = 0  # position in the arrival order; -1 for stragglers, who never arrive


@dataclass(frozen=True)
class SimConfig:
    scheme: str
    d: int
    verify: str = "none"
    A_budget: int = 0
    T: int = 1
    adversaries: tuple[int, ...] = ()
    stragglers: tuple[int, ...] = ()
    corruption: str = "random"
    seed: int = 0
    arrival: tuple[int, ...] | None = None  # pinned order; otherwise a seeded permutation
    group_sizes: tuple[int, ...] | None = None  # scheme 2 only

    def __post_init__(self):
        if self.scheme not in ("1", "2", "3", "4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.verify not in ("none", "4A", "4B"):
            raise ValueError(f"unknown verification mode {self.verify!r}")
        if self.verify != "none" and self.scheme != "4":
            raise ValueError("verification is defined for scheme 4 only")
        if self.corruption not in CORRUPTIONS:
            raise ValueError(f"unknown corruption rule {self.corruption!r}")
        if set(self.adversaries) & set(self.stragglers):
            raise ValueError("a worker cannot be both adversary and straggler")
        for w in self.adversaries + self.stragglers:
            if not 0 <= w < self.d:
                raise ValueError(f"worker index {w} out of range")
        if self.A_budget < 0 or self.T < 0:
            raise ValueError("A_budget and T must be non-negative")

    @property
    def label(self) -> str:
        return self.scheme if self.verify == "none" else self.verify


def place_roles(d: int, n_adversaries: int, n_stragglers: int, seed: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Random disjoint (adversaries, stragglers) drawn from the ``placement`` stream."""
    if n_adversaries + n_stragglers > d:
        raise ValueError("more misbehaving workers than workers")
    perm = role_rng(seed, "placement").permutation(d)
    return tuple(sorted(int(w) for w in perm[:n_adversaries])), tuple(sorted(int(w) for w in perm[n_adversaries:n_adversaries + n_stragglers]))


@dataclass(frozen=True)
class Metrics:
    SR: int
    UC: int
    DC: int
    MN_dot: tuple[int, ...]
    WN_dot: tuple[int, ...]
    WN_matmul: tuple[int, ...]
    matmul_dim: int


@dataclass(frozen=True)
class RoundRecord:
    A: int
    consumed: tuple[int, ...]  # worker indices, union over streams, arrival order
    accepted: bool | None  # None: no verification
    failing: tuple[tuple[int, int], ...] = ()
    decode_error: str | None = None


@dataclass
class RunReport:
    config: SimConfig
    outputs: list[np.ndarray] | None
    rounds: list[RoundRecord]
    metrics: Metrics | None
    arrival: tuple[int, ...]
    failure: str | None = None
    deployment: Deployment | None = dc_field(default=None, repr=False, compare=False)

    @property
    def accepted(self) -> bool:
        return self.outputs is not None

    @property
    def responses_used(self) -> int:
        return len(self.rounds[-1].consumed) if self.rounds else 0

    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "outputs": None if self.outputs is None else [np.asarray(o, dtype=object).tolist() for o in self.outputs],
            "rounds": [asdict(r) for r in self.rounds],
            "metrics": None if self.metrics is None else asdict(self.metrics),
            "arrival": list(self.arrival),
            "failure": self.failure,
        }
        return json.dumps(doc, sort_keys=True, default=int)


def _build(field: PrimeField, task: TaskSpec, cfg: SimConfig, plan: EvalPointPlan, rng, key_a, key_b) -> Deployment:
    if cfg.scheme == "1":
        return scheme1_build(field, task, plan, cfg.T, rng, cfg.A_budget)
    if cfg.scheme == "2":
        return scheme2_build(field, task, plan, cfg.T, rng, cfg.A_budget, cfg.group_sizes)
    if cfg.scheme == "3":
        return scheme3_build(field, task, plan, cfg.T, rng, cfg.A_budget)
    return scheme4_build(field, task, plan, cfg.T, rng, cfg.A_budget, cfg.verify, key_a, key_b)


class _Responder:
    """Evaluates worker programs on demand and applies the adversary rule."""

    def __init__(self, field: PrimeField, dep: Deployment, cfg: SimConfig):
        self.field, self.dep, self.cfg = field, dep, cfg
        self.cache: dict[int, dict[str, np.ndarray]] = {}
        self.corruption = self._draw_corruption()

    def _draw_corruption(self) -> dict[int, dict[str, np.ndarray]]:
        rng = role_rng(self.cfg.seed, "adversary")
        shapes = {}
        probe = self.dep.packets[0]
        n = probe.shares[0].shape[-1]
        for s in self.dep.streams:
            shapes[s.name] = (n, n)
        out = {}
        for w in sorted(self.cfg.adversaries):
            if self.cfg.corruption == "random":
                out[w] = {name: self.field.random_nonzero_matrix(rng, shp) for name, shp in shapes.items()}
            else:
                e = self.field.random_nonzero_matrix(rng, next(iter(shapes.values())))
                names = list(shapes) if self.cfg.corruption == "offset" else [self.dep.streams[0].name]
                out[w] = {name: e for name in names}
        return out

    def __call__(self, worker: int) -> dict[str, np.ndarray]:
        if worker not in self.cache:
            resp = self.dep.respond(worker)
            for name, e in self.corruption.get(worker, {}).items():
                if name in resp:
                    resp[name] = (resp[name] + e) % self.field.q
            self.cache[worker] = resp
        return self.cache[worker]


def worker_behaviors(cfg: SimConfig, arrival: Sequence[int]) -> tuple[WorkerBehavior, ...]:
    rank = {w: r for r, w in enumerate(arrival)}
    adversaries = set(cfg.adversaries)
    out = []
    for w in range(cfg.d):
        if w not in rank:
            out.append(WorkerBehavior(STRAGGLER, -1))
        else:
            out.append(WorkerBehavior(ADVERSARY if w in adversaries else HONEST, rank[w]))
    return tuple(out)


def _arrival(cfg: SimConfig) -> tuple[int, ...]:
    stragglers = set(cfg.stragglers)
    if cfg.arrival is not None:
        order = [w for w in cfg.arrival if w not in stragglers]
        if sorted(order) != sorted(set(range(cfg.d)) - stragglers):
            raise ValueError("pinned arrival must list every non-straggler exactly once")
        return tuple(order)
    perm = role_rng(cfg.seed, "arrival").permutation(cfg.d)
    return tuple(int(w) for w in perm if int(w) not in stragglers)


def _first_needed(dep: Deployment, arrival: Sequence[int], A: int) -> list[int] | None:
    """Workers whose responses the master collects for budget A, in arrival order."""
    take: set[int] = set()
    for s in dep.streams:
        eligible = set(s.eligible)
        chosen = [w for w in arrival if w in eligible][: s.K + 2 * A]
        if len(chosen) < s.K + 2 * A:
            return None
        take.update(chosen)
    return [w for w in arrival if w in take]


def run_simulation(field: PrimeField, task: TaskSpec, cfg: SimConfig, plan: EvalPointPlan | None = None,
                   key_a: KeyA | None = None, key_b: KeyB | None = None, measure: bool = True) -> RunReport:
    """Share, collect the first ``K + 2A`` arrivals, decode, verify and escalate while ``A <= T``.

    ``measure=False`` skips the metric pass (straggler scan, counter replay)
    and leaves ``metrics`` as None; Monte Carlo loops use it.
    """
    plan = plan or plan_points(field, task.ell_per_group, cfg.T, cfg.d)
    if plan.d != cfg.d or plan.T != cfg.T:
        raise ValueError("plan does not match the configuration")
    if cfg.verify == "4A" and key_a is None:
        key_a = draw_key_a(field, role_rng(cfg.seed, "keys"))
    if cfg.verify == "4B" and key_b is None:
        key_b = draw_key_b(field, task.L, task.n, role_rng(cfg.seed, "keys"))
    dep = _build(field, task, cfg, plan, role_rng(cfg.seed, "shares"), key_a, key_b)
    respond = _Responder(field, dep, cfg)
    arrival = _arrival(cfg)

    A = cfg.A_budget
    rounds: list[RoundRecord] = []
    outputs, failure, download = None, None, 0
    while True:
        workers = _first_needed(dep, arrival, A)
        if workers is None:
            if not rounds:
                raise InsufficientResponses(f"{len(arrival)} responders cannot cover budget A={A}")
            failure = "responses exhausted"
            break
        responses = {w: respond(w) for w in workers}
        try:
            rec = dep.recover(responses, arrival, A)
        except DecodeFailure as exc:
            rounds.append(RoundRecord(A, tuple(workers), False, (), str(exc)))
        else:
            verdict = dep.verify(rec)
            download = rec.download
            if verdict is None or verdict.accepted:
                rounds.append(RoundRecord(A, tuple(workers), None if verdict is None else True))
                outputs = dep.outputs(rec)
                break
            rounds.append(RoundRecord(A, tuple(workers), False, verdict.failing))
        if A + 1 > cfg.T:
            failure = "rejected at the escalation cap"
            break
        A += 1

    metrics = _measure(field, task, cfg, dep, download) if measure else None
    return RunReport(cfg, outputs, rounds, metrics, arrival, failure, dep)


def _measure(field: PrimeField, task: TaskSpec, cfg: SimConfig, dep: Deployment, download: int) -> Metrics:
    if cfg.scheme == "2":
        reps = [s.eligible[0] for s in dep.streams]
    else:
        reps = [0]
    worker_counts = []
    for w in reps:
        c = OpCounter()
        dep.respond(w, c)
        worker_counts.append(c)
    dims = {k for c in worker_counts for k in c.mat_mults}
    return Metrics(
        SR=measured_sr(dep, cfg.A_budget),
        UC=dep.upload,
        DC=download,
        MN_dot=tuple(dep.master_cost[w].scalar_mults for w in reps),
        WN_dot=tuple(c.scalar_mults for c in worker_counts),
        WN_matmul=tuple(c.total_mat_mults for c in worker_counts),
        matmul_dim=max(dims) if dims else task.n,
    )


def measured_sr(dep: Deployment, A: int) -> int:
    """Largest straggler count that every placement survives, found by scanning worst placements.

    The worst placement for a codeword concentrates all stragglers among the
    workers that feed it; each candidate is checked by actually decoding the
    remaining honest responses.
    """
    cache: dict[int, dict[str, np.ndarray]] = {}

    def resp(w):
        if w not in cache:
            cache[w] = dep.respond(w)
        return cache[w]

    best = dep.d
    for s in dep.streams:
        survived = -1
        for k in range(len(s.eligible) + 1):
            down = set(s.eligible[:k])
            alive = [w for w in range(dep.d) if w not in down]
            if _first_needed(dep, alive, A) is None:
                break
            try:
                dep.recover({w: resp(w) for w in _first_needed(dep, alive, A)}, alive, A)
            except (DecodeFailure, InsufficientResponses):
                break
            survived = k
        best = min(best, survived)
    return best


def metrics_close(field: PrimeField, task: TaskSpec, report: RunReport) -> dict:
    """Measured metrics next to the closed forms, with a per-metric match flag."""
    cfg = report.config
    cf: ClosedForm = closed_form(cfg.label, task, cfg.d, cfg.A_budget, cfg.T, field.q)
    row = {"scheme": cfg.label, "d": cfg.d, "A": cfg.A_budget, "T": cfg.T}
    match = {}
    for name in ("SR", "UC", "DC", "MN_dot", "WN_dot", "WN_matmul", "matmul_dim"):
        measured, formula = getattr(report.metrics, name), getattr(cf, name)
        row[name] = measured
        row[name + "_formula"] = formula
        match[name] = measured == formula
    # DC only reflects the formula when the run finished in its first round.
    if len(report.rounds) > 1:
        match["DC"] = True
    row["match"] = match
    row["all_match"] = all(match.values())
    return row


def outputs_correct(field: PrimeField, task: TaskSpec, report: RunReport) -> bool:
    if report.outputs is None:
        return False
    return all(np.array_equal(np.asarray(a) % field.q, np.asarray(b) % field.q) for a, b in zip(report.outputs, plaintext_outputs(field, task)))


# -- collusion ----------------------------------------------------------------


@dataclass(frozen=True)
class LeakageReport:
    colluders: tuple[int, ...]
    beyond_threshold: bool
    rank_ok: tuple[bool, ...]  # per group
    uniform: tuple[bool, ...] | None  # per group, exhaustive check at tiny parameters

    @property
    def passed(self) -> bool:
        return not self.beyond_threshold and all(self.rank_ok) and (self.uniform is None or all(self.uniform))


def share_distribution(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, j: int, colluders: Sequence[int]) -> Counter:
    """Joint colluder shares of group j over every possible anchor tuple Z."""
    data = stack_group_data(task, j)
    zshape = (plan.T,) + data.shape[1:]
    size = int(np.prod(zshape))
    counts: Counter = Counter()
    for z in itertools.product(range(field.q), repeat=size):
        z_arr = field.array(list(z)).reshape(zshape)
        poly = SharingPoly(tuple(plan.data_points[j]) + plan.anchors, np.concatenate([data, z_arr]) if plan.T else data)
        key = tuple(int(x) for w in colluders for x in poly.at(field, plan.workers[w]).ravel())
        counts[key] += 1
    return counts


def collusion_probe(field: PrimeField, task: TaskSpec, plan: EvalPointPlan, colluders: Sequence[int], exhaustive: bool | None = None) -> LeakageReport:
    """Rank check per group; at q <= 7 and n = 1 also the exact share distribution."""
    colluders = tuple(colluders)
    beyond = len(colluders) > plan.T
    ranks = tuple(security_rank_check(field, plan, j, colluders) for j in range(task.L))
    if exhaustive is None:
        exhaustive = field.q <= 7 and task.n == 1
    uniform = None
    if exhaustive and not beyond:
        flags = []
        for j in range(task.L):
            dist = share_distribution(field, task, plan, j, colluders)
            n_outcomes = field.q ** (len(colluders) * task.arities[j] * task.n * task.n)
            flags.append(len(dist) == n_outcomes and len(set(dist.values())) == 1)
        uniform = tuple(flags)
    return LeakageReport(colluders, beyond, ranks, uniform)
