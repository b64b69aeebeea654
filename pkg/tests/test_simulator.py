from __future__ import annotations

import numpy as np
import pytest

from multilcc.field import PrimeField
from multilcc.funcspec import example1_task
from multilcc.schemes import InsufficientResponses, k_per_group, k_scheme1, k_scheme4
from multilcc.sharing import EvalPointPlan, plan_points
from multilcc.simulator import (
    ADVERSARY,
    HONEST,
    STRAGGLER,
    SimConfig,
    _Responder,
    collusion_probe,
    metrics_close,
    outputs_correct,
    place_roles,
    run_simulation,
    share_distribution,
    worker_behaviors,
)
from multilcc.verification import KeyA

F = PrimeField(97)
TASK = example1_task(F, 2, np.random.default_rng(11))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig("5", 8)
    with pytest.raises(ValueError):
        SimConfig("3", 8, verify="4A")
    with pytest.raises(ValueError):
        SimConfig("4", 8, adversaries=(1,), stragglers=(1,))
    with pytest.raises(ValueError):
        SimConfig("4", 8, adversaries=(8,))
    with pytest.raises(ValueError):
        SimConfig("4", 8, corruption="loud")
    assert SimConfig("4", 8, verify="4B").label == "4B"


def test_replay_is_byte_identical():
    cfg = SimConfig("4", 12, "4A", A_budget=1, T=1, adversaries=(2, 5), stragglers=(7,), seed=42)
    a = run_simulation(F, TASK, cfg).to_json()
    b = run_simulation(F, TASK, cfg).to_json()
    assert a == b
    c = run_simulation(F, TASK, SimConfig("4", 12, "4A", A_budget=1, T=1, adversaries=(2, 5), stragglers=(7,), seed=43)).to_json()
    assert a != c


def test_scheme4_with_adversary_and_stragglers():
    cfg = SimConfig("4", 10, A_budget=1, T=1, adversaries=(0,), stragglers=(3, 4), seed=1)
    rep = run_simulation(F, TASK, cfg)
    assert outputs_correct(F, TASK, rep)
    assert rep.metrics.DC == 8 * 2 * 2
    assert rep.responses_used == 8
    assert 3 not in rep.arrival and 4 not in rep.arrival


def test_escalation_after_rejection():
    # Both adversaries arrive first, so round one sees two errors with budget one.
    order = tuple(range(14))
    cfg = SimConfig("4", 14, "4A", A_budget=1, T=2, adversaries=(0, 1), seed=3, arrival=order)
    rep = run_simulation(F, TASK, cfg)
    assert [r.A for r in rep.rounds] == [1, 2]
    assert rep.rounds[0].accepted is False
    assert rep.rounds[1].accepted is True
    assert rep.responses_used == k_scheme4(TASK, 2) + 2 * 2
    assert outputs_correct(F, TASK, rep)


def test_escalation_stops_at_cap():
    order = tuple(range(10))
    cfg = SimConfig("4", 10, "4B", A_budget=1, T=1, adversaries=(0, 1), seed=3, arrival=order)
    rep = run_simulation(F, TASK, cfg)
    assert rep.outputs is None
    assert rep.failure == "rejected at the escalation cap"
    assert len(rep.rounds) == 1


def test_escalation_stops_when_responses_run_out():
    order = tuple(range(13))
    cfg = SimConfig("4", 13, "4A", A_budget=1, T=2, adversaries=(0, 1), stragglers=(12,), seed=4, arrival=order)
    rep = run_simulation(F, TASK, cfg)
    assert rep.failure == "responses exhausted"


def test_honest_4b_accepts_in_first_round():
    rep = run_simulation(F, TASK, SimConfig("4", 9, "4B", A_budget=0, T=1, seed=5))
    assert len(rep.rounds) == 1 and rep.rounds[0].accepted
    assert outputs_correct(F, TASK, rep)


def test_adversaries_within_budget_never_escalate():
    for seed in range(30):
        for verify in ("4A", "4B"):
            adv, strag = place_roles(12, 1, 1, seed)
            rep = run_simulation(F, TASK, SimConfig("4", 12, verify, 1, 1, adv, strag, seed=seed), measure=False)
            assert len(rep.rounds) == 1 and rep.rounds[0].accepted
            assert outputs_correct(F, TASK, rep)


def test_too_many_stragglers():
    with pytest.raises(InsufficientResponses):
        run_simulation(F, TASK, SimConfig("4", 8, A_budget=1, stragglers=(0,)))


def test_place_roles_and_behaviors():
    adv, strag = place_roles(10, 2, 3, 7)
    assert len(adv) == 2 and len(strag) == 3 and not set(adv) & set(strag)
    assert place_roles(10, 2, 3, 7) == (adv, strag)
    cfg = SimConfig("4", 10, adversaries=adv, stragglers=strag, seed=7)
    rep = run_simulation(F, TASK, cfg, measure=False)
    roles = worker_behaviors(cfg, rep.arrival)
    assert sum(r.role == ADVERSARY for r in roles) == 2
    assert sum(r.role == STRAGGLER for r in roles) == 3
    assert sum(r.role == HONEST for r in roles) == 5
    assert sorted(r.latency for r in roles if r.role != STRAGGLER) == list(range(7))
    with pytest.raises(ValueError):
        place_roles(3, 2, 2, 0)


def test_corruption_is_independent_of_keys():
    plan = plan_points(F, TASK.ell_per_group, 1, 8)
    from multilcc.schemes import scheme4_build

    offsets = []
    for v in (2, 3):
        cfg = SimConfig("4", 8, "4A", adversaries=(1,), seed=9)
        dep = scheme4_build(F, TASK, plan, 1, np.random.default_rng(0), 0, "4A", KeyA(v))
        resp = _Responder(F, dep, cfg)
        offsets.append({k: ((resp(1)[k] - dep.respond(1)[k]) % 97).tolist() for k in ("h", "hv")})
    assert offsets[0] == offsets[1]


@pytest.mark.parametrize("corruption", ["offset", "primary"])
def test_fixed_corruption_rules(corruption):
    plan = plan_points(F, TASK.ell_per_group, 1, 8)
    from multilcc.schemes import scheme4_build

    dep = scheme4_build(F, TASK, plan, 1, np.random.default_rng(0), 0, "4A", KeyA(5))
    resp = _Responder(F, dep, SimConfig("4", 8, "4A", adversaries=(1,), corruption=corruption, seed=2))
    diff_h = (resp(1)["h"] - dep.respond(1)["h"]) % 97
    diff_hv = (resp(1)["hv"] - dep.respond(1)["hv"]) % 97
    assert np.any(diff_h)
    if corruption == "offset":
        assert diff_hv.tolist() == diff_h.tolist()
    else:
        assert not np.any(diff_hv)


def k_for(label, T=1):
    if label == "1":
        return k_scheme1(TASK, T)
    if label == "2":
        return sum(k_per_group(TASK, T))
    if label == "3":
        return max(k_per_group(TASK, T))
    return k_scheme4(TASK, T)


@pytest.mark.parametrize("label", ["1", "2", "3", "4", "4A", "4B"])
def test_metrics_grid_matches_formulas(label):
    A = 1
    scheme, verify = (label, "none") if label in "123" else ("4", "none" if label == "4" else label)
    base = k_for(label) + 2 * A * (2 if label == "2" else 1)
    for d in range(base, base + 4):
        rep = run_simulation(F, TASK, SimConfig(scheme, d, verify, A, 1, adversaries=(d - 1,), seed=d))
        row = metrics_close(F, TASK, rep)
        assert row["all_match"], row
        assert outputs_correct(F, TASK, rep)


def test_collusion_probe_single_workers():
    plan = plan_points(F, TASK.ell_per_group, 1, 10)
    for w in range(10):
        rep = collusion_probe(F, TASK, plan, [w])
        assert rep.passed and rep.uniform is None
    beyond = collusion_probe(F, TASK, plan, [0, 1])
    assert beyond.beyond_threshold and not beyond.passed


def test_exhaustive_uniformity_q5():
    f = PrimeField(5)
    task = example1_task(f, 1, np.random.default_rng(0))
    plan = EvalPointPlan(((1, 2), (3,)), (4,), (0,))
    rep = collusion_probe(f, task, plan, [0])
    assert rep.uniform == (True, True)
    assert rep.passed


def test_uniformity_detector_sees_leaks():
    f = PrimeField(5)
    task = example1_task(f, 1, np.random.default_rng(0))
    open_plan = EvalPointPlan(((1, 2), (3,)), (), (4,))
    dist = share_distribution(f, task, open_plan, 0, [0])
    assert len(dist) == 1
