from __future__ import annotations

import itertools

import numpy as np
import pytest

from multilcc.field import PrimeField
from multilcc.funcspec import FIRST, LAST, MIDDLE, example1_task, occurrence_expand, parse_polynomial, plaintext_outputs, poly_eval
from multilcc.matspace import OpCounter
from multilcc.verification import (
    KeyA,
    KeyB,
    Verdict,
    augment,
    bordered_result,
    draw_key_a,
    draw_key_b,
    va_check,
    va_transform,
    vb_build,
    vb_check,
    vb_check_block,
)

F = PrimeField(101)


def task1(n=2, seed=0):
    return example1_task(F, n, np.random.default_rng(seed))


def test_keys_must_be_nonzero():
    with pytest.raises(ValueError):
        KeyA(0)
    with pytest.raises(ValueError):
        KeyB((np.zeros(2, dtype=np.int64),), (np.ones(2, dtype=np.int64),))
    rng = np.random.default_rng(0)
    assert all(draw_key_a(F, rng).v != 0 for _ in range(100))


def test_companion_inputs_example1():
    task = task1()
    v = 7
    comp = va_transform(F, task, KeyA(v))
    a, b, c = task.dataset
    got = comp.data[1][0]
    want = [a * 343, b * 343, b * 49, c * 49]
    assert [g.tolist() for g in got] == [(w % 101).tolist() for w in want]
    assert comp.lcms == (2, 6)
    assert [p.arity for p in comp.polys] == [1, 4]


def test_companion_scaling_is_counted_once_per_matrix():
    counter = OpCounter()
    va_transform(F, task1(), KeyA(3), counter)
    # Group 1: one copy per computation; group 2: four copies.
    assert counter.scalar_mults == 2 + 4


def test_identity_key_reproduces_original():
    task = task1()
    comp = va_transform(F, task, KeyA(1))
    for (j, i), want in zip(task.computations(), plaintext_outputs(F, task)):
        assert poly_eval(F, comp.polys[j], list(comp.data[j][i])).tolist() == want.tolist()


def test_companion_equals_power_times_plaintext():
    task = task1(seed=3)
    rng = np.random.default_rng(1)
    for _ in range(20):
        key = draw_key_a(F, rng)
        comp = va_transform(F, task, key)
        base = plaintext_outputs(F, task)
        companion = [poly_eval(F, comp.polys[j], list(comp.data[j][i])) for j, i in task.computations()]
        assert va_check(F, task, base, companion, key, comp.lcms).accepted


def test_va_check_flags_offset():
    task = task1()
    base = plaintext_outputs(F, task)
    key = KeyA(2)
    comp = [(pow(2, lcm, 101) * b) % 101 for b, lcm in zip(base, (2, 2, 6))]
    bad = list(base)
    bad[2] = (bad[2] + 1) % 101
    verdict = va_check(F, task, bad, comp, key, (2, 6))
    assert not verdict.accepted
    assert verdict.failing == ((1, 0),)
    assert verdict.checks == (True, True, False)


def test_augment_rules():
    m = F.array([[1, 2], [3, 4]])
    u, v = F.array([1, 2]), F.array([3, 5])
    first = augment(F, m, FIRST, u, v)
    last = augment(F, m, LAST, u, v)
    middle = augment(F, m, MIDDLE, u, v)
    assert first.tolist() == [[1, 2, 0], [3, 4, 0], [7, 10, 0]]
    assert last.tolist() == [[1, 2, 13], [3, 4, 29], [0, 0, 0]]
    assert middle.tolist() == [[1, 2, 0], [3, 4, 0], [0, 0, 0]]
    with pytest.raises(ValueError):
        augment(F, m, "edge", u, v)


def test_square_example():
    rng = np.random.default_rng(2)
    a = F.random_matrix(rng, (3, 3))
    u, v = F.random_nonzero_vector(rng, 3), F.random_nonzero_vector(rng, 3)
    prod = F.dot(augment(F, a, FIRST, u, v), augment(F, a, LAST, u, v))
    assert prod.tolist() == bordered_result(F, F.dot(a, a), u, v).tolist()


def test_bordered_evaluation_identity_random_inputs():
    rng = np.random.default_rng(4)
    polys = [parse_polynomial(t) for t in ("x^2", "x*y + y*z^2", "2*x*y*x*w + 5*w^3 + z*x")]
    for trial in range(60):
        psi = polys[trial % 3]
        n = int(rng.integers(1, 4))
        mats = [F.random_matrix(rng, (n, n)) for _ in range(psi.arity)]
        u, v = F.random_nonzero_vector(rng, n), F.random_nonzero_vector(rng, n)
        exp = occurrence_expand(psi)
        ins = [augment(F, m, tag, u, v) for m, tag in exp.expand_inputs(mats)]
        got = poly_eval(F, exp.expanded, ins)
        assert got.tolist() == bordered_result(F, poly_eval(F, psi, mats), u, v).tolist()


def test_vb_build_example1_arities():
    task = task1()
    key = draw_key_b(F, 2, 2, np.random.default_rng(0))
    aug = vb_build(F, task, key)
    assert [p.arity for p in aug.polys] == [2, 5]
    assert aug.data[0].shape == (2, 2, 3, 3)
    assert aug.data[1].shape == (1, 5, 3, 3)
    assert aug.linear == (None, None)


def test_vb_check_honest_and_corrupt():
    task = task1()
    truth = plaintext_outputs(F, task)

    def blocks_for(key):
        return [bordered_result(F, m, key.u[j], key.v[j]) for (j, _), m in zip(task.computations(), truth)]

    e0, e1 = F.array([1, 0]), F.array([0, 1])
    key = KeyB((e0, e1), (e1, e1))
    assert vb_check(F, task, blocks_for(key), key) == Verdict(True, (True, True, True), ())
    # Perturb M[0,0] of the second computation while keeping the old borders:
    # every check misses it exactly when u[0] = v[0] = 0.
    broken = blocks_for(key)
    broken[1][0, 0] = (broken[1][0, 0] + 1) % 101
    assert vb_check(F, task, broken, key).failing == ((0, 1),)
    blind = KeyB((e1, e1), (e1, e1))
    broken = blocks_for(blind)
    broken[1][0, 0] = (broken[1][0, 0] + 1) % 101
    assert vb_check(F, task, broken, blind).accepted


def test_scalar_freivalds_exhaustive_q7():
    f = PrimeField(7)
    for m in range(7):
        for wrong in range(7):
            if wrong == m:
                continue
            passes = 0
            for u, v in itertools.product(range(1, 7), repeat=2):
                ua, va = f.array([u]), f.array([v])
                block = bordered_result(f, f.array([[m]]), ua, va)
                block[0, 0] = wrong
                passes += vb_check_block(f, block, ua, va)
            # (wrong - m) * v = 0 has no nonzero solution v, so every key detects it.
            assert passes == 0
