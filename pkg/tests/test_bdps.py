import itertools

import numpy as np
import pytest

from conftest import random_instance
from isacpack.alda import solve_maxmin
from isacpack.bdps import (
    GaConfig,
    Group,
    SplitPlan,
    _plan_from_genes,
    _random_chromosome,
    _repair,
    default_plan,
    optimize_split,
    solve_split,
)
from isacpack.errors import InvalidInput
from isacpack.signal_model import ReducedInstance


def _sym_instance(M=4, N=4, eps=0.4, P=1.0):
    s0 = np.full(N, np.sqrt(P / N))
    return ReducedInstance(M=M, N=N, P=P, eps=eps, sigma=np.ones(N), V=np.eye(N), s0=s0)


def test_plan_validation_and_json():
    inst = _sym_instance()
    plan = default_plan(inst, 2)
    plan.validate(inst)
    again = SplitPlan.from_json(plan.to_json())
    assert again == plan
    bad = SplitPlan((Group((0, 1), 1, 0.5, 0.4), Group((2,), 1, 0.5, 0.0)))
    with pytest.raises(InvalidInput):
        bad.validate(inst)  # dimension 3 missing
    bad = SplitPlan((Group((0, 1), 2, 0.5, 0.4), Group((2, 3), 1, 0.5, 0.0)))
    with pytest.raises(InvalidInput):
        bad.validate(inst)  # too many bits
    bad = SplitPlan((Group((0, 1), 1, 0.8, 0.4), Group((2, 3), 1, 0.8, 0.0)))
    with pytest.raises(InvalidInput):
        bad.validate(inst)  # power over budget


def test_default_plan_round_robin():
    inst = random_instance(np.random.default_rng(0), 4, 6, eps=0.3)
    plan = default_plan(inst, 2)
    order = np.argsort(-inst.gains, kind="stable")
    assert plan.groups[0].dims == tuple(sorted(order[0::2]))
    assert plan.groups[1].dims == tuple(sorted(order[1::2]))
    assert [g.bits for g in plan.groups] == [1, 1]
    assert sum(g.eps**2 for g in plan.groups) == pytest.approx(inst.eps**2)


def test_g1_equals_alda(rng):
    inst = random_instance(rng, 4, 5, eps=0.3)
    res = solve_split(inst, default_plan(inst, 1))
    ref = solve_maxmin(inst)
    assert res.d_true == pytest.approx(ref.d_achieved, rel=1e-6)
    assert res.d_combined == pytest.approx(ref.d_achieved, rel=1e-6)


def test_product_code_geometry():
    inst = _sym_instance()
    plan = SplitPlan((Group((0, 1), 1, 0.5, 0.3), Group((2, 3), 1, 0.5, np.sqrt(0.16 - 0.09))))
    res = solve_split(inst, plan)
    d1, d2 = res.d_groups
    assert res.d_combined_sq == sum(d**2 for d in res.d_groups)
    assert res.d_combined == np.sqrt(res.d_combined_sq)
    assert res.d_true == pytest.approx(min(d1, d2), rel=1e-12)
    assert res.d_true <= res.d_combined
    # enumerate all 6 pairs of the 4 product signals
    S = res.s
    dists = [np.linalg.norm(S[a] - S[b]) for a, b in itertools.combinations(range(4), 2)]
    assert min(dists) == pytest.approx(res.d_true, rel=1e-12)
    assert res.s.shape == (4, 4)
    assert res.power_used <= inst.P + 1e-6


def test_bits_zero_group_is_reference():
    inst = _sym_instance()
    plan = _plan_from_genes(inst, [2, 0], [1.0, 1.0], [0.9, 0.1], np.array([0, 0, 0, 1]))
    res = solve_split(inst, plan)
    np.testing.assert_allclose(res.s[:, 3], inst.s0[3])
    assert res.d_groups[1] == 0.0


def test_repair_enforces_invariants(rng):
    inst = random_instance(rng, 8, 7, eps=0.3)
    for _ in range(50):
        ch = _repair(_random_chromosome(rng, inst, 3, 3), inst, 3, 3)
        plan = _plan_from_genes(inst, ch.bits, ch.pfrac, ch.efrac, ch.assign)
        plan.validate(inst)


def test_ga_monotone_and_deterministic(rng):
    inst = random_instance(rng, 4, 6, eps=0.3)
    ga = GaConfig(pop=6, iters=3, seed=7)
    plan, res, hist = optimize_split(inst, 2, ga)
    assert all(b >= a for a, b in zip(hist.best_fitness, hist.best_fitness[1:]))
    assert res.d_true <= res.d_combined + 1e-12
    plan2, _, _ = optimize_split(inst, 2, ga)
    assert plan2 == plan
    assert hist.evaluations + hist.cache_hits >= 6 + 3 * 4


def test_ga_g1_trivial(rng):
    inst = random_instance(rng, 4, 4, eps=0.3)
    plan, res, _ = optimize_split(inst, 1)
    assert plan.G == 1
    assert res.d_combined == pytest.approx(solve_maxmin(inst).d_achieved, rel=1e-6)


def test_power_relaxation_initial_population(rng):
    inst = random_instance(rng, 4, 6, eps=0.3)
    ga = GaConfig(pop=6, iters=0, seed=3)
    _, lo, hist_lo = optimize_split(inst, 2, ga)
    _, hi, hist_hi = optimize_split(inst.replace(P=1.5 * inst.P), 2, ga)
    assert hist_hi.best_fitness[-1] >= hist_lo.best_fitness[-1] - 1e-3


def test_symmetric_split_enumeration():
    inst = _sym_instance(eps=0.4, P=1.0)
    assign = np.array([0, 0, 1, 1])
    best = None
    for pf in (0.3, 0.5, 0.7):
        for ef in (0.3, 0.5, 0.7):
            plan = _plan_from_genes(inst, [1, 1], [pf, 1 - pf], [ef, 1 - ef], assign)
            r = solve_split(inst, plan)
            if best is None or r.d_true > best[0] + 1e-9:
                best = (r.d_true, pf, ef, r.d_combined)
    # the product-code minimum is largest at the symmetric split
    assert best[1:3] == (0.5, 0.5)


def test_pso_reserved(rng):
    inst = random_instance(rng, 4, 4, eps=0.3)
    with pytest.raises(NotImplementedError):
        optimize_split(inst, 2, method="pso")
    with pytest.raises(InvalidInput):
        optimize_split(inst, 2, method="anneal")


def test_ga_config_validation():
    with pytest.raises(InvalidInput):
        GaConfig(pop=3)
    with pytest.raises(InvalidInput):
        GaConfig(p_mut=1.5)
    with pytest.raises(InvalidInput):
        GaConfig(objective="other")
