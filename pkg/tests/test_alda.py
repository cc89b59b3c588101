import numpy as np
import pytest

from conftest import random_instance
from isacpack.alda import (
    AldaConfig,
    BisectConfig,
    InitMode,
    feasible_design,
    kkt_report,
    min_power_point,
    solve_fixed_d,
    solve_maxmin,
    solve_p8,
)
from isacpack.errors import InfeasibleDetected, InvalidInput, NoFeasiblePoint
from isacpack.qcqp import DualState, QcqpInstance, pair_residuals
from isacpack.signal_model import ReducedInstance
from oracles import m2_oracle


def _inst2(sigma, s0, eps, P=1.0, M=2):
    s0 = np.asarray(s0, float)
    return ReducedInstance(M=M, N=s0.size, P=P, eps=eps, sigma=np.asarray(sigma, float),
                           V=np.eye(s0.size), s0=s0)


def test_config_validation():
    with pytest.raises(InvalidInput):
        AldaConfig(rho=1.0)
    with pytest.raises(InvalidInput):
        AldaConfig(mu0=0)
    with pytest.raises(InvalidInput):
        AldaConfig(feas_tol=0)
    assert AldaConfig(z_init_mode="reference").z_init_mode is InitMode.REFERENCE


def test_p8_toy_feasible():
    q = QcqpInstance(_inst2([1.0, 1.0], [1.0, 0.0], 0.5), 0.25)
    state, res = solve_p8(q)
    assert res.converged
    assert np.all(res.similarity <= 0.5 + 1e-4)
    assert np.min(pair_residuals(q, state.z)) >= 0.25 - 1e-4
    # duals stay non-negative; penalty grows geometrically up to the cap
    assert np.all(state.duals.lam >= 0) and np.all(state.duals.v >= 0)
    mus = [h["mu"] for h in state.history]
    assert all(b == pytest.approx(min(2 * a, 1e10)) for a, b in zip(mus, mus[1:]))
    # inner solves never increase the augmented Lagrangian
    assert all(h["L_after"] <= h["L_before"] + 1e-10 for h in state.history)


def test_p8_minimum_power_m2():
    q = QcqpInstance(_inst2([1.0, 1.0], [1.0, 0.0], 0.5), 0.25)
    _, res = solve_p8(q)
    # delta orthogonal to s0, midpoint on the lens rim at radius sqrt(0.25 - 1/16):
    # power (1 - 0.4330127)^2 + 1/16
    assert res.power_used == pytest.approx((1 - np.sqrt(3) / 4) ** 2 + 1 / 16, rel=1e-4)
    # the oracle agrees: at that budget 0.25 is the largest reachable target
    d, _, _ = m2_oracle([1.0, 1.0], np.array([1.0, 0.0]), 0.5, res.power_used)
    assert d == pytest.approx(0.25, rel=1e-3)


def test_p8_infeasible_above_geometric_max():
    inst = _inst2([2.0, 1.0], [0.5, 0.1], 0.3)
    q = QcqpInstance(inst, 4 * 0.09 * 4.0 * 1.1)
    with pytest.raises(InfeasibleDetected) as ei:
        solve_p8(q)
    assert ei.value.residual > 1e-3
    rep = kkt_report(q, ei.value.state)
    assert rep.primal_violation > 1e-3


def test_kkt_converged_toy():
    q = QcqpInstance(_inst2([1.5, 1.0], [0.6, 0.3], 0.4), 0.7)
    state, res = solve_p8(q)
    assert res.converged
    rep = kkt_report(q, state)
    assert rep.stationarity < 1e-3
    assert rep.primal_violation < 1e-3
    assert rep.complementarity < 1e-3


def test_kkt_interior_zero_duals():
    inst = _inst2([1.0], [1.0], 0.5)
    q = QcqpInstance(inst, 0.0)
    from isacpack.alda import AldaState

    z = np.array([1.0, 1.0])
    st = AldaState(z, DualState(np.zeros(2), np.zeros(2), 1.0), 1, 0.0, 2.0, [])
    rep = kkt_report(q, st)
    # no active constraint: residual is ||2z|| relative to itself
    assert rep.multiplier_stationarity == pytest.approx(1.0)


def test_maxmin_antipodal_unconstrained():
    inst = _inst2([1.0, 1.0], [0.0, 0.0], 1.5, P=1.0)
    res = solve_maxmin(inst)
    assert res.d_achieved == pytest.approx(2.0, rel=1e-3)
    assert res.power_used == pytest.approx(1.0, rel=1e-3)
    np.testing.assert_allclose(res.s[0], -res.s[1], atol=1e-3)


def test_maxmin_eps_zero():
    inst = _inst2([2.0, 1.0], [0.6, 0.2], 0.0, M=4)
    res = solve_maxmin(inst)
    assert res.d_achieved == 0.0
    np.testing.assert_array_equal(res.s, np.tile(inst.s0, (4, 1)))
    assert res.power_used == pytest.approx(0.4)


def test_maxmin_nonbinding_matches_2eps_sigma():
    inst = _inst2([2.0, 1.0, 0.5], [0.3, 0.2, 0.1], 0.25)
    res = solve_maxmin(inst)
    assert res.d_achieved == pytest.approx(2 * 0.25 * 2.0, rel=2e-3)
    assert res.power_used < inst.P


def test_maxmin_binding_power(rng):
    inst = random_instance(rng, 2, 3, eps=0.5)
    res = solve_maxmin(inst)
    assert abs(res.power_used - inst.P) <= 1e-3 * inst.P


def test_no_feasible_point():
    inst = _inst2([1.0], [2.0], 0.1, P=1.0)
    with pytest.raises(NoFeasiblePoint):
        solve_maxmin(inst)


def test_bisect_bracket_validation():
    inst = _inst2([1.0], [0.5], 0.2)
    with pytest.raises(InvalidInput):
        solve_maxmin(inst, bisect=BisectConfig(d_lo=1.0, d_hi=0.5))


def test_feasibility_of_converged_results(rng):
    cfg = AldaConfig()
    for _ in range(5):
        inst = random_instance(rng, 4, 6, eps=0.3)
        res = solve_maxmin(inst, cfg)
        assert np.all(res.similarity <= inst.eps * (1 + 1e-6) + cfg.feas_tol)
        assert res.power_used <= inst.P * (1 + 1e-3)


def test_fixed_d_feasible_and_fallback(rng):
    inst = random_instance(rng, 4, 6, eps=0.3)
    res = solve_fixed_d(inst, 0.05)
    assert res.d_achieved**2 >= 0.05 * (1 - 1e-6)
    big = 4 * inst.eps**2 * inst.sigma[0] ** 2 * 2
    res2 = solve_fixed_d(inst, big)
    assert any("max-min" in n for n in res2.notes)
    assert res2.d_achieved == pytest.approx(solve_maxmin(inst).d_achieved, rel=1e-9)
    with pytest.raises(InfeasibleDetected):
        solve_fixed_d(inst, big, fallback=False)


def test_feasible_design_none_when_over_budget():
    inst = _inst2([1.0, 1.0], [1.0, 0.0], 0.5, P=0.5)
    d_max, _, _ = m2_oracle(inst.gains, inst.s0, 0.5, 0.5)
    assert d_max < 0.9  # power-limited below the geometric edge 1.0
    assert feasible_design(inst, 0.9 * d_max) is not None
    assert feasible_design(inst, min(1.1 * d_max, 0.99)) is None
    assert feasible_design(inst, 0.0) is not None


def test_rotation_invariance(rng):
    base = random_instance(rng, 2, 4, eps=0.3)
    Q = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    rot = base.replace(V=Q)
    a, b = solve_maxmin(base), solve_maxmin(rot)
    assert a.d_achieved == pytest.approx(b.d_achieved, abs=1e-8)
    np.testing.assert_allclose(b.signals, a.s @ Q.T, atol=1e-10)


def test_deterministic(rng):
    inst = random_instance(rng, 4, 5, eps=0.3)
    a, b = solve_maxmin(inst), solve_maxmin(inst)
    np.testing.assert_array_equal(a.signals, b.signals)


def test_multistart_keeps_best(rng):
    inst = random_instance(rng, 4, 5, eps=0.3)
    q = QcqpInstance(inst, 0.5)
    _, one = solve_p8(q, AldaConfig(n_starts=1))
    _, three = solve_p8(q, AldaConfig(n_starts=3))
    assert three.d_achieved >= one.d_achieved - 1e-12


def test_min_power_point():
    inst = _inst2([1.0], [2.0], 0.5)
    np.testing.assert_allclose(min_power_point(inst), [1.5])
    inst = _inst2([1.0], [0.2], 0.5)
    np.testing.assert_allclose(min_power_point(inst), [0.0])
