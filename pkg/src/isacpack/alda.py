"""Augmented Lagrangian / dual ascent (ALDA) solver.

:func:`solve_p8` minimises the total power ``z^T z`` subject to pairwise
squared-distance targets ``z^T Q_kl z >= d`` and similarity balls
``||s_k - s0||^2 <= eps^2``. The primal step minimises the slack-eliminated
augmented Lagrangian with L-BFGS; multipliers follow projected dual ascent and
the penalty grows geometrically.

:func:`solve_maxmin` recovers the max-min-distance design under the power
budget by bisection on ``d``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import minimize, nnls

from .errors import InfeasibleDetected, InvalidInput, NoFeasiblePoint
from .kernels import ordered_pairs
from .qcqp import (
    DualState,
    QcqpInstance,
    blocks,
    feasibility_residual,
    lagrangian_value_grad,
    pair_residuals,
    similarity_residuals,
)
from .signal_model import ReducedInstance

log = logging.getLogger(__name__)

__all__ = [
    "InitMode",
    "AldaConfig",
    "BisectConfig",
    "AldaState",
    "DesignResult",
    "KktReport",
    "solve_p8",
    "solve_maxmin",
    "solve_fixed_d",
    "feasible_design",
    "kkt_report",
    "design_result",
    "scale_to_power",
    "min_power_point",
]

# relative slack allowed on the similarity ball when rescaling to full power
SCALE_SIM_RTOL = 1e-6


class InitMode(str, Enum):
    ONES = "ones"
    REFERENCE = "reference"
    CUSTOM = "custom"


@dataclass(frozen=True)
class AldaConfig:
    """Solver settings.

    ``z_init_mode='ones'`` starts from the all-ones vector. Identical blocks
    are a stationary point of every distance term, so a uniform perturbation
    of size ``init_perturb`` (seeded by ``seed``) is added to break symmetry.
    ``'reference'`` starts from the stacked reference plus a perturbation
    scaled by ``eps``.
    """

    z_init_mode: InitMode = InitMode.ONES
    z_custom: tuple | None = None
    lambda0: float = 0.5
    v0: float = 0.5
    mu0: float = 10.0
    rho: float = 2.0
    mu_max: float = 1e10
    max_outer: int = 100
    max_bfgs: int = 500
    bfgs_memory: int = 10
    bfgs_grad_tol: float = 1e-6
    feas_tol: float = 1e-6
    stall_tol: float = 1e-8
    init_perturb: float = 1e-3
    n_starts: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "z_init_mode", InitMode(self.z_init_mode))
        if self.mu0 <= 0 or self.rho <= 1:
            raise InvalidInput("need mu0 > 0 and rho > 1")
        if min(self.bfgs_grad_tol, self.feas_tol, self.stall_tol) <= 0:
            raise InvalidInput("tolerances must be positive")
        if self.lambda0 < 0 or self.v0 < 0:
            raise InvalidInput("initial multipliers must be non-negative")
        if self.max_outer < 1 or self.max_bfgs < 1 or self.n_starts < 1:
            raise InvalidInput("iteration counts must be >= 1")


@dataclass(frozen=True)
class BisectConfig:
    """Bracket and stopping rule for the search over ``d``.

    ``None`` entries are filled from the instance: ``d_lo = 0``,
    ``d_hi = 4 eps^2 sigma_1^2 (1 + M P / max(eps^2, 1e-12))`` and
    ``d_tol = 1e-9 d_hi``, small enough that the power test normally ends the search.
    """

    d_lo: float | None = None
    d_hi: float | None = None
    d_tol: float | None = None
    p_tol: float = 1e-3
    max_iter: int = 60


@dataclass
class AldaState:
    z: np.ndarray
    duals: DualState
    outer_iter: int
    feas_residual: float
    objective: float
    history: list = field(default_factory=list, repr=False)


@dataclass
class DesignResult:
    """Designed signal set with metrics recomputed from the signals.

    ``signals`` are in transmit space (``x_k = V s_k``), ``s`` in the reduced
    frame. ``d_achieved`` is the (unsquared) minimum weighted distance.
    """

    signals: np.ndarray
    s: np.ndarray
    d_achieved: float
    power_used: float
    similarity: np.ndarray
    converged: bool
    d_target: float | None = None
    scaled: bool = False
    notes: list = field(default_factory=list)
    state: AldaState | None = field(default=None, repr=False)

    @property
    def M(self):
        return self.s.shape[0]

    @property
    def max_similarity(self):
        return float(np.max(self.similarity))


@dataclass
class KktReport:
    """First-order optimality diagnostics, relative to ``||grad z^T z||``.

    ``stationarity`` uses the best non-negative multipliers for the active
    constraints (a least-squares fit), ``multiplier_stationarity`` the
    solver's own multiplier estimates.
    """

    stationarity: float
    primal_violation: float
    complementarity: float
    multiplier_stationarity: float = math.nan

    def as_dict(self):
        return {"stationarity": self.stationarity,
                "primal_violation": self.primal_violation,
                "complementarity": self.complementarity,
                "multiplier_stationarity": self.multiplier_stationarity}


def min_pair_sq_distance(S, gains):
    M = S.shape[0]
    if M < 2:
        return 0.0
    ks, ls = ordered_pairs(M)
    D = S[ks] - S[ls]
    return float(np.min((D * D) @ gains))


def design_result(inst: ReducedInstance, S, converged, d_target=None, state=None):
    """Package reduced-frame signals ``S`` and recompute every metric from them."""
    S = np.array(S, dtype=float).reshape(inst.M, inst.N)
    return DesignResult(
        signals=inst.to_x(S),
        s=S,
        d_achieved=math.sqrt(max(min_pair_sq_distance(S, inst.gains), 0.0)),
        power_used=float(np.sum(S * S) / inst.M),
        similarity=np.linalg.norm(S - inst.s0, axis=1),
        converged=bool(converged),
        d_target=d_target,
        state=state,
    )


def min_power_point(inst: ReducedInstance):
    """Lowest-power point of the similarity ball (the ``d = 0`` optimum)."""
    r = float(np.linalg.norm(inst.s0))
    if r <= inst.eps:
        return np.zeros(inst.N)
    return inst.s0 * (1.0 - inst.eps / r)


def scale_to_power(inst: ReducedInstance, res: DesignResult):
    """Rescale to the power budget unless that leaves the similarity balls."""
    power = res.power_used
    if power <= 0 or abs(power - inst.P) <= 1e-15 * inst.P:
        return res
    c = math.sqrt(inst.P / power)
    S = c * res.s
    sim = np.linalg.norm(S - inst.s0, axis=1)
    if np.all(sim <= inst.eps * (1.0 + SCALE_SIM_RTOL) + 1e-15):
        out = design_result(inst, S, res.converged, res.d_target, res.state)
        out.scaled = True
        out.notes = list(res.notes) + [f"scaled by {c:.6g} to meet power"]
        return out
    res.notes.append("power scaling skipped: would violate similarity")
    return res


def _initial_z(q: QcqpInstance, cfg: AldaConfig, start: int):
    M, N = q.M, q.N
    rng = np.random.default_rng([cfg.seed, start])
    u = rng.uniform(-1.0, 1.0, M * N)
    mode = cfg.z_init_mode
    if mode is InitMode.CUSTOM:
        if cfg.z_custom is None:
            raise InvalidInput("custom init mode requires z_custom")
        z = np.asarray(cfg.z_custom, dtype=float).ravel()
        if z.shape != (M * N,):
            raise InvalidInput("z_custom has the wrong length")
        return z.copy() if start == 0 else z + cfg.init_perturb * u
    if mode is InitMode.REFERENCE:
        return q.z0 + cfg.init_perturb * max(q.inst.eps, 1e-12) * u
    return np.ones(M * N) + cfg.init_perturb * u


def _true_lagrangian_grad(q: QcqpInstance, z, duals: DualState):
    """Gradient of the ordinary Lagrangian at the given multipliers."""
    S = blocks(z, q.M, q.N)
    g = 2.0 * S.copy()
    if q.M > 1:
        ks, ls = ordered_pairs(q.M)
        coef = duals.lam[:, None] * 2.0 * q.inst.gains * (S[ks] - S[ls])
        np.add.at(g, ks, -coef)
        np.add.at(g, ls, coef)
    g += 2.0 * duals.v[:, None] * (S - q.inst.s0)
    return g.ravel()


def kkt_report(q: QcqpInstance, state: AldaState, active_tol=1e-6) -> KktReport:
    """Stationarity, primal violation and complementary slackness at ``state``."""
    z, duals = state.z, state.duals
    S = blocks(z, q.M, q.N)
    g = 2.0 * z
    scale = max(float(np.linalg.norm(g)), 1e-12)
    cols = []
    comp = 0.0
    if q.M > 1:
        qv = pair_residuals(q, z)
        comp = float(np.max(np.abs(duals.lam * (qv - q.d))))
        ks, ls = ordered_pairs(q.M)
        for p in np.flatnonzero((ks < ls) & (np.abs(qv - q.d) <= active_tol * max(1.0, q.d))):
            c = np.zeros_like(S)
            c[ks[p]] = 2.0 * q.inst.gains * (S[ks[p]] - S[ls[p]])
            c[ls[p]] = -c[ks[p]]
            cols.append(c.ravel())
    sv = similarity_residuals(q, z)
    comp = max(comp, float(np.max(np.abs(duals.v * sv))))
    for k in np.flatnonzero(np.abs(sv) <= active_tol * max(1.0, q.inst.eps**2)):
        c = np.zeros_like(S)
        c[k] = -2.0 * (S[k] - q.inst.s0)
        cols.append(c.ravel())
    if cols:
        _, resid = nnls(np.array(cols).T, g)
    else:
        resid = float(np.linalg.norm(g))
    return KktReport(
        stationarity=float(resid) / scale,
        primal_violation=feasibility_residual(q, z),
        complementarity=comp,
        multiplier_stationarity=float(np.linalg.norm(_true_lagrangian_grad(q, z, duals))) / scale,
    )


def _inner_solve(q, z, duals, cfg):
    def fun(x):
        return lagrangian_value_grad(q, x, duals)

    return minimize(fun, z, jac=True, method="L-BFGS-B",
                    options={"maxcor": cfg.bfgs_memory, "gtol": cfg.bfgs_grad_tol,
                             "maxiter": cfg.max_bfgs, "maxls": 100})


def _run_alda(q: QcqpInstance, cfg: AldaConfig, z):
    """One ALDA run from ``z``; raises :class:`InfeasibleDetected`."""
    duals = DualState.constant(q.M, cfg.lambda0, cfg.v0, cfg.mu0)
    history = []
    prev_obj = None
    stalls = 0
    best_feas = math.inf
    since_best = 0
    converged = False
    feas = feasibility_residual(q, z)
    obj = float(z @ z)
    j = 0
    for j in range(1, cfg.max_outer + 1):
        L_before = lagrangian_value_grad(q, z, duals)[0]
        res = _inner_solve(q, z, duals, cfg)
        if res.fun <= L_before:
            z = np.array(res.x)
        L_after = min(res.fun, L_before)

        # projected dual ascent; ordered-pair multipliers
        qv = pair_residuals(q, z) if q.M > 1 else np.zeros(0)
        sv = similarity_residuals(q, z)
        mu = duals.mu
        lam = np.maximum(duals.lam - mu * (qv - q.d), 0.0)
        v = np.maximum(duals.v + mu * sv, 0.0)
        duals = DualState(lam, v, min(cfg.rho * mu, cfg.mu_max))

        feas = feasibility_residual(q, z)
        obj = float(z @ z)
        history.append({"iter": j, "objective": obj, "feas": feas, "mu": mu,
                        "L_before": L_before, "L_after": L_after,
                        "bfgs_iters": int(res.nit)})

        if prev_obj is not None and abs(obj - prev_obj) <= cfg.stall_tol * max(1.0, abs(obj)):
            stalls += 1
        else:
            stalls = 0
        prev_obj = obj
        if feas <= cfg.feas_tol and stalls >= 2:
            converged = True
            break

        if feas < 0.99 * best_feas:
            best_feas = feas
            since_best = 0
        else:
            since_best += 1
        if mu > 1e8 and feas > 10 * cfg.feas_tol and since_best >= 3:
            state = AldaState(z, duals, j, feas, obj, history)
            err = InfeasibleDetected(
                f"constraints stay violated by {feas:.3g} at d={q.d:.6g}",
                d=q.d, residual=feas)
            err.state = state
            raise err
    state = AldaState(z, duals, j, feas, obj, history)
    return state, converged


def solve_p8(q: QcqpInstance, cfg: AldaConfig = AldaConfig(), z_init=None):
    """Minimise total power subject to the distance and similarity constraints.

    Returns
    -------
    state : AldaState
    result : DesignResult
        Unscaled solution; ``converged`` is False if ``max_outer`` was hit.

    Raises
    ------
    InfeasibleDetected
        When every start stalls with violated constraints at large penalty.
    """
    runs = []
    failures = []
    for start in range(cfg.n_starts):
        if z_init is not None and start == 0:
            z = np.asarray(z_init, dtype=float).ravel().copy()
        else:
            z = _initial_z(q, cfg, start)
        try:
            state, conv = _run_alda(q, cfg, z)
        except InfeasibleDetected as exc:
            failures.append(exc)
            continue
        res = design_result(q.inst, blocks(state.z, q.M, q.N), conv, q.d, state)
        runs.append((start, state, res))
    if not runs:
        raise failures[0]

    def key(item):
        start, state, res = item
        feasible = res.converged or state.feas_residual <= cfg.feas_tol
        return (not feasible, -res.d_achieved, start)

    _, state, res = min(runs, key=key)
    return state, res


def _clean_p8(q, cfg, z_init=None):
    """``solve_p8`` returning ``None`` instead of raising on infeasibility."""
    try:
        state, res = solve_p8(q, cfg, z_init)
    except InfeasibleDetected:
        return None
    if not res.converged and state.feas_residual > cfg.feas_tol:
        return None
    return res


def feasible_design(inst: ReducedInstance, d, cfg: AldaConfig = AldaConfig(), p_tol=1e-3,
                    z_init=None):
    """Minimum-power design meeting target ``d`` within the budget, else ``None``."""
    if inst.M == 1 or d == 0:
        res = _trivial(inst)
    else:
        res = _clean_p8(QcqpInstance(inst, float(d)), cfg, z_init)
    if res is None or res.power_used > inst.P * (1.0 + p_tol):
        return None
    return res


def _trivial(inst: ReducedInstance, converged=True):
    p = min_power_point(inst)
    S = np.tile(p, (inst.M, 1))
    return design_result(inst, S, converged, 0.0)


def solve_maxmin(inst: ReducedInstance, cfg: AldaConfig = AldaConfig(),
                 bisect: BisectConfig = BisectConfig()) -> DesignResult:
    """Max-min distance design under the power budget by bisection on ``d``.

    At each probe the power-minimisation problem is solved; a probe whose
    minimum power exceeds ``P`` (or that is infeasible) lowers the upper
    bracket, one below ``P`` raises the lower bracket, and a probe within
    ``p_tol`` of ``P`` ends the search. The best probe is finally rescaled to
    the full budget when that keeps every signal inside its similarity ball.
    """
    base = _trivial(inst)
    if base.power_used > inst.P * (1.0 + bisect.p_tol):
        raise NoFeasiblePoint(
            f"minimum power {base.power_used:.6g} already exceeds P={inst.P:.6g}")
    if inst.M == 1 or inst.eps == 0.0 or inst.sigma.size == 0 or inst.sigma[0] == 0.0:
        base.notes.append("degenerate instance: all signals at the lowest-power point")
        return base

    eps2 = inst.eps**2
    d_lo = 0.0 if bisect.d_lo is None else float(bisect.d_lo)
    d_hi = (4.0 * eps2 * inst.sigma[0] ** 2 * (1.0 + inst.M * inst.P / max(eps2, 1e-12))
            if bisect.d_hi is None else float(bisect.d_hi))
    if d_lo < 0 or d_hi <= d_lo:
        raise InvalidInput("bisection bracket must satisfy 0 <= d_lo < d_hi")
    d_tol = 1e-9 * d_hi if bisect.d_tol is None else float(bisect.d_tol)

    best = base
    warm = None
    for _ in range(bisect.max_iter):
        if d_hi - d_lo <= d_tol:
            break
        mid = 0.5 * (d_lo + d_hi)
        res = _clean_p8(QcqpInstance(inst, mid), cfg, warm)
        if res is None or res.power_used > inst.P * (1.0 + bisect.p_tol):
            d_hi = mid
            continue
        best = res
        warm = res.s.ravel()
        if abs(res.power_used - inst.P) <= bisect.p_tol * inst.P:
            break
        d_lo = mid
    best = scale_to_power(inst, best)
    return best


def solve_fixed_d(inst: ReducedInstance, d, cfg: AldaConfig = AldaConfig(),
                  bisect: BisectConfig = BisectConfig(), fallback=True) -> DesignResult:
    """Power-minimising design at a fixed squared-distance target ``d``.

    If the target cannot be met inside the similarity balls, or meeting it
    needs more than the power budget, and ``fallback`` is set, the max-min
    design under the budget (:func:`solve_maxmin`) is returned instead with
    a note. The result is rescaled to the budget where similarity allows.
    """
    q = QcqpInstance(inst, float(d))
    if inst.M == 1 or d == 0:
        return scale_to_power(inst, _trivial(inst))
    res = _clean_p8(q, cfg)
    over = res is not None and res.power_used > inst.P * (1.0 + bisect.p_tol)
    if res is None or over:
        why = "needs more than the power budget" if over else "is infeasible"
        if not fallback:
            raise InfeasibleDetected(f"target d={d:.6g} {why}", d=d)
        best = solve_maxmin(inst, cfg, bisect)
        best.notes.append(f"target d={d:.6g} {why}; returned the max-min design")
        best.d_target = float(d)
        return best
    return scale_to_power(inst, res)
