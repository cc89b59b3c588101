"""Distance versus similarity trade-off sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alda import AldaConfig, feasible_design, solve_fixed_d
from .errors import IsacError
from .signal_model import ReducedInstance

__all__ = ["TradeoffPoint", "min_feasible_eps", "sweep_tradeoff"]


@dataclass
class TradeoffPoint:
    d_target: float
    eps: float  # radius used (minimal feasible one in min-eps mode)
    d_achieved: float
    max_similarity: float
    result: object = None
    error: str | None = None


def min_feasible_eps(inst: ReducedInstance, d, cfg: AldaConfig = AldaConfig(),
                     rtol=1e-3, eps_max=None, p_tol=1e-3):
    """Smallest similarity radius for which target ``d`` fits the power budget.

    Bisection between the necessary bound ``sqrt(d) / (2 sigma_1)`` and the
    first radius found feasible by doubling. Returns ``(eps, result)``, or
    ``(nan, None)`` when ``eps_max`` is reached without success.
    """
    if d <= 0 or inst.M == 1:
        r = feasible_design(inst.replace(eps=0.0), 0.0, cfg, p_tol)
        return (0.0, r) if r is not None else (math.nan, None)
    s1 = float(inst.sigma[0]) if inst.sigma.size else 0.0
    if s1 == 0:
        return math.nan, None
    if eps_max is None:
        eps_max = 2.0 * math.sqrt(inst.P) + math.sqrt(d) / s1
    lo = math.sqrt(d) / (2.0 * s1)
    hi = max(lo, 1e-6) * 1.25
    best = None
    while best is None:
        best = feasible_design(inst.replace(eps=hi), d, cfg, p_tol)
        if best is None:
            lo = hi
            if hi >= eps_max:
                return math.nan, None
            hi = min(2.0 * hi, eps_max)
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        r = feasible_design(inst.replace(eps=mid), d, cfg, p_tol, z_init=best.s.ravel())
        if r is None:
            lo = mid
        else:
            hi, best = mid, r
    return hi, best


def sweep_tradeoff(inst: ReducedInstance, d_values, cfg: AldaConfig = AldaConfig(),
                   mode="min_eps", rtol=1e-3):
    """Design at each target distance.

    ``mode="min_eps"`` searches the smallest feasible radius per point;
    ``mode="fixed_eps"`` keeps ``inst.eps`` and solves the fixed-target
    problem. A failing point is recorded and the sweep continues.
    """
    if mode not in ("min_eps", "fixed_eps"):
        raise ValueError(f"unknown sweep mode {mode!r}")
    out = []
    for d in d_values:
        d = float(d)
        try:
            if mode == "min_eps":
                eps, res = min_feasible_eps(inst, d, cfg, rtol)
                if res is None:
                    out.append(TradeoffPoint(d, math.nan, math.nan, math.nan,
                                             error="no feasible radius"))
                    continue
            else:
                eps, res = inst.eps, solve_fixed_d(inst, d, cfg)
            out.append(TradeoffPoint(d, float(eps), res.d_achieved,
                                     float(np.max(res.similarity)), res))
        except IsacError as exc:
            out.append(TradeoffPoint(d, math.nan, math.nan, math.nan, error=str(exc)))
    return out
