"""Bit-dimension-power splitting (BDPS).

The ``N`` reduced dimensions are partitioned into ``G`` groups. Group ``g``
carries ``m_g`` bits (``M_g = 2**m_g`` signals) with its own power ``P_g`` and
similarity radius ``eps_g``; each group is an independent small max-min
problem solved by :func:`isacpack.alda.solve_maxmin`. The full signal set is
the Cartesian product of the group codebooks.

The split itself (bits, power and similarity shares, dimension assignment)
is chosen by a genetic algorithm maximising ``sqrt(sum_g d_g^2)``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .alda import AldaConfig, BisectConfig, DesignResult, design_result, solve_maxmin
from .errors import InfeasibleDetected, InvalidInput, NoFeasiblePoint
from .signal_model import ReducedInstance

log = logging.getLogger(__name__)

__all__ = [
    "Group",
    "SplitPlan",
    "SplitResult",
    "GaConfig",
    "GaHistory",
    "default_plan",
    "group_instance",
    "solve_split",
    "optimize_split",
]


@dataclass(frozen=True)
class Group:
    dims: tuple
    bits: int
    P: float
    eps: float

    @property
    def M(self):
        return 2**self.bits

    @property
    def N(self):
        return len(self.dims)


@dataclass(frozen=True)
class SplitPlan:
    groups: tuple

    @property
    def G(self):
        return len(self.groups)

    def validate(self, inst: ReducedInstance, tol=1e-9):
        """Check the partition and budget invariants against ``inst``."""
        dims = [d for g in self.groups for d in g.dims]
        if sorted(dims) != list(range(inst.N)):
            raise InvalidInput("group dimensions must partition 0..N-1")
        if 2 ** sum(g.bits for g in self.groups) != inst.M:
            raise InvalidInput("group bits must sum to log2(M)")
        if any(g.bits < 0 or g.P < 0 or g.eps < 0 for g in self.groups):
            raise InvalidInput("bits, powers and radii must be non-negative")
        if any(g.bits > 0 and g.N == 0 for g in self.groups):
            raise InvalidInput("a group carrying bits needs at least one dimension")
        if sum(g.P for g in self.groups) > inst.P * (1 + tol):
            raise InvalidInput("group powers exceed the budget")
        if abs(sum(g.eps**2 for g in self.groups) - inst.eps**2) > tol * max(1.0, inst.eps**2):
            raise InvalidInput("squared group radii must sum to eps^2")

    def to_dict(self):
        return {"groups": [{"dims": list(map(int, g.dims)), "bits": int(g.bits),
                            "P": float(g.P), "eps": float(g.eps)} for g in self.groups]}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(Group(tuple(int(d) for d in g["dims"]), int(g["bits"]),
                               float(g["P"]), float(g["eps"])) for g in data["groups"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class SplitResult:
    plan: SplitPlan
    per_group: list
    d_combined: float
    d_true: float
    s: np.ndarray
    signals: np.ndarray
    power_used: float
    similarity: np.ndarray

    @property
    def d_groups(self):
        return np.array([r.d_achieved for r in self.per_group])

    @property
    def d_combined_sq(self):
        """``sum_g d_g^2`` (``d_combined`` is its square root)."""
        return float(sum(r.d_achieved**2 for r in self.per_group))


@dataclass(frozen=True)
class GaConfig:
    pop: int = 24
    iters: int = 30
    p_mut: float = 0.15
    p_cross: float = 0.8
    seed: int = 0
    elitism: int = 2
    tournament: int = 3
    objective: str = "combined"

    def __post_init__(self):
        if self.pop < 4:
            raise InvalidInput("population must be >= 4")
        if not (0 <= self.p_mut <= 1 and 0 <= self.p_cross <= 1):
            raise InvalidInput("probabilities must lie in [0, 1]")
        if self.elitism < 1 or self.elitism >= self.pop:
            raise InvalidInput("elitism must be in [1, pop)")
        if self.iters < 0 or self.tournament < 1:
            raise InvalidInput("iters must be >= 0 and tournament >= 1")
        if self.objective not in ("combined", "true"):
            raise InvalidInput("objective must be 'combined' or 'true'")


@dataclass
class GaHistory:
    best_fitness: list = field(default_factory=list)
    best_d_true: list = field(default_factory=list)
    evaluations: int = 0
    cache_hits: int = 0


def _log2_int(M):
    m = int(round(math.log2(M)))
    if 2**m != M:
        raise InvalidInput(f"M={M} is not a power of two")
    return m


def _gain_order(inst):
    # stable: ties keep index order
    return np.argsort(-inst.gains, kind="stable")


def _min_group_power(inst, dims, bits, eps):
    v = inst.s0[list(dims)]
    r = float(np.linalg.norm(v))
    if bits == 0:
        return r * r
    return max(r - eps, 0.0) ** 2


def _balanced_bits(m, G):
    base, extra = divmod(m, G)
    return [base + (1 if g < extra else 0) for g in range(G)]


def default_plan(inst: ReducedInstance, G: int) -> SplitPlan:
    """Round-robin dimensions by gain, balanced bits, equal power and eps^2 shares."""
    m = _log2_int(inst.M)
    if G < 1 or G > inst.N:
        raise InvalidInput("need 1 <= G <= N")
    assign = np.empty(inst.N, dtype=int)
    assign[_gain_order(inst)] = np.arange(inst.N) % G
    return _plan_from_genes(inst, _balanced_bits(m, G), np.full(G, 1.0 / G),
                            np.full(G, 1.0 / G), assign)


def _plan_from_genes(inst, bits, pfrac, efrac, assign):
    """Build a plan; power shares sit on top of each group's minimum power."""
    G = len(bits)
    dims = [tuple(int(d) for d in np.flatnonzero(assign == g)) for g in range(G)]
    efrac = np.asarray(efrac, dtype=float)
    eps_g = np.sqrt(efrac / efrac.sum()) * inst.eps
    pmin = np.array([_min_group_power(inst, dims[g], bits[g], eps_g[g]) for g in range(G)])
    spare = inst.P - pmin.sum()
    if spare < -1e-12 * inst.P:
        raise NoFeasiblePoint("group minimum powers exceed the budget")
    pfrac = np.asarray(pfrac, dtype=float)
    P_g = pmin + max(spare, 0.0) * pfrac / pfrac.sum()
    return SplitPlan(tuple(Group(dims[g], int(bits[g]), float(P_g[g]), float(eps_g[g]))
                           for g in range(G)))


def group_instance(inst: ReducedInstance, group: Group) -> ReducedInstance:
    """Reduced sub-problem on ``group.dims``, dimensions ordered by gain."""
    dims = np.array(group.dims, dtype=int)
    order = np.argsort(-inst.gains[dims], kind="stable")
    dims = dims[order]
    return ReducedInstance(M=group.M, N=dims.size, P=group.P, eps=group.eps,
                           sigma=np.sqrt(inst.gains[dims]), V=np.eye(dims.size),
                           s0=inst.s0[dims]), dims


def _solve_group(inst, group, cfg, bisect):
    if group.N == 0:
        return None, np.zeros(0, dtype=int)
    sub, dims = group_instance(inst, group)
    if group.bits == 0:
        # a single deterministic signal: the reference itself
        return design_result(sub, sub.s0[None, :], True, 0.0), dims
    return solve_maxmin(sub, cfg, bisect), dims


def _product_codebook(inst, plan, parts):
    """Concatenate group codebooks; signal index is mixed-radix over groups."""
    S = np.zeros((inst.M, inst.N))
    radices = [g.M for g in plan.groups]
    for k in range(inst.M):
        rem = k
        for g, (res, dims) in enumerate(parts):
            digit = rem % radices[g]
            rem //= radices[g]
            if res is not None:
                S[k, dims] = res.s[digit]
    return S


def solve_split(inst: ReducedInstance, plan: SplitPlan, cfg: AldaConfig = AldaConfig(),
                bisect: BisectConfig = BisectConfig(), threads: int = 1) -> SplitResult:
    """Solve every group independently and assemble the product signal set."""
    plan.validate(inst)

    def work(gi):
        try:
            return _solve_group(inst, plan.groups[gi], cfg, bisect)
        except (InfeasibleDetected, NoFeasiblePoint) as exc:
            exc.group = gi
            raise

    if threads > 1 and plan.G > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(plan.G)))
    else:
        parts = [work(gi) for gi in range(plan.G)]

    S = _product_codebook(inst, plan, parts)
    full = design_result(inst, S, all(r is None or r.converged for r, _ in parts))
    per_group = [r if r is not None else design_result(
        ReducedInstance(M=1, N=1, P=1.0, eps=0.0, sigma=np.zeros(1), V=np.eye(1),
                        s0=np.zeros(1)), np.zeros((1, 1)), True)
        for r, _ in parts]
    d_g = np.array([r.d_achieved for r in per_group])
    return SplitResult(plan=plan, per_group=per_group,
                       d_combined=math.sqrt(float(sum(d**2 for d in d_g))),
                       d_true=full.d_achieved, s=S, signals=full.signals,
                       power_used=full.power_used, similarity=full.similarity)


# --- genetic search over split plans ------------------------------------

@dataclass
class _Chromosome:
    bits: np.ndarray
    pfrac: np.ndarray
    efrac: np.ndarray
    assign: np.ndarray

    def key(self):
        h = hashlib.sha1()
        h.update(self.bits.astype(np.int64).tobytes())
        h.update(np.round(self.pfrac / self.pfrac.sum(), 6).tobytes())
        h.update(np.round(self.efrac / self.efrac.sum(), 6).tobytes())
        h.update(self.assign.astype(np.int64).tobytes())
        return h.hexdigest()

    def copy(self):
        return _Chromosome(self.bits.copy(), self.pfrac.copy(), self.efrac.copy(),
                           self.assign.copy())


def _repair(ch, inst, G, m):
    bits = np.clip(np.round(ch.bits).astype(int), 0, m)
    while bits.sum() > m:
        bits[int(np.argmax(bits))] -= 1
    while bits.sum() < m:
        bits[int(np.argmin(bits))] += 1
    ch.bits = bits
    ch.pfrac = np.clip(ch.pfrac, 1e-6, None)
    ch.pfrac /= ch.pfrac.sum()
    ch.efrac = np.clip(ch.efrac, 1e-6, None)
    ch.efrac /= ch.efrac.sum()
    assign = np.clip(ch.assign, 0, G - 1).astype(int)
    order = _gain_order(inst)
    for g in range(G):
        if bits[g] > 0 and not np.any(inst.gains[assign == g] > 0):
            # hand this group the best dimension of the largest group
            donor = int(np.argmax(np.bincount(assign, minlength=G)))
            cand = [d for d in order if assign[d] == donor]
            assign[cand[0]] = g
    ch.assign = assign
    return ch


def _random_chromosome(rng, inst, G, m):
    return _Chromosome(
        bits=rng.integers(0, m + 1, G).astype(float),
        pfrac=rng.dirichlet(np.ones(G)),
        efrac=rng.dirichlet(np.ones(G)),
        assign=rng.integers(0, G, inst.N),
    )


def _crossover(rng, a, b):
    c = a.copy()
    mask = rng.random(a.assign.size) < 0.5
    c.assign[mask] = b.assign[mask]
    w = rng.random()
    c.pfrac = w * a.pfrac + (1 - w) * b.pfrac
    c.efrac = w * a.efrac + (1 - w) * b.efrac
    if rng.random() < 0.5:
        c.bits = b.bits.copy()
    return c


def _mutate(rng, c, G, m, p):
    if rng.random() < p:
        i, j = rng.choice(G, 2, replace=False) if G > 1 else (0, 0)
        if c.bits[i] > 0:
            c.bits[i] -= 1
            c.bits[j] += 1
    c.pfrac = c.pfrac * np.exp(p * rng.standard_normal(G))
    c.efrac = c.efrac * np.exp(p * rng.standard_normal(G))
    flip = rng.random(c.assign.size) < p / 4
    c.assign[flip] = rng.integers(0, G, int(flip.sum()))
    return c


def optimize_split(inst: ReducedInstance, G: int, ga: GaConfig = GaConfig(),
                   cfg: AldaConfig = AldaConfig(), bisect: BisectConfig = BisectConfig(),
                   method: str = "ga", threads: int = 1):
    """Search split plans with a GA.

    Fitness is ``d_combined`` (``objective="combined"``) or the product-code
    minimum ``d_true`` (``objective="true"``); the other value breaks ties.

    Returns
    -------
    plan : SplitPlan
    result : SplitResult
    history : GaHistory
        Best fitness (and its ``d_true``) after every generation.
    """
    if method == "pso":
        raise NotImplementedError("particle swarm search is not implemented")
    if method != "ga":
        raise InvalidInput(f"unknown split search method {method!r}")
    m = _log2_int(inst.M)
    if G < 1 or G > inst.N:
        raise InvalidInput("need 1 <= G <= N")
    history = GaHistory()
    if G == 1:
        plan = default_plan(inst, 1)
        res = solve_split(inst, plan, cfg, bisect)
        history.best_fitness.append(res.d_combined)
        history.best_d_true.append(res.d_true)
        history.evaluations = 1
        return plan, res, history

    rng = np.random.Generator(np.random.Philox(ga.seed))
    cache = {}
    fail = (-math.inf, -math.inf, None, None)

    def score(ch):
        try:
            plan = _plan_from_genes(inst, ch.bits, ch.pfrac, ch.efrac, ch.assign)
            res = solve_split(inst, plan, cfg, bisect)
        except (InfeasibleDetected, NoFeasiblePoint, InvalidInput):
            return fail
        if ga.objective == "true":
            return (res.d_true, res.d_combined, plan, res)
        return (res.d_combined, res.d_true, plan, res)

    def evaluate_all(chromos):
        keys = [c.key() for c in chromos]
        todo = []
        for k, c in zip(keys, chromos):
            if k in cache or any(k == t[0] for t in todo):
                history.cache_hits += 1
            else:
                todo.append((k, c))
        history.evaluations += len(todo)
        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outs = list(pool.map(lambda t: score(t[1]), todo))
        else:
            outs = [score(c) for _, c in todo]
        for (k, _), out in zip(todo, outs):
            cache[k] = out
        return [cache[k] for k in keys]

    base = default_plan(inst, G)
    seed_assign = np.empty(inst.N, dtype=int)
    for g, grp in enumerate(base.groups):
        seed_assign[list(grp.dims)] = g
    pop = [_repair(_Chromosome(np.array([g.bits for g in base.groups], dtype=float),
                               np.full(G, 1.0 / G), np.full(G, 1.0 / G), seed_assign),
                   inst, G, m)]
    pop += [_repair(_random_chromosome(rng, inst, G, m), inst, G, m)
            for _ in range(ga.pop - 1)]
    fits = evaluate_all(pop)

    def rank_key(t):
        return (-fits[t][0], -fits[t][1], t)

    def record():
        i = min(range(len(pop)), key=rank_key)
        history.best_fitness.append(fits[i][0])
        history.best_d_true.append(fits[i][1] if ga.objective == "combined" else fits[i][0])
        return i

    record()
    for _ in range(ga.iters):
        order = sorted(range(len(pop)), key=rank_key)
        elite = [pop[i].copy() for i in order[: ga.elitism]]
        elite_fits = [fits[i] for i in order[: ga.elitism]]

        def pick():
            idx = rng.choice(len(pop), ga.tournament, replace=False)
            return pop[min(idx, key=rank_key)]

        children = []
        while len(elite) + len(children) < ga.pop:
            a, b = pick(), pick()
            child = _crossover(rng, a, b) if rng.random() < ga.p_cross else a.copy()
            children.append(_repair(_mutate(rng, child, G, m, ga.p_mut), inst, G, m))
        pop = elite + children
        fits = elite_fits + evaluate_all(children)
        record()

    best = min(range(len(pop)), key=rank_key)
    _, _, plan, res = fits[best]
    if plan is None:
        raise NoFeasiblePoint("no feasible split plan found")
    return plan, res, history
