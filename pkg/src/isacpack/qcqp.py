"""Block-structured evaluation of the power-minimisation QCQP.

The decision vector ``z`` stacks the ``M`` reduced signals ``s_1..s_M``. The
pair matrix ``Q_kl`` is never formed: ``z^T Q_kl z = ||Lambda (s_k - s_l)||^2``
only touches blocks ``k`` and ``l``. Signal indices are zero-based.

Multipliers follow the ordered-pair convention: one ``lambda`` per ordered
pair ``(k, l)``, ``k != l``, enumerated with ``l`` in the outer loop (see
:func:`isacpack.kernels.ordered_pairs`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInput
from .kernels import ordered_pairs
from .signal_model import ReducedInstance

__all__ = [
    "QcqpInstance",
    "DualState",
    "blocks",
    "stack",
    "phi",
    "phi_grad",
    "pair_quadratic",
    "pair_quadratic_grad",
    "similarity_residual",
    "pair_residuals",
    "similarity_residuals",
    "lagrangian",
    "lagrangian_grad",
    "lagrangian_value_grad",
    "slack_r",
    "slack_t",
    "feasibility_residual",
]


@dataclass(frozen=True)
class QcqpInstance:
    """A reduced instance together with the squared-distance target ``d``."""

    inst: ReducedInstance
    d: float

    def __post_init__(self):
        if self.d < 0:
            raise InvalidInput("d must be non-negative")

    @property
    def M(self):
        return self.inst.M

    @property
    def N(self):
        return self.inst.N

    @property
    def z0(self):
        """Reference stacked ``M`` times."""
        return np.tile(self.inst.s0, self.inst.M)

    @property
    def n_pairs(self):
        return self.inst.M * (self.inst.M - 1)


@dataclass
class DualState:
    """Multipliers and penalty of the augmented Lagrangian."""

    lam: np.ndarray
    v: np.ndarray
    mu: float

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.mu <= 0:
            raise InvalidInput("penalty mu must be positive")
        if np.any(self.lam < 0) or np.any(self.v < 0):
            raise InvalidInput("multipliers must be non-negative")

    @classmethod
    def constant(cls, M, lam0=0.5, v0=0.5, mu=10.0):
        return cls(np.full(M * (M - 1), float(lam0)), np.full(M, float(v0)), float(mu))

    def copy(self):
        return DualState(self.lam.copy(), self.v.copy(), self.mu)


def blocks(z, M, N):
    """View of ``z`` as an ``(M, N)`` array of signals."""
    return np.asarray(z, dtype=float).reshape(M, N)


def stack(S):
    return np.ascontiguousarray(S, dtype=float).ravel()


def _check_index(q, *idx):
    for i in idx:
        if not 0 <= i < q.M:
            raise InvalidInput(f"signal index {i} out of range for M={q.M}")


def phi(a, b, c):
    """Slack-eliminated penalty term.

    ``b a + c a^2 / 2`` when ``a >= -b/c``, otherwise ``-b^2 / (2c)``.
    Continuously differentiable in ``a``.
    """
    a = np.asarray(a, dtype=float)
    return np.where(a >= -b / c, b * a + 0.5 * c * a * a, -0.5 * b * b / c)


def phi_grad(a, b, c):
    a = np.asarray(a, dtype=float)
    return np.where(a >= -b / c, b + c * a, 0.0)


def pair_quadratic(q: QcqpInstance, z, k, l):
    """``z^T Q_kl z = ||Lambda (s_k - s_l)||^2``."""
    _check_index(q, k, l)
    if k == l:
        raise InvalidInput("pair indices must differ")
    S = blocks(z, q.M, q.N)
    diff = S[k] - S[l]
    return float(diff**2 @ q.inst.gains)


def pair_quadratic_grad(q: QcqpInstance, z, k, l):
    _check_index(q, k, l)
    if k == l:
        raise InvalidInput("pair indices must differ")
    S = blocks(z, q.M, q.N)
    g = np.zeros_like(S)
    g[k] = 2.0 * q.inst.gains * (S[k] - S[l])
    g[l] = -g[k]
    return g.ravel()


def similarity_residual(q: QcqpInstance, z, k):
    """``||s_k - s0||^2 - eps^2`` (non-positive when the constraint holds)."""
    _check_index(q, k)
    S = blocks(z, q.M, q.N)
    e = S[k] - q.inst.s0
    return float(e @ e - q.inst.eps**2)


def pair_residuals(q: QcqpInstance, z):
    """``z^T Q_kl z`` for every ordered pair, in multiplier order."""
    S = np.ascontiguousarray(blocks(z, q.M, q.N))
    return kernels.pair_sq_distances(S, q.inst.gains)


def similarity_residuals(q: QcqpInstance, z):
    E = blocks(z, q.M, q.N) - q.inst.s0
    return np.einsum("ij,ij->i", E, E) - q.inst.eps**2


def feasibility_residual(q: QcqpInstance, z):
    """Largest constraint violation (zero when feasible)."""
    viol = 0.0
    if q.M > 1:
        viol = max(viol, float(np.max(q.d - pair_residuals(q, z))))
    viol = max(viol, float(np.max(similarity_residuals(q, z))))
    return max(viol, 0.0)


def lagrangian_value_grad(q: QcqpInstance, z, duals: DualState):
    """Augmented Lagrangian with the slacks eliminated, and its gradient."""
    z = np.ascontiguousarray(z, dtype=float)
    grad = np.empty_like(z)
    f = kernels.lagrangian_value_grad(
        z, q.M, q.N, q.inst.gains, q.inst.s0, float(q.d), q.inst.eps**2,
        duals.lam, duals.v, float(duals.mu), grad,
    )
    return f, grad


def lagrangian(q: QcqpInstance, z, duals: DualState):
    """``z^T z + sum phi(d - z^T Q_kl z, lam_lk, mu) + sum phi(||s_k - s0||^2 - eps^2, v_k, mu)``."""
    return lagrangian_value_grad(q, z, duals)[0]


def lagrangian_grad(q: QcqpInstance, z, duals: DualState):
    return lagrangian_value_grad(q, z, duals)[1]


def slack_r(q: QcqpInstance, z, duals: DualState, k, l):
    """Closed-form minimiser of the distance slack ``r_{k,l} >= 0``."""
    _check_index(q, k, l)
    ks, ls = ordered_pairs(q.M)
    p = int(np.flatnonzero((ks == k) & (ls == l))[0])
    val = pair_quadratic(q, z, k, l) - q.d - duals.lam[p] / duals.mu
    return max(val, 0.0)


def slack_t(q: QcqpInstance, z, duals: DualState, k):
    """Closed-form minimiser of the similarity slack ``t_k >= 0``."""
    val = -similarity_residual(q, z, k) - duals.v[k] / duals.mu
    return max(val, 0.0)
