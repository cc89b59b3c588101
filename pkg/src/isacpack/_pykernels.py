"""NumPy implementations of the hot kernels (used when the extension is absent)."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def ordered_pairs(M):
    """Index arrays ``(k, l)`` over ordered pairs, outer loop on ``l``."""
    ks, ls = [], []
    for l in range(M):
        for k in range(M):
            if k != l:
                ks.append(k)
                ls.append(l)
    return np.array(ks, dtype=np.intp), np.array(ls, dtype=np.intp)


def _phi(a, b, c):
    active = a >= -b / c
    val = np.where(active, b * a + 0.5 * c * a * a, -0.5 * b * b / c)
    der = np.where(active, b + c * a, 0.0)
    return val, der


def lagrangian_value_grad(z, M, N, gains, s0, d, eps2, lam, v, mu, grad):
    S = z.reshape(M, N)
    ks, ls = ordered_pairs(M)
    D = S[ks] - S[ls]
    q = (D * D) @ gains
    pv, pd = _phi(d - q, lam, mu)
    E = S - s0
    sv, sd = _phi(np.einsum("ij,ij->i", E, E) - eps2, v, mu)
    G = 2.0 * S + 2.0 * sd[:, None] * E
    coef = (-2.0 * pd)[:, None] * gains * D
    np.add.at(G, ks, coef)
    np.add.at(G, ls, -coef)
    grad[:] = G.ravel()
    return float(z @ z + pv.sum() + sv.sum())


def pair_sq_distances(S, gains):
    ks, ls = ordered_pairs(S.shape[0])
    D = S[ks] - S[ls]
    return (D * D) @ gains
