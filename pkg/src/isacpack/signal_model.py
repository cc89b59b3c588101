"""Signal and channel representations.

Complex signals of ``N/2`` symbols are handled as real vectors of length ``N``
with the stacking convention ``[Re(x); Im(x)]``. A MIMO channel ``H`` acts on
such a vector through its real block form ``B``. The SVD of ``B`` reduces a
channel-weighted design problem to a diagonal one (:class:`ReducedInstance`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidInput

__all__ = [
    "WaveformKind",
    "ReferenceWaveform",
    "ReducedInstance",
    "realify",
    "complexify",
    "realify_channel",
    "reduce",
    "identity_instance",
    "steering_matrix",
    "gen_lfm",
    "gen_widebeam",
    "sidelobe_mask",
]

# singular values below this fraction of the largest are treated as exact zeros
RANK_RTOL = 1e-12


class WaveformKind(str, Enum):
    LFM = "lfm"
    WIDEBEAM = "widebeam"
    FROM_FILE = "file"


def realify(x):
    """Map a complex vector (or stack of row vectors) to ``[Re, Im]`` form."""
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=-1).astype(float)


def complexify(x):
    """Inverse of :func:`realify`."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n % 2:
        raise InvalidInput(f"real dimension must be even, got {n}")
    h = n // 2
    return x[..., :h] + 1j * x[..., h:]


def realify_channel(H):
    """Real block form ``[[Re H, -Im H], [Im H, Re H]]`` of a complex channel.

    For any complex ``x`` the identity ``||B realify(x)|| = ||H x||`` holds.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.ndim != 2:
        raise InvalidInput("channel must be a 2-D matrix")
    if not np.all(np.isfinite(H)):
        raise InvalidInput("channel has non-finite entries")
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


@dataclass(frozen=True)
class ReferenceWaveform:
    """Reference sensing waveform ``x0`` in real stacked form."""

    x0: np.ndarray
    kind: WaveformKind = WaveformKind.FROM_FILE

    @property
    def N(self):
        return self.x0.shape[0]

    def as_complex(self):
        return complexify(self.x0)


@dataclass(frozen=True)
class ReducedInstance:
    """Diagonalised design problem.

    Signals ``s_k`` live in the rotated frame; the transmitted signals are
    ``x_k = V s_k`` and received distances are ``||Lambda (s_k - s_l)||``.

    Attributes
    ----------
    M, N : int
        Set size and real dimension.
    P : float
        Average power budget.
    eps : float
        Similarity tolerance ``||s_k - s0|| <= eps``.
    sigma : ndarray
        Non-negative singular values, descending, length ``<= N``.
    V : ndarray
        ``N x N`` orthogonal rotation.
    s0 : ndarray
        Rotated reference ``V^T x0``.
    """

    M: int
    N: int
    P: float
    eps: float
    sigma: np.ndarray
    V: np.ndarray
    s0: np.ndarray
    gains: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim != 1 or sigma.shape[0] > self.N:
            raise InvalidInput("sigma must be a vector of length <= N")
        if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
            raise InvalidInput("sigma must be non-negative and sorted descending")
        if self.M < 1:
            raise InvalidInput("M must be >= 1")
        if self.eps < 0 or self.P <= 0:
            raise InvalidInput("eps must be >= 0 and P > 0")
        s0 = np.asarray(self.s0, dtype=float)
        if s0.shape != (self.N,):
            raise InvalidInput("s0 must have length N")
        gains = np.zeros(self.N)
        gains[: sigma.shape[0]] = sigma**2
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))
        object.__setattr__(self, "gains", gains)

    @property
    def lam_diag(self):
        """Diagonal of ``Lambda`` padded with zeros to length ``N``."""
        return np.sqrt(self.gains)

    def to_x(self, s):
        """Rotate signals (rows) from the reduced frame back to transmit space."""
        return np.asarray(s) @ self.V.T

    def to_s(self, x):
        return np.asarray(x) @ self.V

    def replace(self, **changes):
        kw = dict(M=self.M, N=self.N, P=self.P, eps=self.eps,
                  sigma=self.sigma, V=self.V, s0=self.s0)
        kw.update(changes)
        return ReducedInstance(**kw)


def _as_x0(x0):
    if isinstance(x0, ReferenceWaveform):
        return x0.x0
    return np.asarray(x0, dtype=float).ravel()


def reduce(H, x0, M, P, eps):
    """Realify ``H`` and diagonalise it with a real SVD.

    Parameters
    ----------
    H : array_like, complex, shape (N_r, N/2)
    x0 : ReferenceWaveform or array_like of length N
    M : int
    P : float
    eps : float

    Returns
    -------
    ReducedInstance
    """
    B = realify_channel(H)
    x0 = _as_x0(x0)
    N = B.shape[1]
    if x0.shape[0] != N:
        raise InvalidInput(f"reference has length {x0.shape[0]}, channel expects {N}")
    _, sv, Vt = np.linalg.svd(B, full_matrices=True)
    if sv.size and sv[0] > 0:
        sv = np.where(sv < RANK_RTOL * sv[0], 0.0, sv)
    V = Vt.T
    return ReducedInstance(M=int(M), N=N, P=float(P), eps=float(eps),
                           sigma=sv, V=V, s0=V.T @ x0)


def identity_instance(x0, M, P, eps):
    """Channel-free problem (``B = I``): unit gains and no rotation."""
    x0 = _as_x0(x0)
    N = x0.shape[0]
    return ReducedInstance(M=int(M), N=N, P=float(P), eps=float(eps),
                           sigma=np.ones(N), V=np.eye(N), s0=x0.copy())


def steering_matrix(n_tx, theta_deg):
    """Half-wavelength ULA steering vectors, one row per angle.

    ``a(theta)_n = exp(j pi n sin(theta))`` with the phase reference at element 0.
    """
    theta = np.deg2rad(np.atleast_1d(np.asarray(theta_deg, dtype=float)))
    n = np.arange(n_tx)
    return np.exp(1j * np.pi * np.outer(np.sin(theta), n))


def gen_lfm(N, P):
    """LFM chirp ``sqrt(2P/N) exp(j pi 2 n (n-1) / N)``, n = 1..N/2, realified."""
    if N < 2 or N % 2:
        raise InvalidInput("N must be even and >= 2")
    if P <= 0:
        raise InvalidInput("P must be positive")
    n = np.arange(1, N // 2 + 1)
    x = np.sqrt(2.0 * P / N) * np.exp(1j * np.pi * 2.0 * n * (n - 1) / N)
    return ReferenceWaveform(realify(x), WaveformKind.LFM)


def transition_width(n_tx):
    """Half-width, in ``sin(theta)``, of the unconstrained band at each lobe edge."""
    return 2.0 / n_tx


def sidelobe_mask(theta_deg, lobe, n_tx):
    """Angles outside the lobe and its transition bands."""
    u = np.sin(np.deg2rad(np.asarray(theta_deg, dtype=float)))
    ulo, uhi = np.sin(np.deg2rad(lobe[0])), np.sin(np.deg2rad(lobe[1]))
    tw = transition_width(n_tx)
    return (u < ulo - tw) | (u > uhi + tw)


def gen_widebeam(n_tx, P, lobe=(-20.0, 20.0), angle_step=0.5, iters=200):
    """Flat-top spatial beam by iterative magnitude least squares.

    The target magnitude is one inside ``lobe`` and zero in the sidelobe
    region of a ``[-90, 90]`` degree grid; a transition band of
    ``2 / n_tx`` in ``sin(theta)`` at each edge is left unconstrained. Each
    iteration keeps the phases of the current pattern, solves the linear
    least-squares fit and rescales to power ``P``. The start is the beam
    steered to the lobe centre, so the result is deterministic.
    """
    lo, hi = float(lobe[0]), float(lobe[1])
    if n_tx < 2:
        raise InvalidInput("n_tx must be >= 2")
    if not lo < hi or lo < -90 or hi > 90:
        raise InvalidInput("lobe must satisfy -90 <= lo < hi <= 90")
    if angle_step <= 0:
        raise InvalidInput("angle_step must be positive")
    if P <= 0:
        raise InvalidInput("P must be positive")
    grid = np.arange(-90.0, 90.0 + 1e-9, angle_step)
    inside = (grid >= lo) & (grid <= hi)
    if not inside.any():
        raise InvalidInput("no grid angle falls inside the lobe")
    care = inside | sidelobe_mask(grid, (lo, hi), n_tx)
    A = steering_matrix(n_tx, grid[care]).conj()  # rows a(theta)^H
    target = inside[care].astype(float)
    pinv = np.linalg.pinv(A)

    x = steering_matrix(n_tx, 0.5 * (lo + hi))[0]
    x *= np.sqrt(P) / np.linalg.norm(x)
    for _ in range(iters):
        y = A @ x
        x = pinv @ (target * np.exp(1j * np.angle(y)))
        x *= np.sqrt(P) / np.linalg.norm(x)
    return ReferenceWaveform(realify(x), WaveformKind.WIDEBEAM)
