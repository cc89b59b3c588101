"""Evaluation metrics: channel ensembles, distance CDFs, SER, beampatterns,
detection probability, similarity and ambiguity functions.

Monte-Carlo routines split their trials into fixed-size chunks. Chunk ``j``
of SNR point ``i`` draws from its own Philox stream keyed by
``(seed, i, j)``, so results do not depend on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import InvalidInput
from .signal_model import complexify, realify_channel, steering_matrix

__all__ = [
    "ChannelEnsemble",
    "CdfSamples",
    "SerCurve",
    "BeampatternSample",
    "DetectionCurve",
    "AmbiguityGrid",
    "stream",
    "default_grid",
    "gen_rayleigh",
    "perturb_csit",
    "received_min_distance",
    "min_distance_cdf",
    "noise_sigma2",
    "simulate_ser",
    "q_function",
    "beampattern",
    "avg_beampattern",
    "beampattern_mse",
    "detection_probability",
    "waveform_similarity",
    "ambiguity",
]

CHUNK = 10_000
MSE_FLOOR_DB = -100.0


def stream(*key):
    """Counter-based generator for the sub-stream named by integer ``key``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def default_grid(step=0.5):
    return np.arange(-90.0, 90.0 + 1e-9, step)


def _chunks(trials):
    out, left = [], int(trials)
    while left > 0:
        out.append(min(CHUNK, left))
        left -= out[-1]
    return out


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# --- channels -----------------------------------------------------------

@dataclass
class ChannelEnsemble:
    draws: list
    seed: int
    model: str = "rayleigh_iid"

    def __len__(self):
        return len(self.draws)


def gen_rayleigh(n_r, n_tx, count, seed) -> ChannelEnsemble:
    """``count`` i.i.d. ``CN(0, 1)`` channel matrices of shape ``(n_r, n_tx)``."""
    if n_r < 1 or n_tx < 1 or count < 0:
        raise InvalidInput("dimensions must be >= 1 and count >= 0")
    rng = stream(seed)
    draws = [(rng.standard_normal((n_r, n_tx)) + 1j * rng.standard_normal((n_r, n_tx)))
             / math.sqrt(2.0) for _ in range(count)]
    return ChannelEnsemble(draws, int(seed))


def perturb_csit(H, eta, sigma_n2, seed):
    """Imperfect channel knowledge: ``H + E`` with ``E ~ CN(0, eta * sigma_n2)``."""
    if eta < 0 or sigma_n2 < 0:
        raise InvalidInput("eta and sigma_n2 must be non-negative")
    H = np.asarray(H, dtype=complex)
    if eta == 0:
        return H.copy()
    rng = stream(seed)
    scale = math.sqrt(eta * sigma_n2 / 2.0)
    return H + scale * (rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape))


# --- distances ----------------------------------------------------------

@dataclass
class CdfSamples:
    samples: np.ndarray  # sorted, failures removed
    cdf: np.ndarray
    n_failed: int


def received_min_distance(signals, H=None):
    """Smallest ``||B (x_k - x_l)||`` over distinct pairs (0 for one signal)."""
    X = np.atleast_2d(np.asarray(signals, dtype=float))
    Y = X if H is None else X @ realify_channel(H).T
    if Y.shape[0] < 2:
        return 0.0
    diff = Y[:, None, :] - Y[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    D[np.diag_indices_from(D)] = np.inf
    return float(D.min())


def min_distance_cdf(ensemble, designer, d=None, eps=None) -> CdfSamples:
    """Empirical CDF of the received minimum distance over an ensemble.

    ``designer(H, d, eps)`` returns the ``(M, N)`` real signal set for one
    channel. A raised exception counts as a failed channel.
    """
    vals = []
    failed = 0
    for H in ensemble.draws:
        try:
            vals.append(received_min_distance(designer(H, d, eps), H))
        except Exception:  # noqa: BLE001 - any designer failure is recorded
            failed += 1
    s = np.sort(np.asarray(vals, dtype=float))
    cdf = np.arange(1, s.size + 1) / max(s.size, 1)
    return CdfSamples(s, cdf, failed)


# --- symbol error rate --------------------------------------------------

@dataclass
class SerCurve:
    snr_db: np.ndarray
    ser: np.ndarray
    trials_per_point: int
    errors_per_point: np.ndarray

    @property
    def std_err(self):
        p = self.ser
        return np.sqrt(np.maximum(p * (1 - p), 0.0) / self.trials_per_point)


def noise_sigma2(P, snr_db):
    """Per real component noise variance ``P / (2 * 10^(SNR/10))``."""
    return P / (2.0 * 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0))


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def simulate_ser(signals, H, snr_grid_db, trials, seed, P=None, threads=1) -> SerCurve:
    """Monte-Carlo SER with minimum-distance (ML) detection.

    Parameters
    ----------
    signals : (M, N) real array
    H : complex channel or None for the identity
    snr_grid_db : sequence of float
    trials : int
        Trials per SNR point.
    P : float, optional
        Power in the SNR definition; defaults to the mean signal power.
    """
    X = np.atleast_2d(np.asarray(signals, dtype=float))
    if X.size == 0:
        raise InvalidInput("signal set is empty")
    Y = X if H is None else X @ realify_channel(H).T
    M = Y.shape[0]
    if P is None:
        P = float(np.mean(np.sum(X**2, axis=1)))
    snr = np.asarray(snr_grid_db, dtype=float)
    yy = np.sum(Y**2, axis=1)
    chunks = _chunks(trials)

    def run(job):
        i, j, n = job
        if M == 1:
            return 0
        rng = stream(seed, i, j)
        sent = rng.integers(0, M, n)
        sigma = math.sqrt(float(noise_sigma2(P, snr[i])))
        R = Y[sent] + sigma * rng.standard_normal((n, Y.shape[1]))
        score = yy[None, :] - 2.0 * R @ Y.T
        return int(np.count_nonzero(np.argmin(score, axis=1) != sent))

    jobs = [(i, j, n) for i in range(snr.size) for j, n in enumerate(chunks)]
    errs = np.zeros(snr.size, dtype=np.int64)
    for (i, _, _), e in zip(jobs, _map(run, jobs, threads)):
        errs[i] += e
    return SerCurve(snr, errs / max(trials, 1), int(trials), errs)


# --- beampatterns -------------------------------------------------------

@dataclass
class BeampatternSample:
    theta_deg: np.ndarray
    power: np.ndarray  # linear |a^H x|^2
    normalized: bool = False

    @property
    def gain_db(self):
        p = self.power / self.power.max() if self.normalized else self.power
        return 10.0 * np.log10(np.maximum(p, 1e-30))


def _as_complex_rows(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return np.atleast_2d(x)
    return np.atleast_2d(complexify(x))


def _patterns(X, grid):
    X = _as_complex_rows(X)
    A = steering_matrix(X.shape[1], grid)  # rows a(theta)^T
    return np.abs(X @ A.conj().T) ** 2  # (K, angles)


def beampattern(x, grid=None, normalize=False) -> BeampatternSample:
    """``|a(theta)^H x|^2`` of a spatial snapshot (complex or realified)."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise InvalidInput("angle grid must be strictly increasing")
    return BeampatternSample(grid, _patterns(x, grid)[0], normalize)


def avg_beampattern(signals, grid=None, normalize=False) -> BeampatternSample:
    """Mean pattern over the signal set (each signal sent equally often)."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise InvalidInput("angle grid must be strictly increasing")
    return BeampatternSample(grid, _patterns(signals, grid).mean(axis=0), normalize)


def beampattern_mse(signals, x0, grid=None):
    """MSE in dB between the average pattern and the reference pattern.

    Both patterns are rescaled so their source power equals ``||x0||^2``.
    Exact agreement is reported as -100 dB.
    """
    X = _as_complex_rows(signals)
    r = _as_complex_rows(x0)
    P = float(np.sum(np.abs(r) ** 2))
    pa = avg_beampattern(X, grid).power * P / float(np.mean(np.sum(np.abs(X) ** 2, axis=1)))
    pr = beampattern(r[0], grid).power
    mse = float(np.mean((pa - pr) ** 2))
    if mse <= 0:
        return MSE_FLOOR_DB
    return max(10.0 * math.log10(mse), MSE_FLOOR_DB)


# --- detection ----------------------------------------------------------

@dataclass
class DetectionCurve:
    snr_db: np.ndarray
    pd: np.ndarray
    trials: int
    pfa: float
    threshold: float  # for unit noise power


def detection_probability(signals, lobe, snr_grid_db, mc_trials=1000, pfa=1e-3, seed=0,
                          calib_trials=100_000, P=None, threads=1) -> DetectionCurve:
    """Energy-detector Pd for a target at a random angle inside ``lobe``.

    The echo is ``a(theta)^H x + n`` with ``n ~ CN(0, P / 10^(SNR/10))``. The
    threshold is the ``1 - pfa`` quantile of ``|n|^2`` over ``calib_trials``
    noise-only draws.
    """
    lo, hi = float(lobe[0]), float(lobe[1])
    if not -90 <= lo < hi <= 90:
        raise InvalidInput("lobe must satisfy -90 <= lo < hi <= 90")
    if not 0 < pfa < 1:
        raise InvalidInput("pfa must lie in (0, 1)")
    X = _as_complex_rows(signals)
    if P is None:
        P = float(np.mean(np.sum(np.abs(X) ** 2, axis=1)))
    rng = stream(seed, 0x0CA1)
    noise = (rng.standard_normal(calib_trials) + 1j * rng.standard_normal(calib_trials)) / math.sqrt(2)
    thr = float(np.quantile(np.abs(noise) ** 2, 1.0 - pfa))
    snr = np.asarray(snr_grid_db, dtype=float)
    chunks = _chunks(mc_trials)

    def run(job):
        i, j, n = job
        g = stream(seed, i + 1, j)
        theta = g.uniform(lo, hi, n)
        k = g.integers(0, X.shape[0], n)
        a = steering_matrix(X.shape[1], theta)
        echo = np.einsum("ij,ij->i", a.conj(), X[k])
        s2 = P / 10.0 ** (snr[i] / 10.0)
        nz = math.sqrt(s2 / 2.0) * (g.standard_normal(n) + 1j * g.standard_normal(n))
        return int(np.count_nonzero(np.abs(echo + nz) ** 2 > thr * s2))

    jobs = [(i, j, n) for i in range(snr.size) for j, n in enumerate(chunks)]
    hits = np.zeros(snr.size, dtype=np.int64)
    for (i, _, _), h in zip(jobs, _map(run, jobs, threads)):
        hits[i] += h
    return DetectionCurve(snr, hits / max(mc_trials, 1), int(mc_trials), float(pfa), thr)


# --- similarity and ambiguity --------------------------------------------

def waveform_similarity(signals, x0):
    """Per-signal ``||x_k - x0||`` and its maximum."""
    X = np.atleast_2d(np.asarray(signals))
    x0 = np.asarray(x0)
    if X.shape[1] != x0.shape[-1]:
        raise InvalidInput("signal and reference dimensions differ")
    per = np.linalg.norm(X - x0, axis=1)
    return per, float(per.max())


@dataclass
class AmbiguityGrid:
    delays: np.ndarray     # integer lags
    doppler: np.ndarray    # normalised frequency in [-1/2, 1/2)
    values: np.ndarray     # (delays, doppler), max 1

    def at(self, tau, k):
        """Value at lag ``tau`` and Doppler bin ``k``."""
        L = self.doppler.size
        return self.values[tau + (self.delays.size - 1) // 2, k + L // 2]


def ambiguity(x) -> AmbiguityGrid:
    """Discrete ambiguity magnitude ``|sum_n x(n) x*(n+tau) e^{j 2 pi k n / L}|``.

    ``x`` is a complex sequence (or its realified form) of length ``L``.
    Samples outside the sequence are zero. Normalised to a unit peak.
    """
    x = np.asarray(x)
    if not np.iscomplexobj(x):
        x = complexify(x)
    x = x.ravel()
    L = x.size
    if L < 2:
        raise InvalidInput("need at least two samples")
    taus = np.arange(-L + 1, L)
    ks = np.arange(-(L // 2), L - L // 2)
    n = np.arange(L)
    E = np.exp(2j * np.pi * np.outer(n, ks) / L)
    pad = np.concatenate([np.zeros(L, complex), x, np.zeros(L, complex)])
    prod = np.stack([x * np.conj(pad[L + t: 2 * L + t]) for t in taus])
    vals = np.abs(prod @ E)
    peak = vals.max()
    if peak > 0:
        vals = vals / peak
    return AmbiguityGrid(taus, ks / L, vals)
