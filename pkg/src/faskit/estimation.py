"""Uplink channel estimation for a linear FAS user and an M-antenna BS.

Normalization convention (used by synthesis and by every estimator here):
the BS steering vector carries ``1/sqrt(M)``, the user steering vector
``1/sqrt(N_ports)``, and the channel carries ``sqrt(M * N_ports)``, so

    H = sqrt(M N_ports) * sum_l kappa_l a_r(theta_r,l) a_t(theta_t,l)^H.

The scattered-path factor ``sqrt(1/L_p)`` is folded into ``kappa``.  With
this convention the observed block equals the matching columns of the
full-port channel whenever observable ports sit on the full port grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .numerics import RandomStream, cscg_vector


@dataclass(frozen=True)
class PilotScene:
    M: int
    N: int
    N_O: int
    tau: float
    W: float
    T: int = 1
    noise_var: float = 0.0
    power: float = 1.0
    Delta: float = 0.5

    def __post_init__(self):
        if self.N_O > self.N:
            raise ValueError("N_O cannot exceed N")
        if self.tau * (self.N_O - 1) > self.W + 1e-12:
            raise ValueError("observable ports do not fit in the aperture")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.M < 1 or self.N_O < 1:
            raise ValueError("M and N_O must be positive")


@dataclass(frozen=True)
class PathEstimate:
    gains: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    clamped: bool = False

    @property
    def count(self) -> int:
        return int(self.gains.size)

    @classmethod
    def empty(cls) -> "PathEstimate":
        z = np.zeros(0)
        return cls(np.zeros(0, dtype=complex), z, z.copy())


def bs_steering(M: int, theta, Delta: float = 0.5) -> np.ndarray:
    """``(M, L)`` matrix of normalized BS steering vectors."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    m = np.arange(M)[:, None]
    return np.exp(-2j * math.pi * Delta * m * np.cos(theta)[None, :]) / math.sqrt(M)


def fas_steering(n_ports: int, spacing: float, theta) -> np.ndarray:
    """``(n_ports, L)`` matrix of normalized linear-FAS steering vectors."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    n = np.arange(n_ports)[:, None]
    return np.exp(-2j * math.pi * spacing * n * np.cos(theta)[None, :]) / math.sqrt(n_ports)


def geometric_channel(paths: PathEstimate, M: int, n_ports: int, spacing: float,
                      Delta: float = 0.5) -> np.ndarray:
    if paths.count == 0:
        return np.zeros((M, n_ports), dtype=complex)
    Ar = bs_steering(M, paths.aoa, Delta)
    At = fas_steering(n_ports, spacing, paths.aod)
    return math.sqrt(M * n_ports) * (Ar * paths.gains) @ At.conj().T


def observed_channel(paths: PathEstimate, scene: PilotScene) -> np.ndarray:
    """Noise-free ``M x N_O`` channel at the observable ports."""
    return geometric_channel(paths, scene.M, scene.N_O, scene.tau, scene.Delta)


def reconstruct_channel(paths: PathEstimate, M: int, N: int, W: float,
                        Delta: float = 0.5) -> np.ndarray:
    """Full ``M x N`` channel rebuilt from path parameters."""
    if N < 2:
        raise ValueError("N must be at least 2")
    return geometric_channel(paths, M, N, W / (N - 1), Delta)


def ls_estimate(H, scene: PilotScene, stream: Optional[RandomStream] = None) -> np.ndarray:
    """Least-squares estimate: truth plus white noise of variance ``noise_var/(T P)``."""
    H = np.asarray(H, dtype=complex)
    if scene.noise_var == 0:
        return H.copy()
    if stream is None:
        raise ValueError("noisy estimate needs a random stream")
    sigma = math.sqrt(scene.noise_var / (scene.T * scene.power))
    noise = cscg_vector(stream, H.size).reshape(H.shape)
    return H + sigma * noise


def nmse(estimate, truth) -> float:
    """``sum ||truth - estimate||^2 / sum ||truth||^2`` over the whole stack."""
    est = np.asarray(estimate)
    tru = np.asarray(truth)
    if est.shape != tru.shape:
        raise ValueError("shape mismatch")
    den = float(np.sum(np.abs(tru) ** 2))
    if den == 0:
        raise ValueError("truth has zero norm")
    return float(np.sum(np.abs(tru - est) ** 2) / den)


# ----------------------------------------------------------------------------
# L3SCR


@dataclass(frozen=True)
class SensingDictionary:
    """Steering vectors at the uniform angle grid ``d pi / D``, ``d = 0..D-1``."""

    D: int
    n_ports: int
    spacing: float

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.D) * math.pi / self.D

    def matrix(self) -> np.ndarray:
        return fas_steering(self.n_ports, self.spacing, self.angles)


def _dft_matrix(M: int) -> np.ndarray:
    m = np.arange(M)
    return np.exp(-2j * math.pi * np.outer(m, m) / M) / math.sqrt(M)


def _rotated_row_power(Y: np.ndarray, k: int, psi: float) -> float:
    M = Y.shape[0]
    m = np.arange(M)
    # row k of Omega^H Psi^H Y
    w = np.exp(2j * math.pi * m * (k / M - psi)) / math.sqrt(M)
    return float(np.sum(np.abs(w @ Y) ** 2))


def l3scr_aoa(H_ls, scene: PilotScene, rotation_grid: int = 64, peak_threshold: float = 0.1):
    """Number of paths and AoAs from DFT peaks with angular-rotation refinement.

    Returns ``(L_hat, aoa, A_r, clamped)``.  A DFT row is a peak when it is
    a circular local maximum holding at least ``peak_threshold`` of the
    strongest row's power.  Each peak's rotation ``psi`` is chosen on a
    uniform grid over ``[-1/(2M), 1/(2M)]`` and then polished with a
    bounded scalar search around the best grid point.
    """
    H_ls = np.asarray(H_ls, dtype=complex)
    M = scene.M
    if M < 2:
        raise ValueError("M must be at least 2")
    if rotation_grid < 1:
        raise ValueError("rotation_grid must be at least 1")
    Y = H_ls / math.sqrt(M * scene.N_O)
    power = np.sum(np.abs(_dft_matrix(M).conj().T @ Y) ** 2, axis=1)
    top = power.max()
    if top <= 0:
        return 0, np.zeros(0), np.zeros((M, 0), dtype=complex), False
    prev = np.roll(power, 1)
    nxt = np.roll(power, -1)
    peaks = np.flatnonzero((power >= peak_threshold * top) & (power > prev) & (power >= nxt))
    peaks = peaks[np.argsort(-power[peaks], kind="stable")]

    half = 0.5 / M
    grid = np.linspace(-half, half, rotation_grid) if rotation_grid > 1 else np.zeros(1)
    step = grid[1] - grid[0] if rotation_grid > 1 else half
    aoa = []
    clamped = False
    for k in peaks:
        vals = [_rotated_row_power(Y, int(k), p) for p in grid]
        best = float(grid[int(np.argmax(vals))])
        lo, hi = max(-half, best - step), min(half, best + step)
        res = minimize_scalar(lambda p: -_rotated_row_power(Y, int(k), p),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        psi = float(res.x) if -res.fun >= max(vals) else best
        u = k / M - psi
        u = (u + 0.5) % 1.0 - 0.5
        c = u / scene.Delta
        if abs(c) > 1.0:
            clamped = True
            c = math.copysign(1.0, c)
        aoa.append(math.acos(c))
    aoa = np.asarray(aoa)
    return len(aoa), aoa, bs_steering(M, aoa, scene.Delta), clamped


def l3scr_aod_gain(H_ls, A_r, dictionary: SensingDictionary, scene: PilotScene,
                   aoa=None) -> PathEstimate:
    """Matched-filter AoD and gain per estimated AoA column."""
    A_r = np.asarray(A_r, dtype=complex)
    if A_r.ndim != 2 or A_r.shape[1] == 0:
        return PathEstimate.empty()
    Y = np.asarray(H_ls, dtype=complex) / math.sqrt(scene.M * scene.N_O)
    Dm = dictionary.matrix()
    cols = Y.conj().T @ A_r            # N_O x L, column l ~ conj(kappa_l) a_t(l)
    corr = Dm.conj().T @ cols          # D x L
    best = np.argmax(np.abs(corr), axis=0)
    norms = np.sum(np.abs(Dm[:, best]) ** 2, axis=0)
    kappa = np.conj(corr[best, np.arange(cols.shape[1])] / norms)
    if aoa is None:
        aoa = np.full(kappa.size, np.nan)
    return PathEstimate(kappa, np.asarray(aoa, dtype=float), dictionary.angles[best])


def l3scr_estimate(H_ls, scene: PilotScene, dictionary: Optional[SensingDictionary] = None,
                   rotation_grid: int = 64, peak_threshold: float = 0.1) -> PathEstimate:
    """Full L3SCR pipeline: AoA detection then AoD/gain matched filtering."""
    if dictionary is None:
        dictionary = SensingDictionary(4 * max(scene.M, scene.N_O), scene.N_O, scene.tau)
    L, aoa, A_r, clamped = l3scr_aoa(H_ls, scene, rotation_grid, peak_threshold)
    if L == 0:
        return PathEstimate.empty()
    est = l3scr_aod_gain(H_ls, A_r, dictionary, scene, aoa=aoa)
    return PathEstimate(est.gains, est.aoa, est.aod, clamped)


# ----------------------------------------------------------------------------
# OMP


@dataclass(frozen=True)
class OmpResult:
    paths: PathEstimate
    iterations: int
    residual_norms: np.ndarray


def omp_estimate(H_ls, tx_dict: SensingDictionary, rx_dict: SensingDictionary,
                 stop_eps: float = 1e-6, max_iter: int = 10, Delta: float = 0.5,
                 M: Optional[int] = None) -> OmpResult:
    """Orthogonal matching pursuit over AoA-AoD grid pairs.

    The sensing matrix holds ``vec(a_r a_t^H)`` for every grid pair.  Each
    iteration adds the atom most correlated with the residual, refits all
    chosen gains by least squares and updates the residual.  The loop ends
    when the residual norm falls by less than ``stop_eps`` (relative to the
    input norm), when it vanishes, or after ``max_iter`` iterations.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    H_ls = np.asarray(H_ls, dtype=complex)
    M = H_ls.shape[0] if M is None else M
    n_o = H_ls.shape[1]
    if tx_dict.D <= n_o or rx_dict.D <= M:
        raise ValueError("dictionaries must be larger than the array sizes")
    scale = math.sqrt(M * n_o)
    y = (H_ls / scale).reshape(-1, order="F")
    y_norm = float(np.linalg.norm(y))
    if y_norm == 0:
        return OmpResult(PathEstimate.empty(), 0, np.zeros(1))

    Ar = bs_steering(M, rx_dict.angles, Delta)        # M x Dr
    At = tx_dict.matrix()                              # N_O x Dt
    # column (i, j) -> vec(a_r,i a_t,j^H), column-major vec
    sensing = np.kron(At.conj(), Ar)                   # (M N_O) x (Dt Dr)

    support: list[int] = []
    residual = y.copy()
    norms = [y_norm]
    gains = np.zeros(0, dtype=complex)
    for _ in range(max_iter):
        corr = np.abs(sensing.conj().T @ residual)
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        Phi = sensing[:, support]
        gains, *_ = np.linalg.lstsq(Phi, y, rcond=None)
        residual = y - Phi @ gains
        norms.append(float(np.linalg.norm(residual)))
        if norms[-1] <= 1e-12 * y_norm or norms[-2] - norms[-1] < stop_eps * y_norm:
            break
    idx = np.asarray(support)
    dr = rx_dict.D
    paths = PathEstimate(gains, rx_dict.angles[idx % dr], tx_dict.angles[idx // dr])
    return OmpResult(paths, len(support), np.asarray(norms))
