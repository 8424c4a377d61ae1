"""Fluid antenna multiple access: slow/fast FAMA, CUMA, FAS-NOMA, precoding, gdof.

Channel arrays use the layout ``h[i, u, n]`` for the gain from transmitter
``i`` to user ``u`` at port ``n``; ``h[u, u]`` is user ``u``'s desired link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import (
    PortGeometry,
    build_block_model,
    build_corr_1d_jakes,
    build_reference_model,
    identity_model,
    sample_block,
    sample_eigen,
    sample_reference,
    scattering_batch,
    steering_vector,
)
from .montecarlo import Estimate, binomial_estimate, map_chunks, sample_estimate
from .numerics import RandomStream


# ----------------------------------------------------------------------------
# slow FAMA


def sfama_select(h_des, h_int, powers=None, N0: float = 0.0) -> int:
    """Port maximizing ``P_u |h_uu|^2 / (sum P_i |h_iu|^2 + N0)``.

    ``h_int`` is ``(U - 1, N)`` (or a single ``(N,)`` interferer); ``powers``
    lists the desired power first, then one power per interferer.
    """
    h_des = np.asarray(h_des)
    h_int = np.atleast_2d(np.asarray(h_int))
    if h_int.shape[1] != h_des.size:
        raise ValueError("all channel vectors must have the same length")
    p = np.ones(h_int.shape[0] + 1) if powers is None else np.asarray(powers, dtype=float)
    num = p[0] * np.abs(h_des) ** 2
    den = (p[1:, None] * np.abs(h_int) ** 2).sum(axis=0) + N0
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                        np.where(num > 0, np.inf, 0.0))
    return int(np.argmax(sinr))


def _sir_sampler(model: str, N: int, W: float):
    if N == 1:
        one = identity_model(1)
        return lambda s, n: sample_eigen(one, s, size=n).values
    if model == "jakes":
        jakes = build_corr_1d_jakes(N, W)
        return lambda s, n: sample_eigen(jakes, s, size=n).values
    if model == "block":
        blocks = build_block_model(build_corr_1d_jakes(N, W))
        return lambda s, n: sample_block(blocks, s, size=n).values
    if model == "constant":
        ref = build_reference_model(N, W, constant=True)
        return lambda s, n: sample_reference(ref, s, size=n).values
    raise ValueError("model must be 'jakes', 'block' or 'constant'")


def sfama_outage_curve(W: float, N: int, gamma_th: Sequence[float], trials: int, seed: int,
                       n_users: int = 2, power_ratio: float = 1.0, model: str = "jakes",
                       threads=None) -> list[Estimate]:
    """Interference-limited slow-FAMA outage at several SIR thresholds.

    Each trial draws the desired channel and ``n_users - 1`` interferer
    channels at one user from the chosen correlation model, takes the best
    port's SIR ``|h_uu|^2 / sum |h_iu|^2`` and compares it with
    ``gamma_th * power_ratio`` (``power_ratio`` = interferer/desired power).
    """
    if n_users < 2:
        raise ValueError("need at least two users")
    sampler = _sir_sampler(model, N, W)
    thr = np.asarray(gamma_th, dtype=float) * power_ratio

    def chunk(stream: RandomStream, n: int):
        des = np.abs(sampler(stream.substream(0), n)) ** 2
        interf = sum(np.abs(sampler(stream.substream(i), n)) ** 2 for i in range(1, n_users))
        sir = np.max(des / interf, axis=1)
        return np.array([np.count_nonzero(sir < t) for t in thr])

    counts = np.sum(map_chunks(chunk, seed, trials, threads=threads), axis=0)
    return [binomial_estimate(int(c), trials) for c in counts]


def sfama_outage_sir(W: float, N: int, gamma_th: float, trials: int, seed: int,
                     power_ratio: float = 1.0, model: str = "jakes", threads=None) -> float:
    """Two-user special case of :func:`sfama_outage_curve`."""
    est = sfama_outage_curve(W, N, [gamma_th], trials, seed, 2, power_ratio, model, threads)
    return est[0].value


# ----------------------------------------------------------------------------
# fast FAMA


def ffama_select(h_des, interference_plus_noise) -> int:
    """Port maximizing ``|h_uu|^2 / |realized interference + noise|^2``.

    A port whose denominator is exactly zero while its numerator is not has
    an infinite ratio and wins outright.  Ports with 0/0 are ignored; if
    every port is 0/0 the symbol is degenerate and an error is raised.
    """
    num = np.abs(np.asarray(h_des)) ** 2
    den = np.abs(np.asarray(interference_plus_noise)) ** 2
    if num.shape != den.shape:
        raise ValueError("vectors must have the same length")
    both_zero = (num == 0) & (den == 0)
    if np.all(both_zero):
        raise ValueError("degenerate symbol: numerator and denominator all zero")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    ratio[both_zero] = -1.0
    return int(np.argmax(ratio))


def _ffama_batch(h_des: np.ndarray, ipn: np.ndarray) -> np.ndarray:
    # vectorized ffama_select over symbols (rows of ipn)
    num = np.abs(h_des) ** 2
    den = np.abs(ipn) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    ratio[(den == 0) & (num == 0)] = -1.0
    return np.argmax(ratio, axis=-1)


# ----------------------------------------------------------------------------
# CUMA


@dataclass(frozen=True)
class CumaConfig:
    rho: float = 0.6
    n_max: Optional[int] = None      # None -> N // 4
    n_rf: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.n_rf < 2 or self.n_rf % 2:
            raise ValueError("n_rf must be an even count >= 2")
        if self.n_max is not None and self.n_max < 1:
            raise ValueError("n_max must be at least 1")

    def cap(self, n_ports: int) -> int:
        return self.n_max if self.n_max is not None else max(1, n_ports // 4)


def _pick_set(v: np.ndarray, rho: float, cap: int, rng: np.random.Generator) -> np.ndarray:
    plus = np.flatnonzero(v >= rho * v.max())
    minus = np.flatnonzero(v <= rho * v.min())
    if plus.size > cap:
        plus = np.sort(rng.choice(plus, cap, replace=False))
    if minus.size > cap:
        minus = np.sort(rng.choice(minus, cap, replace=False))
    return plus if abs(v[plus].sum()) >= abs(v[minus].sum()) else minus


def cuma_select_sets(h_des, cfg: CumaConfig, stream: RandomStream) -> list[np.ndarray]:
    """Port sets for each RF chain, ordered (real, imaginary) per chain pair.

    For the real part, ``K+`` holds ports with ``Re h >= rho * max Re h`` and
    ``K-`` those with ``Re h <= rho * min Re h``.  Each is thinned to at most
    ``n_max`` ports drawn uniformly without replacement, and the set with
    the larger ``|sum Re h|`` is kept.  The imaginary part is handled the
    same way.  Chain pair ``r`` draws from ``stream.substream(r)``.
    """
    h = np.asarray(h_des)
    cap = cfg.cap(h.size)
    sets = []
    for r in range(cfg.n_rf // 2):
        rng = stream.substream(r).generator()
        sets.append(_pick_set(h.real, cfg.rho, cap, rng))
        sets.append(_pick_set(h.imag, cfg.rho, cap, rng))
    return sets


def cuma_aggregate(y_ports, port_set) -> tuple:
    """Analogue sums of the real and imaginary parts over a port set."""
    idx = np.asarray(port_set, dtype=int)
    if idx.size == 0:
        raise ValueError("port set is empty")
    y = np.asarray(y_ports)[..., idx]
    return y.real.sum(axis=-1), y.imag.sum(axis=-1)


def cuma_psi(h_des, sets) -> np.ndarray:
    """Stacked ``(2 * n_sets, 2)`` real system matrix of the aggregated outputs."""
    h = np.asarray(h_des)
    rows = []
    for s in sets:
        hr = h[np.asarray(s)].real.sum()
        hi = h[np.asarray(s)].imag.sum()
        rows.append([hr, -hi])
        rows.append([hi, hr])
    return np.asarray(rows)


def cuma_detect(aggregates, h_des, sets, cond_limit: float = 1e12):
    """Least-squares symbol estimate from the per-set ``(yI, yQ)`` sums.

    ``aggregates`` has shape ``(..., n_sets, 2)``; the estimate has the
    leading shape.
    """
    Psi = cuma_psi(h_des, sets)
    cond = np.linalg.cond(Psi)
    if not np.isfinite(cond) or cond > cond_limit:
        raise np.linalg.LinAlgError(f"stacked CUMA system is rank deficient (cond {cond:.3g})")
    agg = np.asarray(aggregates, dtype=float)
    lead = agg.shape[:-2]
    Y = agg.reshape(lead + (-1,))
    pinv = np.linalg.pinv(Psi)
    sol = Y @ pinv.T
    out = sol[..., 0] + 1j * sol[..., 1]
    return complex(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# QPSK network rate


def binary_entropy(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.nan_to_num(h, nan=0.0)


def bsc_rate(ber):
    """Bits per QPSK symbol over a binary symmetric channel: ``2 (1 - H_b)``."""
    return 2.0 * (1.0 - binary_entropy(np.minimum(ber, 0.5)))


@dataclass(frozen=True)
class QpskScenario:
    users: int
    rx_geometry: PortGeometry
    rice_factor: float = 7.0
    n_paths: int = 2
    snr_db: float = 20.0
    symbols: int = 100
    cuma: CumaConfig = field(default_factory=CumaConfig)

    def __post_init__(self):
        if self.users < 1:
            raise ValueError("need at least one user")


@dataclass(frozen=True)
class NetworkRate:
    ber: np.ndarray
    user_rates: np.ndarray
    sum_rate: float
    sum_rate_se: float
    blocks: int


_QPSK_BLOCK_GROUP = 10


def _qpsk_chunk(sc: QpskScenario, scheme: str, stream: RandomStream, n_blocks: int):
    pos = sc.rx_geometry.positions()
    U, S, N = sc.users, sc.symbols, sc.rx_geometry.n_ports
    n0 = 10.0 ** (-sc.snr_db / 10.0)
    rng = stream.substream(0).generator()
    errors = np.zeros((n_blocks, U))
    for b in range(n_blocks):
        h = scattering_batch(rng, (U, U), sc.rice_factor, sc.n_paths, rx_positions=pos)[..., 0]
        bits = rng.integers(0, 2, size=(S, U, 2))
        s = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / math.sqrt(2.0)
        z = rng.standard_normal((S, U, N, 2))
        noise = (z[..., 0] + 1j * z[..., 1]) * math.sqrt(n0 / 2.0)
        for u in range(U):
            hd = h[u, u]
            others = [i for i in range(U) if i != u]
            ipn = s[:, others] @ h[others, u] + noise[:, u]      # S x N
            y = s[:, u, None] * hd + ipn
            if scheme == "sfama":
                k = sfama_select(hd, h[others, u], N0=n0) if others else int(np.argmax(np.abs(hd)))
                est = y[:, k] / hd[k]
            elif scheme == "ffama":
                k = _ffama_batch(hd, ipn)
                est = y[np.arange(S), k] / hd[k]
            elif scheme == "cuma":
                sets = cuma_select_sets(hd, sc.cuma, stream.substream(1 + b * U + u))
                agg = np.stack([np.stack(cuma_aggregate(y, st), axis=-1) for st in sets], axis=-2)
                est = cuma_detect(agg, hd, sets)
            else:
                raise ValueError("scheme must be 'sfama', 'ffama' or 'cuma'")
            wrong = (est.real < 0) != (bits[:, u, 0] == 1)
            wrong_q = (est.imag < 0) != (bits[:, u, 1] == 1)
            errors[b, u] = np.count_nonzero(wrong) + np.count_nonzero(wrong_q)
    return errors


def qpsk_network_rate(sc: QpskScenario, scheme: str, trials: int, seed: int,
                      threads=None) -> NetworkRate:
    """Uncoded-QPSK network rate over ``trials`` coherence blocks.

    Every block draws fresh finite-scattering channels for all links and
    sends ``sc.symbols`` Gray-mapped QPSK symbols per user.  Bit errors are
    pooled per user, turned into BSC rates and summed.  The standard error
    of the sum rate comes from batch means over groups of blocks.
    """
    if scheme not in ("sfama", "ffama", "cuma"):
        raise ValueError("scheme must be 'sfama', 'ffama' or 'cuma'")
    parts = map_chunks(lambda s, n: _qpsk_chunk(sc, scheme, s, n), seed, trials,
                       chunk=_QPSK_BLOCK_GROUP, threads=threads)
    errors = np.concatenate(parts, axis=0)
    bits = 2.0 * sc.symbols
    ber = errors.sum(axis=0) / (bits * trials)
    rates = bsc_rate(ber)
    group_rates = [bsc_rate(p.sum(axis=0) / (bits * p.shape[0])).sum() for p in parts]
    se = sample_estimate(group_rates).std_error if len(group_rates) > 1 else 0.0
    return NetworkRate(ber, rates, float(rates.sum()), float(se), trials)


# ----------------------------------------------------------------------------
# FAS-NOMA


@dataclass(frozen=True)
class NomaRates:
    strong: float
    weak: float
    total: float
    sic_feasible: bool


def noma_two_user(h_strong, h_weak, alpha: float, P: float, N0: float,
                  select: bool = True) -> NomaRates:
    """Two-user power-domain NOMA with per-user port selection.

    ``alpha`` is the power share of the strong user.  Both users pick the
    port with the largest gain (their SINRs grow with the gain); with
    ``select=False`` both stay on the first port.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    gs_all = np.abs(np.atleast_1d(h_strong)) ** 2
    gw_all = np.abs(np.atleast_1d(h_weak)) ** 2
    gs = float(gs_all.max() if select else gs_all[0])
    gw = float(gw_all.max() if select else gw_all[0])
    weak_sinr = (1 - alpha) * P * gw / (alpha * P * gw + N0)
    weak = math.log2(1.0 + weak_sinr)
    sic_sinr = (1 - alpha) * P * gs / (alpha * P * gs + N0)
    feasible = sic_sinr >= weak_sinr - 1e-12
    if feasible:
        strong = math.log2(1.0 + alpha * P * gs / N0)
    else:
        strong = math.log2(1.0 + alpha * P * gs / ((1 - alpha) * P * gs + N0))
    return NomaRates(strong, weak, strong + weak, bool(feasible))


def noma_tin_sum(h_strong, h_weak, alpha: float, P: float, N0: float, select: bool = True) -> float:
    """Both users treat the other's signal as noise."""
    gs_all = np.abs(np.atleast_1d(h_strong)) ** 2
    gw_all = np.abs(np.atleast_1d(h_weak)) ** 2
    gs = float(gs_all.max() if select else gs_all[0])
    gw = float(gw_all.max() if select else gw_all[0])
    rs = math.log2(1.0 + alpha * P * gs / ((1 - alpha) * P * gs + N0))
    rw = math.log2(1.0 + (1 - alpha) * P * gw / (alpha * P * gw + N0))
    return rs + rw


# ----------------------------------------------------------------------------
# precoding for massive access


def precoder_mrt(h) -> np.ndarray:
    """``h^H / ||h||`` as a vector, so ``h @ w = ||h||``."""
    h = np.asarray(h, dtype=complex)
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise ValueError("zero channel")
    return h.conj() / nrm


def precoder_los(aod_theta: float, aod_phi: float, tx_geometry: PortGeometry) -> np.ndarray:
    """Normalized transmit steering vector of the LoS direction."""
    a = steering_vector(tx_geometry, aod_theta, aod_phi)
    return a / np.linalg.norm(a)


def precoder_los_fas(a_r, a_t) -> np.ndarray:
    """Principal right singular vector of ``a_r a_t^H`` (equals ``a_t / ||a_t||``)."""
    H = np.outer(np.asarray(a_r), np.asarray(a_t).conj())
    _, _, vh = np.linalg.svd(H)
    v = vh[0].conj()
    a = np.asarray(a_t)
    k = int(np.argmax(np.abs(a)))
    return v * (abs(v[k]) / v[k]) * (a[k] / abs(a[k])) if v[k] != 0 else v


@dataclass(frozen=True)
class PrecodingResult:
    sum_rate: Estimate
    user_rate: Estimate


def massive_mimo_rate(bs_geometry: PortGeometry, users: int, rice_factor: float,
                      n_paths: int, snr_db: float, trials: int, seed: int,
                      precoder: str = "mrt", threads=None) -> PrecodingResult:
    """Downlink rate of single-antenna users under MRT or LoS-only precoding.

    Total transmit SNR ``snr_db`` is split equally across users; each user
    treats the other users' beams as noise.
    """
    if precoder not in ("mrt", "los"):
        raise ValueError("precoder must be 'mrt' or 'los'")
    pos = bs_geometry.positions()
    p_user = 10.0 ** (snr_db / 10.0) / users

    def chunk(stream: RandomStream, n: int):
        rng = stream.generator()
        H, a_los = scattering_batch(rng, (n, users), rice_factor, n_paths,
                                    tx_positions=pos, return_los=True)
        h = H[..., 0, :]                               # n x U x M (row channels)
        if precoder == "mrt":
            W = h.conj() / np.linalg.norm(h, axis=-1, keepdims=True)
        else:
            W = a_los / np.linalg.norm(a_los, axis=-1, keepdims=True)
        g = np.abs(np.einsum("tum,tvm->tuv", h, W)) ** 2
        desired = np.einsum("tuu->tu", g)
        interf = g.sum(axis=-1) - desired
        return np.log2(1.0 + p_user * desired / (p_user * interf + 1.0))

    rates = np.concatenate(map_chunks(chunk, seed, trials, threads=threads), axis=0)
    return PrecodingResult(sample_estimate(rates.sum(axis=1)), sample_estimate(rates.ravel()))


# ----------------------------------------------------------------------------
# generalized degrees of freedom


@dataclass(frozen=True)
class GdofReport:
    strategy: str
    gdof: float
    rate: float
    c_star: float
    alpha: Optional[float] = None
    beta: Optional[float] = None


def gdof(gains, P: float, N0: float, strategy: str,
         alpha: Optional[float] = None, beta: Optional[float] = None) -> GdofReport:
    """Two-user sum rate of a strategy relative to the interference-free optimum.

    ``gains[i, u, n]`` is the power gain from transmitter ``i`` to user ``u``
    at port ``n``.  ``C*`` lets each user pick its best port without
    interference.  TIN keeps port 0; ORTHO gives each user half the time at
    twice the power (same average power) on port 0; FAMA applies TIN at
    each user's SINR-maximizing port.
    """
    G = np.asarray(gains, dtype=float)
    if G.shape[:2] != (2, 2):
        raise ValueError("gains must have shape (2, 2, N)")
    c_star = sum(math.log2(1.0 + P * G[u, u].max() / N0) for u in range(2))
    if c_star <= 0:
        raise ValueError("interference-free optimum is zero")
    if strategy == "TIN":
        rate = sum(math.log2(1.0 + P * G[u, u, 0] / (P * G[1 - u, u, 0] + N0)) for u in range(2))
    elif strategy == "ORTHO":
        rate = sum(0.5 * math.log2(1.0 + 2.0 * P * G[u, u, 0] / N0) for u in range(2))
    elif strategy == "FAMA":
        rate = 0.0
        for u in range(2):
            sinr = P * G[u, u] / (P * G[1 - u, u] + N0)
            rate += math.log2(1.0 + sinr.max())
    else:
        raise ValueError("strategy must be TIN, ORTHO or FAMA")
    return GdofReport(strategy, rate / c_star, rate, c_star, alpha, beta)
