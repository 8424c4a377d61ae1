"""Port selection, outage/rate analysis, DMT curves and diversity estimates.

Indices are 0-based.  Ties always go to the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .channel import PortGeometry, build_corr_1d_jakes, build_corr_grid
from .montecarlo import Estimate, binomial_estimate, map_chunks, mean_estimate, pairwise_sum
from .numerics import RandomStream


@dataclass(frozen=True)
class LinkBudget:
    snr: float
    r_min: float
    trials: int
    seed: int = 0

    def __post_init__(self):
        if self.snr < 0:
            raise ValueError("snr must be non-negative")
        if self.r_min < 0:
            raise ValueError("r_min must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


def best_port(h) -> tuple[int, float]:
    """Index and magnitude of the strongest port."""
    a = np.abs(np.asarray(h).ravel())
    if a.size == 0:
        raise ValueError("empty channel vector")
    k = int(np.argmax(a))
    return k, float(a[k])


# ----------------------------------------------------------------------------
# effective-gain selectors for a batch of channels (leading axis = trial)


def siso_gain(H) -> np.ndarray:
    """Fixed single port at both ends: the first entry."""
    H = np.asarray(H)
    return np.abs(H.reshape(H.shape[0], -1)[:, 0]) ** 2


def best_port_gain(H) -> np.ndarray:
    """Best single entry per trial (Tx-only, Rx-only or Dual, by input shape)."""
    H = np.asarray(H)
    return np.max(np.abs(H.reshape(H.shape[0], -1)) ** 2, axis=1)


def mrc_gain(H) -> np.ndarray:
    """All ports combined coherently."""
    H = np.asarray(H)
    return np.sum(np.abs(H.reshape(H.shape[0], -1)) ** 2, axis=1)


EXHAUSTIVE_PAIR_LIMIT = 10 ** 6


def best_pair(H) -> tuple[int, int, float]:
    """Strongest (rx, tx) entry of a port-pair matrix.

    Exhaustive up to ``EXHAUSTIVE_PAIR_LIMIT`` pairs.  Larger matrices use
    row/column alternating ascent from the strongest entry of column 0,
    which stops at a pair that is best in both its row and its column.
    """
    P = np.abs(np.asarray(H)) ** 2
    if P.ndim != 2 or P.size == 0:
        raise ValueError("need a non-empty matrix")
    if P.size <= EXHAUSTIVE_PAIR_LIMIT:
        r, c = np.unravel_index(int(np.argmax(P)), P.shape)
        return int(r), int(c), float(P[r, c])
    c = 0
    r = int(np.argmax(P[:, c]))
    while True:
        c_new = int(np.argmax(P[r]))
        if P[r, c_new] <= P[r, c]:
            break
        c = c_new
        r_new = int(np.argmax(P[:, c]))
        if P[r_new, c] <= P[r, c]:
            break
        r = r_new
    return r, c, float(P[r, c])


def dual_gain(H) -> np.ndarray:
    """Best port pair per trial for a ``(trials, N_rx, N_tx)`` stack."""
    H = np.asarray(H)
    if H.shape[1] * H.shape[2] <= EXHAUSTIVE_PAIR_LIMIT:
        return best_port_gain(H)
    return np.array([best_pair(h)[2] for h in H])


Sampler = Callable[[RandomStream, int], np.ndarray]
Selector = Callable[[np.ndarray], np.ndarray]


def _gain_chunks(sampler: Sampler, selector: Selector, trials: int, seed: int, threads=None):
    return map_chunks(lambda s, n: selector(sampler(s, n)), seed, trials, threads=threads)


def outage_estimate(sampler: Sampler, selector: Selector, budget: LinkBudget,
                    threads=None) -> Estimate:
    """Monte Carlo ``P(log2(1 + snr * g) < r_min)`` with a binomial interval."""
    if budget.r_min == 0:
        return binomial_estimate(0, budget.trials)
    if budget.snr == 0:
        return binomial_estimate(budget.trials, budget.trials)
    threshold = (2.0 ** budget.r_min - 1.0) / budget.snr
    chunks = _gain_chunks(sampler, selector, budget.trials, budget.seed, threads)
    fails = sum(int(np.count_nonzero(g < threshold)) for g in chunks)
    return binomial_estimate(fails, budget.trials)


def outage_probability(sampler: Sampler, selector: Selector, budget: LinkBudget,
                       threads=None) -> float:
    return outage_estimate(sampler, selector, budget, threads).value


def average_rate(sampler: Sampler, selector: Selector, snr: float, trials: int, seed: int,
                 threads=None) -> Estimate:
    """Mean of ``log2(1 + snr * g)`` with a t-interval."""
    chunks = _gain_chunks(sampler, selector, trials, seed, threads)
    rates = [np.log2(1.0 + snr * g) for g in chunks]
    return mean_estimate(pairwise_sum(r.sum() for r in rates),
                         pairwise_sum((r * r).sum() for r in rates), trials)


@dataclass(frozen=True)
class LinkMetrics:
    outage: Estimate
    rate: Estimate
    power_db: Estimate


def link_metrics(sampler: Sampler, selector: Selector, budget: LinkBudget,
                 threads=None) -> LinkMetrics:
    """Outage, average rate and required transmit SNR from one pass over the trials.

    ``power_db`` is the mean over trials of ``10 log10((2^r_min - 1) / g)``,
    the smallest SNR meeting ``r_min`` for that realization.
    """
    chunks = _gain_chunks(sampler, selector, budget.trials, budget.seed, threads)
    need = 2.0 ** budget.r_min - 1.0
    fails = sum(int(np.count_nonzero(budget.snr * g < need)) for g in chunks)
    rates = [np.log2(1.0 + budget.snr * g) for g in chunks]
    with np.errstate(divide="ignore"):
        power = [10.0 * np.log10(need / g) for g in chunks]
    if any(not np.all(np.isfinite(p)) for p in power):
        power = [np.full_like(g, np.nan) for g in chunks]

    def est(parts):
        return mean_estimate(pairwise_sum(p.sum() for p in parts),
                             pairwise_sum((p * p).sum() for p in parts), budget.trials)

    return LinkMetrics(binomial_estimate(fails, budget.trials), est(rates), est(power))


def channel_variation(sampler: Sampler, selector: Selector, trials: int, seed: int,
                      threads=None) -> float:
    """``Var(g) / E[g]^2`` of the post-selection gain."""
    if trials < 2:
        raise ValueError("need at least two trials")
    chunks = _gain_chunks(sampler, selector, trials, seed, threads)
    s1 = pairwise_sum(g.sum() for g in chunks)
    s2 = pairwise_sum((g * g).sum() for g in chunks)
    mean = s1 / trials
    if mean == 0:
        return 0.0
    var = max(s2 / trials - mean * mean, 0.0) * trials / (trials - 1)
    return var / (mean * mean)


# ----------------------------------------------------------------------------
# multi-port selection


def select_ports_mrc(h, k: int, min_separation: int = 0) -> list[int]:
    """Ports maximizing the combined gain subject to an index spacing rule.

    ``h`` may be a vector or an ``N x M`` matrix (row norms are used).  The
    subset is optimal: a dynamic program over the port line replaces the
    greedy pass, which can be beaten when the strongest port blocks two
    strong neighbours.
    """
    a = np.asarray(h)
    w = np.abs(a) ** 2 if a.ndim == 1 else np.sum(np.abs(a) ** 2, axis=1)
    N = w.size
    if k < 1:
        raise ValueError("k must be at least 1")
    sep = max(int(min_separation), 1)
    if (k - 1) * sep + 1 > N:
        raise ValueError("no feasible selection with this separation")
    if sep == 1:
        order = np.argsort(-w, kind="stable")[:k]
        return sorted(int(i) for i in order)
    # best[j][i]: best total with j ports chosen among 0..i, last pick <= i
    neg = -np.inf
    best = np.full((k + 1, N), neg)
    take = np.zeros((k + 1, N), dtype=bool)
    best[0, :] = 0.0
    for j in range(1, k + 1):
        for i in range(N):
            skip = best[j, i - 1] if i > 0 else neg
            prev = 0.0 if j == 1 else (best[j - 1, i - sep] if i - sep >= 0 else neg)
            pick = prev + w[i] if prev > neg else neg
            # prefer the earlier port on ties: only take when strictly better
            if pick > skip:
                best[j, i], take[j, i] = pick, True
            else:
                best[j, i] = skip
    chosen = []
    j, i = k, N - 1
    while j > 0:
        while not take[j, i]:
            i -= 1
        chosen.append(i)
        i -= sep
        j -= 1
    return sorted(chosen)


def _volume(H, cols) -> float:
    sub = H[:, cols]
    return float(np.prod(np.linalg.svd(sub, compute_uv=False)))


@dataclass(frozen=True)
class RrqrSelection:
    columns: list[int]
    degenerate: bool


def pivoted_qr_order(H) -> tuple[np.ndarray, np.ndarray]:
    """Column order of Householder QR with greedy norm pivoting.

    Returns ``(order, diag)`` where ``diag`` holds ``|R_kk|`` in pivot order.
    """
    A = np.array(H, dtype=complex)
    m, n = A.shape
    order = np.arange(n)
    diag = []
    for k in range(min(m, n)):
        norms = np.sum(np.abs(A[k:, k:]) ** 2, axis=0)
        p = k + int(np.argmax(norms))
        if p != k:
            A[:, [k, p]] = A[:, [p, k]]
            order[[k, p]] = order[[p, k]]
        x = A[k:, k].copy()
        alpha = np.linalg.norm(x)
        diag.append(alpha)
        if alpha == 0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        A[k:, k:] -= 2.0 * np.outer(v, v.conj() @ A[k:, k:])
    return order, np.asarray(diag)


def select_ports_rrqr(H, n: int, strong: bool = False, f: float = 1.0 + 1e-9) -> RrqrSelection:
    """Choose ``n`` columns of ``H`` by rank-revealing QR.

    The first ``n`` pivots of greedy column-pivoted QR are returned.  With
    ``strong=True`` the set is then improved by single column swaps while
    any swap raises the selected volume by more than a factor ``f``; a set
    where no such swap exists satisfies the strong-RRQR singular value bound.
    """
    H = np.asarray(H)
    m, N = H.shape
    if not 1 <= n <= min(m, N):
        raise ValueError("n must lie in [1, min(H.shape)]")
    order, diag = pivoted_qr_order(H)
    cols = [int(c) for c in order[:n]]
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    degenerate = bool(diag[n - 1] <= 1e-12 * scale)
    if strong and not degenerate:
        vol = _volume(H, cols)
        improved = True
        while improved:
            improved = False
            for i in range(n):
                for j in range(N):
                    if j in cols:
                        continue
                    trial = cols.copy()
                    trial[i] = j
                    v = _volume(H, trial)
                    if v > f * vol:
                        cols, vol, improved = trial, v, True
    return RrqrSelection(sorted(cols), degenerate)


@dataclass(frozen=True)
class WaterfillAllocation:
    powers: np.ndarray
    water_level: float


def waterfill(gains, total_power: float) -> WaterfillAllocation:
    """Exact waterfilling over channel gains ``gamma_i`` (SNR per unit power)."""
    g = np.asarray(gains, dtype=float)
    if total_power <= 0:
        raise ValueError("total_power must be positive")
    if not np.any(g > 0):
        raise ValueError("all channel gains are zero")
    order = np.argsort(-g, kind="stable")
    inv = 1.0 / g[order][g[order] > 0]
    level = 0.0
    active = 0
    for k in range(1, inv.size + 1):
        mu = (total_power + inv[:k].sum()) / k
        if mu > inv[k - 1]:
            level, active = mu, k
        else:
            break
    p_sorted = np.zeros(g.size)
    p_sorted[:active] = level - inv[:active]
    powers = np.zeros(g.size)
    powers[order] = p_sorted
    return WaterfillAllocation(powers, float(level))


def svd_waterfill(H_sub, total_power: float, noise: float = 1.0):
    """Capacity of ``H_sub`` with SVD precoding and waterfilling power."""
    H = np.atleast_2d(np.asarray(H_sub))
    s = np.linalg.svd(H, compute_uv=False)
    if not np.any(s > 0):
        raise ValueError("channel is all zero")
    gamma = s * s / noise
    alloc = waterfill(gamma, total_power)
    rate = float(np.sum(np.log2(1.0 + alloc.powers * gamma)))
    return alloc, rate


# ----------------------------------------------------------------------------
# diversity-multiplexing tradeoff


@dataclass(frozen=True)
class DmtCurve:
    points: tuple[tuple[int, int], ...]

    def d(self, r: int) -> int:
        for rr, dd in self.points:
            if rr == r:
                return dd
        raise KeyError(r)

    def at(self, r: float) -> float:
        """Piecewise-linear value between corner points; 0 beyond the last one."""
        rs = [p[0] for p in self.points]
        ds = [p[1] for p in self.points]
        if r < 0:
            raise ValueError("r must be non-negative")
        if r >= rs[-1]:
            return float(ds[-1]) if r == rs[-1] else 0.0
        return float(np.interp(r, rs, ds))


def dmt_tas(n_tx: int, n_rx: int) -> DmtCurve:
    """Integer corner points ``(r, (n_tx - r)(n_rx - r))`` of the MIMO tradeoff."""
    if n_tx < 1 or n_rx < 1:
        raise ValueError("antenna counts must be positive")
    return DmtCurve(tuple((r, (n_tx - r) * (n_rx - r)) for r in range(min(n_tx, n_rx) + 1)))


def dmt_knee(a: int, b: int, n_min: int) -> int:
    """Lowest-index minimizer of ``(a - eta)(b - eta)/(n_min - eta)`` over ``eta < n_min``."""
    vals = [(a - eta) * (b - eta) / (n_min - eta) for eta in range(n_min)]
    return int(np.argmin(vals))


def dmt_fas(Np_tx: int, Np_rx: int, n_min: int, n_other: Optional[int] = None) -> DmtCurve:
    """Corner points of the FAS tradeoff.

    ``Np_tx`` and ``Np_rx`` are effective port counts.  Passing ``n_other``
    gives the one-sided variant, where only the transmitter has a FAS and
    ``n_other`` antennas replace the receive factor.
    """
    b = Np_rx if n_other is None else n_other
    if n_min < 1 or Np_tx < n_min or b < n_min:
        raise ValueError("need effective port counts >= n_min >= 1")
    knee = dmt_knee(Np_tx, b, n_min)
    pts = [(r, (Np_tx - r) * (b - r)) for r in range(knee + 1)]
    pts.append((n_min, 0))
    return DmtCurve(tuple(pts))


# ----------------------------------------------------------------------------
# effective diversity


def diversity_spectrum(W: float, N: int, geometry: str = "planar") -> np.ndarray:
    """Eigenvalues of the port correlation of an ``N``-port FAS of side ``W``.

    ``planar`` uses a square ``sqrt(N) x sqrt(N)`` grid over ``W x W`` with
    spherical-sinc correlation; ``linear`` uses the 1D Jakes model.
    """
    if geometry == "planar":
        side = int(round(math.sqrt(N)))
        if side * side != N or side < 2:
            raise ValueError("planar geometry needs a square port count")
        model = build_corr_grid(PortGeometry.planar(side, side, W, W))
    elif geometry == "linear":
        model = build_corr_1d_jakes(N, W)
    else:
        raise ValueError("geometry must be 'planar' or 'linear'")
    return model.eig.lambdas


def _reference(lam: np.ndarray, reference: str) -> float:
    if reference == "mean":
        return float(lam.sum() / lam.size)
    if reference == "max":
        return float(lam[0])
    raise ValueError("reference must be 'mean' or 'max'")


def count_above(lam: np.ndarray, xi: float, reference: str = "mean") -> int:
    return int(np.count_nonzero(lam >= xi * _reference(lam, reference)))


def effective_diversity(W: float, N: int, xi: float, geometry: str = "planar",
                        reference: str = "mean") -> int:
    """Number of eigenvalues at or above ``xi`` times the reference eigenvalue.

    The default reference is the mean eigenvalue (``trace / N``, which is 1
    for a unit-diagonal correlation), i.e. ``xi`` acts as an absolute floor.
    """
    if N < 2 or xi <= 0:
        raise ValueError("need N >= 2 and xi > 0")
    return count_above(diversity_spectrum(W, N, geometry), xi, reference)


@dataclass(frozen=True)
class Calibration:
    xi: float
    lower: float
    upper: float


def calibrate_xi(W: float, N: int, target: int, nominal: float = 1e-3,
                 geometry: str = "planar", reference: str = "mean") -> Calibration:
    """Threshold interval giving ``target`` eigenvalues, and the point in it nearest ``nominal``.

    The count equals ``target`` for any ``xi`` in ``(lower, upper]``; the
    nominal value is kept when it already lies inside, otherwise the
    geometric midpoint of the interval is used.
    """
    lam = diversity_spectrum(W, N, geometry)
    ref = _reference(lam, reference)
    if not 1 <= target <= lam.size:
        raise ValueError("target out of range")
    upper = lam[target - 1] / ref
    lower = lam[target] / ref if target < lam.size else 0.0
    if not upper > lower:
        raise ValueError("target count is not attainable (repeated eigenvalue)")
    if lower < nominal <= upper:
        xi = nominal
    elif lower > 0:
        xi = math.sqrt(lower * upper)
    else:
        xi = upper / 2.0
    return Calibration(float(xi), float(lower), float(upper))


def tas_antenna_count(W: float, spacing: float = 0.5, dims: int = 2) -> int:
    """Fixed antennas that fit a ``W``-per-axis surface at the given spacing."""
    per_axis = int(math.floor(W / spacing + 1e-12)) + 1
    return per_axis ** dims

