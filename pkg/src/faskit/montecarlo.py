"""Chunked, seed-addressed Monte Carlo execution and interval estimates.

Trials are cut into fixed-size chunks; chunk ``i`` always draws from
``RandomStream(seed, i)``.  Results are combined in chunk order, so the
output does not depend on how many worker threads ran the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np
from scipy import stats

from .numerics import RandomStream

T = TypeVar("T")

DEFAULT_CHUNK = 2000


def chunk_sizes(trials: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    full, rest = divmod(trials, chunk)
    return [chunk] * full + ([rest] if rest else [])


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("FAS_KIT_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def map_chunks(fn: Callable[[RandomStream, int], T], seed: int, trials: int,
               chunk: int = DEFAULT_CHUNK, threads: int | None = None,
               path: Sequence[int] = ()) -> list[T]:
    """Run ``fn(stream, n)`` over every chunk and return results in chunk order."""
    sizes = chunk_sizes(trials, chunk)
    streams = [RandomStream(seed, i, tuple(path)) for i in range(len(sizes))]
    workers = resolve_threads(threads)
    if workers == 1 or len(sizes) == 1:
        return [fn(s, n) for s, n in zip(streams, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, streams, sizes))


def pairwise_sum(values) -> float:
    """Fixed-tree pairwise sum, independent of how the values were produced."""
    vals = [float(v) for v in values]
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


@dataclass(frozen=True)
class Estimate:
    value: float
    ci_low: float
    ci_high: float
    trials: int
    std_error: float = 0.0


def binomial_estimate(successes: int, trials: int, z: float = 1.96) -> Estimate:
    """Normal-approximation binomial interval, clipped to [0, 1]."""
    p = successes / trials
    se = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    return Estimate(p, max(0.0, p - z * se), min(1.0, p + z * se), trials, se)


def mean_estimate(total: float, total_sq: float, n: int, level: float = 0.95) -> Estimate:
    """t-interval for a mean from its running sums."""
    mean = total / n
    if n < 2:
        return Estimate(mean, mean, mean, n, 0.0)
    var = max(total_sq - n * mean * mean, 0.0) / (n - 1)
    se = math.sqrt(var / n)
    half = float(stats.t.ppf(0.5 + level / 2.0, n - 1)) * se
    return Estimate(mean, mean - half, mean + half, n, se)


def sample_estimate(samples, level: float = 0.95) -> Estimate:
    x = np.asarray(samples, dtype=float)
    return mean_estimate(float(x.sum()), float((x * x).sum()), x.size, level)
