"""Special functions, random streams and the Hermitian eigensolver contract.

Every routine here is pure.  The Bessel functions accept scalars or arrays
and return the same shape; scalars come back as Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "bessel_j0",
    "bessel_j1",
    "sinc_spherical",
    "hyp1f2_half",
    "EigenDecomposition",
    "hermitian_eig",
    "RandomStream",
    "cscg_vector",
]

# Below this magnitude the power series is used, above it the Hankel expansion.
BESSEL_CROSSOVER = 12.0
_SERIES_TERMS = 48
_ASYMPTOTIC_TERMS = 24


def _as_real_array(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _bessel_series(x, nu):
    # sum_k (-1)^k (x/2)^(2k+nu) / (k! (k+nu)!)
    q = -(x * x) / 4.0
    term = (x / 2.0) ** nu / math.factorial(nu)
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + nu))
        total += term
    return total


def _bessel_asymptotic(x, nu):
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    a = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2:
            q += sign * a
        else:
            p += sign * a
    chi = x - (nu / 2.0 + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _bessel(x, nu):
    arr = _as_real_array(x)
    ax = np.abs(arr)
    out = np.empty_like(ax)
    small = ax < BESSEL_CROSSOVER
    out[small] = _bessel_series(ax[small], nu)
    out[~small] = _bessel_asymptotic(ax[~small], nu)
    if nu % 2:
        out = np.where(arr < 0, -out, out)
    return float(out) if out.ndim == 0 else out


def bessel_j0(x):
    """Zero-order Bessel function of the first kind.

    Power series below ``|x| = 12``, Hankel asymptotic expansion above.
    Absolute error stays under 1e-12 for ``|x| <= 500``.
    """
    return _bessel(x, 0)


def bessel_j1(x):
    """First-order Bessel function of the first kind (odd in ``x``)."""
    return _bessel(x, 1)


def sinc_spherical(x):
    """Unnormalised sinc ``sin(x)/x``, i.e. the zero-order spherical Bessel function."""
    arr = _as_real_array(x)
    small = np.abs(arr) < 1e-4
    safe = np.where(small, 1.0, arr)
    x2 = arr * arr
    out = np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)
    return float(out) if out.ndim == 0 else out


# Series branch is used while the largest term stays small enough that the
# alternating sum keeps ~1e-12 relative accuracy.
_HYP_SERIES_LIMIT = 1.5
_HYP_PANEL_NODES = 60


def _hyp1f2_series(w):
    # term ratio for 1F2(1/2; 1, 3/2; z): (k+1/2) z / ((k+1)^2 (k+3/2))
    z = -(math.pi * w) ** 2
    term = 1.0
    total = 1.0
    k = 0
    while abs(term) > 1e-18 * max(1.0, abs(total)) or k < 4:
        term *= (k + 0.5) * z / ((k + 1) ** 2 * (k + 1.5))
        total += term
        k += 1
    return total


def hyp1f2_half(w):
    """Evaluate 1F2(1/2; 1, 3/2; -pi^2 w^2).

    The function equals the average of ``J0(2 pi w t)`` over ``t`` in [0, 1].
    For small ``w`` the hypergeometric series converges quickly; beyond that
    the alternating terms cancel badly, so the integral form is evaluated
    with Gauss-Legendre quadrature on our own ``bessel_j0``.
    """
    w = float(w)
    if not math.isfinite(w) or w < 0:
        raise ValueError("w must be finite and non-negative")
    if w <= _HYP_SERIES_LIMIT:
        return _hyp1f2_series(w)
    # split [0,1] into panels so each holds a few oscillations at most
    panels = max(1, int(math.ceil(2.0 * w)))
    nodes, weights = np.polynomial.legendre.leggauss(_HYP_PANEL_NODES)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    wt = (half[:, None] * weights[None, :]).ravel()
    return float(np.dot(wt, bessel_j0(2.0 * math.pi * w * t)))


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a Hermitian PSD matrix, eigenvalues sorted descending."""

    Q: np.ndarray
    lambdas: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.Q * self.lambdas) @ self.Q.conj().T


def hermitian_eig(M, tol=1e-9) -> EigenDecomposition:
    """Eigendecomposition with a fixed, reproducible output convention.

    The input is symmetrised before LAPACK ``eigh`` is called.  Eigenvalues
    are sorted descending and clamped at zero when roundoff drives them
    slightly negative.  Each eigenvector is rotated so that its first
    entry with magnitude above 1e-12 is real and positive.
    """
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.size and np.max(np.abs(A - A.conj().T)) > tol:
        raise ValueError("matrix is not Hermitian within tolerance")
    A = 0.5 * (A + A.conj().T)
    vals, vecs = np.linalg.eigh(A)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = np.array(vecs[:, order], dtype=complex)
    if np.any(vals < -tol * max(1.0, abs(vals[0]) if vals.size else 1.0)):
        raise ValueError("matrix has materially negative eigenvalues")
    vals = np.clip(vals, 0.0, None)
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            ref = col[nz[0]]
            vecs[:, j] = col * (abs(ref) / ref)
    return EigenDecomposition(Q=vecs, lambdas=vals)


@dataclass(frozen=True)
class RandomStream:
    """Counter-based random stream addressed by ``(master_seed, stream_index)``.

    The sequence depends only on the seed, the index and the optional
    sub-stream path, never on call order or thread layout.  Use
    :meth:`substream` to derive independent children (one per trial chunk,
    per user, per RF chain ...).
    """

    master_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be non-negative")

    def substream(self, k: int) -> "RandomStream":
        if k < 0:
            raise ValueError("substream index must be non-negative")
        return RandomStream(self.master_seed, self.stream_index, self.path + (int(k),))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            int(self.master_seed), spawn_key=(int(self.stream_index),) + self.path
        )
        return np.random.Generator(np.random.Philox(seq))


def _cscg(rng: np.random.Generator, shape):
    # interleaved re/im so a larger batch extends a smaller one
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def cscg_vector(stream: RandomStream, n, size=None) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian samples.

    Returns shape ``(n,)``, or ``size + (n,)`` when ``size`` is given (an
    int or a tuple); the first rows of a batched draw equal what smaller
    batches would give.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if size is None:
        shape = (n,)
    else:
        shape = (tuple(size) if isinstance(size, tuple) else (int(size),)) + (n,)
    return _cscg(stream.generator(), shape)
