"""Port geometries, spatial correlation models and channel synthesis.

Indices in this module are 0-based, except :func:`port_index` which keeps
the 1-based ``(n1, n2) -> k`` mapping used in the port-numbering formula.
Samplers take a :class:`~faskit.numerics.RandomStream` and an optional
``size``; with ``size`` set, realizations are stacked along a leading axis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .numerics import (
    EigenDecomposition,
    RandomStream,
    bessel_j0,
    bessel_j1,
    cscg_vector,
    hermitian_eig,
    hyp1f2_half,
    sinc_spherical,
)


# ----------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class PortGeometry:
    """Uniform port grid over an aperture measured in wavelengths.

    ``ports_per_axis`` and ``aperture_per_axis`` are ordered (axis 1, axis 2,
    axis 3).  Ports are numbered with axis 1 varying fastest.
    """

    dims: int
    ports_per_axis: tuple[int, int, int]
    aperture_per_axis: tuple[float, float, float]

    def __post_init__(self):
        if self.dims not in (1, 2, 3):
            raise ValueError("dims must be 1, 2 or 3")
        if len(self.ports_per_axis) != 3 or len(self.aperture_per_axis) != 3:
            raise ValueError("per-axis tuples must have three entries")
        for i, (n, w) in enumerate(zip(self.ports_per_axis, self.aperture_per_axis)):
            if n < 1:
                raise ValueError(f"axis {i + 1}: port count must be positive")
            if w < 0:
                raise ValueError(f"axis {i + 1}: aperture must be non-negative")
            if n > 1 and w <= 0:
                raise ValueError(f"axis {i + 1}: N > 1 requires W > 0")
            if i >= self.dims and n != 1:
                raise ValueError(f"axis {i + 1} unused for dims={self.dims}")

    @classmethod
    def linear(cls, n: int, w: float) -> "PortGeometry":
        return cls(1, (int(n), 1, 1), (float(w), 0.0, 0.0))

    @classmethod
    def planar(cls, n1: int, n2: int, w1: float, w2: float) -> "PortGeometry":
        return cls(2, (int(n1), int(n2), 1), (float(w1), float(w2), 0.0))

    @classmethod
    def single(cls) -> "PortGeometry":
        return cls.linear(1, 0.0)

    @property
    def n_ports(self) -> int:
        return int(np.prod(self.ports_per_axis))

    def axis_indices(self) -> np.ndarray:
        """``(N, 3)`` zero-based per-axis indices, axis 1 fastest."""
        n1, n2, n3 = self.ports_per_axis
        k = np.arange(self.n_ports)
        return np.stack([k % n1, (k // n1) % n2, k // (n1 * n2)], axis=1)

    def spacing(self) -> np.ndarray:
        """Per-axis port spacing in wavelengths (0 on single-port axes)."""
        return np.array(
            [w / (n - 1) if n > 1 else 0.0
             for n, w in zip(self.ports_per_axis, self.aperture_per_axis)]
        )

    def positions(self) -> np.ndarray:
        """Port positions in wavelengths as ``[axis3, axis2, axis1]`` rows.

        A linear array therefore lies along the third coordinate of the
        wave vector (the ``sin(phi)`` component).
        """
        coords = self.axis_indices() * self.spacing()
        return coords[:, ::-1].copy()


def port_index(n1: int, n2: int, N1: int, N2: Optional[int] = None) -> int:
    """1-based linear index ``(n2 - 1) * N1 + n1`` of planar port ``(n1, n2)``."""
    if not 1 <= n1 <= N1:
        raise ValueError("n1 out of range")
    if n2 < 1 or (N2 is not None and n2 > N2):
        raise ValueError("n2 out of range")
    return (n2 - 1) * N1 + n1


# ----------------------------------------------------------------------------
# correlation models


@dataclass(frozen=True)
class CorrelationModel:
    geometry: PortGeometry
    J: np.ndarray
    eig: EigenDecomposition

    @property
    def n_ports(self) -> int:
        return self.J.shape[0]


def _model(geometry: PortGeometry, J: np.ndarray) -> CorrelationModel:
    return CorrelationModel(geometry=geometry, J=J, eig=hermitian_eig(J))


def identity_model(n: int = 1) -> CorrelationModel:
    geom = PortGeometry.single() if n == 1 else PortGeometry.linear(n, 1.0)
    return _model(geom, np.eye(n))


def build_corr_1d_jakes(N: int, W: float) -> CorrelationModel:
    """Jakes correlation of a linear FAS: ``J0(2 pi |n - m| W / (N - 1))``."""
    if N < 2:
        raise ValueError("N must be at least 2; use identity_model(1) for one port")
    if W <= 0:
        raise ValueError("W must be positive")
    n = np.arange(N)
    d = np.abs(n[:, None] - n[None, :]) * (W / (N - 1))
    J = bessel_j0(2.0 * math.pi * d)
    return _model(PortGeometry.linear(N, W), J)


def _pairwise_distance(geometry: PortGeometry, spacing: np.ndarray) -> np.ndarray:
    idx = geometry.axis_indices()
    delta = (idx[:, None, :] - idx[None, :, :]) * spacing
    return np.sqrt(np.sum(delta * delta, axis=-1))


def build_corr_grid(geometry: PortGeometry) -> CorrelationModel:
    """Spherical-sinc correlation between ports of a planar or volumetric FAS."""
    if geometry.dims not in (2, 3):
        raise ValueError("grid correlation needs a 2D or 3D geometry")
    for i in range(geometry.dims):
        if geometry.ports_per_axis[i] < 2:
            raise ValueError(f"axis {i + 1} needs at least 2 ports")
    d = _pairwise_distance(geometry, geometry.spacing())
    return _model(geometry, sinc_spherical(2.0 * math.pi * d))


def build_corr_tas(geometry: PortGeometry, spacing_per_axis: Sequence[float]) -> CorrelationModel:
    """Correlation of a fixed-position array spanning the same aperture.

    Each active axis holds ``floor(W_i / d_i) + 1`` antennas spaced ``d_i``
    apart; the returned model's geometry describes that array.
    """
    spacing = np.zeros(3)
    counts = [1, 1, 1]
    for i in range(geometry.dims):
        d = float(spacing_per_axis[i])
        if d < 0.5:
            raise ValueError("antenna spacing must be at least half a wavelength")
        counts[i] = int(math.floor(geometry.aperture_per_axis[i] / d + 1e-12)) + 1
        spacing[i] = d
    apertures = tuple(float((c - 1) * spacing[i]) if c > 1 else 0.0 for i, c in enumerate(counts))
    tas_geom = PortGeometry(geometry.dims, tuple(counts), apertures)
    dist = _pairwise_distance(tas_geom, spacing)
    return _model(tas_geom, sinc_spherical(2.0 * math.pi * dist))


def average_variance(model: CorrelationModel, n_hat: int) -> float:
    """Average per-port variance kept by the ``n_hat`` strongest eigenmodes."""
    N = model.n_ports
    if not 1 <= n_hat <= N:
        raise ValueError("n_hat must lie in [1, N]")
    return float(np.sum(model.eig.lambdas[:n_hat]) / N)


# ----------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class ChannelSample:
    """Channel realization(s) tagged with the model and stream that made them."""

    values: np.ndarray
    model_tag: str
    stream: Optional[RandomStream] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def sample_eigen(model: CorrelationModel, stream: RandomStream, size=None) -> ChannelSample:
    """Correlated draw ``h = Q Lambda^(1/2) g``."""
    return sample_reduced(model, model.n_ports, stream, size=size, tag="eigen")


def sample_reduced(model: CorrelationModel, n_hat: int, stream: RandomStream,
                   size=None, tag: str = "reduced") -> ChannelSample:
    """Rank-``n_hat`` draw keeping only the strongest eigenmodes.

    The full ``g`` vector is always drawn, so the same stream gives the
    same leading coefficients for every ``n_hat``.
    """
    N = model.n_ports
    if not 1 <= n_hat <= N:
        raise ValueError("n_hat must lie in [1, N]")
    g = cscg_vector(stream, N, size=size)
    basis = model.eig.Q[:, :n_hat] * np.sqrt(model.eig.lambdas[:n_hat])
    h = g[..., :n_hat] @ basis.T
    return ChannelSample(h, tag, stream)


def sample_mimo(tx_model: CorrelationModel, rx_model: CorrelationModel,
                stream: RandomStream, size=None) -> ChannelSample:
    """Kronecker-separable draw ``H = Qr Lr^(1/2) G Lt^(1/2) Qt^H`` (rows = rx ports)."""
    n_rx, n_tx = rx_model.n_ports, tx_model.n_ports
    g = cscg_vector(stream, n_rx * n_tx, size=size)
    G = g.reshape(g.shape[:-1] + (n_rx, n_tx))
    A = rx_model.eig.Q * np.sqrt(rx_model.eig.lambdas)
    B = tx_model.eig.Q * np.sqrt(tx_model.eig.lambdas)
    return ChannelSample(A @ G @ B.conj().T, "mimo", stream)


@dataclass(frozen=True)
class ReferencePortModel:
    geometry: PortGeometry
    mu: np.ndarray
    constant: bool = False


def constant_mu(W: float) -> float:
    """Common correlation parameter matching the mean squared Jakes correlation."""
    if W <= 0:
        raise ValueError("W must be positive")
    x = 2.0 * math.pi * W
    inner = hyp1f2_half(W) - bessel_j1(x) / x
    return float(min(1.0, math.sqrt(2.0) * math.sqrt(max(inner, 0.0))))


def build_reference_model(N: int, W: float, constant: bool = False) -> ReferencePortModel:
    if N < 2:
        raise ValueError("N must be at least 2")
    if W <= 0:
        raise ValueError("W must be positive")
    if constant:
        mu = np.full(N, constant_mu(W))
        mu[0] = 1.0
    else:
        mu = np.asarray(bessel_j0(2.0 * math.pi * np.arange(N) * W / (N - 1)))
    return ReferencePortModel(PortGeometry.linear(N, W), np.clip(mu, -1.0, 1.0), constant)


def sample_reference(model: ReferencePortModel, stream: RandomStream, size=None) -> ChannelSample:
    """Every port mixes its own draw with the reference port's draw."""
    mu = model.mu
    g = cscg_vector(stream, mu.size, size=size)
    ref = g[..., :1]
    h = np.sqrt(1.0 - mu * mu) * g + mu * ref
    h[..., 0] = ref[..., 0]
    return ChannelSample(h, "reference-constant" if model.constant else "reference", stream)


# ----------------------------------------------------------------------------
# block correlation model


@dataclass(frozen=True)
class BlockCorrelationModel:
    mu2: float
    block_sizes: tuple[int, ...]
    target_eigenvalues: tuple[float, ...] = field(default=())

    @property
    def total_ports(self) -> int:
        return int(sum(self.block_sizes))

    def block_eigenvalues(self) -> np.ndarray:
        """Leading eigenvalue ``(L_b - 1) mu2 + 1`` of each block."""
        L = np.asarray(self.block_sizes, dtype=float)
        return (L - 1.0) * self.mu2 + 1.0

    def spectrum(self) -> np.ndarray:
        """Full eigenvalue list of the block-diagonal matrix, descending."""
        lead = self.block_eigenvalues()
        rest = np.full(self.total_ports - len(self.block_sizes), 1.0 - self.mu2)
        return np.sort(np.concatenate([lead, rest]))[::-1]

    def matrix(self) -> np.ndarray:
        J = np.zeros((self.total_ports, self.total_ports))
        start = 0
        for L in self.block_sizes:
            J[start:start + L, start:start + L] = self.mu2
            start += L
        np.fill_diagonal(J, 1.0)
        return J


def dominant_eigenvalues(model: CorrelationModel, eig_floor: float = 1e-3) -> np.ndarray:
    lam = model.eig.lambdas
    return lam[lam >= eig_floor * lam[0]]


def block_size(lam: float, mu2: float) -> int:
    """Block length whose leading eigenvalue best reaches ``lam`` from below."""
    if lam < 1.0:
        return 1
    return int(math.floor((lam - 1.0) / mu2 + 1.0))


def build_block_model(source: CorrelationModel, mu2: float = 0.97,
                      eig_floor: float = 1e-3, growth: str = "deficit") -> BlockCorrelationModel:
    """Block-diagonal approximation matching the dominant eigenvalues.

    One block per dominant eigenvalue (``lambda >= eig_floor * lambda_max``)
    is sized by :func:`block_size`.  Ports are then added, one at a time,
    until the blocks cover all ``N`` source ports.  ``growth="deficit"``
    adds each port to the block whose leading eigenvalue is furthest below
    its target in relative terms; ``growth="round-robin"`` cycles through
    the blocks in descending-eigenvalue order.  If the initial sizes
    already overshoot ``N``, ports are removed from the block with the
    largest relative surplus.
    """
    if not 0.0 < mu2 < 1.0:
        raise ValueError("mu2 must lie in (0, 1)")
    if eig_floor <= 0:
        raise ValueError("eig_floor must be positive")
    if growth not in ("deficit", "round-robin"):
        raise ValueError("growth must be 'deficit' or 'round-robin'")
    targets = dominant_eigenvalues(source, eig_floor)
    N = source.n_ports
    sizes = [block_size(lam, mu2) for lam in targets]

    def rel_gap(b):
        return (targets[b] - ((sizes[b] - 1) * mu2 + 1.0)) / targets[b]

    i = 0
    while sum(sizes) < N:
        if growth == "round-robin":
            b = i % len(sizes)
            i += 1
        else:
            gaps = [rel_gap(b) for b in range(len(sizes))]
            b = int(np.argmax(gaps))
        sizes[b] += 1
    while sum(sizes) > N:
        candidates = [b for b in range(len(sizes)) if sizes[b] > 1]
        if not candidates:
            raise ValueError("more dominant eigenvalues than ports")
        b = min(candidates, key=lambda c: (rel_gap(c), c))
        sizes[b] -= 1
    return BlockCorrelationModel(float(mu2), tuple(sizes), tuple(float(t) for t in targets))


def sample_block(model: BlockCorrelationModel, stream: RandomStream, size=None) -> ChannelSample:
    """Independent blocks, each ``sqrt(mu2) c_b + sqrt(1 - mu2) e``."""
    B = len(model.block_sizes)
    g = cscg_vector(stream, model.total_ports + B, size=size)
    shared = g[..., model.total_ports:]
    owner = np.repeat(np.arange(B), model.block_sizes)
    h = math.sqrt(model.mu2) * shared[..., owner] + math.sqrt(1.0 - model.mu2) * g[..., :model.total_ports]
    return ChannelSample(h, "block", stream)


# ----------------------------------------------------------------------------
# finite-scattering geometric model


def wave_vector(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack(
        [np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), np.sin(phi)], axis=-1
    )


def steering_from_positions(positions: np.ndarray, theta, phi) -> np.ndarray:
    return np.exp(-2j * math.pi * (wave_vector(theta, phi) @ positions.T))


def steering_vector(geometry: PortGeometry, theta, phi) -> np.ndarray:
    """Per-port plane-wave phase response ``exp(-j 2 pi psi . n)``.

    Broadcasting over array-valued angles adds leading axes; the port axis
    is last.
    """
    return steering_from_positions(geometry.positions(), theta, phi)


@dataclass(frozen=True)
class ScatteringEnvironment:
    """Rician finite-scattering channel parameters.

    Angles are ``(theta, phi)`` pairs; ``aoa`` belongs to the receiver and
    ``aod`` to the transmitter.
    """

    rice_factor: float
    los_phase: float = 0.0
    los_aoa: Optional[tuple[float, float]] = None
    los_aod: Optional[tuple[float, float]] = None
    gains: tuple[complex, ...] = ()
    aoa: tuple[tuple[float, float], ...] = ()
    aod: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.rice_factor < 0:
            raise ValueError("Rice factor must be non-negative")
        if not len(self.aoa) == len(self.aod):
            raise ValueError("each path needs an AoA and an AoD")
        if self.gains and len(self.gains) != len(self.aoa):
            raise ValueError("gain count must match path count")
        if self.rice_factor > 0 and (self.los_aoa is None or self.los_aod is None):
            raise ValueError("K > 0 requires LoS angles")
        if self.rice_factor == 0 and not self.aoa:
            raise ValueError("K = 0 needs at least one scattered path")

    @property
    def n_paths(self) -> int:
        return len(self.aoa)


def draw_angles(rng: np.random.Generator, shape) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth uniform on [0, 2 pi), elevation uniform on [-pi/2, pi/2]."""
    theta = rng.uniform(0.0, 2.0 * math.pi, shape)
    phi = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, shape)
    return theta, phi


def random_environment(rice_factor: float, n_paths: int, stream: RandomStream) -> ScatteringEnvironment:
    rng = stream.generator()
    th, ph = draw_angles(rng, (2, n_paths + 1))
    omega = rng.uniform(0.0, 2.0 * math.pi)
    z = rng.standard_normal((n_paths, 2))
    gains = tuple(complex(a, b) * math.sqrt(0.5) for a, b in z)
    pairs = lambda k: tuple((float(th[k, i]), float(ph[k, i])) for i in range(1, n_paths + 1))
    return ScatteringEnvironment(
        rice_factor=float(rice_factor),
        los_phase=float(omega),
        los_aoa=(float(th[0, 0]), float(ph[0, 0])),
        los_aod=(float(th[1, 0]), float(ph[1, 0])),
        gains=gains,
        aoa=pairs(0),
        aod=pairs(1),
    )


def sample_scattering(env: ScatteringEnvironment, tx_geom: PortGeometry, rx_geom: PortGeometry,
                      stream: Optional[RandomStream] = None) -> ChannelSample:
    """``N_rx x N_tx`` Rician channel from explicit path parameters.

    Missing path gains are drawn as unit CSCG from ``stream``.
    """
    K = env.rice_factor
    Lp = env.n_paths
    gains = np.asarray(env.gains, dtype=complex)
    if Lp and gains.size == 0:
        if stream is None:
            raise ValueError("a stream is needed to draw path gains")
        gains = cscg_vector(stream, Lp)
    H = np.zeros((rx_geom.n_ports, tx_geom.n_ports), dtype=complex)
    if K > 0:
        ar = steering_vector(rx_geom, *env.los_aoa)
        at = steering_vector(tx_geom, *env.los_aod)
        H += math.sqrt(K / (K + 1.0)) * np.exp(1j * env.los_phase) * np.outer(ar, at.conj())
    if Lp:
        scale = math.sqrt(1.0 / (Lp * (K + 1.0)))
        for kappa, (tr, pr), (tt, pt) in zip(gains, env.aoa, env.aod):
            ar = steering_vector(rx_geom, tr, pr)
            at = steering_vector(tx_geom, tt, pt)
            H += scale * kappa * np.outer(ar, at.conj())
    return ChannelSample(H, "scattering", stream)


def scattering_batch(rng: np.random.Generator, shape, rice_factor: float, n_paths: int,
                     rx_positions: Optional[np.ndarray] = None,
                     tx_positions: Optional[np.ndarray] = None, return_los: bool = False):
    """Vectorized Monte Carlo version of :func:`sample_scattering` with random angles.

    Returns channels of shape ``shape + (N_rx, N_tx)``; a missing side has
    one port.  With ``return_los`` the transmit LoS steering vectors
    ``shape + (N_tx,)`` are returned too.
    """
    shape = tuple(shape)
    K = float(rice_factor)
    rx = np.zeros((1, 3)) if rx_positions is None else rx_positions
    tx = np.zeros((1, 3)) if tx_positions is None else tx_positions
    th_r, ph_r = draw_angles(rng, shape + (n_paths + 1,))
    th_t, ph_t = draw_angles(rng, shape + (n_paths + 1,))
    omega = rng.uniform(0.0, 2.0 * math.pi, shape)
    z = rng.standard_normal(shape + (n_paths, 2))
    kappa = (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)
    ar = steering_from_positions(rx, th_r, ph_r)  # shape + (L+1, N_rx)
    at = steering_from_positions(tx, th_t, ph_t)
    coef = np.empty(shape + (n_paths + 1,), dtype=complex)
    coef[..., 0] = math.sqrt(K / (K + 1.0)) * np.exp(1j * omega)
    if n_paths:
        coef[..., 1:] = math.sqrt(1.0 / (n_paths * (K + 1.0))) * kappa
    H = np.einsum("...l,...lr,...lt->...rt", coef, ar, at.conj())
    if return_los:
        return H, at[..., 0, :]
    return H


# ----------------------------------------------------------------------------
# activation and mutual coupling


def _check_ports(ports, n, label):
    idx = [int(p) for p in ports]
    if not idx:
        raise ValueError(f"{label} port set is empty")
    if len(set(idx)) != len(idx):
        raise ValueError(f"{label} port set has duplicates")
    if min(idx) < 0 or max(idx) >= n:
        raise ValueError(f"{label} port index out of range")
    return np.asarray(idx)


def apply_activation(H, tx_ports, rx_ports) -> np.ndarray:
    """Rows ``rx_ports`` and columns ``tx_ports`` of ``H`` (0-based)."""
    H = np.asarray(H)
    if H.ndim == 1:
        H = H[:, None]
    r = _check_ports(rx_ports, H.shape[0], "rx")
    t = _check_ports(tx_ports, H.shape[1], "tx")
    return H[np.ix_(r, t)]


@dataclass(frozen=True)
class CouplingSpec:
    Z_A: complex
    Z_L: complex
    Z: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None
    Z0: float = 50.0

    def mutual_impedance(self) -> np.ndarray:
        if self.Z is not None:
            return np.atleast_2d(np.asarray(self.Z, dtype=complex))
        if self.S is None:
            raise ValueError("coupling spec needs Z or S")
        return impedance_from_scattering(self.S, self.Z0)


_COND_LIMIT = 1e12


def _solve_checked(A: np.ndarray, B: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise np.linalg.LinAlgError(f"{what} is singular (condition number {cond:.3g})")
    return np.linalg.solve(A, B)


def coupling_matrix(spec: CouplingSpec) -> np.ndarray:
    """``(Z_A + Z_L) (Z + Z_L I)^-1``."""
    Z = spec.mutual_impedance()
    if Z.shape[0] != Z.shape[1]:
        raise ValueError("mutual impedance matrix must be square")
    n = Z.shape[0]
    A = Z + spec.Z_L * np.eye(n)
    inv = _solve_checked(A, np.eye(n, dtype=complex), "Z + Z_L I")
    return (spec.Z_A + spec.Z_L) * inv


def impedance_from_scattering(S, Z0: float) -> np.ndarray:
    """``Z0 (I - S)^-1 (I + S)``."""
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    eye = np.eye(S.shape[0])
    return Z0 * _solve_checked(eye - S, eye + S, "I - S")


def apply_coupling(H_bar, Zmc_rx, Zmc_tx) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H_bar, dtype=complex))
    R = np.atleast_2d(np.asarray(Zmc_rx, dtype=complex))
    T = np.atleast_2d(np.asarray(Zmc_tx, dtype=complex))
    if R.shape[1] != H.shape[0] or H.shape[1] != T.shape[0]:
        raise ValueError(f"shape mismatch: {R.shape} x {H.shape} x {T.shape}")
    return R @ H @ T


# ----------------------------------------------------------------------------
# CSV fixture layout: one matrix row per line, "re,im" pairs per entry


def write_matrix_csv(path, M) -> None:
    A = np.atleast_2d(np.asarray(M, dtype=complex))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in A:
            writer.writerow([f"{v:.17g}" for z in row for v in (z.real, z.imag)])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    arr = np.asarray(rows)
    return arr[:, 0::2] + 1j * arr[:, 1::2]
