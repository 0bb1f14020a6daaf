"""Line-of-sight channel matrices and pilot-based least-squares estimates.

The complex amplitude gain between one patch element and one user at local
spherical position (r, theta, phi) is

    g = alpha * lam / (4 pi r) * exp(-j 2 pi r / lam) * F(theta, phi)

with F the element amplitude pattern. Users behind a patch see g = 0.

Pilots: all users send mutually orthogonal sequences of length tau_p >= K
drawn from a unitary matrix Phi. After de-spreading, the least-squares
estimate is Ghat = G + W' / sqrt(rho_ul * tau_p) where the effective noise
W' has i.i.d. circularly symmetric complex Gaussian entries of variance
sigma^2. Because Phi is unitary this shortcut is distribution-exact, so the
main path never materializes the pilot block; estimate_channel_despread
keeps the explicit-Phi route for cross-checking.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass

import numpy as np

from .antenna import PatchDims, pattern_factor
from .errors import ConfigError, GeometryError
from .geometry import AntennaPose, Topology, to_local_spherical


@dataclass
class ChannelMatrix:
    """M x K complex amplitude gains between antennas (rows) and users (columns)."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 2:
            raise ConfigError(f"channel matrix must be 2-d, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            bad = np.argwhere(~np.isfinite(e))[0]
            raise GeometryError(
                f"non-finite channel gain at (m={bad[0]}, k={bad[1]})"
            )
        self.entries = e

    @property
    def m_count(self) -> int:
        return self.entries.shape[0]

    @property
    def k_count(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class PilotConfig:
    """Pilot length tau_p, block length tau_c, uplink power rho_ul (W) and
    noise power sigma2 (W). rho_ul is interpreted per user; set
    rho_ul_is_total to split one budget across K users instead."""

    tau_p: int
    tau_c: int
    rho_ul: float
    sigma2: float
    rho_ul_is_total: bool = False

    def __post_init__(self):
        if self.tau_p < 1:
            raise ConfigError(f"tau_p must be >= 1, got {self.tau_p}")
        if self.tau_c <= self.tau_p:
            raise ConfigError(
                f"tau_c must exceed tau_p, got tau_c = {self.tau_c}, tau_p = {self.tau_p}"
            )
        if not self.rho_ul > 0:
            raise ConfigError(f"rho_ul must be positive, got {self.rho_ul}")
        if self.sigma2 < 0:
            raise ConfigError(f"sigma2 must be non-negative, got {self.sigma2}")

    def rho_ul_per_user(self, k_count: int) -> float:
        return self.rho_ul / k_count if self.rho_ul_is_total else self.rho_ul

    @property
    def prelog(self) -> float:
        return 1.0 - self.tau_p / self.tau_c


def los_gain(pose: AntennaPose, user, dims: PatchDims) -> complex:
    """Complex LoS gain from one antenna to one user position."""
    r, theta, phi = to_local_spherical(pose, user)
    pf = pattern_factor(theta, phi, dims)
    amp = dims.alpha * dims.lam / (4 * math.pi * r)
    return amp * pf * cmath.exp(-2j * math.pi * r / dims.lam)


def los_matrix_from_frames(
    positions: np.ndarray,
    boresights: np.ndarray,
    ups: np.ndarray,
    users: np.ndarray,
    dims: PatchDims,
) -> np.ndarray:
    """Vectorized (M, K) LoS gain matrix from stacked antenna frames.

    Local frame components come from three small matmuls; the pattern is
    evaluated without explicit angles since X and Z only need dx/r and dz/r
    and sin(theta) = sqrt(dx^2 + dy^2)/r. Agrees with los_gain entrywise.
    """
    yax = np.cross(ups, boresights)
    ut = users.T
    dx = boresights @ ut - np.einsum("mc,mc->m", boresights, positions)[:, None]
    dy = yax @ ut - np.einsum("mc,mc->m", yax, positions)[:, None]
    dz = ups @ ut - np.einsum("mc,mc->m", ups, positions)[:, None]
    r2xy = dx * dx + dy * dy
    r = np.sqrt(r2xy + dz * dz)
    if np.any(r == 0.0):
        m, k = np.argwhere(r == 0.0)[0]
        raise GeometryError(f"user {k} coincides with antenna {m}")
    sin_theta = np.sqrt(r2xy) / r
    cx = math.pi * dims.x_len / dims.lam
    cz = math.pi * dims.w / dims.lam
    pat = sin_theta * np.sinc(cx / math.pi * dx / r) * np.sinc(cz / math.pi * dz / r)
    np.multiply(pat, dx >= 0.0, out=pat)  # back hemisphere radiates nothing
    amp = (dims.alpha * dims.lam / (4 * math.pi)) * pat / r
    return amp * np.exp((-2j * math.pi / dims.lam) * r)


def channel_matrix(topology: Topology, users, dims: PatchDims) -> ChannelMatrix:
    """True LoS channel matrix between all topology poses and user positions."""
    users = np.atleast_2d(np.asarray(users, dtype=float))
    if users.shape[0] < 1 or users.shape[1] != 3:
        raise ConfigError(f"users must be a (K, 3) array, got shape {users.shape}")
    inside = topology.room.contains(users)
    if not np.all(inside):
        k = int(np.argmin(inside))
        raise ConfigError(f"user {k} at {users[k]} lies outside the room")
    positions, boresights, ups = topology.frames()
    return ChannelMatrix(los_matrix_from_frames(positions, boresights, ups, users, dims))


def pilot_matrix(tau_p: int, k_count: int) -> np.ndarray:
    """First k_count columns of the unitary tau_p-point DFT matrix.

    Columns are orthonormal (Phi^H Phi = I), i.e. mutually orthogonal unit
    pilot sequences.
    """
    if k_count > tau_p:
        raise ConfigError(f"need tau_p >= K, got tau_p = {tau_p}, K = {k_count}")
    t = np.arange(tau_p)[:, None]
    k = np.arange(k_count)[None, :]
    return np.exp(-2j * math.pi * t * k / tau_p) / math.sqrt(tau_p)


def _noise_scale(cfg: PilotConfig, k_count: int) -> float:
    return 1.0 / math.sqrt(cfg.rho_ul_per_user(k_count) * cfg.tau_p)


def estimate_channel(
    g_true: ChannelMatrix,
    cfg: PilotConfig,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> ChannelMatrix:
    """Least-squares channel estimate Ghat = G + W' / sqrt(rho_ul tau_p).

    W' entries are i.i.d. CN(0, sigma^2); pass `noise` to supply them
    explicitly (used by the equivalence test against the explicit-pilot
    path), otherwise they are drawn from `rng`.
    """
    m, k = g_true.m_count, g_true.k_count
    if cfg.tau_p < k:
        raise ConfigError(f"tau_p = {cfg.tau_p} < K = {k}; pilots must be orthogonal")
    if noise is None:
        if rng is None:
            raise ConfigError("estimate_channel needs either rng or explicit noise")
        noise = complex_normal(rng, (m, k), cfg.sigma2)
    else:
        noise = np.asarray(noise, dtype=complex)
        if noise.shape != (m, k):
            raise ConfigError(f"noise must have shape ({m}, {k}), got {noise.shape}")
    return ChannelMatrix(g_true.entries + _noise_scale(cfg, k) * noise)


def estimate_channel_despread(
    g_true: ChannelMatrix,
    cfg: PilotConfig,
    rng: np.random.Generator | None = None,
    pilot_noise: np.ndarray | None = None,
) -> ChannelMatrix:
    """Reference LS estimate that materializes the pilot block.

    Builds Y_p = sqrt(rho_ul tau_p) G Phi^H + W_p with W_p of shape
    (M, tau_p), de-spreads with Phi and scales. Statistically identical to
    estimate_channel; with pilot_noise fixed, equals it on W' = W_p Phi.
    """
    m, k = g_true.m_count, g_true.k_count
    phi = pilot_matrix(cfg.tau_p, k)
    if pilot_noise is None:
        if rng is None:
            raise ConfigError("estimate_channel_despread needs rng or explicit noise")
        pilot_noise = complex_normal(rng, (m, cfg.tau_p), cfg.sigma2)
    else:
        pilot_noise = np.asarray(pilot_noise, dtype=complex)
        if pilot_noise.shape != (m, cfg.tau_p):
            raise ConfigError(
                f"pilot noise must have shape ({m}, {cfg.tau_p}), got {pilot_noise.shape}"
            )
    amp = math.sqrt(cfg.rho_ul_per_user(k) * cfg.tau_p)
    y_p = amp * g_true.entries @ phi.conj().T + pilot_noise
    y_despread = y_p @ phi
    return ChannelMatrix(y_despread / amp)


def complex_normal(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Circularly symmetric complex Gaussian draws, total variance per entry."""
    z = rng.standard_normal((*shape, 2))
    return math.sqrt(variance / 2.0) * z.view(np.complex128)[..., 0]


def save_channel_csv(g: ChannelMatrix, path) -> None:
    """Write header (M, K) then rows (m, k, re, im) at 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([g.m_count, g.k_count])
        for m in range(g.m_count):
            for k in range(g.k_count):
                v = g.entries[m, k]
                writer.writerow([m, k, f"{v.real:.17g}", f"{v.imag:.17g}"])


def load_channel_csv(path) -> ChannelMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        m_count, k_count = int(header[0]), int(header[1])
        entries = np.zeros((m_count, k_count), dtype=complex)
        for row in reader:
            m, k = int(row[0]), int(row[1])
            entries[m, k] = complex(float(row[2]), float(row[3]))
    return ChannelMatrix(entries)
