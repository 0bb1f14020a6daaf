"""User-drop generation and Monte Carlo campaign orchestration.

A campaign runs n_drops independent user placements. Each drop derives its
own random streams from the campaign seed via SeedSequence spawn keys
(drop index, stream index), so results are bit-identical for a given
(seed, config) no matter how many worker processes execute the drops or in
which order chunks complete.

Stream layout per drop i: (i, 0) places users, (i, 1 + j) draws the pilot
noise for uplink-power grid index j (the power campaign only uses j = 0).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .antenna import PatchDims
from .channel import (
    ChannelMatrix,
    PilotConfig,
    estimate_channel,
    los_matrix_from_frames,
)
from .errors import (
    CampaignError,
    ConfigError,
    InfeasibleRegionError,
    SingularMatrixError,
    StatisticalValidityError,
)
from .geometry import Room, Topology
from .precoding import (
    COND_LIMIT,
    LinkBudget,
    assemble_sinr,
    estimation_moments,
    rate_per_user,
    zf_required_power,
)

MAX_CONSECUTIVE_REJECTIONS = 10_000
MAX_DROP_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class DropSpec:
    """User placement parameters for one campaign."""

    k_count: int
    n_drops: int
    seed: int
    user_height: float = 1.5
    margin: float = 1.0
    exclusion: float = 0.5

    def __post_init__(self):
        if self.k_count < 1:
            raise ConfigError(f"k_count must be >= 1, got {self.k_count}")
        if self.n_drops < 1:
            raise ConfigError(f"n_drops must be >= 1, got {self.n_drops}")
        if self.margin < 0 or self.exclusion < 0:
            raise ConfigError("margin and exclusion must be non-negative")


@dataclass
class CampaignResult:
    """Per-drop metrics plus the aggregate curve(s) for one campaign."""

    metric: str
    kind: str
    seed: int
    n_drops: int
    failed_drops: list[int] = field(default_factory=list)
    per_drop_power: np.ndarray | None = None
    ccdf: np.ndarray | None = None  # (n, 2) columns: power_w, Pr{P >= power}
    rho_ul_grid: np.ndarray | None = None
    rho_dl_grid: np.ndarray | None = None
    surface: np.ndarray | None = None  # (n_ul, n_dl) rate at the percentile
    cell_rates: np.ndarray | None = None  # (n_ul, n_dl, pooled samples)
    percentile: float | None = None
    statistic: str | None = None
    discarded_draws: int = 0

    @property
    def median_power_w(self) -> float:
        return float(np.quantile(self.per_drop_power, 0.5))


def drop_users(
    room: Room,
    spec: DropSpec,
    rng: np.random.Generator,
    antenna_positions: np.ndarray | None = None,
) -> np.ndarray:
    """K user positions, i.i.d. uniform over the margin-inset floor rectangle
    at the configured height, rejection-resampled against the antenna
    exclusion shell."""
    lo_x, hi_x = spec.margin, room.lx - spec.margin
    lo_y, hi_y = spec.margin, room.ly - spec.margin
    if hi_x <= lo_x or hi_y <= lo_y:
        raise InfeasibleRegionError(
            f"margin {spec.margin} m leaves no floor area in a "
            f"{room.lx} x {room.ly} m room"
        )
    if not 0.0 < spec.user_height < room.lz:
        raise InfeasibleRegionError(
            f"user height {spec.user_height} m outside room height {room.lz} m"
        )
    if antenna_positions is not None and spec.exclusion > 0:
        # skip per-point checks when the whole sampling slab clears the shell
        lo = np.array([lo_x, lo_y, spec.user_height])
        hi = np.array([hi_x, hi_y, spec.user_height])
        nearest = np.clip(antenna_positions, lo, hi)
        if ((antenna_positions - nearest) ** 2).sum(axis=1).min() >= spec.exclusion**2:
            antenna_positions = None
    users = np.empty((spec.k_count, 3))
    users[:, 2] = spec.user_height
    pending = np.arange(spec.k_count)
    consecutive = 0
    while pending.size:
        users[pending, 0] = rng.uniform(lo_x, hi_x, pending.size)
        users[pending, 1] = rng.uniform(lo_y, hi_y, pending.size)
        if antenna_positions is not None and spec.exclusion > 0:
            d2 = ((users[pending, None, :] - antenna_positions[None, :, :]) ** 2).sum(
                axis=2
            )
            ok = d2.min(axis=1) >= spec.exclusion**2
        else:
            ok = np.ones(pending.size, dtype=bool)
        if ok.any():
            consecutive = 0
        else:
            consecutive += pending.size
            if consecutive > MAX_CONSECUTIVE_REJECTIONS:
                raise InfeasibleRegionError(
                    f"{consecutive} consecutive rejections; exclusion shell of "
                    f"{spec.exclusion} m leaves no room for users"
                )
        pending = pending[~ok]
    return users


def assemble_ccdf(powers_w: np.ndarray, n_points: int = 200) -> np.ndarray:
    """Empirical survival function Pr{P >= p} on a log-spaced power grid that
    brackets the observations, so it starts at 1 and ends at 0."""
    powers = np.sort(np.asarray(powers_w, dtype=float))
    if powers.size == 0:
        raise CampaignError("no successful drops to aggregate")
    if np.any(powers <= 0):
        raise CampaignError("required powers must be positive")
    lo = powers[0] * (1.0 - 1e-3)
    hi = powers[-1] * (1.0 + 1e-3)
    grid = np.geomspace(lo, hi, n_points)
    prob = 1.0 - np.searchsorted(powers, grid, side="left") / powers.size
    return np.column_stack([grid, prob])


def _drop_rng(seed: int, drop_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(drop_index, stream))
    )


def _power_chunk(args):
    (start, stop, seed, frames, room, dims, spec, budget, pilot_cfg,
     use_estimates, cond_limit) = args
    positions, boresights, ups = frames
    powers, failed = [], []
    for i in range(start, stop):
        users = drop_users(room, spec, _drop_rng(seed, i, 0), positions)
        g = ChannelMatrix(los_matrix_from_frames(positions, boresights, ups, users, dims))
        if use_estimates:
            g = estimate_channel(g, pilot_cfg, _drop_rng(seed, i, 1))
        try:
            powers.append(zf_required_power(g, budget, cond_limit))
        except SingularMatrixError:
            powers.append(math.nan)
            failed.append(i)
    return start, np.array(powers), failed


def _rate_chunk(args):
    (start, stop, seed, frames, room, dims, spec, pilot_base, rho_ul_grid,
     rho_dl_grid, n_realizations, batch, cond_limit) = args
    positions, boresights, ups = frames
    n_ul, n_dl = len(rho_ul_grid), len(rho_dl_grid)
    rates = np.full((stop - start, n_ul, n_dl, spec.k_count), math.nan)
    failed, discarded = [], 0
    for i in range(start, stop):
        users = drop_users(room, spec, _drop_rng(seed, i, 0), positions)
        g = los_matrix_from_frames(positions, boresights, ups, users, dims)
        g_mat = ChannelMatrix(g)
        try:
            for j, rho_ul in enumerate(rho_ul_grid):
                cfg_j = replace(pilot_base, rho_ul=float(rho_ul))
                ev, eabs2, _, disc = estimation_moments(
                    g_mat, cfg_j, n_realizations, _drop_rng(seed, i, 1 + j),
                    batch=batch, cond_limit=cond_limit,
                )
                discarded += disc
                for l, rho_dl in enumerate(rho_dl_grid):
                    budget = LinkBudget(
                        rho_dl=float(rho_dl), sigma2=pilot_base.sigma2, target_se=0.0
                    )
                    sinr = assemble_sinr(ev, eabs2, budget)
                    rates[i - start, j, l] = rate_per_user(sinr, cfg_j)
        except (SingularMatrixError, StatisticalValidityError):
            failed.append(i)
    return start, rates, failed, discarded


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(n / max(1, workers * 4)))
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _run_chunks(fn, payloads, workers: int):
    if workers <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))


def run_power_campaign(
    topology: Topology,
    dims: PatchDims,
    spec: DropSpec,
    budget: LinkBudget,
    pilot_cfg: PilotConfig | None = None,
    *,
    use_estimates: bool = True,
    workers: int = 1,
    ccdf_points: int = 200,
    cond_limit: float = COND_LIMIT,
) -> CampaignResult:
    """Required-power campaign: for every drop place users, build the (by
    default pilot-estimated) channel, and size the ZF transmit power for the
    spectral-efficiency target; aggregate the empirical CCDF."""
    if use_estimates and pilot_cfg is None:
        raise ConfigError("use_estimates requires a pilot configuration")
    frames = topology.frames()
    payloads = [
        (start, stop, spec.seed, frames, topology.room, dims, spec, budget,
         pilot_cfg, use_estimates, cond_limit)
        for start, stop in _chunks(spec.n_drops, workers)
    ]
    results = sorted(_run_chunks(_power_chunk, payloads, workers), key=lambda r: r[0])
    powers = np.concatenate([r[1] for r in results])
    failed = sorted(idx for r in results for idx in r[2])
    if len(failed) > MAX_DROP_FAILURE_FRACTION * spec.n_drops:
        raise CampaignError(
            f"{len(failed)} of {spec.n_drops} drops failed the precoder guard"
        )
    good = powers[~np.isnan(powers)]
    return CampaignResult(
        metric="required_power",
        kind=topology.kind.value,
        seed=spec.seed,
        n_drops=spec.n_drops,
        failed_drops=failed,
        per_drop_power=good,
        ccdf=assemble_ccdf(good, ccdf_points),
    )


def pooled_rate_quantile(rates: np.ndarray, percentile: float) -> float:
    """Rate exceeded with probability `percentile` in the pooled sample."""
    return float(np.quantile(rates, 1.0 - percentile))


def run_rate_campaign(
    topology: Topology,
    dims: PatchDims,
    spec: DropSpec,
    rho_ul_grid_w,
    rho_dl_grid_w,
    pilot_base: PilotConfig,
    *,
    percentile: float = 0.999,
    n_realizations: int = 200,
    statistic: str = "pooled",
    workers: int = 1,
    batch: int = 256,
    cond_limit: float = COND_LIMIT,
) -> CampaignResult:
    """Rate campaign over an (uplink, downlink) power grid.

    For each drop and uplink power the coupling moments are estimated once
    by Monte Carlo over pilot noise; SINR and per-user rate then follow for
    every downlink power in closed form. The reported figure per grid cell
    is the (1 - percentile) quantile of the pooled per-user rates, or of the
    per-drop minimum rate when statistic = "per-drop-min".
    """
    rho_ul_grid = np.asarray(rho_ul_grid_w, dtype=float)
    rho_dl_grid = np.asarray(rho_dl_grid_w, dtype=float)
    if rho_ul_grid.size == 0 or rho_dl_grid.size == 0:
        raise ConfigError("power grids must be non-empty")
    if not 0.0 < percentile < 1.0:
        raise ConfigError(f"percentile must lie in (0, 1), got {percentile}")
    if statistic not in ("pooled", "per-drop-min"):
        raise ConfigError(f"unknown rate statistic {statistic!r}")
    frames = topology.frames()
    payloads = [
        (start, stop, spec.seed, frames, topology.room, dims, spec, pilot_base,
         rho_ul_grid, rho_dl_grid, n_realizations, batch, cond_limit)
        for start, stop in _chunks(spec.n_drops, workers)
    ]
    results = sorted(_run_chunks(_rate_chunk, payloads, workers), key=lambda r: r[0])
    rates = np.concatenate([r[1] for r in results], axis=0)  # (drops, ul, dl, K)
    failed = sorted(idx for r in results for idx in r[2])
    discarded = sum(r[3] for r in results)
    if len(failed) > MAX_DROP_FAILURE_FRACTION * spec.n_drops:
        raise CampaignError(
            f"{len(failed)} of {spec.n_drops} drops failed the precoder guard"
        )
    ok = np.ones(spec.n_drops, dtype=bool)
    ok[failed] = False
    rates = rates[ok]
    n_ul, n_dl = rho_ul_grid.size, rho_dl_grid.size
    surface = np.empty((n_ul, n_dl))
    if statistic == "pooled":
        cell = rates.transpose(1, 2, 0, 3).reshape(n_ul, n_dl, -1)
    else:
        cell = rates.min(axis=3).transpose(1, 2, 0).reshape(n_ul, n_dl, -1)
    for j in range(n_ul):
        for l in range(n_dl):
            surface[j, l] = pooled_rate_quantile(cell[j, l], percentile)
    return CampaignResult(
        metric="rate_percentile",
        kind=topology.kind.value,
        seed=spec.seed,
        n_drops=spec.n_drops,
        failed_drops=failed,
        rho_ul_grid=rho_ul_grid,
        rho_dl_grid=rho_dl_grid,
        surface=surface,
        cell_rates=cell,
        percentile=percentile,
        statistic=statistic,
        discarded_draws=discarded,
    )
