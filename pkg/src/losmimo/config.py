"""Run configuration: JSON parsing, validation, and derived objects.

Defaults reproduce the reference indoor scenario: a 40 x 40 x 10 m room,
512 patch antennas at 2 GHz serving 200 users, 20 MHz bandwidth with a 9 dB
noise figure (-92 dBm noise power), and a 10.2-permittivity substrate of
1.588 mm height. All powers are carried in watts internally; dBm appears
only at the configuration and output boundaries.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

from .antenna import C_LIGHT, SubstrateSpec, design_patch
from .channel import PilotConfig
from .errors import ConfigError
from .geometry import CandelabrumSpec, Room, TopologyKind
from .montecarlo import DropSpec
from .precoding import LinkBudget
from .units import dbm_to_watt

SIGMA2_CONSISTENCY_TOL_DB = 0.5


@dataclass(frozen=True)
class RoomConfig:
    lx_m: float = 40.0
    ly_m: float = 40.0
    lz_m: float = 10.0


@dataclass(frozen=True)
class CandelabrumConfig:
    panels: int = 8
    grid: int = 8
    radius_m: float = 0.5
    tilt_deg: float = 45.0
    drop_m: float = 0.3


@dataclass(frozen=True)
class RunConfig:
    frequency_hz: float = 2.0e9
    room: RoomConfig = field(default_factory=RoomConfig)
    m_antennas: int = 512
    k_users: int = 200
    noise_figure_db: float = 9.0
    bandwidth_hz: float = 20.0e6
    noise_power_dbm: float = -92.0
    eps_r: float = 10.2
    patch_height_m: float = 1.588e-3
    tau_p: int | None = None  # defaults to k_users
    tau_c: int | None = None  # defaults to 10 * k_users
    rho_ul_dbm: float = 0.0
    rho_ul_is_total: bool = False
    target_se_bits: float = 4.0
    user_height_m: float = 1.5
    margin_m: float = 1.0
    exclusion_m: float = 0.5
    n_drops: int = 10_000
    rate_n_drops: int = 500
    n_realizations: int = 200
    percentile: float = 0.999
    rate_statistic: str = "pooled"
    rho_ul_grid_dbm: tuple = (-30.0, -20.0, -10.0, 0.0)
    rho_dl_grid_dbm: tuple = (-40.0, -30.0, -20.0, -10.0)
    ccdf_points: int = 200
    seed: int = 12345
    workers: int = 1
    topology: str = "quad-strip-4walls"
    use_estimated_channel: bool = True
    include_prelog_in_power_target: bool = False
    pattern_x_uses_patch_length: bool = False
    candelabrum: CandelabrumConfig = field(default_factory=CandelabrumConfig)

    # -- derived quantities -------------------------------------------------

    @property
    def wavelength_m(self) -> float:
        return C_LIGHT / self.frequency_hz

    @property
    def sigma2_w(self) -> float:
        return float(dbm_to_watt(self.noise_power_dbm))

    @property
    def rho_ul_w(self) -> float:
        return float(dbm_to_watt(self.rho_ul_dbm))

    @property
    def tau_p_effective(self) -> int:
        return self.tau_p if self.tau_p is not None else self.k_users

    @property
    def tau_c_effective(self) -> int:
        return self.tau_c if self.tau_c is not None else 10 * self.k_users

    @property
    def power_target_se(self) -> float:
        """SE target entering required-power sizing; optionally inflated so the
        post-prelog rate meets the target instead."""
        if not self.include_prelog_in_power_target:
            return self.target_se_bits
        prelog = 1.0 - self.tau_p_effective / self.tau_c_effective
        return self.target_se_bits / prelog

    def room_obj(self) -> Room:
        return Room(self.room.lx_m, self.room.ly_m, self.room.lz_m)

    def substrate(self) -> SubstrateSpec:
        return SubstrateSpec(eps_r=self.eps_r, f_hz=self.frequency_hz, h_m=self.patch_height_m)

    def patch_dims(self):
        return design_patch(
            self.substrate(), x_uses_patch_length=self.pattern_x_uses_patch_length
        )

    def candelabrum_spec(self) -> CandelabrumSpec:
        c = self.candelabrum
        return CandelabrumSpec(
            panels=c.panels, grid=c.grid, radius_m=c.radius_m,
            tilt_deg=c.tilt_deg, drop_m=c.drop_m,
        )

    def pilot_config(self) -> PilotConfig:
        return PilotConfig(
            tau_p=self.tau_p_effective,
            tau_c=self.tau_c_effective,
            rho_ul=self.rho_ul_w,
            sigma2=self.sigma2_w,
            rho_ul_is_total=self.rho_ul_is_total,
        )

    def link_budget(self, rho_dl_w: float = 0.0) -> LinkBudget:
        return LinkBudget(
            rho_dl=rho_dl_w, sigma2=self.sigma2_w, target_se=self.power_target_se
        )

    def drop_spec(self, n_drops: int | None = None) -> DropSpec:
        return DropSpec(
            k_count=self.k_users,
            n_drops=self.n_drops if n_drops is None else n_drops,
            seed=self.seed,
            user_height=self.user_height_m,
            margin=self.margin_m,
            exclusion=self.exclusion_m,
        )

    def topology_kinds(self) -> list[TopologyKind]:
        if self.topology == "all":
            return list(TopologyKind)
        return [TopologyKind(self.topology)]

    def to_dict(self) -> dict:
        return asdict(self)

    def sha256(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


_TOPOLOGY_CHOICES = {k.value for k in TopologyKind} | {"all"}

# key -> (predicate, description); nested blocks handled separately
_SCHEMA = {
    "frequency_hz": (lambda v: _is_num(v) and v > 0, "positive number (Hz)"),
    "m_antennas": (lambda v: _is_int(v) and v >= 1, "integer >= 1"),
    "k_users": (lambda v: _is_int(v) and v >= 1, "integer >= 1"),
    "noise_figure_db": (_is_num, "number (dB)"),
    "bandwidth_hz": (lambda v: _is_num(v) and v > 0, "positive number (Hz)"),
    "noise_power_dbm": (_is_num, "number (dBm)"),
    "eps_r": (lambda v: _is_num(v) and v > 1, "number > 1"),
    "patch_height_m": (lambda v: _is_num(v) and v > 0, "positive number (m)"),
    "tau_p": (lambda v: v is None or (_is_int(v) and v >= 1), "integer >= 1 or null"),
    "tau_c": (lambda v: v is None or (_is_int(v) and v >= 2), "integer >= 2 or null"),
    "rho_ul_dbm": (_is_num, "number (dBm)"),
    "rho_ul_is_total": (lambda v: isinstance(v, bool), "boolean"),
    "target_se_bits": (lambda v: _is_num(v) and v >= 0, "number >= 0"),
    "user_height_m": (lambda v: _is_num(v) and v > 0, "positive number (m)"),
    "margin_m": (lambda v: _is_num(v) and v >= 0, "number >= 0 (m)"),
    "exclusion_m": (lambda v: _is_num(v) and v >= 0, "number >= 0 (m)"),
    "n_drops": (lambda v: _is_int(v) and v >= 1, "integer >= 1"),
    "rate_n_drops": (lambda v: _is_int(v) and v >= 1, "integer >= 1"),
    "n_realizations": (lambda v: _is_int(v) and v >= 2, "integer >= 2"),
    "percentile": (lambda v: _is_num(v) and 0 < v < 1, "number in (0, 1)"),
    "rate_statistic": (
        lambda v: v in ("pooled", "per-drop-min"),
        "'pooled' or 'per-drop-min'",
    ),
    "rho_ul_grid_dbm": (
        lambda v: isinstance(v, (list, tuple)) and len(v) > 0 and all(_is_num(x) for x in v),
        "non-empty list of numbers (dBm)",
    ),
    "rho_dl_grid_dbm": (
        lambda v: isinstance(v, (list, tuple)) and len(v) > 0 and all(_is_num(x) for x in v),
        "non-empty list of numbers (dBm)",
    ),
    "ccdf_points": (lambda v: _is_int(v) and v >= 2, "integer >= 2"),
    "seed": (lambda v: _is_int(v) and 0 <= v < 2**64, "integer in [0, 2^64)"),
    "workers": (lambda v: _is_int(v) and v >= 1, "integer >= 1"),
    "topology": (
        lambda v: v in _TOPOLOGY_CHOICES,
        f"one of {sorted(_TOPOLOGY_CHOICES)}",
    ),
    "use_estimated_channel": (lambda v: isinstance(v, bool), "boolean"),
    "include_prelog_in_power_target": (lambda v: isinstance(v, bool), "boolean"),
    "pattern_x_uses_patch_length": (lambda v: isinstance(v, bool), "boolean"),
}

_ROOM_SCHEMA = {
    "lx_m": (lambda v: _is_num(v) and v > 0, "positive number (m)"),
    "ly_m": (lambda v: _is_num(v) and v > 0, "positive number (m)"),
    "lz_m": (lambda v: _is_num(v) and v > 0, "positive number (m)"),
}

_CANDELABRUM_SCHEMA = {
    "panels": (lambda v: _is_int(v) and v >= 1, "integer >= 1"),
    "grid": (lambda v: _is_int(v) and v >= 1, "integer >= 1"),
    "radius_m": (lambda v: _is_num(v) and v >= 0, "number >= 0 (m)"),
    "tilt_deg": (lambda v: _is_num(v) and 0 < v < 90, "number in (0, 90)"),
    "drop_m": (lambda v: _is_num(v) and v >= 0, "number >= 0 (m)"),
}


def _validate_block(doc: dict, schema: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"{path}: unknown configuration key")
        pred, expect = schema[key]
        _require(pred(value), path, f"expected {expect}, got {value!r}")
        out[key] = tuple(value) if isinstance(value, list) else value
    return out


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load a JSON config (defaults when absent) and apply flat overrides.

    Unknown keys and out-of-range values are rejected with the offending key
    path in the message. A noise-power value inconsistent with the configured
    bandwidth and noise figure triggers a warning, not an error.
    """
    doc = {}
    if path is not None:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    if overrides:
        doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}

    room_doc = doc.pop("room", None)
    cand_doc = doc.pop("candelabrum", None)
    fields = _validate_block(doc, _SCHEMA)
    if room_doc is not None:
        _require(isinstance(room_doc, dict), "room", "expected an object")
        fields["room"] = RoomConfig(**_validate_block(room_doc, _ROOM_SCHEMA, "room."))
    if cand_doc is not None:
        _require(isinstance(cand_doc, dict), "candelabrum", "expected an object")
        fields["candelabrum"] = CandelabrumConfig(
            **_validate_block(cand_doc, _CANDELABRUM_SCHEMA, "candelabrum.")
        )

    cfg = RunConfig(**fields)
    if cfg.tau_p is not None and cfg.tau_p < cfg.k_users:
        raise ConfigError(
            f"tau_p: must be >= k_users for orthogonal pilots "
            f"(tau_p = {cfg.tau_p}, k_users = {cfg.k_users})"
        )
    if cfg.tau_c is not None and cfg.tau_c <= cfg.tau_p_effective:
        raise ConfigError(
            f"tau_c: must exceed tau_p (tau_c = {cfg.tau_c}, "
            f"tau_p = {cfg.tau_p_effective})"
        )
    derived_dbm = (
        -174.0 + 10.0 * math.log10(cfg.bandwidth_hz) + cfg.noise_figure_db
    )
    if abs(derived_dbm - cfg.noise_power_dbm) > SIGMA2_CONSISTENCY_TOL_DB:
        warnings.warn(
            f"noise_power_dbm = {cfg.noise_power_dbm} dBm differs from "
            f"-174 + 10 log10(B) + F = {derived_dbm:.2f} dBm by more than "
            f"{SIGMA2_CONSISTENCY_TOL_DB} dB",
            UserWarning,
            stacklevel=2,
        )
    return cfg
