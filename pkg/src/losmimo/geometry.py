"""Room geometry, antenna frames, and deployment topology builders.

Coordinates are cartesian (x, y, z) in meters with the origin at one floor
corner of the room. Each antenna element carries its own right-handed frame:
local +x is the boresight (patch normal), local +z the patch "up" axis, and
local +y = up x boresight completes the frame.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, GeometryError

_Z_AXIS = np.array([0.0, 0.0, 1.0])


class Spherical(NamedTuple):
    """Range r (m), elevation theta in [0, pi] from +z, azimuth phi in [-pi, pi)."""

    r: float
    theta: float
    phi: float


def cart_to_sph(p) -> Spherical:
    """Convert a cartesian point to spherical coordinates.

    r = sqrt(x^2 + y^2 + z^2), theta with cos(theta) = z / r, phi =
    atan2(y, x). theta comes from atan2(hypot(x, y), z), which is the same
    angle but keeps full precision near the poles where arccos(z/r) does
    not. The origin maps to (0, 0, 0); points on the z axis get phi = 0.
    """
    x, y, z = (float(v) for v in p)
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise GeometryError(f"non-finite point ({x}, {y}, {z})")
    rho = math.hypot(x, y)
    r = math.hypot(rho, z)
    if r == 0.0:
        return Spherical(0.0, 0.0, 0.0)
    theta = math.atan2(rho, z)
    if rho == 0.0:
        return Spherical(r, theta, 0.0)
    phi = math.atan2(y, x)
    if phi == math.pi:  # atan2 yields (-pi, pi]; fold the closed end
        phi = -math.pi
    return Spherical(r, theta, phi)


def sph_to_cart(s: Spherical) -> np.ndarray:
    """Inverse of cart_to_sph."""
    r, theta, phi = s
    st = math.sin(theta)
    return np.array(
        [r * st * math.cos(phi), r * st * math.sin(phi), r * math.cos(theta)]
    )


@dataclass(frozen=True)
class AntennaPose:
    """Position plus local orientation frame of one patch element."""

    position: np.ndarray
    boresight: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        b = np.asarray(self.boresight, dtype=float)
        u = np.asarray(self.up, dtype=float)
        for name, v in (("position", pos), ("boresight", b), ("up", u)):
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise GeometryError(f"{name} must be a finite 3-vector")
        if abs(np.linalg.norm(b) - 1.0) > 1e-9 or abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise GeometryError("boresight and up must be unit vectors")
        if abs(float(b @ u)) > 1e-9:
            raise GeometryError("boresight and up must be orthogonal")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "boresight", b)
        object.__setattr__(self, "up", u)

    @property
    def local_y(self) -> np.ndarray:
        return np.cross(self.up, self.boresight)


def to_local_spherical(pose: AntennaPose, target) -> Spherical:
    """Spherical coordinates of `target` in the pose's local frame.

    The range r is frame-invariant and equals the euclidean distance.
    Raises GeometryError if target coincides with the antenna position.
    """
    d = np.asarray(target, dtype=float) - pose.position
    if float(d @ d) == 0.0:
        raise GeometryError("target coincides with antenna position")
    return cart_to_sph(
        (float(d @ pose.boresight), float(d @ pose.local_y), float(d @ pose.up))
    )


@dataclass(frozen=True)
class Room:
    """Rectangular room extents (m), origin at a floor corner."""

    lx: float
    ly: float
    lz: float

    def __post_init__(self):
        for name, v in (("lx", self.lx), ("ly", self.ly), ("lz", self.lz)):
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"room.{name} must be positive, got {v}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.lx / 2, self.ly / 2, self.lz / 2])

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Boolean mask: points inside or on the boundary."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        hi = np.array([self.lx, self.ly, self.lz])
        return np.all((p >= -tol) & (p <= hi + tol), axis=1)


class TopologyKind(str, Enum):
    CANDELABRUM = "candelabrum"
    SINGLE_STRIP_1WALL = "single-strip-1wall"
    SINGLE_STRIP_4WALLS = "single-strip-4walls"
    DOUBLE_STRIP_1WALL = "double-strip-1wall"
    DOUBLE_STRIP_4WALLS = "double-strip-4walls"
    QUAD_STRIP_1WALL = "quad-strip-1wall"
    QUAD_STRIP_4WALLS = "quad-strip-4walls"


ALL_KINDS = tuple(TopologyKind)

# kind -> (number of walls used, strips per wall, element spacing in wavelengths)
_STRIP_LAYOUT = {
    TopologyKind.SINGLE_STRIP_1WALL: (1, 1, 0.5),
    TopologyKind.SINGLE_STRIP_4WALLS: (4, 1, 2.0),
    TopologyKind.DOUBLE_STRIP_1WALL: (1, 2, 1.0),
    TopologyKind.DOUBLE_STRIP_4WALLS: (4, 2, 4.0),
    TopologyKind.QUAD_STRIP_1WALL: (1, 4, 2.0),
    TopologyKind.QUAD_STRIP_4WALLS: (4, 4, 8.0),
}

STRIP_VERTICAL_SPACING = 2.0  # m, between stacked strips


@dataclass(frozen=True)
class CandelabrumSpec:
    """Co-located ceiling array: `panels` planar sub-arrays of grid x grid
    elements at half-wavelength pitch, panel centers on a circle of
    `radius_m` around the ceiling center, hung `drop_m` below the ceiling,
    boresights spread uniformly in azimuth and tilted `tilt_deg` below
    horizontal so the array covers every corner of the room.
    """

    panels: int = 8
    grid: int = 8
    radius_m: float = 0.5
    tilt_deg: float = 45.0
    drop_m: float = 0.3

    def __post_init__(self):
        if self.panels < 1 or self.grid < 1:
            raise ConfigError("candelabrum panel/grid counts must be >= 1")
        if not 0.0 < self.tilt_deg < 90.0:
            raise ConfigError("candelabrum tilt must lie strictly between 0 and 90 deg")
        if self.radius_m < 0 or self.drop_m < 0:
            raise ConfigError("candelabrum radius and drop must be non-negative")


@dataclass
class Topology:
    """A named deployment: M antenna poses inside a room."""

    kind: TopologyKind
    poses: list[AntennaPose]
    room: Room
    _frames: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def m_count(self) -> int:
        return len(self.poses)

    def frames(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stacked (positions, boresights, ups), each (M, 3). Cached."""
        if self._frames is None:
            p = np.array([pose.position for pose in self.poses])
            b = np.array([pose.boresight for pose in self.poses])
            u = np.array([pose.up for pose in self.poses])
            self._frames = (p, b, u)
        return self._frames

    def positions(self) -> np.ndarray:
        return self.frames()[0]


# Wall traversal order for multi-wall layouts: y=0, x=lx, y=ly, x=0.
def _walls(room: Room):
    return (
        ("y=0", np.array([0.0, 1.0, 0.0]), room.lx, lambda t, z: (t, 0.0, z)),
        ("x=lx", np.array([-1.0, 0.0, 0.0]), room.ly, lambda t, z: (room.lx, t, z)),
        ("y=ly", np.array([0.0, -1.0, 0.0]), room.lx, lambda t, z: (t, room.ly, z)),
        ("x=0", np.array([1.0, 0.0, 0.0]), room.ly, lambda t, z: (0.0, t, z)),
    )


def _strip_heights(n_strips: int, room: Room) -> list[float]:
    # stacked strips 2 m apart, centered about mid-height
    mid = room.lz / 2
    heights = [
        mid + STRIP_VERTICAL_SPACING * (i - (n_strips - 1) / 2) for i in range(n_strips)
    ]
    for z in heights:
        if not 0.0 < z < room.lz:
            raise ConfigError(
                f"strip height {z} m falls outside the room (lz = {room.lz} m)"
            )
    return heights


def _build_strips(kind: TopologyKind, room: Room, m: int, lam: float) -> list[AntennaPose]:
    n_walls, n_strips, mult = _STRIP_LAYOUT[kind]
    spacing = mult * lam
    if m % (n_walls * n_strips) != 0:
        raise ConfigError(
            f"{kind.value}: M = {m} does not divide evenly over "
            f"{n_walls} wall(s) x {n_strips} strip(s)"
        )
    n_el = m // (n_walls * n_strips)
    heights = _strip_heights(n_strips, room)
    up = np.array([0.0, 0.0, 1.0])

    poses = []
    for wall_name, boresight, width, place in _walls(room)[:n_walls]:
        span = (n_el - 1) * spacing
        if span > width:
            raise ConfigError(
                f"{kind.value}: strip span {span:.3f} m exceeds wall {wall_name} "
                f"width {width:.3f} m ({n_el} elements at {spacing:.4f} m spacing)"
            )
        for z in heights:
            for j in range(n_el):
                t = width / 2 + (j - (n_el - 1) / 2) * spacing
                poses.append(AntennaPose(np.array(place(t, z)), boresight, up))
    return poses


def _build_candelabrum(
    room: Room, m: int, lam: float, spec: CandelabrumSpec
) -> list[AntennaPose]:
    if m != spec.panels * spec.grid**2:
        raise ConfigError(
            f"candelabrum: M = {m} != panels * grid^2 = "
            f"{spec.panels * spec.grid ** 2}; adjust the candelabrum block"
        )
    tilt = math.radians(spec.tilt_deg)
    pitch = lam / 2
    cx, cy = room.lx / 2, room.ly / 2
    z_c = room.lz - spec.drop_m
    poses = []
    for p in range(spec.panels):
        az = 2 * math.pi * p / spec.panels
        bore = np.array(
            [math.cos(tilt) * math.cos(az), math.cos(tilt) * math.sin(az), -math.sin(tilt)]
        )
        up = _Z_AXIS - (_Z_AXIS @ bore) * bore
        up /= np.linalg.norm(up)
        yax = np.cross(up, bore)
        center = np.array([cx + spec.radius_m * math.cos(az), cy + spec.radius_m * math.sin(az), z_c])
        half = (spec.grid - 1) / 2
        for i in range(spec.grid):
            for j in range(spec.grid):
                pos = center + (i - half) * pitch * up + (j - half) * pitch * yax
                poses.append(AntennaPose(pos, bore, up))
    positions = np.array([q.position for q in poses])
    if not np.all(room.contains(positions)):
        raise ConfigError(
            "candelabrum panels extend outside the room; reduce radius/grid or increase drop"
        )
    return poses


def build_topology(
    kind: TopologyKind | str,
    room: Room,
    m: int,
    lam: float,
    candelabrum: CandelabrumSpec | None = None,
) -> Topology:
    """Place M antenna elements per the named deployment.

    Strip layouts put horizontal rows of equally spaced elements on the
    wall(s), centered on each wall's width, boresight along the inward wall
    normal and up along +z. Multi-strip variants stack strips 2 m apart,
    centered about mid-height. Element indexing is wall-major, then
    strip-major, then left to right along the strip.
    """
    kind = TopologyKind(kind)
    if m < 1:
        raise ConfigError(f"M must be >= 1, got {m}")
    if not (math.isfinite(lam) and lam > 0):
        raise ConfigError(f"wavelength must be positive, got {lam}")
    if kind is TopologyKind.CANDELABRUM:
        poses = _build_candelabrum(room, m, lam, candelabrum or CandelabrumSpec())
    else:
        poses = _build_strips(kind, room, m, lam)
    return Topology(kind=kind, poses=poses, room=room)


def write_topology_csv(topology: Topology, path) -> None:
    """Dump poses as CSV: index, position, boresight, up (meters, 6 decimals)."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "x", "y", "z", "bx", "by", "bz", "ux", "uy", "uz"])
        for i, pose in enumerate(topology.poses):
            row = [i] + [
                f"{v:.6f}" for v in (*pose.position, *pose.boresight, *pose.up)
            ]
            writer.writerow(row)
