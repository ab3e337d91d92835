"""Circular-orbit constellation, user placement and link geometry.

All positions are kilometres in an Earth-centred frame.  Satellites are
propagated in the inertial frame and rotated into the Earth-fixed frame, so
user terminals keep constant coordinates for a whole episode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "EARTH_ROTATION_RATE",
    "ConfigurationError",
    "AssociationError",
    "ConstellationConfig",
    "SatelliteState",
    "Region",
    "UserTerminal",
    "propagate",
    "propagate_inertial",
    "satellite_positions",
    "zone_counts",
    "sample_users",
    "user_positions",
    "geodetic_to_ecef",
    "slant_distance",
    "slant_distances",
    "elevation_angles",
    "associate",
]

EARTH_ROTATION_RATE = 7.2921159e-5  # rad/s


class ConfigurationError(ValueError):
    """Raised for physically invalid configuration values."""


class AssociationError(ValueError):
    """Raised when users cannot be associated (no satellites at all)."""


@dataclass(frozen=True)
class ConstellationConfig:
    num_satellites: int = 10
    altitude: float = 550.0  # km
    inclination: float = 53.0  # deg
    earth_radius: float = 6371.0  # km
    mu_earth: float = 398600.4418  # km^3/s^2
    # Argument of latitude of satellite 0 at t = 0, plus a per-satellite
    # increment.  Both are free parameters; the environment reseeds phase0.
    phase0: float = 0.0  # deg
    phase_step: float = 0.0  # deg

    def __post_init__(self):
        if int(self.num_satellites) != self.num_satellites or self.num_satellites < 1:
            raise ConfigurationError(f"num_satellites must be a positive integer, got {self.num_satellites!r}")
        if not self.altitude > 0:
            raise ConfigurationError(f"altitude must be positive, got {self.altitude!r}")
        if not 0.0 <= self.inclination <= 180.0:
            raise ConfigurationError(f"inclination must lie in [0, 180] deg, got {self.inclination!r}")
        if not self.earth_radius > 0 or not self.mu_earth > 0:
            raise ConfigurationError("earth_radius and mu_earth must be positive")

    @property
    def raan_spacing(self) -> float:
        """RAAN increment between consecutive satellites, degrees."""
        return 360.0 / self.num_satellites

    @property
    def radius(self) -> float:
        return self.earth_radius + self.altitude

    @property
    def mean_motion(self) -> float:
        """rad/s"""
        return float(np.sqrt(self.mu_earth / self.radius**3))

    @property
    def period(self) -> float:
        """Orbital period in seconds."""
        return 2.0 * np.pi / self.mean_motion

    def raan(self) -> np.ndarray:
        return np.arange(self.num_satellites) * self.raan_spacing


@dataclass(frozen=True)
class SatelliteState:
    id: int
    position: np.ndarray
    epoch: float


class Region(Enum):
    EQUATORIAL = "Equatorial"
    NORTH_HIGH = "NorthHigh"
    SOUTH_HIGH = "SouthHigh"

    @classmethod
    def from_latitude(cls, lat: float) -> "Region":
        if -30.0 <= lat <= 30.0:
            return cls.EQUATORIAL
        if 30.0 < lat <= 70.0:
            return cls.NORTH_HIGH
        if -70.0 <= lat < -30.0:
            return cls.SOUTH_HIGH
        raise ValueError(f"latitude {lat} lies outside every user zone")

    @property
    def index(self) -> int:
        return _REGION_ORDER.index(self)

    @property
    def is_high_latitude(self) -> bool:
        return self is not Region.EQUATORIAL


_REGION_ORDER = (Region.EQUATORIAL, Region.NORTH_HIGH, Region.SOUTH_HIGH)


@dataclass(frozen=True)
class UserTerminal:
    id: int
    latitude: float
    longitude: float
    region: Region
    position: np.ndarray = field(repr=False)


def _inertial_positions(config: ConstellationConfig, t: float) -> np.ndarray:
    inc = np.radians(config.inclination)
    raan = np.radians(config.raan())
    k = np.arange(config.num_satellites)
    u = np.radians(config.phase0 + k * config.phase_step) + config.mean_motion * t

    cos_u, sin_u = np.cos(u), np.sin(u)
    cos_o, sin_o = np.cos(raan), np.sin(raan)
    pos = np.empty((config.num_satellites, 3))
    pos[:, 0] = cos_o * cos_u - sin_o * sin_u * np.cos(inc)
    pos[:, 1] = sin_o * cos_u + cos_o * sin_u * np.cos(inc)
    pos[:, 2] = sin_u * np.sin(inc)
    return config.radius * pos


def _check_time(t: float) -> None:
    if t < 0:
        raise ValueError(f"propagation time must be non-negative, got {t}")


def satellite_positions(config: ConstellationConfig, t: float) -> np.ndarray:
    """Earth-fixed satellite positions at time ``t`` as an ``(N_s, 3)`` array."""
    _check_time(t)
    eci = _inertial_positions(config, t)
    theta = EARTH_ROTATION_RATE * t
    c, s = np.cos(theta), np.sin(theta)
    ecef = np.empty_like(eci)
    ecef[:, 0] = c * eci[:, 0] + s * eci[:, 1]
    ecef[:, 1] = -s * eci[:, 0] + c * eci[:, 1]
    ecef[:, 2] = eci[:, 2]
    return ecef


def propagate_inertial(config: ConstellationConfig, t: float) -> list[SatelliteState]:
    _check_time(t)
    return [SatelliteState(k, p, float(t)) for k, p in enumerate(_inertial_positions(config, t))]


def propagate(config: ConstellationConfig, t: float) -> list[SatelliteState]:
    """Propagate every satellite of the shell to time ``t`` (Earth-fixed frame)."""
    return [SatelliteState(k, p, float(t)) for k, p in enumerate(satellite_positions(config, t))]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def zone_counts(num_users: int, zone_fractions: Sequence[float] = (0.70, 0.15, 0.15)) -> tuple[int, int, int]:
    """Users per (equatorial, north, south) zone.

    High-latitude zones are rounded cumulatively in the fixed order north then
    south, and the equatorial zone takes whatever is left, so 50 users split as
    (35, 8, 7).
    """
    if num_users < 1:
        raise ValueError("num_users must be at least 1")
    f_eq, f_n, f_s = (float(f) for f in zone_fractions)
    if min(f_eq, f_n, f_s) < 0 or abs(f_eq + f_n + f_s - 1.0) > 1e-9:
        raise ValueError(f"zone fractions must be non-negative and sum to 1, got {zone_fractions}")
    north = _round_half_up(num_users * f_n)
    south = _round_half_up(num_users * (f_n + f_s)) - north
    return num_users - north - south, north, south


def geodetic_to_ecef(lat_deg, lon_deg, radius: float = 6371.0) -> np.ndarray:
    lat = np.radians(np.asarray(lat_deg, dtype=float))
    lon = np.radians(np.asarray(lon_deg, dtype=float))
    return radius * np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1)


def sample_users(num_users: int, zone_fractions: Sequence[float], rng: np.random.Generator,
                 earth_radius: float = 6371.0) -> list[UserTerminal]:
    counts = zone_counts(num_users, zone_fractions)
    lats = np.concatenate([
        rng.uniform(-30.0, 30.0, counts[0]),
        70.0 - rng.uniform(0.0, 40.0, counts[1]),   # (30, 70]
        -70.0 + rng.uniform(0.0, 40.0, counts[2]),  # [-70, -30)
    ])
    lons = rng.uniform(-180.0, 180.0, num_users)
    pos = geodetic_to_ecef(lats, lons, earth_radius)
    return [
        UserTerminal(i, float(lats[i]), float(lons[i]), Region.from_latitude(lats[i]), pos[i])
        for i in range(num_users)
    ]


def user_positions(users: Sequence[UserTerminal]) -> np.ndarray:
    return np.array([u.position for u in users], dtype=float).reshape(-1, 3)


def slant_distance(sat: SatelliteState, user: UserTerminal) -> float:
    return float(np.linalg.norm(np.asarray(sat.position) - np.asarray(user.position)))


def slant_distances(sat_pos: np.ndarray, user_pos: np.ndarray) -> np.ndarray:
    """Pairwise distances, shape ``(N_s, N_u)``."""
    diff = sat_pos[:, None, :] - user_pos[None, :, :]
    return np.sqrt(np.einsum("sui,sui->su", diff, diff))


def elevation_angles(sat_pos: np.ndarray, user_pos: np.ndarray) -> np.ndarray:
    """Elevation of every satellite above every user's local horizon, degrees."""
    diff = sat_pos[:, None, :] - user_pos[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    up = user_pos / np.linalg.norm(user_pos, axis=-1, keepdims=True)
    sin_el = np.einsum("sui,ui->su", diff, up) / dist
    return np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))


def associate(sats, users, losses: np.ndarray, visible: np.ndarray | None = None) -> np.ndarray:
    """Map each user to the satellite with the smallest total loss.

    ``losses`` has shape ``(N_s, N_u)``.  Satellites outside the visibility
    mask are ineligible; users without any eligible satellite map to -1.
    Ties resolve to the lowest satellite id.
    """
    if len(sats) == 0:
        raise AssociationError("cannot associate users with an empty satellite list")
    losses = np.asarray(losses, dtype=float)
    if losses.shape != (len(sats), len(users)):
        raise AssociationError(f"loss matrix shape {losses.shape} does not match ({len(sats)}, {len(users)})")
    ids = np.array([getattr(s, "id", k) for k, s in enumerate(sats)])
    masked = losses if visible is None else np.where(visible, losses, np.inf)
    # Order rows by id so argmin's first-hit rule is the lowest-id tie break.
    order = np.argsort(ids, kind="stable")
    best = np.argmin(masked[order], axis=0)
    serving = ids[order][best]
    if visible is not None:
        serving = np.where(np.isfinite(masked.min(axis=0)), serving, -1)
    return serving.astype(int)
