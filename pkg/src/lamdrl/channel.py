"""Link budget: free-space loss, gaseous and rain attenuation, fixed margin.

The atmospheric terms use a small parametric model instead of the full
ITU-R recommendation tables: rain is uniform over a per-scenario interval and
gaseous absorption is a zenith value scaled by the cosecant of elevation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "WeatherKind",
    "WeatherScenario",
    "ChannelConfig",
    "LinkState",
    "LinkBudget",
    "free_space_loss",
    "gas_attenuation",
    "draw_rain",
    "total_loss",
    "link_budget",
]

_FSPL_CONSTANT = 92.45  # dB, for km and GHz
_GAS_ELEVATION_FLOOR = 10.0  # deg


class WeatherKind(Enum):
    NOMINAL = "nominal"
    EXTREME = "extreme"


_RAIN_ENVELOPES = {WeatherKind.NOMINAL: (0.0, 4.0), WeatherKind.EXTREME: (6.0, 25.0)}


@dataclass(frozen=True)
class WeatherScenario:
    kind: WeatherKind
    rain_atten_range: tuple[float, float]
    gas_atten: float  # zenith, dB

    def __post_init__(self):
        kind = WeatherKind(self.kind)
        object.__setattr__(self, "kind", kind)
        lo, hi = (float(v) for v in self.rain_atten_range)
        object.__setattr__(self, "rain_atten_range", (lo, hi))
        env_lo, env_hi = _RAIN_ENVELOPES[kind]
        if not (env_lo <= lo <= hi <= env_hi):
            raise ValueError(
                f"{kind.value} rain range {self.rain_atten_range} must be a non-empty "
                f"interval inside [{env_lo}, {env_hi}] dB")
        if not self.gas_atten >= 0:
            raise ValueError(f"gas attenuation must be non-negative, got {self.gas_atten}")

    @classmethod
    def nominal(cls) -> "WeatherScenario":
        return cls(WeatherKind.NOMINAL, (0.0, 3.0), 0.5)

    @classmethod
    def extreme(cls) -> "WeatherScenario":
        return cls(WeatherKind.EXTREME, (8.0, 20.0), 2.0)


@dataclass(frozen=True)
class ChannelConfig:
    frequency_ghz: float = 12.0
    margin_db: float = 3.0
    tx_gain_dbi: float = 30.0
    rx_gain_dbi: float = 25.0
    min_elevation_deg: float = 10.0
    nominal: WeatherScenario = field(default_factory=WeatherScenario.nominal)
    extreme: WeatherScenario = field(default_factory=WeatherScenario.extreme)

    def __post_init__(self):
        if not self.frequency_ghz > 0:
            raise ValueError("frequency_ghz must be positive")
        if self.margin_db < 0:
            raise ValueError("margin_db must be non-negative")
        if self.nominal.kind is not WeatherKind.NOMINAL or self.extreme.kind is not WeatherKind.EXTREME:
            raise ValueError("weather scenarios are mislabelled")

    def weather(self, kind) -> WeatherScenario:
        return self.nominal if WeatherKind(kind) is WeatherKind.NOMINAL else self.extreme


@dataclass(frozen=True)
class LinkState:
    sat_id: int
    user_id: int
    distance: float
    fspl: float
    gas: float
    rain: float
    margin: float
    total_loss: float
    tx_gain: float
    rx_gain: float


def free_space_loss(distance_km, frequency_ghz):
    """Free-space path loss in dB for distances in km and frequencies in GHz."""
    d = np.asarray(distance_km, dtype=float)
    f = np.asarray(frequency_ghz, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise ValueError("free-space loss needs positive distance and frequency")
    out = _FSPL_CONSTANT + 20.0 * np.log10(d) + 20.0 * np.log10(f)
    return float(out) if out.ndim == 0 else out


def gas_attenuation(gas_zenith: float, elevation_deg):
    el = np.maximum(np.asarray(elevation_deg, dtype=float), _GAS_ELEVATION_FLOOR)
    return gas_zenith / np.sin(np.radians(el))


def draw_rain(scenario: WeatherScenario, rng: np.random.Generator, shape) -> np.ndarray:
    # One uniform variate per link, mapped onto the scenario interval, so two
    # scenarios driven by the same stream are ordered link by link.
    lo, hi = scenario.rain_atten_range
    return lo + (hi - lo) * rng.random(shape)


def total_loss(distance, scenario: WeatherScenario, rng: np.random.Generator, margin: float = 3.0,
               elevation=90.0, frequency_ghz: float = 12.0) -> dict[str, np.ndarray]:
    """Loss components for one or more links; ``total`` is their exact sum."""
    distance = np.asarray(distance, dtype=float)
    fspl = np.asarray(free_space_loss(distance, frequency_ghz))
    gas = np.broadcast_to(gas_attenuation(scenario.gas_atten, elevation), fspl.shape)
    rain = draw_rain(scenario, rng, fspl.shape)
    margin_arr = np.full(fspl.shape, float(margin))
    return {
        "fspl": fspl,
        "gas": gas,
        "rain": rain,
        "margin": margin_arr,
        "total": fspl + gas + rain + margin_arr,
    }


@dataclass(frozen=True)
class LinkBudget:
    """All links at one geometry update, arrays of shape ``(N_s, N_u)``."""

    distance: np.ndarray
    elevation: np.ndarray
    fspl: np.ndarray
    gas: np.ndarray
    rain: np.ndarray
    margin: np.ndarray
    total_loss: np.ndarray
    visible: np.ndarray
    tx_gain: float
    rx_gain: float

    @property
    def net_gain_db(self) -> np.ndarray:
        return self.tx_gain + self.rx_gain - self.total_loss

    def link(self, s: int, u: int) -> LinkState:
        return LinkState(s, u, float(self.distance[s, u]), float(self.fspl[s, u]), float(self.gas[s, u]),
                         float(self.rain[s, u]), float(self.margin[s, u]), float(self.total_loss[s, u]),
                         self.tx_gain, self.rx_gain)


def link_budget(distance: np.ndarray, elevation: np.ndarray, scenario: WeatherScenario,
                rng: np.random.Generator, config: ChannelConfig) -> LinkBudget:
    parts = total_loss(distance, scenario, rng, config.margin_db, elevation, config.frequency_ghz)
    return LinkBudget(
        distance=np.asarray(distance, dtype=float),
        elevation=np.asarray(elevation, dtype=float),
        fspl=parts["fspl"],
        gas=parts["gas"],
        rain=parts["rain"],
        margin=parts["margin"],
        total_loss=parts["total"],
        visible=np.asarray(elevation) >= config.min_elevation_deg,
        tx_gain=config.tx_gain_dbi,
        rx_gain=config.rx_gain_dbi,
    )
