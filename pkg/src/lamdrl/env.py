"""Episodic downlink allocation environment.

One episode is a fixed user layout observed over ``horizon`` decision steps
spaced ``step_seconds`` apart.  An action is the ``2 N_u`` vector of power
fractions followed by bandwidth fractions; it is applied to the geometry that
was observed, after which the constellation advances to the next update.

Every random draw comes from the episode key ``(seed, split, index)``:
``[*key, 0]`` seeds the user layout, ``[*key, 1]`` the constellation phase and
``[*key, 2, k]`` the rain of geometry update ``k``.  Nothing depends on the
actions taken, so different allocators replay identical realisations, and the
two weather scenarios share geometry and rain quantiles.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .allocators import ChannelSnapshot
from .channel import LinkBudget, WeatherKind, link_budget
from .config import RewardConfig, ScenarioConfig
from .geometry import (associate, elevation_angles, sample_users, satellite_positions, slant_distances,
                       user_positions, zone_counts)
from .kpi import Allocation, KpiFrame, evaluate_frame
from .strategy import (PromptAggregates, StrategyContext, StrategyLabel, build_prompt, intent_for_episode,
                       query_provider)

__all__ = [
    "RewardConfig",
    "RewardBreakdown",
    "StateVector",
    "EpisodeStateError",
    "FEATURE_NAMES",
    "FEATURE_CATEGORIES",
    "FEATURE_RANGES",
    "NUM_FEATURES",
    "SPLITS",
    "base_reward",
    "shaping",
    "episode_key",
    "LeoDownlinkEnv",
]

FEATURE_NAMES = ("latitude", "longitude", "distance", "path_loss", "region_eq", "region_north",
                 "region_south", "prev_rate", "prev_sinr")
NUM_FEATURES = len(FEATURE_NAMES)
# Column groups the attention analysis reports on.
FEATURE_CATEGORIES = {
    "latitude": (0,),
    "longitude": (1,),
    "distance": (2,),
    "path_loss": (3,),
    "region": (4, 5, 6),
    "prev_rate": (7,),
    "prev_sinr": (8,),
}
# Closed bounds every standardized feature stays within.
FEATURE_RANGES = np.array([
    (-1.0, 1.0), (-1.0, 1.0), (0.0, 5.0), (0.0, 5.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 2.0),
    (0.0, 2.0),
])

_DISTANCE_SCALE = 3000.0  # km
_LOSS_OFFSET, _LOSS_SCALE = 160.0, 20.0  # dB
_RATE_SCALE_BITS_PER_HZ = 10.0
_SINR_DECADES = 3.0

SPLITS = {"train": 0, "eval": 1}


class EpisodeStateError(RuntimeError):
    """step() called before reset() or after the episode finished."""


@dataclass(frozen=True)
class RewardBreakdown:
    base: float
    shaping: float
    total: float


@dataclass(frozen=True)
class StateVector:
    features: np.ndarray  # (N_u, d_f)
    globals: np.ndarray  # (3,)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.features.ravel(), self.globals])

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape


def base_reward(frame: KpiFrame, cfg: RewardConfig, r_ref: Optional[float] = None) -> float:
    r_ref = cfg.r_ref if r_ref is None else r_ref
    if r_ref is None:
        raise ValueError("r_ref is needed to normalise the sum rate")
    return cfg.lambda_r * frame.sum_rate / r_ref + cfg.lambda_j * frame.jain - cfg.lambda_o * frame.outage


def shaping(frame: KpiFrame, sigma: Optional[StrategyLabel], cfg: RewardConfig) -> float:
    """Strategy-dependent shaping term; zero for D and for unguided agents (``None``)."""
    if sigma is None:
        return 0.0
    if cfg.eta_b is None:
        raise ValueError("eta_b is unresolved; use ScenarioConfig.resolved_reward")
    sigma = StrategyLabel(sigma)
    if sigma is StrategyLabel.A:
        return cfg.eta_a * frame.r_eq / (frame.sum_rate + cfg.epsilon)
    if sigma is StrategyLabel.B:
        return -cfg.eta_b * frame.rate_variance / (frame.rate_mean**2 + cfg.epsilon)
    if sigma is StrategyLabel.C:
        return cfg.eta_c * frame.r_hl / (frame.sum_rate + cfg.epsilon)
    return 0.0


def episode_key(seed: int, split: str, index: int) -> tuple[int, int, int]:
    return (int(seed), SPLITS[split], int(index))


class LeoDownlinkEnv:
    """The allocation MDP.

    Parameters
    ----------
    config : ScenarioConfig
    weather : str or WeatherKind
        ``"nominal"`` or ``"extreme"``.
    seed : int
        Campaign seed at the root of every episode key.
    provider : optional
        Strategy provider queried once per reset.  ``None`` runs unguided:
        no query, no label and no reward shaping.
    split : str
        ``"train"`` or ``"eval"``; separates the two families of episode keys.
    intent : optional
        Fixed operator intent; rotates round-robin when unset.
    """

    def __init__(self, config: ScenarioConfig, weather="nominal", seed: int = 0, provider=None,
                 split: str = "train", intent=None):
        self.config = config
        self.weather = WeatherKind(weather)
        self.scenario = config.channel.weather(self.weather)
        self.seed = int(seed)
        self.provider = provider
        self.split = split
        self.intent = intent
        self.reward_config = config.resolved_reward
        self.r_ref = self.reward_config.r_ref
        self.num_users = config.num_users
        self._next_index = 0
        self._last_kpis = None
        self._step = None
        self.strategy: Optional[StrategyContext] = None

    # -- episode lifecycle -------------------------------------------------

    def reset(self, index: Optional[int] = None) -> tuple[StateVector, Optional[StrategyContext]]:
        if index is None:
            index = self._next_index
        self._next_index = index + 1
        self.index = index
        self.key = episode_key(self.seed, self.split, index)

        cfg = self.config
        self.users = sample_users(cfg.users.num_users, cfg.users.zone_fractions,
                                  np.random.default_rng([*self.key, 0]), cfg.constellation.earth_radius)
        self.regions = np.array([u.region.index for u in self.users])
        self._user_pos = user_positions(self.users)
        constellation = cfg.constellation
        if cfg.episode.random_phase:
            phase = np.random.default_rng([*self.key, 1]).uniform(0.0, 360.0)
            constellation = dataclasses.replace(constellation, phase0=float(phase))
        self.constellation = constellation

        self._step = 0
        self._frames: list[KpiFrame] = []
        self._prev_rate = np.zeros(self.num_users)
        self._prev_sinr = np.zeros(self.num_users)
        self._prev_globals = np.zeros(3)
        self._update_geometry()

        self.strategy = None
        if self.provider is not None:
            intent = intent_for_episode(index, self.intent)
            self.strategy = query_provider(build_prompt(self.prompt_aggregates(), intent), self.provider)
        return self.state(), self.strategy

    @property
    def sigma(self) -> Optional[StrategyLabel]:
        return None if self.strategy is None else self.strategy.label

    @property
    def t(self) -> float:
        """Timestamp of the geometry currently observed, seconds."""
        return self._step * self.config.episode.step_seconds

    @property
    def done(self) -> bool:
        return self._step is not None and self._step >= self.config.episode.horizon

    def _update_geometry(self) -> None:
        cfg = self.config
        sat_pos = satellite_positions(self.constellation, self.t)
        dist = slant_distances(sat_pos, self._user_pos)
        elev = elevation_angles(sat_pos, self._user_pos)
        rain_rng = np.random.default_rng([*self.key, 2, self._step])
        self.links: LinkBudget = link_budget(dist, elev, self.scenario, rain_rng, cfg.channel)
        sats = list(range(cfg.constellation.num_satellites))
        self.serving = associate(sats, self.users, self.links.total_loss, self.links.visible)
        # Users nobody can serve still get geometry features from their best link.
        self.reference_sat = np.where(self.serving >= 0, self.serving, np.argmin(self.links.total_loss, axis=0))

    def prompt_aggregates(self) -> PromptAggregates:
        u = np.arange(self.num_users)
        loss = self.links.total_loss[self.reference_sat, u]
        counts = zone_counts(self.num_users, self.config.users.zone_fractions)
        return PromptAggregates(self.weather.value, counts, float(loss.mean()), float(loss.var()),
                                self._last_kpis)

    def state(self) -> StateVector:
        u = np.arange(self.num_users)
        lat = np.array([x.latitude for x in self.users])
        lon = np.array([x.longitude for x in self.users])
        feats = np.zeros((self.num_users, NUM_FEATURES))
        feats[:, 0] = lat / 90.0
        feats[:, 1] = lon / 180.0
        feats[:, 2] = self.links.distance[self.reference_sat, u] / _DISTANCE_SCALE
        feats[:, 3] = (self.links.total_loss[self.reference_sat, u] - _LOSS_OFFSET) / _LOSS_SCALE
        feats[u, 4 + self.regions] = 1.0
        feats[:, 7] = self._prev_rate / (self.config.radio.b_max_hz * _RATE_SCALE_BITS_PER_HZ)
        feats[:, 8] = np.log10(1.0 + self._prev_sinr) / _SINR_DECADES
        return StateVector(feats, self._prev_globals.copy())

    def step(self, action) -> tuple[StateVector, RewardBreakdown, KpiFrame, bool]:
        if self._step is None:
            raise EpisodeStateError("step() called before reset()")
        if self.done:
            raise EpisodeStateError("episode already finished; call reset()")
        action = np.asarray(action, dtype=float).ravel()
        if action.size != 2 * self.num_users:
            raise ValueError(f"action must have length {2 * self.num_users}, got {action.size}")
        alloc = Allocation.from_action(np.clip(action, 0.0, 1.0), self.config.radio)
        frame = evaluate_frame(self.links, self.serving, alloc, self.regions, self.config.radio)

        base = base_reward(frame, self.reward_config)
        phi = shaping(frame, self.sigma, self.reward_config)
        reward = RewardBreakdown(base, phi, base + phi)

        self._frames.append(frame)
        self._prev_rate = frame.rate
        self._prev_sinr = frame.sinr
        self._prev_globals = np.array([frame.sum_rate / self.r_ref, frame.jain, frame.outage])
        self._step += 1
        if self.done:
            self._last_kpis = tuple(float(np.mean([getattr(f, k) for f in self._frames]))
                                    for k in ("sum_rate", "jain", "outage"))
        self._update_geometry()
        return self.state(), reward, frame, self.done

    # -- helpers for the heuristic baselines -------------------------------

    @property
    def served_users(self) -> np.ndarray:
        return np.flatnonzero(self.serving >= 0)

    def snapshot(self, budget: Optional[float] = None) -> Optional[ChannelSnapshot]:
        """Noise-limited channel estimates of the currently served users."""
        served = self.served_users
        if served.size == 0:
            return None
        radio = self.config.radio
        gain = 10.0 ** (self.links.net_gain_db[self.serving[served], served] / 10.0)
        return ChannelSnapshot(gain, radio.noise_density * radio.b_max_hz, radio.p_max_watts, radio.b_max_hz,
                               budget)

    def expand(self, alloc: Allocation) -> np.ndarray:
        """Full-length action from an allocation over the served users only."""
        served = self.served_users
        action = np.zeros(2 * self.num_users)
        action[served] = alloc.power_fraction
        action[self.num_users + served] = alloc.bandwidth_fraction
        return action
