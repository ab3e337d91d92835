"""Scenario configuration: one validated record with every constant of a run.

Configurations are plain YAML mappings.  Unknown keys and ill-typed values are
rejected with the dotted path of the offending entry; anything not given falls
back to the selected profile's defaults.
"""

from __future__ import annotations

import dataclasses
import enum
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .channel import ChannelConfig, WeatherKind, WeatherScenario
from .geometry import ConfigurationError, ConstellationConfig
from .kpi import RadioConfig

__all__ = [
    "ConfigurationError",
    "UserConfig",
    "RewardConfig",
    "EpisodeConfig",
    "BaselineConfig",
    "AgentConfig",
    "ScenarioConfig",
    "CampaignConfig",
    "PROFILES",
    "ALLOCATORS",
    "profile",
    "load_config",
    "config_from_dict",
    "config_to_dict",
    "dump_config",
    "config_hash",
]

ALLOCATORS = ("equal", "wf", "mmf", "pc", "drl", "lamdrl")


@dataclass(frozen=True)
class UserConfig:
    num_users: int = 50
    zone_fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)

    def __post_init__(self):
        if self.num_users < 1:
            raise ConfigurationError("num_users must be at least 1")
        if len(self.zone_fractions) != 3 or abs(sum(self.zone_fractions) - 1.0) > 1e-9:
            raise ConfigurationError("zone_fractions must be three values summing to 1")


@dataclass(frozen=True)
class RewardConfig:
    lambda_r: float = 1.0
    lambda_j: float = 0.5
    lambda_o: float = 1.0
    r_ref: Optional[float] = None  # bit/s; derived from the radio caps when unset
    eta_a: float = 0.2
    eta_b: Optional[float] = None  # derived as 0.2 / (N_u - 1) when unset
    eta_c: float = 0.2
    epsilon: float = 1e-6
    discount: float = 0.99

    def __post_init__(self):
        weights = (self.lambda_r, self.lambda_j, self.lambda_o, self.eta_a, self.eta_c,
                   0.0 if self.eta_b is None else self.eta_b)
        if min(weights) < 0:
            raise ConfigurationError("reward weights must be non-negative")
        if self.r_ref is not None and not self.r_ref > 0:
            raise ConfigurationError("r_ref must be positive")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not 0.0 < self.discount < 1.0:
            raise ConfigurationError("discount must lie in (0, 1)")


@dataclass(frozen=True)
class EpisodeConfig:
    step_seconds: float = 30.0
    horizon: int = 20
    random_phase: bool = True  # reseed the constellation phase every episode

    def __post_init__(self):
        if not self.step_seconds > 0 or self.horizon < 1:
            raise ConfigurationError("step_seconds must be positive and horizon at least 1")


@dataclass(frozen=True)
class BaselineConfig:
    # Water-filling and max-min share a total budget of this many caps per
    # served user.
    budget_per_user: float = 0.5

    def __post_init__(self):
        if not self.budget_per_user > 0:
            raise ConfigurationError("budget_per_user must be positive")


@dataclass(frozen=True)
class AgentConfig:
    d_str: int = 16
    d_h: int = 32
    hidden: int = 128
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    embed_lr: float = 1e-4
    batch_size: int = 256
    buffer_capacity: int = 100_000
    tau: float = 0.005
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    exploration_noise: float = 0.1
    warmup_steps: int = 1000
    output_margin: float = 0.05
    dtype: str = "float32"  # training precision

    def __post_init__(self):
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError("agent.dtype must be float32 or float64")
        for name in ("d_str", "d_h", "hidden", "batch_size", "buffer_capacity", "policy_delay"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"agent.{name} must be at least 1")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigurationError("agent.tau must lie in (0, 1]")
        if self.output_margin < 0:
            raise ConfigurationError("agent.output_margin must be non-negative")


@dataclass(frozen=True)
class ScenarioConfig:
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    users: UserConfig = field(default_factory=UserConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)

    @property
    def num_users(self) -> int:
        return self.users.num_users

    @property
    def r_ref(self) -> float:
        """Sum-rate normaliser: half of every user at threshold SINR and full bandwidth."""
        if self.reward.r_ref is not None:
            return float(self.reward.r_ref)
        return self.num_users * self.radio.b_max_hz * np.log2(1.0 + self.radio.sinr_threshold) * 0.5

    @property
    def resolved_reward(self) -> RewardConfig:
        """Reward constants with the derived defaults filled in."""
        eta_b = self.reward.eta_b
        if eta_b is None:
            # V_R / R_mean^2 peaks at N_u - 1 (one user holds all the rate); this
            # keeps |phi_B| within the same 0.2 envelope as the other cases.
            eta_b = 0.2 / max(self.num_users - 1, 1)
        return dataclasses.replace(self.reward, r_ref=self.r_ref, eta_b=eta_b)

    def replace(self, **sections) -> "ScenarioConfig":
        return dataclasses.replace(self, **sections)


@dataclass(frozen=True)
class CampaignConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    allocators: tuple[str, ...] = ALLOCATORS
    scenarios: tuple[str, ...] = ("nominal", "extreme")
    episodes_train: int = 300
    episodes_eval: int = 100
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs/default"
    provider: str = "mock"
    intent: Optional[str] = None  # fixed operator intent; round-robin when unset
    log_attention: bool = True

    def __post_init__(self):
        if not self.allocators:
            raise ConfigurationError("at least one allocator is required")
        bad = [a for a in self.allocators if a not in ALLOCATORS]
        if bad:
            raise ConfigurationError(f"unknown allocators {bad}; choose from {ALLOCATORS}")
        for s in self.scenarios:
            WeatherKind(s)
        if not self.scenarios:
            raise ConfigurationError("at least one weather scenario is required")
        if self.episodes_train < 1 or self.episodes_eval < 1:
            raise ConfigurationError("episode counts must be at least 1")
        if not self.seeds:
            raise ConfigurationError("seeds must be non-empty")
        if self.provider not in ("mock", "remote"):
            raise ConfigurationError("provider must be 'mock' or 'remote'")
        if self.intent is not None and self.intent not in ("Fairness", "Efficiency", "ChallengingCoverage"):
            raise ConfigurationError(f"unknown operator intent {self.intent!r}")


def _desk() -> dict:
    return {
        "constellation": {"num_satellites": 4},
        "users": {"num_users": 10},
        "episodes_train": 300,
    }


def _paper() -> dict:
    return {
        "constellation": {"num_satellites": 10},
        "users": {"num_users": 50},
    }


PROFILES = {"desk": _desk, "paper": _paper}


# --- dict <-> dataclass ------------------------------------------------------

def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigurationError(f"{path}: expected a mapping, got {type(value).__name__}")
        return _build(tp, value, path)
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        try:
            return tp(value)
        except ValueError:
            raise ConfigurationError(f"{path}: invalid value {value!r}") from None
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{path}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigurationError(f"{path}: expected {len(args)} entries, got {len(value)}")
        return tuple(_convert(a, v, f"{path}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data: dict, path: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"{path or '<root>'}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if cls is WeatherScenario and key == "kind":
            kwargs[key] = value
            continue
        kwargs[key] = _convert(hints[key], value, sub)
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path or '<root>'}: {exc}") from exc


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    return obj


def config_to_dict(cfg: CampaignConfig) -> dict:
    flat = _plain(cfg)
    flat.update(flat.pop("scenario"))
    return flat


def config_from_dict(data: Optional[dict] = None) -> CampaignConfig:
    """Build a campaign config from a mapping (profile defaults underneath)."""
    data = dict(data or {})
    name = data.pop("profile", "desk")
    if name not in PROFILES:
        raise ConfigurationError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    if "scenario" in data:
        raise ConfigurationError("<root>: unknown keys ['scenario']; scenario sections sit at the top level")
    merged = _merge(PROFILES[name](), data)

    scenario_keys = {f.name for f in dataclasses.fields(ScenarioConfig)}
    scenario_part = {k: merged.pop(k) for k in list(merged) if k in scenario_keys}
    channel = scenario_part.get("channel")
    if isinstance(channel, dict):
        channel = dict(channel)
        for kind in ("nominal", "extreme"):
            if kind in channel:
                defaults = _plain(getattr(ChannelConfig(), kind))
                channel[kind] = _merge(defaults, channel[kind] or {})
                channel[kind]["kind"] = kind
        scenario_part["channel"] = channel
    scenario = _build(ScenarioConfig, scenario_part, "")
    return _build(CampaignConfig, {**merged, "scenario": _plain_scenario(scenario)}, "")


def _plain_scenario(scenario: ScenarioConfig) -> dict:
    d = _plain(scenario)
    for kind in ("nominal", "extreme"):
        d["channel"][kind]["kind"] = kind
    return d


def profile(name: str = "desk", **overrides) -> CampaignConfig:
    return config_from_dict({"profile": name, **overrides})


def load_config(path) -> CampaignConfig:
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def dump_config(cfg: CampaignConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


def config_hash(cfg) -> str:
    import hashlib

    text = yaml.safe_dump(_plain(cfg), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]
