"""LEO downlink resource allocation with strategy-guided TD3.

The subpackages follow the data flow of one decision step: ``geometry`` places
satellites and users, ``channel`` turns distances into losses, ``kpi`` scores an
allocation, ``allocators`` holds the closed-form baselines, ``strategy`` picks an
episode label, ``env`` wraps it all as an MDP, ``agent`` learns on it and
``harness`` runs campaigns.
"""

from .config import CampaignConfig, ConfigurationError, ScenarioConfig, load_config, profile
from .env import LeoDownlinkEnv
from .strategy import MockProvider, RemoteProvider, StrategyLabel

__version__ = "0.1.0"

__all__ = ["CampaignConfig", "ScenarioConfig", "ConfigurationError", "load_config", "profile", "LeoDownlinkEnv",
           "MockProvider", "RemoteProvider", "StrategyLabel", "__version__"]
