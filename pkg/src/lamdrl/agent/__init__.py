"""Strategy-conditioned TD3 agent (and its unguided twin)."""

from .buffer import ReplayBuffer
from .networks import attention
from .td3 import Adam, TD3Agent, TrainStats

__all__ = ["ReplayBuffer", "TD3Agent", "Adam", "TrainStats", "attention", "drl_baseline_mode"]


def drl_baseline_mode(flag: bool = True) -> dict:
    """Keyword arguments selecting the unguided (``flag=True``) or guided agent.

    The unguided agent sees a zero embedding and its environment runs without a
    strategy provider, hence without reward shaping.
    """
    return {"guided": not flag}
