"""Episode loops: heuristic rollouts, agent training and greedy evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..agent import TD3Agent
from ..allocators import equal_allocation, max_min_fairness, proportional_capacity, water_filling
from ..env import LeoDownlinkEnv

__all__ = ["HEURISTICS", "LEARNERS", "StepRecord", "EpisodeLog", "heuristic_action", "run_episode",
           "train_agent", "evaluate_agent", "evaluate_heuristic"]

HEURISTICS = ("equal", "wf", "mmf", "pc")
LEARNERS = ("drl", "lamdrl")


@dataclass
class StepRecord:
    t: float
    sum_rate: float
    jain: float
    outage: float
    r_eq: float
    r_hl: float
    v_r: float
    reward_base: float
    reward_shaping: float
    reward: float


@dataclass
class EpisodeLog:
    index: int
    label: Optional[str] = None
    fallback: bool = False
    prompt_hash: Optional[str] = None
    steps: list = field(default_factory=list)
    attention: Optional[np.ndarray] = None  # mean share per feature category

    def mean(self, name: str) -> float:
        return float(np.mean([getattr(s, name) for s in self.steps]))


def heuristic_action(name: str, env: LeoDownlinkEnv) -> np.ndarray:
    """Action of a heuristic baseline on the environment's current geometry."""
    cfg = env.config
    if name == "equal":
        snap = env.snapshot()
        return np.ones(2 * env.num_users) if snap is None else env.expand(equal_allocation(snap))
    snap = env.snapshot()
    if snap is None:
        return np.zeros(2 * env.num_users)
    budget = cfg.baselines.budget_per_user * snap.num_users * snap.p_max
    if name == "wf":
        alloc = water_filling(snap, budget)
    elif name == "mmf":
        alloc = max_min_fairness(snap, budget)
    elif name == "pc":
        alloc = proportional_capacity(snap)
    else:
        raise ValueError(f"unknown heuristic {name!r}")
    return env.expand(alloc)


def run_episode(env: LeoDownlinkEnv, choose: Callable, index: Optional[int] = None,
                observe: Optional[Callable] = None, attention: Optional[Callable] = None) -> EpisodeLog:
    """Roll one episode.

    ``choose(state, sigma) -> action``; ``observe(state, action, reward, next_state, sigma, done)``
    is called after every step (training hooks in here); ``attention(state, sigma)``
    returns per-category attention shares to average over the episode.
    """
    state, ctx = env.reset(index)
    log = EpisodeLog(env.index)
    if ctx is not None:
        log.label, log.fallback, log.prompt_hash = ctx.label.value, ctx.fallback, ctx.prompt.digest
    shares = []
    done = False
    while not done:
        t = env.t
        if attention is not None:
            shares.append(attention(state, env.sigma))
        action = choose(state, env.sigma)
        next_state, reward, frame, done = env.step(action)
        log.steps.append(StepRecord(t, frame.sum_rate, frame.jain, frame.outage, frame.r_eq, frame.r_hl,
                                    frame.rate_variance, reward.base, reward.shaping, reward.total))
        if observe is not None:
            observe(state, action, reward.total, next_state, env.sigma, done)
        state = next_state
    if shares:
        log.attention = np.mean(shares, axis=0)
    return log


def evaluate_heuristic(name: str, env: LeoDownlinkEnv, episodes: int) -> list[EpisodeLog]:
    return [run_episode(env, lambda s, sigma: heuristic_action(name, env), index=i) for i in range(episodes)]


def train_agent(agent: TD3Agent, env: LeoDownlinkEnv, episodes: int,
                on_episode: Optional[Callable[[EpisodeLog], None]] = None) -> list[EpisodeLog]:
    """Interleave acting and TD3 updates: one update per environment step."""
    warmup = agent.config.warmup_steps
    noise = agent.config.exploration_noise
    counter = {"steps": 0}

    def choose(state, sigma):
        if counter["steps"] < warmup:
            return agent.random_action()
        return agent.act(state, sigma, noise)

    def observe(state, action, reward, next_state, sigma, done):
        counter["steps"] += 1
        agent.remember(state, action, reward, next_state, sigma, done)
        agent.train_step()

    logs = []
    for i in range(episodes):
        log = run_episode(env, choose, index=i, observe=observe)
        logs.append(log)
        if on_episode is not None:
            on_episode(log)
    return logs


def evaluate_agent(agent: TD3Agent, env: LeoDownlinkEnv, episodes: int, with_attention: bool = True
                   ) -> list[EpisodeLog]:
    """Greedy rollouts (no exploration noise)."""
    attention = agent.feature_attention if with_attention else None
    return [run_episode(env, lambda s, sigma: agent.act(s, sigma, 0.0), index=i, attention=attention)
            for i in range(episodes)]
