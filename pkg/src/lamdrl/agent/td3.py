"""TD3 learner with strategy-conditioned attention.

The guided agent looks up a learnable embedding for the episode's strategy
label; the unguided variant (``guided=False``) feeds a zero vector instead and
is otherwise identical, down to the random initialisation.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..config import AgentConfig
from ..env import FEATURE_CATEGORIES, NUM_FEATURES, StateVector
from ..strategy import StrategyEmbeddingTable, StrategyLabel
from . import networks as nn
from .buffer import ReplayBuffer

__all__ = ["Adam", "TD3Agent", "TrainStats", "CHECKPOINT_VERSION"]

CHECKPOINT_VERSION = 1


class Adam:
    def __init__(self, params: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr = np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params[k] -= self.lr * corr * m / (np.sqrt(v) + self.eps)


def soft_update(target: dict, online: dict, tau: float) -> None:
    for k, v in online.items():
        target[k] *= 1.0 - tau
        target[k] += tau * v


@dataclass
class TrainStats:
    critic_loss: float
    actor_loss: Optional[float]


class TD3Agent:
    """Actor, twin critics, their targets and the strategy embedding table.

    Parameters
    ----------
    num_users : int
        Sets the action size ``2 * num_users``.
    config : AgentConfig
    discount : float
    seed : int
        Seeds parameter initialisation, exploration noise and replay sampling
        through independent child streams.
    guided : bool
        False gives the unguided baseline: zero embedding everywhere.
    """

    def __init__(self, num_users: int, config: AgentConfig = AgentConfig(), discount: float = 0.99,
                 seed: int = 0, guided: bool = True, d_f: int = NUM_FEATURES):
        self.num_users = num_users
        self.config = config
        self.discount = discount
        self.guided = guided
        self.d_f = d_f
        init_ss, noise_ss, replay_ss = np.random.SeedSequence(seed).spawn(3)
        init_rng = np.random.default_rng(init_ss)
        c = config
        self.actor = nn.init_actor(init_rng, num_users, d_f, c.d_str, c.d_h, c.hidden)
        self.critic = nn.init_critic(init_rng, num_users, d_f, c.d_str, c.d_h, c.hidden)
        self.embedding = StrategyEmbeddingTable(c.d_str, init_rng)
        self.dtype = np.dtype(c.dtype)
        for params in (self.actor, self.critic):
            for k in params:
                params[k] = params[k].astype(self.dtype)
        self.embedding.weights = self.embedding.weights.astype(self.dtype)
        self.actor_target = copy.deepcopy(self.actor)
        self.critic_target = copy.deepcopy(self.critic)
        self.table_target = self.embedding.weights.copy()

        self.actor_opt = Adam(self.actor, c.actor_lr)
        self.critic_opt = Adam(self.critic, c.critic_lr)
        self.table_opt = Adam({"table": self.embedding.weights}, c.embed_lr)

        self.noise_rng = np.random.default_rng(noise_ss)
        self.buffer = ReplayBuffer(c.buffer_capacity, num_users, d_f, np.random.default_rng(replay_ss), self.dtype)
        self.updates = 0
        self.transitions = 0

    # -- acting ------------------------------------------------------------

    def _embed(self, label: Optional[StrategyLabel], table: Optional[np.ndarray] = None) -> np.ndarray:
        table = self.embedding.weights if table is None else table
        if not self.guided or label is None:
            return np.zeros((1, table.shape[1]), dtype=table.dtype)
        return table[StrategyLabel(label).index][None]

    def _obs(self, state: StateVector):
        return state.features[None].astype(self.dtype), state.globals[None].astype(self.dtype)

    def policy(self, state: StateVector, sigma: Optional[StrategyLabel]) -> np.ndarray:
        X, g = self._obs(state)
        a, _ = nn.actor_forward(self.actor, X, g, self._embed(sigma), self.config.output_margin)
        return a[0].astype(float)

    def act(self, state: StateVector, sigma: Optional[StrategyLabel], noise_std: float = 0.0) -> np.ndarray:
        """Policy action plus Gaussian exploration noise, clamped to [0, 1]."""
        a = self.policy(state, sigma)
        if noise_std > 0:
            a = a + self.noise_rng.normal(0.0, noise_std, a.shape)
        return np.clip(a, 0.0, 1.0)

    def random_action(self) -> np.ndarray:
        return self.noise_rng.uniform(0.0, 1.0, 2 * self.num_users)

    def attention_weights(self, state: StateVector, sigma: Optional[StrategyLabel]) -> np.ndarray:
        X, _ = self._obs(state)
        _, w = nn.attention(X[0], self._embed(sigma)[0], self.actor)
        return w.astype(float)

    def feature_attention(self, state: StateVector, sigma: Optional[StrategyLabel]) -> np.ndarray:
        """Attention share of each feature category (see ``FEATURE_CATEGORIES``)."""
        X, _ = self._obs(state)
        return nn.feature_attribution(self.actor, X, self._embed(sigma),
                                      list(FEATURE_CATEGORIES.values()))[0].astype(float)

    # -- learning ----------------------------------------------------------

    def remember(self, state, action, reward: float, next_state, sigma, terminal: bool) -> None:
        label = 0 if sigma is None else StrategyLabel(sigma).index
        self.buffer.add(state, action, reward, next_state, label, terminal)
        self.transitions += 1

    def td_target(self, batch: dict) -> np.ndarray:
        c = self.config
        e_next = nn._lookup(self.table_target, batch["label"], self.guided)
        a_next, _ = nn.actor_forward(self.actor_target, batch["X_next"], batch["g_next"], e_next,
                                     c.output_margin)
        noise = np.clip(self.noise_rng.normal(0.0, c.policy_noise, a_next.shape), -c.noise_clip, c.noise_clip)
        noise = noise.astype(self.dtype)
        a_next = np.clip(a_next + noise, 0.0, 1.0)
        q1, q2, _ = nn.critic_forward(self.critic_target, batch["X_next"], batch["g_next"], e_next, a_next)
        return batch["reward"] + self.discount * (1.0 - batch["terminal"]) * np.minimum(q1, q2)

    def train_step(self, batch: Optional[dict] = None) -> Optional[TrainStats]:
        """One TD3 update; a no-op while the buffer holds less than a batch.

        The critics start learning as soon as a batch is available, the actor
        only once ``warmup_steps`` transitions have been stored: before that
        the critics have seen too little to give the policy a usable gradient,
        and a policy pushed past its output clip early never comes back.
        """
        c = self.config
        if batch is None:
            if len(self.buffer) < c.batch_size:
                return None
            batch = self.buffer.sample(c.batch_size)
        table = {"table": self.embedding.weights}

        y = self.td_target(batch)
        closs, cgrads, dtable = nn.critic_loss(self.critic, self.embedding.weights, batch, y, self.guided)
        self.critic_opt.step(self.critic, cgrads)
        if self.guided:
            self.table_opt.step(table, {"table": dtable})
        self.updates += 1

        aloss = None
        if self.updates % c.policy_delay == 0 and self.transitions >= c.warmup_steps:
            aloss, agrads, dtable = nn.actor_loss(self.actor, self.critic, self.embedding.weights, batch,
                                                  c.output_margin, self.guided)
            self.actor_opt.step(self.actor, agrads)
            if self.guided:
                self.table_opt.step(table, {"table": dtable})
            self.update_targets(c.tau)
        return TrainStats(closs, aloss)

    def update_targets(self, tau: float) -> None:
        soft_update(self.actor_target, self.actor, tau)
        soft_update(self.critic_target, self.critic, tau)
        self.table_target *= 1.0 - tau
        self.table_target += tau * self.embedding.weights

    # -- persistence -------------------------------------------------------

    def state_dict(self) -> dict:
        out = {"meta.version": np.array(CHECKPOINT_VERSION), "meta.num_users": np.array(self.num_users),
               "meta.guided": np.array(self.guided), "meta.updates": np.array(self.updates),
               "meta.transitions": np.array(self.transitions)}
        for group, params in (("actor", self.actor), ("critic", self.critic), ("actor_target", self.actor_target),
                              ("critic_target", self.critic_target)):
            out.update({f"{group}/{k}": v for k, v in params.items()})
        out["embedding/table"] = self.embedding.weights
        out["embedding_target/table"] = self.table_target
        return out

    def save(self, path, config_hash: str = "") -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.savez(fh, **self.state_dict(), **{"meta.config_hash": np.array(config_hash)})

    def load(self, path, config_hash: Optional[str] = None) -> None:
        with np.load(path) as data:
            if int(data["meta.version"]) != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {int(data['meta.version'])}")
            if config_hash is not None and str(data["meta.config_hash"]) != config_hash:
                raise ValueError("checkpoint was written for a different configuration")
            if int(data["meta.num_users"]) != self.num_users or bool(data["meta.guided"]) != self.guided:
                raise ValueError("checkpoint does not match this agent's shape or mode")
            for group, params in (("actor", self.actor), ("critic", self.critic),
                                  ("actor_target", self.actor_target), ("critic_target", self.critic_target)):
                for k in params:
                    params[k][...] = data[f"{group}/{k}"]
            self.embedding.weights[...] = data["embedding/table"]
            self.table_target[...] = data["embedding_target/table"]
            self.updates = int(data["meta.updates"])
            self.transitions = int(data["meta.transitions"])
