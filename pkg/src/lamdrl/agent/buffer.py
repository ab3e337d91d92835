from __future__ import annotations

import numpy as np

__all__ = ["ReplayBuffer"]


class ReplayBuffer:
    """Ring buffer of transitions ``(s, a, r, s', sigma, terminal)``.

    The strategy is stored as a label index, not as an embedding vector, so
    sampled transitions are re-embedded with the current table.  Storage grows
    geometrically up to ``capacity``.
    """

    def __init__(self, capacity: int, num_users: int, d_f: int, rng: np.random.Generator | None = None,
                 dtype=np.float64):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.num_users = num_users
        self.d_f = d_f
        self.rng = np.random.default_rng() if rng is None else rng
        self.dtype = np.dtype(dtype)
        self.cursor = 0
        self.size = 0
        self._alloc(min(self.capacity, 1024))

    def _alloc(self, n: int) -> None:
        old = getattr(self, "_data", None)
        data = {
            "X": np.zeros((n, self.num_users, self.d_f), self.dtype),
            "g": np.zeros((n, 3), self.dtype),
            "action": np.zeros((n, 2 * self.num_users), self.dtype),
            "reward": np.zeros(n, self.dtype),
            "X_next": np.zeros((n, self.num_users, self.d_f), self.dtype),
            "g_next": np.zeros((n, 3), self.dtype),
            "label": np.zeros(n, dtype=np.int64),
            "terminal": np.zeros(n, self.dtype),
        }
        if old is not None:
            for k, v in old.items():
                data[k][: len(v)] = v
        self._data = data

    def __len__(self) -> int:
        return self.size

    def add(self, state, action, reward: float, next_state, label: int, terminal: bool) -> None:
        allocated = len(self._data["reward"])
        if self.cursor >= allocated:
            self._alloc(min(self.capacity, 2 * allocated))
        i = self.cursor
        d = self._data
        d["X"][i] = state.features
        d["g"][i] = state.globals
        d["action"][i] = action
        d["reward"][i] = reward
        d["X_next"][i] = next_state.features
        d["g_next"][i] = next_state.globals
        d["label"][i] = label
        d["terminal"][i] = float(terminal)
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int) -> dict:
        """Uniform sample without replacement."""
        if batch_size > self.size:
            raise ValueError(f"cannot draw {batch_size} transitions from {self.size}")
        idx = self.rng.choice(self.size, size=batch_size, replace=False)
        return {k: v[idx] for k, v in self._data.items()}
