"""Heuristic power/bandwidth allocation baselines.

Every allocator works on a :class:`ChannelSnapshot` of noise-limited channel
estimates and returns an :class:`~lamdrl.kpi.Allocation` whose fractions stay
within the per-user caps shared with the learning agents.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .kpi import Allocation

__all__ = [
    "ChannelSnapshot",
    "WaterFillResult",
    "equal_allocation",
    "water_fill_powers",
    "water_filling",
    "max_min_fairness",
    "proportional_capacity",
    "noise_limited_rates",
]

WF_TOLERANCE = 1e-9
MMF_STEPS = 10_000


@dataclass(frozen=True)
class ChannelSnapshot:
    """Channel estimates for the users an allocator should serve.

    Parameters
    ----------
    gain : np.ndarray
        Effective linear power gain ``10**((G_t + G_r - L_u) / 10)`` per user.
    noise_floor : np.ndarray
        Noise power at full bandwidth per user, watts.
    p_max : float
        Per-user power cap, watts.
    b_max : float
        Per-user bandwidth cap, Hz.
    budget : float, optional
        Total power budget in watts for budgeted variants.
    """

    gain: np.ndarray
    noise_floor: np.ndarray
    p_max: float
    b_max: float
    budget: float | None = None

    def __post_init__(self):
        gain = np.atleast_1d(np.asarray(self.gain, dtype=float))
        noise = np.broadcast_to(np.asarray(self.noise_floor, dtype=float), gain.shape).copy()
        if gain.size == 0:
            raise ValueError("snapshot needs at least one user")
        if not (np.all(np.isfinite(gain)) and np.all(gain > 0)):
            raise ValueError("channel gains must be positive and finite")
        if not np.all(noise > 0):
            raise ValueError("noise floors must be positive")
        if not (self.p_max > 0 and self.b_max > 0):
            raise ValueError("caps must be positive")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be non-negative")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "noise_floor", noise)

    @property
    def num_users(self) -> int:
        return self.gain.size

    @property
    def inverse_snr(self) -> np.ndarray:
        """Noise-to-gain ratio ``n_u / g_u`` (the floor of each water vessel)."""
        return self.noise_floor / self.gain

    @property
    def p_max_dbm(self) -> float:
        return 10.0 * np.log10(self.p_max) + 30.0


def noise_limited_rates(snapshot: ChannelSnapshot, power: np.ndarray, bandwidth_fraction=1.0) -> np.ndarray:
    """Rates with no interference; noise scales with the granted bandwidth."""
    bw = np.broadcast_to(np.asarray(bandwidth_fraction, dtype=float), snapshot.gain.shape)
    out = np.zeros(snapshot.num_users)
    on = bw > 0
    snr = power[on] * snapshot.gain[on] / (snapshot.noise_floor[on] * bw[on])
    out[on] = snapshot.b_max * bw[on] * np.log2(1.0 + snr)
    return out


def _allocation(snapshot: ChannelSnapshot, power: np.ndarray, beta) -> Allocation:
    beta = np.broadcast_to(np.asarray(beta, dtype=float), snapshot.gain.shape)
    return Allocation(np.minimum(power / snapshot.p_max, 1.0), beta, snapshot.p_max_dbm, snapshot.b_max)


def equal_allocation(snapshot: ChannelSnapshot) -> Allocation:
    """Same share of every resource for every user.

    With per-user caps each beam runs at its cap; with a total budget each user
    receives ``budget / N_u`` and the bandwidth fraction follows the same share.
    """
    n = snapshot.num_users
    if snapshot.budget is None:
        share = 1.0
    else:
        share = min(snapshot.budget / n / snapshot.p_max, 1.0)
    frac = np.full(n, share)
    return Allocation(frac, frac, snapshot.p_max_dbm, snapshot.b_max)


class WaterFillResult(NamedTuple):
    power: np.ndarray
    level: float
    unspent: float


def water_fill_powers(inverse_snr: np.ndarray, total_power: float, cap: float | np.ndarray = np.inf,
                      tol: float = WF_TOLERANCE) -> WaterFillResult:
    """Cap-constrained water-filling by bisection on the water level.

    Each vessel receives ``clip(level - inverse_snr, 0, cap)``; the level is
    bisected until the poured total matches ``total_power`` to relative
    tolerance ``tol``.  A budget above the sum of the caps fills every vessel
    to its cap and reports the remainder as unspent.
    """
    floor = np.asarray(inverse_snr, dtype=float)
    caps = np.broadcast_to(np.asarray(cap, dtype=float), floor.shape)
    if not total_power > 0:
        raise ValueError("total_power must be positive")

    cap_sum = float(caps.sum())
    if total_power >= cap_sum:
        return WaterFillResult(caps.copy(), float(np.max(floor + caps)), total_power - cap_sum)

    def poured(level):
        return np.clip(level - floor, 0.0, caps)

    lo = float(floor.min())
    hi = float(floor.max()) + total_power
    level = 0.5 * (lo + hi)
    for _ in range(400):
        level = 0.5 * (lo + hi)
        excess = poured(level).sum() - total_power
        if abs(excess) < tol * total_power:
            break
        if excess > 0:
            hi = level
        else:
            lo = level
    return WaterFillResult(poured(level), level, 0.0)


def water_filling(snapshot: ChannelSnapshot, total_power: float) -> Allocation:
    res = water_fill_powers(snapshot.inverse_snr, total_power, snapshot.p_max)
    return _allocation(snapshot, res.power, 1.0)


def max_min_fairness(snapshot: ChannelSnapshot, total_power: float, steps: int = MMF_STEPS) -> Allocation:
    """Progressive filling: power increments go to the user with the lowest rate.

    Increments are ``total_power / steps``; filling stops once the budget is
    spent or every user sits at its cap.  Rates are noise-limited at full
    bandwidth.
    """
    if not total_power > 0:
        raise ValueError("total_power must be positive")
    n = snapshot.num_users
    delta = total_power / steps
    cap = snapshot.p_max
    gain_over_noise = (snapshot.gain / snapshot.noise_floor).tolist()
    b = snapshot.b_max
    power = [0.0] * n
    heap = [(0.0, u) for u in range(n)]
    heapq.heapify(heap)
    remaining = total_power
    while heap and remaining > 1e-12 * total_power:
        _, u = heapq.heappop(heap)
        grant = min(delta, cap - power[u], remaining)
        power[u] += grant
        remaining -= grant
        if cap - power[u] > 1e-12 * cap:
            heapq.heappush(heap, (b * np.log2(1.0 + power[u] * gain_over_noise[u]), u))
    return _allocation(snapshot, np.array(power), 1.0)


def proportional_capacity(snapshot: ChannelSnapshot) -> Allocation:
    """Fractions proportional to each user's full-cap capacity, best user at cap."""
    cap_rate = snapshot.b_max * np.log2(1.0 + snapshot.gain * snapshot.p_max / snapshot.noise_floor)
    top = cap_rate.max()
    if not top > 0:
        return equal_allocation(ChannelSnapshot(snapshot.gain, snapshot.noise_floor, snapshot.p_max,
                                                snapshot.b_max))
    frac = cap_rate / top
    return Allocation(frac, frac, snapshot.p_max_dbm, snapshot.b_max)
