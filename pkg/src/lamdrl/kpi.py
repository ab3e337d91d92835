"""Downlink KPIs: SINR, Shannon rate, Jain fairness, outage and regional sums."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import LinkBudget
from .geometry import Region

__all__ = [
    "RadioConfig",
    "Allocation",
    "KpiFrame",
    "dbm_to_watts",
    "db_to_linear",
    "sinr",
    "rate",
    "jain",
    "outage",
    "interference",
    "region_aggregates",
    "evaluate_frame",
    "frame_from_sinr",
]


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class RadioConfig:
    p_max_dbm: float = 40.0
    b_max_hz: float = 20e6
    noise_density_dbm_hz: float = -174.0
    sinr_threshold_db: float = -3.0
    kappa: float = 0.1  # co-channel overlap factor

    def __post_init__(self):
        if not self.b_max_hz > 0:
            raise ValueError("b_max_hz must be positive")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")

    @property
    def p_max_watts(self) -> float:
        return float(dbm_to_watts(self.p_max_dbm))

    @property
    def noise_density(self) -> float:
        """W/Hz"""
        return float(dbm_to_watts(self.noise_density_dbm_hz))

    @property
    def sinr_threshold(self) -> float:
        return float(db_to_linear(self.sinr_threshold_db))


@dataclass(frozen=True)
class Allocation:
    """Per-user power and bandwidth fractions plus the caps they scale.

    Fractions scale linear power, so ``power_fraction = 0.5`` means half of the
    cap in watts.
    """

    power_fraction: np.ndarray
    bandwidth_fraction: np.ndarray
    p_max_dbm: float = 40.0
    b_max: float = 20e6

    def __post_init__(self):
        alpha = np.clip(np.asarray(self.power_fraction, dtype=float).ravel(), 0.0, 1.0)
        beta = np.clip(np.asarray(self.bandwidth_fraction, dtype=float).ravel(), 0.0, 1.0)
        if alpha.shape != beta.shape:
            raise ValueError("power and bandwidth fractions must have the same length")
        object.__setattr__(self, "power_fraction", alpha)
        object.__setattr__(self, "bandwidth_fraction", beta)

    @classmethod
    def from_action(cls, action, radio: RadioConfig) -> "Allocation":
        action = np.asarray(action, dtype=float).ravel()
        if action.size % 2:
            raise ValueError("action length must be even (power block, bandwidth block)")
        n = action.size // 2
        return cls(action[:n], action[n:], radio.p_max_dbm, radio.b_max_hz)

    @classmethod
    def full(cls, num_users: int, radio: RadioConfig) -> "Allocation":
        ones = np.ones(num_users)
        return cls(ones, ones, radio.p_max_dbm, radio.b_max_hz)

    def to_action(self) -> np.ndarray:
        return np.concatenate([self.power_fraction, self.bandwidth_fraction])

    @property
    def num_users(self) -> int:
        return self.power_fraction.size

    @property
    def p_max_watts(self) -> float:
        return float(dbm_to_watts(self.p_max_dbm))

    @property
    def power(self) -> np.ndarray:
        return self.power_fraction * self.p_max_watts

    @property
    def bandwidth(self) -> np.ndarray:
        return self.bandwidth_fraction * self.b_max


def sinr(power_w, net_gain_db, interference_w, noise_density, bandwidth_hz):
    """Received SINR, linear.

    ``net_gain_db`` is ``G_t + G_r - L``.  Users with zero bandwidth get an SINR
    of zero (they are counted in outage) instead of the 0/0 of a silent link.
    """
    power_w, net_gain_db, interference_w, bandwidth_hz = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (power_w, net_gain_db, interference_w, bandwidth_hz)))
    signal = power_w * 10.0 ** (net_gain_db / 10.0)
    denom = interference_w + noise_density * bandwidth_hz
    out = np.zeros(signal.shape)
    ok = bandwidth_hz > 0
    np.divide(signal, denom, out=out, where=ok)
    return float(out) if out.ndim == 0 else out


def rate(bandwidth_hz, sinr_linear):
    """Shannon rate in bits/s."""
    out = np.asarray(bandwidth_hz, dtype=float) * np.log2(1.0 + np.asarray(sinr_linear, dtype=float))
    return float(out) if out.ndim == 0 else out


def jain(rates) -> float:
    """Jain's index; an all-zero vector counts as perfectly fair."""
    r = np.asarray(rates, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("jain index of an empty rate vector")
    sq = float(np.dot(r, r))
    if sq == 0.0:
        return 1.0
    s = float(r.sum())
    return s * s / (r.size * sq)


def outage(sinrs, threshold: float) -> float:
    g = np.asarray(sinrs, dtype=float).ravel()
    return float(np.count_nonzero(g < threshold)) / g.size


def interference(budget: LinkBudget, serving: np.ndarray, power_w: np.ndarray, kappa: float) -> np.ndarray:
    """Co-channel leakage received by each user from non-serving visible satellites.

    Every satellite radiates the mean transmit power of the users it serves.
    Unserved users (``serving == -1``) report zero.
    """
    serving = np.asarray(serving)
    num_sats, num_users = budget.total_loss.shape
    if kappa == 0.0:
        return np.zeros(num_users)
    mean_power = np.zeros(num_sats)
    for s in range(num_sats):
        mask = serving == s
        if mask.any():
            mean_power[s] = power_w[mask].mean()
    rx = mean_power[:, None] * 10.0 ** (budget.net_gain_db / 10.0)
    leak = np.where(budget.visible, rx, 0.0)
    served = serving >= 0
    leak[serving[served], np.flatnonzero(served)] = 0.0
    out = kappa * leak.sum(axis=0)
    out[~served] = 0.0
    return out


def _high_latitude_mask(regions) -> np.ndarray:
    regions = list(regions)
    if regions and isinstance(regions[0], Region):
        return np.array([r.is_high_latitude for r in regions], dtype=bool)
    return np.asarray(regions, dtype=int) != 0


def region_aggregates(rates, regions) -> tuple[float, float, float, float]:
    """Return ``(R_eq, R_hl, V_R, R_mean)``; both high-latitude zones pool into R_hl."""
    r = np.asarray(rates, dtype=float).ravel()
    hl = _high_latitude_mask(regions)
    if hl.size != r.size:
        raise ValueError("one region label per user is required")
    r_hl = float(r[hl].sum())
    r_eq = float(r.sum()) - r_hl
    mean = float(r.sum()) / r.size
    var = float(np.mean((r - mean) ** 2))
    return r_eq, r_hl, var, mean


@dataclass(frozen=True)
class KpiFrame:
    sinr: np.ndarray
    rate: np.ndarray
    sum_rate: float
    jain: float
    outage: float
    region_rates: tuple[float, float]
    rate_variance: float
    rate_mean: float
    interference: np.ndarray
    noise_density: float
    sinr_threshold: float

    @property
    def r_eq(self) -> float:
        return self.region_rates[0]

    @property
    def r_hl(self) -> float:
        return self.region_rates[1]

    @property
    def num_users(self) -> int:
        return self.rate.size


def frame_from_sinr(sinr_vec, bandwidth, regions, radio: RadioConfig, interference_w=None) -> KpiFrame:
    sinr_vec = np.asarray(sinr_vec, dtype=float)
    rates = rate(bandwidth, sinr_vec)
    rates = np.atleast_1d(rates)
    r_eq, r_hl, var, mean = region_aggregates(rates, regions)
    return KpiFrame(
        sinr=sinr_vec,
        rate=rates,
        sum_rate=float(rates.sum()),
        jain=jain(rates),
        outage=outage(sinr_vec, radio.sinr_threshold),
        region_rates=(r_eq, r_hl),
        rate_variance=var,
        rate_mean=mean,
        interference=np.zeros_like(sinr_vec) if interference_w is None else interference_w,
        noise_density=radio.noise_density,
        sinr_threshold=radio.sinr_threshold,
    )


def evaluate_frame(budget: LinkBudget, serving: np.ndarray, alloc: Allocation, regions,
                   radio: RadioConfig) -> KpiFrame:
    """KPIs of one decision step given the link budget and serving map."""
    serving = np.asarray(serving)
    served = serving >= 0
    users = np.arange(serving.size)
    power = np.where(served, alloc.power, 0.0)
    bandwidth = np.where(served, alloc.bandwidth, 0.0)
    interf = interference(budget, serving, power, radio.kappa)
    net_gain = np.full(serving.size, -np.inf)
    net_gain[served] = budget.net_gain_db[serving[served], users[served]]
    gamma = np.zeros(serving.size)
    gamma[served] = sinr(power[served], net_gain[served], interf[served], radio.noise_density,
                         bandwidth[served])
    return frame_from_sinr(gamma, bandwidth, regions, radio, interf)
