"""Episode-level strategy selection.

Once per episode a textual prompt summarising the upcoming scenario is sent to
a strategy provider, which answers with one of four labels.  The label picks
the reward shaping case and indexes a learnable embedding that conditions the
agent's attention.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import urllib.request
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

__all__ = [
    "StrategyLabel",
    "OperatorIntent",
    "PromptAggregates",
    "EpisodePrompt",
    "StrategyContext",
    "StrategyEmbeddingTable",
    "MockProvider",
    "RemoteProvider",
    "ProviderError",
    "TEMPLATE_VERSION",
    "build_prompt",
    "mock_strategy",
    "parse_label",
    "query_provider",
    "intent_for_episode",
    "embed",
]

log = logging.getLogger(__name__)

TEMPLATE_VERSION = "lamdrl-prompt/1"


class StrategyLabel(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"

    @property
    def index(self) -> int:
        return "ABCD".index(self.value)

    @property
    def description(self) -> str:
        return _DEFINITIONS[self]


_DEFINITIONS = {
    StrategyLabel.A: "equatorial priority: favour throughput of users between -30 and 30 degrees latitude",
    StrategyLabel.B: "fairness focused: keep user rates close to each other",
    StrategyLabel.C: "high-latitude priority: favour throughput of users beyond 30 degrees latitude",
    StrategyLabel.D: "opportunistic efficiency: maximise the network objective without regional preference",
}


class OperatorIntent(Enum):
    FAIRNESS = "Fairness"
    EFFICIENCY = "Efficiency"
    CHALLENGING_COVERAGE = "ChallengingCoverage"


_INTENT_ORDER = (OperatorIntent.FAIRNESS, OperatorIntent.EFFICIENCY, OperatorIntent.CHALLENGING_COVERAGE)

_OBJECTIVES = {
    OperatorIntent.FAIRNESS: "Operator objective: serve all users as evenly as possible, even at some cost in total throughput.",
    OperatorIntent.EFFICIENCY: "Operator objective: maximise total downlink throughput of the network.",
    OperatorIntent.CHALLENGING_COVERAGE: "Operator objective: improve service for hard-to-reach users at high latitudes.",
}


def intent_for_episode(episode: int, fixed: Optional[OperatorIntent] = None) -> OperatorIntent:
    """Round-robin operator intent, unless a fixed intent overrides it."""
    if fixed is not None:
        return OperatorIntent(fixed)
    return _INTENT_ORDER[episode % len(_INTENT_ORDER)]


@dataclass(frozen=True)
class PromptAggregates:
    weather: str
    user_counts: tuple[int, int, int]  # equatorial, north, south
    pathloss_mean: float  # dB
    pathloss_var: float  # dB^2
    last_kpis: Optional[tuple[float, float, float]] = None  # sum rate (bit/s), jain, outage

    @property
    def equatorial_share(self) -> float:
        return self.user_counts[0] / max(sum(self.user_counts), 1)


@dataclass(frozen=True)
class EpisodePrompt:
    weather: str
    user_counts: tuple[int, int, int]
    pathloss_mean: float
    pathloss_var: float
    last_kpis: Optional[tuple[float, float, float]]
    operator_intent: OperatorIntent
    rendered_text: str

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.rendered_text.encode("utf-8")).hexdigest()[:16]

    @property
    def equatorial_share(self) -> float:
        return self.user_counts[0] / max(sum(self.user_counts), 1)


def build_prompt(aggregates: PromptAggregates, intent: OperatorIntent) -> EpisodePrompt:
    intent = OperatorIntent(intent)
    eq, north, south = aggregates.user_counts
    lines = [
        f"[{TEMPLATE_VERSION}] LEO downlink resource allocation, episode briefing.",
        f"Weather scenario: {aggregates.weather}.",
        f"Users: {eq} equatorial, {north} northern high-latitude, {south} southern high-latitude.",
        f"Path loss: mean {aggregates.pathloss_mean:.2f} dB, variance {aggregates.pathloss_var:.2f} dB^2.",
    ]
    if aggregates.last_kpis is None:
        lines.append("Previous episode KPIs: no history.")
    else:
        r_sum, j, p_out = aggregates.last_kpis
        lines.append(f"Previous episode KPIs: sum rate {r_sum / 1e6:.2f} Mbps, Jain index {j:.3f}, "
                     f"outage {p_out:.3f}.")
    lines.append(_OBJECTIVES[intent])
    lines.append("Strategies:")
    lines.extend(f"  {lab.value}: {lab.description}" for lab in StrategyLabel)
    lines.append("Respond with exactly one letter: A, B, C, or D")
    return EpisodePrompt(aggregates.weather, tuple(aggregates.user_counts), float(aggregates.pathloss_mean),
                         float(aggregates.pathloss_var), aggregates.last_kpis, intent, "\n".join(lines))


def mock_strategy(prompt: EpisodePrompt) -> StrategyLabel:
    """Deterministic rule table standing in for a language model."""
    intent = prompt.operator_intent
    if intent is OperatorIntent.FAIRNESS:
        return StrategyLabel.B
    if intent is OperatorIntent.CHALLENGING_COVERAGE:
        return StrategyLabel.C
    if prompt.weather.lower() == "nominal":
        return StrategyLabel.D
    return StrategyLabel.A if prompt.equatorial_share >= 0.6 else StrategyLabel.C


_LABEL_RE = re.compile(r"(?<![A-Za-z0-9_])([ABCD])(?![A-Za-z0-9_])")


def parse_label(text: str) -> Optional[StrategyLabel]:
    """First standalone A/B/C/D character in a free-text reply, or None."""
    m = _LABEL_RE.search(text or "")
    return StrategyLabel(m.group(1)) if m else None


class ProviderError(RuntimeError):
    pass


class MockProvider:
    name = "mock"

    def __init__(self):
        self.calls = 0

    def query(self, prompt: EpisodePrompt) -> str:
        self.calls += 1
        return mock_strategy(prompt).value


class RemoteProvider:
    """Thin HTTP client: POSTs the prompt text, returns the reply body as text.

    ``transport`` replaces the network call (``(text) -> reply``) and is how the
    tests feed canned replies.
    """

    name = "remote"

    def __init__(self, endpoint: Optional[str] = None, model: Optional[str] = None, timeout: float = 10.0,
                 transport: Optional[Callable[[str], str]] = None):
        self.endpoint = endpoint
        self.model = model
        self.timeout = float(timeout)
        self.transport = transport
        self.calls = 0

    @classmethod
    def from_env(cls, transport=None) -> "RemoteProvider":
        return cls(os.environ.get("LAM_ENDPOINT"), os.environ.get("LAM_MODEL"),
                   float(os.environ.get("LAM_TIMEOUT_S", "10")), transport)

    def _post(self, text: str) -> str:
        if not self.endpoint:
            raise ProviderError("LAM_ENDPOINT is not set")
        body = json.dumps({"model": self.model, "prompt": text}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read().decode("utf-8", errors="replace")

    def query(self, prompt: EpisodePrompt) -> str:
        self.calls += 1
        sender = self.transport or self._post
        try:
            return sender(prompt.rendered_text)
        except ProviderError:
            raise
        except Exception as exc:  # timeouts, refused connections, HTTP errors
            raise ProviderError(str(exc)) from exc


@dataclass(frozen=True)
class StrategyContext:
    label: StrategyLabel
    prompt: EpisodePrompt
    fallback: bool = False
    attempts: int = 1


def query_provider(prompt: EpisodePrompt, provider) -> StrategyContext:
    """Ask ``provider`` for a label; retry once, then fall back to the mock rule."""
    attempts = 0
    for _ in range(2):
        attempts += 1
        try:
            label = parse_label(provider.query(prompt))
        except ProviderError as exc:
            log.warning("strategy provider failed: %s", exc)
            continue
        if label is not None:
            return StrategyContext(label, prompt, False, attempts)
        log.warning("unparseable strategy reply from %s", getattr(provider, "name", provider))
    return StrategyContext(mock_strategy(prompt), prompt, True, attempts)


class StrategyEmbeddingTable:
    """Learnable ``4 x d_str`` lookup table, one row per label."""

    def __init__(self, d_str: int = 16, rng: Optional[np.random.Generator] = None, scale: float = 0.1):
        rng = np.random.default_rng() if rng is None else rng
        self.weights = rng.uniform(-scale, scale, size=(len(StrategyLabel), d_str))

    @property
    def d_str(self) -> int:
        return self.weights.shape[1]

    def __getitem__(self, label: StrategyLabel) -> np.ndarray:
        return self.weights[StrategyLabel(label).index]


def embed(label: StrategyLabel, table: StrategyEmbeddingTable) -> np.ndarray:
    return table[label].copy()
