"""Campaign execution: every (allocator, scenario, seed) cell trained and evaluated.

Raw outputs are four CSV files with a fixed column order and float format, so
two runs of the same configuration can be compared byte for byte:

``episodes.csv``
    one row per evaluation episode and allocator, KPIs averaged over the horizon;
``steps.csv``
    one row per evaluation step;
``strategies.csv``
    the strategy label drawn for every evaluation episode of the guided agent,
    with its fallback flag, prompt digest and episode sum rate;
``attention.csv``
    per-episode attention share of each feature category for the learners.

The summary (``summary.json``) and plot tables are derived from these files by
:func:`lamdrl.harness.summary.summarize` and never the other way round.
"""

from __future__ import annotations

import csv
import logging
import tempfile
from pathlib import Path
from typing import Callable, Optional

from ..agent import TD3Agent, drl_baseline_mode
from ..config import CampaignConfig, config_hash, dump_config
from ..env import FEATURE_CATEGORIES, LeoDownlinkEnv
from ..strategy import MockProvider, OperatorIntent, RemoteProvider
from .runner import HEURISTICS, EpisodeLog, evaluate_agent, evaluate_heuristic, train_agent
from .summary import CampaignReport, emit_plot_data, fmt, summarize, write_summary

__all__ = ["EPISODE_COLUMNS", "STEP_COLUMNS", "STRATEGY_COLUMNS", "ATTENTION_COLUMNS", "fmt",
           "ensure_writable", "make_provider", "run_campaign"]

log = logging.getLogger(__name__)

EPISODE_COLUMNS = ("allocator", "scenario", "seed", "episode", "label", "fallback", "sum_rate", "jain",
                   "outage", "r_eq", "r_hl", "v_r", "reward")
STEP_COLUMNS = ("allocator", "scenario", "seed", "episode", "step", "t", "sum_rate", "jain", "outage",
                "reward_base", "reward_shaping", "reward")
STRATEGY_COLUMNS = ("scenario", "seed", "episode", "label", "fallback", "prompt_hash", "sum_rate")
ATTENTION_COLUMNS = ("allocator", "scenario", "seed", "episode") + tuple(FEATURE_CATEGORIES)


def ensure_writable(directory) -> Path:
    """Create ``directory`` if needed and prove a file can be written there."""
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".probe-"):
            pass
    except OSError as exc:
        raise OSError(f"output directory {path} is not writable: {exc}") from exc
    return path


def make_provider(kind: str):
    if kind == "mock":
        return MockProvider()
    if kind == "remote":
        return RemoteProvider.from_env()
    raise ValueError(f"unknown provider {kind!r}")


class _Writer:
    def __init__(self, path: Path, columns):
        self.fh = open(path, "w", newline="")
        self.out = csv.writer(self.fh, lineterminator="\n")
        self.out.writerow(columns)

    def row(self, *values) -> None:
        self.out.writerow([fmt(v) for v in values])

    def close(self) -> None:
        self.fh.close()


def _checkpoint_path(directory: Path, allocator: str, scenario: str, seed: int) -> Path:
    return directory / f"{allocator}-{scenario}-seed{seed}.npz"


def _learner(config: CampaignConfig, allocator: str, scenario: str, seed: int, provider,
             checkpoint_dir: Optional[Path], resume: bool) -> tuple[TD3Agent, Optional[object]]:
    sc = config.scenario
    mode = drl_baseline_mode(allocator == "drl")
    agent = TD3Agent(sc.num_users, sc.agent, sc.reward.discount, seed=seed, **mode)
    env_provider = provider if mode["guided"] else None
    intent = OperatorIntent(config.intent) if config.intent else None
    digest = config_hash(config)
    ckpt = None if checkpoint_dir is None else _checkpoint_path(checkpoint_dir, allocator, scenario, seed)
    if resume and ckpt is not None and ckpt.exists():
        agent.load(ckpt, digest)
        log.info("resumed %s/%s/seed %d from %s", allocator, scenario, seed, ckpt)
    else:
        env = LeoDownlinkEnv(sc, scenario, seed, env_provider, "train", intent)
        train_agent(agent, env, config.episodes_train)
        if ckpt is not None:
            agent.save(ckpt, digest)
    return agent, env_provider


def _evaluate(config: CampaignConfig, allocator: str, scenario: str, seed: int, provider,
              checkpoint_dir: Optional[Path], resume: bool) -> list[EpisodeLog]:
    sc = config.scenario
    if allocator in HEURISTICS:
        env = LeoDownlinkEnv(sc, scenario, seed, None, "eval")
        return evaluate_heuristic(allocator, env, config.episodes_eval)
    agent, env_provider = _learner(config, allocator, scenario, seed, provider, checkpoint_dir, resume)
    intent = OperatorIntent(config.intent) if config.intent else None
    env = LeoDownlinkEnv(sc, scenario, seed, env_provider, "eval", intent)
    return evaluate_agent(agent, env, config.episodes_eval, with_attention=config.log_attention)


def run_campaign(config: CampaignConfig, output_dir=None, checkpoint_dir=None, resume: bool = False,
                 provider_factory: Callable[[str], object] = make_provider,
                 progress: Optional[Callable[[str], None]] = None) -> CampaignReport:
    """Train and evaluate every configured cell, write raw CSVs and the summary.

    ``checkpoint_dir`` stores one ``.npz`` per trained learner; with ``resume``
    an existing checkpoint written under the same configuration replaces
    training.
    """
    out = ensure_writable(output_dir or config.output_dir)
    ckpt_dir = None if checkpoint_dir is None else ensure_writable(checkpoint_dir)
    (out / "config.yaml").write_text(dump_config(config))

    writers = {
        "episodes": _Writer(out / "episodes.csv", EPISODE_COLUMNS),
        "steps": _Writer(out / "steps.csv", STEP_COLUMNS),
        "strategies": _Writer(out / "strategies.csv", STRATEGY_COLUMNS),
        "attention": _Writer(out / "attention.csv", ATTENTION_COLUMNS),
    }
    try:
        for seed in config.seeds:
            for scenario in config.scenarios:
                for allocator in config.allocators:
                    if progress is not None:
                        progress(f"{allocator} / {scenario} / seed {seed}")
                    # a fresh provider per cell keeps query counts and any
                    # provider-side state independent of the cell order
                    provider = provider_factory(config.provider) if allocator == "lamdrl" else None
                    logs = _evaluate(config, allocator, scenario, seed, provider, ckpt_dir, resume)
                    _write_cell(writers, allocator, scenario, seed, logs)
    finally:
        for w in writers.values():
            w.close()

    report = summarize(out)
    write_summary(report, out / "summary.json")
    emit_plot_data(report, out)
    return report


def _write_cell(writers: dict, allocator: str, scenario: str, seed: int, logs: list[EpisodeLog]) -> None:
    for ep in logs:
        if ep.fallback:
            log.warning("episode %d of %s/%s/seed %d used the mock fallback strategy",
                        ep.index, allocator, scenario, seed)
        writers["episodes"].row(allocator, scenario, seed, ep.index, ep.label, ep.fallback,
                                *(ep.mean(k) for k in ("sum_rate", "jain", "outage", "r_eq", "r_hl", "v_r",
                                                       "reward")))
        for k, s in enumerate(ep.steps):
            writers["steps"].row(allocator, scenario, seed, ep.index, k, s.t, s.sum_rate, s.jain, s.outage,
                                 s.reward_base, s.reward_shaping, s.reward)
        if ep.label is not None:
            writers["strategies"].row(scenario, seed, ep.index, ep.label, ep.fallback, ep.prompt_hash,
                                      ep.mean("sum_rate"))
        if ep.attention is not None:
            writers["attention"].row(allocator, scenario, seed, ep.index, *(float(x) for x in ep.attention))
