"""Statistics recomputed from a campaign's raw CSV files.

Nothing here depends on in-memory state from the run: ``summarize(raw_dir)``
rebuilds the full report from the CSVs, so a shipped ``summary.json`` can be
regenerated and diffed at any time.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..env import FEATURE_CATEGORIES

__all__ = ["CsvParseError", "CampaignReport", "sample_stats", "moving_average", "confidence_interval",
           "read_table", "fmt", "summarize", "write_summary", "emit_plot_data", "KPI_METRICS", "WINDOW"]

log = logging.getLogger(__name__)

KPI_METRICS = ("sum_rate", "jain", "outage", "r_eq", "r_hl")
WINDOW = 10
Z_95 = 1.959963984540054

_EPISODE_TYPES = {"allocator": str, "scenario": str, "seed": int, "episode": int, "label": str,
                  "fallback": int, "sum_rate": float, "jain": float, "outage": float, "r_eq": float,
                  "r_hl": float, "v_r": float, "reward": float}
_STRATEGY_TYPES = {"scenario": str, "seed": int, "episode": int, "label": str, "fallback": int,
                   "prompt_hash": str, "sum_rate": float}
_ATTENTION_TYPES = {"allocator": str, "scenario": str, "seed": int, "episode": int,
                    **{name: float for name in FEATURE_CATEGORIES}}


class CsvParseError(ValueError):
    """A raw CSV row that does not match its schema; names file and line."""


def read_table(path, types: dict) -> list[dict]:
    """Parse a CSV whose header must list exactly the keys of ``types``."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}:1: empty file, expected a header") from None
        if tuple(header) != tuple(types):
            raise CsvParseError(f"{path}:1: header {header} does not match {list(types)}")
        rows = []
        for row in reader:
            line = reader.line_num
            if len(row) != len(header):
                raise CsvParseError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            parsed = {}
            for (name, kind), text in zip(types.items(), row):
                if kind is str:
                    parsed[name] = text
                    continue
                try:
                    value = kind(text)
                except ValueError:
                    raise CsvParseError(f"{path}:{line}: column {name!r} has invalid value {text!r}") from None
                if kind is float and not np.isfinite(value):
                    raise CsvParseError(f"{path}:{line}: column {name!r} is not finite")
                parsed[name] = value
            rows.append(parsed)
    return rows


def sample_stats(values) -> dict:
    """Mean and sample (n - 1) standard deviation; the std of one value is 0."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no values")
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return {"mean": float(np.mean(x)), "std": std, "n": int(x.size)}


def moving_average(values, window: int = WINDOW) -> tuple[np.ndarray, np.ndarray]:
    """Trailing mean and standard deviation over up to ``window`` points.

    The first ``window - 1`` entries average over whatever history exists.
    """
    x = np.asarray(values, dtype=float)
    mean = np.empty_like(x)
    std = np.empty_like(x)
    for i in range(x.size):
        chunk = x[max(0, i - window + 1): i + 1]
        mean[i] = chunk.mean()
        std[i] = chunk.std()
    return mean, std


def confidence_interval(values) -> tuple[float, float, float]:
    """Mean with a 95 % normal-approximation interval."""
    s = sample_stats(values)
    half = Z_95 * s["std"] / np.sqrt(s["n"])
    return s["mean"], s["mean"] - half, s["mean"] + half


@dataclass
class CampaignReport:
    """Derived statistics of one campaign, keyed by ``"allocator/scenario"``."""

    cells: dict = field(default_factory=dict)
    strategy_usage: dict = field(default_factory=dict)
    strategy_trace: list = field(default_factory=list)
    attention: dict = field(default_factory=dict)
    fallbacks: int = 0

    @property
    def allocators(self) -> list[str]:
        return sorted({k.split("/")[0] for k in self.cells})

    @property
    def scenarios(self) -> list[str]:
        return sorted({k.split("/")[1] for k in self.cells})

    def mean(self, allocator: str, scenario: str, metric: str = "sum_rate") -> float:
        return self.cells[f"{allocator}/{scenario}"][metric]["mean"]

    def to_dict(self) -> dict:
        return {"cells": self.cells, "strategy_usage": self.strategy_usage, "attention": self.attention,
                "fallbacks": self.fallbacks}


def _group(rows, *keys) -> dict:
    out: dict = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


def summarize(raw_dir) -> CampaignReport:
    raw = Path(raw_dir)
    episodes = read_table(raw / "episodes.csv", _EPISODE_TYPES)
    report = CampaignReport()
    for (alloc, scen), rows in sorted(_group(episodes, "allocator", "scenario").items()):
        report.cells[f"{alloc}/{scen}"] = {m: sample_stats([r[m] for r in rows]) for m in KPI_METRICS}
    report.fallbacks = sum(r["fallback"] for r in episodes)

    strategies_path = raw / "strategies.csv"
    strategies = read_table(strategies_path, _STRATEGY_TYPES) if strategies_path.exists() else []
    for (scen,), rows in sorted(_group(strategies, "scenario").items()):
        labels = [r["label"] for r in rows]
        report.strategy_usage[scen] = {lab: labels.count(lab) for lab in sorted(set(labels))}
    for (scen, seed), rows in sorted(_group(strategies, "scenario", "seed").items()):
        rows = sorted(rows, key=lambda r: r["episode"])
        ma, ms = moving_average([r["sum_rate"] for r in rows])
        for r, m, s in zip(rows, ma, ms):
            report.strategy_trace.append({"scenario": scen, "seed": seed, "episode": r["episode"],
                                          "label": r["label"], "sum_rate": r["sum_rate"],
                                          "moving_average": float(m), "moving_std": float(s)})

    attention_path = raw / "attention.csv"
    attention = read_table(attention_path, _ATTENTION_TYPES) if attention_path.exists() else []
    for (alloc, scen), rows in sorted(_group(attention, "allocator", "scenario").items()):
        cell = {}
        for name in FEATURE_CATEGORIES:
            mean, lo, hi = confidence_interval([r[name] for r in rows])
            cell[name] = {"mean": mean, "ci_low": lo, "ci_high": hi, "n": len(rows)}
        report.attention[f"{alloc}/{scen}"] = cell
    return report


def write_summary(report: CampaignReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def fmt(value) -> str:
    """Canonical text form of a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    if value is None:
        return ""
    return str(value)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def _omit(directory: Path, name: str, reason: str) -> Path:
    note = directory / f"{name}.omitted.txt"
    note.write_text(reason + "\n")
    log.info("%s omitted: %s", name, reason)
    return note


def emit_plot_data(report: CampaignReport, directory) -> dict[str, Optional[Path]]:
    """Write one table per figure analog; returns name -> path (``None`` when omitted).

    ``plot_kpi.csv`` holds grouped-bar data (mean and std per allocator, scenario
    and metric).  ``plot_strategy.csv`` lists every guided episode's label and
    sum rate with the trailing moving average.  ``plot_attention.csv`` has one
    row per feature category and mean/CI columns per learner cell.
    """
    directory = Path(directory)
    written: dict[str, Optional[Path]] = {}

    kpi_rows = [(alloc, scen, m, s["mean"], s["std"], s["n"])
                for key, metrics in report.cells.items() for alloc, scen in [key.split("/")]
                for m, s in metrics.items()]
    path = directory / "plot_kpi.csv"
    _write_rows(path, ("allocator", "scenario", "metric", "mean", "std", "n"), kpi_rows)
    written["kpi"] = path

    if report.strategy_trace:
        path = directory / "plot_strategy.csv"
        cols = ("scenario", "seed", "episode", "label", "sum_rate", "moving_average", "moving_std")
        _write_rows(path, cols, [tuple(r[c] for c in cols) for r in report.strategy_trace])
        written["strategy"] = path
    else:
        _omit(directory, "plot_strategy", "no strategy labels were logged (no guided agent in this campaign)")
        written["strategy"] = None

    if report.attention:
        cells = sorted(report.attention)
        header = ["category"] + [f"{c}:{k}" for c in cells for k in ("mean", "ci_low", "ci_high")]
        rows = [[name] + [report.attention[c][name][k] for c in cells for k in ("mean", "ci_low", "ci_high")]
                for name in FEATURE_CATEGORIES]
        path = directory / "plot_attention.csv"
        _write_rows(path, header, rows)
        written["attention"] = path
    else:
        _omit(directory, "plot_attention", "no attention was logged (no learning agent in this campaign)")
        written["attention"] = None
    return written
