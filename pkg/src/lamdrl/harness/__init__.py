"""Campaign runner, raw-output summaries and the command line."""

from .campaign import run_campaign
from .runner import (EpisodeLog, StepRecord, evaluate_agent, evaluate_heuristic, heuristic_action, run_episode,
                     train_agent)
from .summary import CampaignReport, CsvParseError, emit_plot_data, summarize

__all__ = ["run_campaign", "summarize", "emit_plot_data", "CampaignReport", "CsvParseError", "EpisodeLog",
           "StepRecord", "run_episode", "train_agent", "evaluate_agent", "evaluate_heuristic", "heuristic_action"]
