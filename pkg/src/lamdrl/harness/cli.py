"""Command line: ``python -m lamdrl run ...`` and ``python -m lamdrl summarize ...``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from typing import Optional, Sequence

from ..config import ConfigurationError, config_from_dict, dump_config, load_config
from .campaign import run_campaign
from .summary import CsvParseError, emit_plot_data, summarize, write_summary

__all__ = ["build_parser", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lamdrl", description="LEO downlink allocation campaigns.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate allocators, write raw CSVs and a summary")
    run.add_argument("--config", metavar="FILE", help="YAML configuration (desk profile defaults when omitted)")
    run.add_argument("--allocator", action="append", metavar="X",
                     help="restrict to this allocator; repeatable")
    run.add_argument("--scenario", choices=("nominal", "extreme"), help="restrict to one weather scenario")
    run.add_argument("--seed", type=int, action="append", metavar="N", help="campaign seed; repeatable")
    run.add_argument("--provider", choices=("mock", "remote"))
    run.add_argument("--out", metavar="DIR", help="output directory")
    run.add_argument("--checkpoint", metavar="DIR", help="save trained learners here")
    run.add_argument("--resume", action="store_true", help="load matching checkpoints instead of training")
    run.add_argument("--print-config", action="store_true",
                     help="print the fully resolved configuration, defaults included, and exit")

    summ = sub.add_parser("summarize", help="recompute summary and plot tables from raw CSVs")
    summ.add_argument("--in", dest="input", required=True, metavar="DIR")
    return parser


def _resolve(args) -> "CampaignConfig":  # noqa: F821
    cfg = load_config(args.config) if args.config else config_from_dict({})
    changes = {}
    if args.allocator:
        changes["allocators"] = tuple(args.allocator)
    if args.scenario:
        changes["scenarios"] = (args.scenario,)
    if args.seed:
        changes["seeds"] = tuple(args.seed)
    if args.provider:
        changes["provider"] = args.provider
    if args.out:
        changes["output_dir"] = args.out
    try:
        return dataclasses.replace(cfg, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = _resolve(args)
            if args.print_config:
                sys.stdout.write(dump_config(cfg))
                return 0
            if args.resume and not args.checkpoint:
                raise ConfigurationError("--resume needs --checkpoint DIR")
            report = run_campaign(cfg, checkpoint_dir=args.checkpoint, resume=args.resume,
                                  progress=lambda msg: print(f"[run] {msg}", file=sys.stderr, flush=True))
            for key in sorted(report.cells):
                s = report.cells[key]
                print(f"{key:22s} sum_rate {s['sum_rate']['mean'] / 1e6:9.3f} Mbps "
                      f"(sd {s['sum_rate']['std'] / 1e6:.3f})  jain {s['jain']['mean']:.3f}  "
                      f"outage {s['outage']['mean']:.3f}")
            print(f"wrote {cfg.output_dir}")
            return 0
        report = summarize(args.input)
        write_summary(report, f"{args.input}/summary.json")
        emit_plot_data(report, args.input)
        print(f"summarized {len(report.cells)} cells in {args.input}")
        return 0
    except (ConfigurationError, CsvParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
