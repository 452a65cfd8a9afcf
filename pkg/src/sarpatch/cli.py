"""Command-line entry point.

Every subcommand takes --config/--seed/--jobs, runs one pipeline stage,
and prints its JSON report to stdout (or --out). Exit codes: 0 success,
1 runtime or per-item failure, 2 configuration problems.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, default_config, load_config, save_config
from .pipeline import (
    PipelineError,
    run_downsample,
    run_labels,
    run_losscheck,
    run_metrics,
    run_patchify,
    run_sample,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

_STAGES = {
    "downsample": run_downsample,
    "labels": run_labels,
    "patchify": run_patchify,
    "sample": run_sample,
    "loss-check": run_losscheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarpatch",
        description="SAR scene preparation, balanced patch sampling, and "
                    "training-kernel checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="INI config file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--out", help="write the JSON report here instead of stdout")

    for name, help_text in (
        ("downsample", "halve scene resolution by block averaging"),
        ("labels", "mosaic label tiles onto each scene grid and mask them"),
        ("patchify", "calibrate to dB and cut valid patch windows"),
        ("sample", "draw balanced locations and select/split patches"),
        ("loss-check", "evaluate loss kernels and verify gradients"),
    ):
        add_common(sub.add_parser(name, help=help_text))

    metrics = sub.add_parser(
        "metrics", help="confusion-matrix accuracy/IoU over prediction rasters"
    )
    add_common(metrics)
    metrics.add_argument("--pred-dir", required=True, help="predicted label rasters")
    metrics.add_argument("--gt-dir", required=True, help="ground-truth label rasters")

    init = sub.add_parser("init-config", help="write the default config file")
    init.add_argument("path", help="destination INI path")
    return parser


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "init-config":
        save_config(default_config(), args.path)
        return EXIT_OK

    try:
        cfg = load_config(args.config) if args.config else default_config()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.jobs < 1:
        print("config error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "metrics":
            report, ok = run_metrics(
                cfg, args.seed, args.jobs, args.pred_dir, args.gt_dir
            )
        else:
            report, ok = _STAGES[args.command](cfg, args.seed, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    _emit(report, args.out)
    return EXIT_OK if ok else EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
