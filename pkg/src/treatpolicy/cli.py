"""Command-line interface.

Exit codes: 0 success, 2 config error, 3 data/schema error, 4 stage failure.
All state lives in the config file and the output directory, so any
subcommand can rerun its stage against artifacts produced earlier.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .errors import ConfigError, DataError, SchemaError, TreatPolicyError
from .pipeline import run_pipeline, run_stages

_STAGE_HELP = (
    ("ingest", "parse, impute, and split the input table"),
    ("simulate", "stress-test the model menu on synthetic outcomes"),
    ("fit-propensity", "fit the treatment scorer and the overlap report"),
    ("fit-cate", "fit the effect-model menu with the held-out error gate"),
    ("defer", "decide which rows get no recommendation, and why"),
    ("evaluate", "value every candidate policy on held-out rows"),
    ("report", "render figures and the index from existing artifacts"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treatpolicy",
        description="Learn, stress-test, and evaluate treatment policies with deferral.",
        epilog=(
            "Config precedence: built-in defaults < config file < --set overrides. "
            "Values after --set parse as JSON (bare words stay strings)."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the JSON pipeline config")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key by dotted path, e.g. "
            "--set evaluation.bootstrap_b=200 (repeatable, wins over the file)",
        )
        p.add_argument("--output-dir", help="shorthand for --set output_dir=...")
        return p

    add("validate-config", "resolve the config, print its echo and hash, run nothing")
    for name, help_text in _STAGE_HELP:
        add(name, help_text)
    add("all", "run every configured stage in order")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.overrides)
        if args.output_dir:
            overrides.append(f"output_dir={json.dumps(args.output_dir)}")
        cfg = load_config(args.config, overrides)
        if args.command == "validate-config":
            print(f"config hash: {cfg.hash}")
            print(json.dumps(cfg.echo, indent=2, sort_keys=True))
            return 0
        if args.command == "all":
            manifest = run_pipeline(cfg)
        else:
            manifest = run_stages(cfg, [args.command])
        for w in manifest.warnings:
            print(f"warning [{w['stage']}/{w['kind']}]: {w['message']}", file=sys.stderr)
        print(
            f"{args.command}: ok - {len(manifest.artifacts)} artifact(s) under {cfg.out_dir}"
        )
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except TreatPolicyError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
