"""Command-line front end: ``train``, ``baseline``, ``sweep`` and
``report`` subcommands.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .env import ConfigError
from .experiments import (
    ExperimentSpec,
    PRESETS,
    load_config,
    preset_specs,
    report,
    run_experiment,
    summarize,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML experiment file (defaults apply if omitted)")
    parser.add_argument(
        "--seed",
        type=int,
        action="append",
        help="root seed; repeat the flag for multiple seeds (overrides the config)",
    )
    parser.add_argument("--episodes", type=int, help="episodes per run (overrides the config)")
    parser.add_argument("--outdir", help="directory for CSV/checkpoint artifacts")
    parser.add_argument("--window", type=int, help="moving-average window (episodes)")
    parser.add_argument(
        "--trace", action="store_true", help="also write per-slot trace CSVs"
    )
    parser.add_argument(
        "--workers", type=int, help="parallel worker processes for the run cells"
    )


def _spec_from_args(args: argparse.Namespace, policy: str) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec()
    overrides: dict = {"policy": policy}
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    if args.outdir is not None:
        overrides["output_dir"] = args.outdir
    if args.window is not None:
        overrides["window"] = args.window
    if args.trace:
        overrides["record_trace"] = True
    if args.workers is not None:
        overrides["workers"] = args.workers
    return replace(spec, **overrides)


def _print_summary(result) -> None:
    print("sweep_value  seeds  episodes  final_mean  final_stderr")
    for row in summarize(result):
        value = "-" if row["sweep_value"] is None else row["sweep_value"]
        print(
            f"{value!s:>11}  {row['seeds']:>5}  {row['episodes']:>8}  "
            f"{row['final_mean']:>10.4f}  {row['final_stderr']:>12.4f}"
        )


def _cmd_train(args: argparse.Namespace) -> None:
    _print_summary(run_experiment(_spec_from_args(args, "dqn")))


def _cmd_baseline(args: argparse.Namespace) -> None:
    _print_summary(run_experiment(_spec_from_args(args, "random")))


def _cmd_sweep(args: argparse.Namespace) -> None:
    if bool(args.preset) == bool(args.config):
        raise ConfigError("sweep needs exactly one of --preset or --config")
    if args.preset:
        specs = preset_specs(
            args.preset,
            seeds=tuple(args.seed) if args.seed else None,
            episodes=args.episodes,
            output_dir=args.outdir,
            workers=args.workers,
        )
    else:
        specs = [_spec_from_args(args, "dqn")]
    for spec in specs:
        if spec.output_dir:
            print(f"== {spec.output_dir}")
        _print_summary(run_experiment(spec))


def _cmd_report(args: argparse.Namespace) -> None:
    print("sweep_value  seeds  episodes  final_mean  final_stderr")
    for row in report(args.outdir, final_window=args.final_window):
        value = "-" if row["sweep_value"] is None else row["sweep_value"]
        print(
            f"{value!s:>11}  {row['seeds']:>5}  {row['episodes']:>8}  "
            f"{row['final_mean']:>10.4f}  {row['final_stderr']:>12.4f}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehcrn",
        description=(
            "Energy-harvesting underlay cognitive-radio simulator with a "
            "deep Q-learning agent"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train the learning agent")
    _add_run_flags(train)
    train.set_defaults(func=_cmd_train)

    baseline = sub.add_parser("baseline", help="roll out the random baseline")
    _add_run_flags(baseline)
    baseline.set_defaults(func=_cmd_baseline)

    sweep = sub.add_parser("sweep", help="run a named recipe or a sweep config")
    sweep.add_argument(
        "--preset", choices=sorted(PRESETS), help="bundled experiment recipe"
    )
    _add_run_flags(sweep)
    sweep.set_defaults(func=_cmd_sweep)

    rep = sub.add_parser("report", help="summarize an output directory")
    rep.add_argument("--outdir", required=True)
    rep.add_argument("--final-window", type=int, default=1000)
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 -- map any failure to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
