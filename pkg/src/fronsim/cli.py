"""Command-line interface.

Subcommands: ``run`` (single episode), ``matrix`` (variant x seed grid),
``warmstart`` (fit the gate parameter file), ``replay`` (recompute metrics
from a JSON-lines log), and ``emit-plot-data`` (per-step coverage curves as
CSV). Exit status is 0 on clean completion and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from typing import Optional

from . import matrix as matrix_mod
from . import metrics as metrics_mod
from .config import RunConfig, apply_overrides, load_config
from .episode import run_episode_with_metrics
from .errors import ConfigurationError
from .gate import save_gate_file
from .variants import Variant, parse_variant
from .warmstart import collect_training_pairs, warm_start_fit


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override any config key (repeatable)",
    )
    parser.add_argument("--width", type=int)
    parser.add_argument("--height", type=int)
    parser.add_argument("--robots", type=int)
    parser.add_argument("--obstacles", type=int, help="dynamic obstacle count")
    parser.add_argument("--density", type=float, help="static obstacle density p_occ")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--gate-file", help="warm-start gate parameter file")


def _build_config(args: argparse.Namespace, extra: list[str]) -> RunConfig:
    config = RunConfig()
    if args.config:
        config = load_config(args.config, config)
    overrides = list(args.overrides)
    for item in extra:
        # Bare --section.key=value flags are treated like --set arguments.
        if item.startswith("--") and "=" in item and "." in item.split("=", 1)[0]:
            overrides.append(item[2:])
        else:
            raise ConfigurationError(f"unrecognized argument {item!r}")
    apply_overrides(config, overrides)
    shortcuts = {
        "width": ("scenario", "width"),
        "height": ("scenario", "height"),
        "robots": ("scenario", "n_robots"),
        "obstacles": ("scenario", "n_dynamic"),
        "density": ("scenario", "p_occ"),
        "seed": ("scenario", "seed"),
    }
    for arg, (section, key) in shortcuts.items():
        value = getattr(args, arg, None)
        if value is not None:
            setattr(getattr(config, section), key, value)
    config.validate()
    return config


def _variant(args: argparse.Namespace) -> Variant:
    variant = parse_variant(args.variant)
    if getattr(args, "gate_file", None):
        variant = dataclasses.replace(variant, gate_file=args.gate_file)
    return variant


def _cmd_run(args: argparse.Namespace, extra: list[str]) -> int:
    config = _build_config(args, extra)
    variant = _variant(args)
    record, m = run_episode_with_metrics(config, variant, timing=True)
    if args.log:
        with open(args.log, "w", encoding="ascii", newline="\n") as fh:
            metrics_mod.write_jsonl(record, fh)
    print(json.dumps(dataclasses.asdict(m), sort_keys=True))
    return 0


def _parse_seeds(spec: str) -> list[int]:
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(s) for s in spec.split(",") if s]


def _cmd_matrix(args: argparse.Namespace, extra: list[str]) -> int:
    config = _build_config(args, extra)
    variants = []
    for tag in args.variants.split(","):
        v = parse_variant(tag)
        if args.gate_file:
            v = dataclasses.replace(v, gate_file=args.gate_file)
        variants.append(v)
    seeds = _parse_seeds(args.seeds)
    result = matrix_mod.run_matrix(
        config, variants, seeds, workers=args.workers, timing=args.timing
    )
    csv_text = matrix_mod.to_csv(result)
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_warmstart(args: argparse.Namespace, extra: list[str]) -> int:
    config = _build_config(args, extra)
    seeds = _parse_seeds(args.seeds)
    features, labels = collect_training_pairs(config, seeds, min_pairs=args.min_pairs)
    fit = warm_start_fit(features, labels, l2=config.gate.l2)
    save_gate_file(args.out, fit.w, fit.b)
    print(
        json.dumps(
            {
                "pairs": len(labels),
                "iterations": fit.iterations,
                "loss": fit.final_loss,
                "accuracy": fit.accuracy,
                "out": args.out,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_replay(args: argparse.Namespace, extra: list[str]) -> int:
    if extra:
        raise ConfigurationError(f"unrecognized arguments: {extra}")
    with open(args.log, "r", encoding="ascii") as fh:
        record = metrics_mod.read_jsonl(fh)
    m = metrics_mod.episode_metrics(record, alpha=args.alpha, lambda_omega=args.lambda_omega)
    print(json.dumps(dataclasses.asdict(m), sort_keys=True))
    return 0


def _cmd_emit_plot_data(args: argparse.Namespace, extra: list[str]) -> int:
    if extra:
        raise ConfigurationError(f"unrecognized arguments: {extra}")
    lines = ["variant,seed,t,newly_known,known_cells"]
    for path in args.logs:
        with open(path, "r", encoding="ascii") as fh:
            record = metrics_mod.read_jsonl(fh)
        known = 0
        for step in record.steps:
            known += step.newly_known
            lines.append(
                f"{record.variant},{record.seed},{step.t},{step.newly_known},{known}"
            )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fronsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single episode")
    _add_common(p_run)
    p_run.add_argument("--variant", default="full")
    p_run.add_argument("--log", help="write the episode as JSON lines")
    p_run.set_defaults(func=_cmd_run)

    p_matrix = sub.add_parser("matrix", help="run a variant x seed grid")
    _add_common(p_matrix)
    p_matrix.add_argument("--variants", default="full", help="comma-separated variant tags")
    p_matrix.add_argument("--seeds", default="0:10", help="lo:hi range or comma list")
    p_matrix.add_argument("--workers", type=int, default=None)
    p_matrix.add_argument("--out", help="CSV output path (default stdout)")
    p_matrix.add_argument(
        "--timing",
        action="store_true",
        help="record real wall times (makes the CSV non-reproducible)",
    )
    p_matrix.set_defaults(func=_cmd_matrix)

    p_warm = sub.add_parser("warmstart", help="fit the warm-start gate file")
    _add_common(p_warm)
    p_warm.add_argument("--seeds", default="0:50")
    p_warm.add_argument("--min-pairs", type=int, default=500)
    p_warm.add_argument("--out", required=True)
    p_warm.set_defaults(func=_cmd_warmstart)

    p_replay = sub.add_parser("replay", help="recompute metrics from a log")
    p_replay.add_argument("--log", required=True)
    p_replay.add_argument("--alpha", type=float, default=1.0)
    p_replay.add_argument("--lambda-omega", type=float, default=0.1, dest="lambda_omega")
    p_replay.set_defaults(func=_cmd_replay)

    p_plot = sub.add_parser("emit-plot-data", help="coverage curves from logs")
    p_plot.add_argument("logs", nargs="+")
    p_plot.add_argument("--out")
    p_plot.set_defaults(func=_cmd_emit_plot_data)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
