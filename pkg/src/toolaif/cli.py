"""Command-line entry point: ``toolaif run|oracle|validate``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .engine import AgentConfig
from .env import Location, oracle_optimal_steps
from .experiments import ExperimentReport, run_experiment_1, run_experiment_2, run_experiment_3
from .io import ConfigError, IoError, RunConfig, emit_outputs, fill_defaults, parse_config, validate_config

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4


def run_config(cfg: RunConfig) -> ExperimentReport:
    cfg = fill_defaults(cfg)
    agent_cfg = AgentConfig(gamma=cfg.gamma, eta=cfg.eta, action_selection=cfg.selection)
    if cfg.experiment == 1:
        return run_experiment_1(agent_cfg, base_seed=cfg.base_seed, variant=cfg.model_variant)
    if cfg.experiment == 2:
        return run_experiment_2(cfg.final_corner, cfg.trials, cfg.base_seed, agent_cfg, cfg.alpha_init,
                                variant=cfg.model_variant)
    return run_experiment_3(cfg.final_corner, cfg.utility_only, cfg.trials, cfg.base_seed, agent_cfg,
                            cfg.alpha_init)


def _load(path: str) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"error: config file not found: {path}")
    return parse_config(p.read_text(encoding="utf-8"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toolaif", description="Active-inference tool-use experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment described by a config file")
    run.add_argument("config_path", nargs="?", help="config file (same as --config)")
    run.add_argument("--config", dest="config_flag")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, help="base seed (overrides base_seed)")
    run.add_argument("--trials", type=int, help="number of trials (overrides num_trials)")
    run.add_argument("--utility-only", action="store_true", help="ablate information gain on the final block")
    val = sub.add_parser("validate", help="parse and validate a config file")
    val.add_argument("config_path", nargs="?")
    val.add_argument("--config", dest="config_flag")
    sub.add_parser("oracle", help="print the breadth-first optimal step counts")
    return parser


def _config_path(args) -> Optional[str]:
    return args.config_flag or args.config_path


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    if args.command == "oracle":
        for loc in Location:
            print(f"{loc.value}\t{oracle_optimal_steps(loc)}")
        return EXIT_OK

    path = _config_path(args)
    if path is None:
        print("error: a config file is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _load(path)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        for line in exc.errors:
            print(f"{path}: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        print(f"{path}: ok")
        return EXIT_OK

    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.trials is not None:
        overrides["num_trials"] = args.trials
    if args.utility_only:
        overrides["utility_only"] = True
    if args.out is not None:
        overrides["output_dir"] = args.out
    cfg = replace(cfg, **overrides)
    problems = validate_config(cfg)
    if problems:
        for line in problems:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_CONFIG

    report = run_config(cfg)
    try:
        written = emit_outputs(report, cfg.output_dir, cfg)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for name in sorted(written):
        print(written[name])
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
