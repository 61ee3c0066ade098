#!/usr/bin/env python3
"""
CLI for wave packet transform experiments.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .core.config import GWPTSettings
from .core.errors import ConfigError, NumericalFailureError, WavePacketError
from .experiments.config import ExperimentConfig, preset, preset_names
from .experiments.io import read_records, write_csv
from .experiments.runner import (
    run_fits,
    run_overlap_check,
    run_semi_discrete_check,
    run_summation,
    run_sweep,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def setup_logging(debug: bool = False):
    """Set up logging configuration.

    Args:
        debug: Whether to enable debug logging
    """
    level = logging.DEBUG if debug else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler()],
    )


def load_experiment(args) -> ExperimentConfig:
    """Experiment from --config or --preset, with --out and --samples applied."""
    if getattr(args, "config", None):
        logger.info(f"Using configuration from {args.config}")
        config = ExperimentConfig.load_from_file(args.config)
    elif getattr(args, "preset", None):
        logger.info(f"Using preset {args.preset}")
        config = preset(args.preset)
    else:
        raise ConfigError("provide --config PATH or --preset NAME")
    return config.with_overrides(out=args.out, samples=args.samples)


def load_settings(args) -> GWPTSettings:
    updates = {}
    if getattr(args, "jobs", None) is not None:
        updates["jobs"] = args.jobs
    if getattr(args, "timings", False):
        updates["timings"] = True
    return GWPTSettings.load(**updates)


def output_path(config: ExperimentConfig, settings: GWPTSettings, command: str) -> Optional[str]:
    """Configured output path, else <output_dir>/<name>-<command>.csv, else stdout (None)."""
    if config.output.path:
        return config.output.path
    if settings.output_dir:
        return str(Path(settings.output_dir) / f"{config.name}-{command}.csv")
    return None


def _check_finite(frame: pd.DataFrame, columns: List[str], what: str) -> None:
    if not np.isfinite(frame[columns].to_numpy(dtype=float)).all():
        raise NumericalFailureError(f"non-finite value in {what} output")


def summation_command(args) -> int:
    config = load_experiment(args)
    settings = load_settings(args)
    frame = run_summation(config, settings)
    _check_finite(frame, ["S_direct", "S_expansion"], "summation")
    write_csv(frame, output_path(config, settings, "summation"))
    return EXIT_OK


def sweep_command(args) -> int:
    config = load_experiment(args)
    settings = load_settings(args)
    frame = run_sweep(config, settings)
    write_csv(frame, output_path(config, settings, "sweep"))
    return EXIT_OK


def fit_command(args) -> int:
    frame = run_fits(read_records(args.input))
    write_csv(frame, args.out)
    return EXIT_OK


def overlap_check_command(args) -> int:
    frame = run_overlap_check(trials_1d=args.trials_1d, trials_2d=args.trials_2d, seed=args.seed)
    write_csv(frame, args.out)
    worst = frame["rel_error"].astype(float).max(skipna=True)
    if not np.isfinite(frame[["re_analytic", "im_analytic", "re_oracle", "im_oracle"]].to_numpy()).all():
        raise NumericalFailureError("non-finite overlap")
    if worst > args.tol:
        logger.error(f"Largest relative overlap error {worst:.3e} exceeds {args.tol:.1e}")
        return EXIT_NUMERIC
    logger.info(f"Largest relative overlap error {worst:.3e}")
    return EXIT_OK


def semi_discrete_check_command(args) -> int:
    config = load_experiment(args)
    settings = load_settings(args)
    frame = run_semi_discrete_check(config, settings)
    write_csv(frame, output_path(config, settings, "semi-discrete-check"))
    worst = float(frame["sup_error"].max())
    if worst > args.tol:
        logger.error(f"Semi-discrete identity error {worst:.3e} exceeds {args.tol:.1e}")
        return EXIT_NUMERIC
    return EXIT_OK


def run_command(func: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Run a command handler and map failures to exit codes.

    Configuration files and settings are validated before any computation, so
    ConfigError and pydantic's ValidationError exit with EXIT_CONFIG. Any other
    WavePacketError is raised by the numerics and exits with EXIT_NUMERIC.
    """
    try:
        return func(args)
    except (ConfigError, FileNotFoundError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except ValidationError as e:
        logger.error(f"Invalid settings: {e}")
        return EXIT_CONFIG
    except (NumericalFailureError, ArithmeticError) as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERIC
    except WavePacketError as e:
        logger.error(f"Computation failed: {e}")
        return EXIT_NUMERIC


def add_experiment_arguments(parser: argparse.ArgumentParser, jobs: bool = False) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=str, help="Path to experiment file (YAML or JSON)")
    source.add_argument("--preset", type=str, choices=preset_names(), help="Bundled experiment")
    parser.add_argument("--out", type=str, help="Output CSV path (default: stdout)")
    parser.add_argument("--samples", type=int, help="Sup-norm samples per dimension")
    parser.add_argument("--timings", action="store_true", help="Fill the wall_time_s column")
    if jobs:
        parser.add_argument("--jobs", type=int, help="Number of worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Gaussian wave packet transform CLI")

    # Global arguments
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(title="commands", dest="command", help="Available commands")

    summation_parser = subparsers.add_parser("summation", help="Summation curve S(x) and its expansion")
    add_experiment_arguments(summation_parser)
    summation_parser.set_defaults(func=summation_command)

    sweep_parser = subparsers.add_parser("sweep", help="Reconstruction error sweep over rules and N")
    add_experiment_arguments(sweep_parser, jobs=True)
    sweep_parser.set_defaults(func=sweep_command)

    fit_parser = subparsers.add_parser("fit", help="Convergence fits of a sweep CSV")
    fit_parser.add_argument("input", type=str, help="CSV written by the sweep command")
    fit_parser.add_argument("--out", type=str, help="Output CSV path (default: stdout)")
    fit_parser.set_defaults(func=fit_command)

    overlap_parser = subparsers.add_parser("overlap-check", help="Analytic overlaps against the oracle")
    overlap_parser.add_argument("--trials-1d", type=int, default=200, help="Random pairs with d=1")
    overlap_parser.add_argument("--trials-2d", type=int, default=50, help="Random pairs with d=2")
    overlap_parser.add_argument("--seed", type=int, default=0, help="Random seed")
    overlap_parser.add_argument("--tol", type=float, default=1e-6, help="Relative error tolerance")
    overlap_parser.add_argument("--out", type=str, help="Output CSV path (default: stdout)")
    overlap_parser.set_defaults(func=overlap_check_command)

    semi_parser = subparsers.add_parser(
        "semi-discrete-check", help="Exactness of the semi-discrete representation"
    )
    add_experiment_arguments(semi_parser)
    semi_parser.add_argument("--tol", type=float, default=1e-9, help="Sup error tolerance")
    semi_parser.set_defaults(func=semi_discrete_check_command)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the gwpt CLI.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    # Set up logging
    setup_logging(args.debug if hasattr(args, "debug") else False)

    if not args.command:
        parser.print_help()
        return EXIT_OK
    return run_command(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
