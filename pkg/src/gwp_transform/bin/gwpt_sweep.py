#!/usr/bin/env python3
"""
Entry point script for gwpt-sweep command.
"""

import argparse
import sys
from typing import List, Optional

from gwp_transform.cli import add_experiment_arguments, run_command, setup_logging, sweep_command


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for gwpt-sweep command.
    """
    # Create a parser specifically for the sweep command
    parser = argparse.ArgumentParser(prog="gwpt-sweep", description="Reconstruction error sweep")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    add_experiment_arguments(parser, jobs=True)

    args = parser.parse_args(argv)

    # Set up logging
    setup_logging(args.debug)

    # Call the sweep command directly
    return run_command(sweep_command, args)


if __name__ == "__main__":
    sys.exit(main())
