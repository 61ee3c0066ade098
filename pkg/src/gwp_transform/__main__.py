#!/usr/bin/env python3
"""
Main entry point for gwp_transform module when run with python -m gwp_transform
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
