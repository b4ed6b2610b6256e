"""
pycorv - Entry point for running as a module

Usage:
    python -m pycorv run configs/density_gamma.toml
"""

import sys

from pycorv.cli import main

if __name__ == "__main__":
    sys.exit(main())
