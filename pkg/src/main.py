#!/usr/bin/env python3
"""
Main entry point for WrenchLab

Runs one command of the grasp-robustness CLI:

    python -m src.main metrics grasp.json
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cli import main as cli_main


def main():
    """Main entry point."""
    try:
        sys.exit(cli_main())
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()
