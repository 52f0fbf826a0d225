"""Entry point for ``python -m insider_lab``."""

import sys

from insider_lab.cli import main

if __name__ == "__main__":
    sys.exit(main())
