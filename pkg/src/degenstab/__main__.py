"""Allow `python -m degenstab` as an alternative to the console script."""

import sys

from degenstab.cli import main

if __name__ == "__main__":
    sys.exit(main())
