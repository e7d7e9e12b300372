"""Entrypoint running the lowrank-mc command line."""

import sys

from lowrank_mc import main

if __name__ == "__main__":
    sys.exit(main())
