"""
ellreg command-line entry point

Usage:
    python ellreg.py integrate --tau 0+2i "wp(1-2)*wp(2-3)*wp(3-1)"
"""

import sys

from cli import run

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
