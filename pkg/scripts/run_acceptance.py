#!/usr/bin/env python3
"""Run the acceptance suite and print one line per criterion.

``--quick`` skips the two simulation studies; ``--full`` adds the
100-replicate study.
"""

import argparse
import os
import sys
from pathlib import Path

import pytest


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true")
    mode.add_argument("--full", action="store_true")
    args = ap.parse_args(argv)
    if args.full:
        os.environ["SPE_MIX_FULL_ACCEPTANCE"] = "1"
    tests = Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"
    opts = [str(tests), "-q", "-rxs"] + (["-m", "not slow"] if args.quick else [])
    return pytest.main(opts)


if __name__ == "__main__":
    sys.exit(main())
