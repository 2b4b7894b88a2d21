#!/usr/bin/env python3
"""Replicate the simulation studies and print a frequency/ARI table.

Example::

    python scripts/replicate_simulations.py --designs 1 2 3 --replicates 100 --out results/
"""

import argparse
import logging
import time
from pathlib import Path

from spemix.report import replicate_study, study_table, write_study
from spemix.scale import parse_models
from spemix.simulation import SAMPLERS, SimulationConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--designs", type=int, nargs="+", default=[1, 2, 3], choices=[1, 2, 3])
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--models", default="all")
    ap.add_argument("--g-min", type=int, default=1)
    ap.add_argument("--g-max", type=int, default=4)
    ap.add_argument("--sampler", choices=SAMPLERS, default="rejection")
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(asctime)s %(message)s")
    specs = parse_models(args.models)
    for design in args.designs:
        start = time.time()
        config = SimulationConfig.design_config(design, sampler=args.sampler)
        doc = replicate_study(config, args.replicates, args.seed + design, specs,
                              (args.g_min, args.g_max))
        write_study(args.out / f"design{design}", doc)
        print(study_table(doc) + f"elapsed {(time.time() - start) / 60:.1f} min\n", flush=True)


if __name__ == "__main__":
    main()
