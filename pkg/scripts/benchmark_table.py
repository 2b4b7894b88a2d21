#!/usr/bin/env python3
"""Fit labelled benchmark CSV files and print a comparison table.

Each file needs a label column.  Data are standardized before fitting.
Example::

    python scripts/benchmark_table.py wine.csv:Type iris.csv:Species --g-max 5
"""

import argparse
import logging

from spemix.data import load_csv, make_split, standardize
from spemix.selection import sweep


def _row(name, report):
    b = report.best_entry
    return f"{name:<16} {b.spec.name:<6} {b.G:>2} {b.bic:>12.2f} {b.ari:>6.3f}"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("files", nargs="+", metavar="FILE:LABEL_COLUMN")
    ap.add_argument("--models", default="all")
    ap.add_argument("--g-min", type=int, default=1)
    ap.add_argument("--g-max", type=int, default=4)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--semi-supervised", type=float, metavar="FRACTION",
                    help="also fit with this fraction of labels known")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.ERROR)
    print(f"{'data':<16} {'model':<6} {'G':>2} {'BIC':>12} {'ARI':>6}")
    for item in args.files:
        path, _, col = item.rpartition(":")
        ds = standardize(load_csv(path, label_col=col))
        truth = ds.labels - 1
        rep = sweep(ds.x, args.models, (args.g_min, args.g_max), seed=args.seed, truth=truth)
        print(_row(ds.name, rep), flush=True)
        if args.semi_supervised is not None:
            split = make_split(ds, args.semi_supervised, args.seed)
            K = int(ds.labels.max())
            rep = sweep(ds.x, args.models, (K, K), seed=args.seed, labels=split.fit_labels(),
                        truth=truth)
            print(_row(ds.name + " (semi)", rep), flush=True)


if __name__ == "__main__":
    main()
