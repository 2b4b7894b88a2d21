"""Command-line entry point ``spe-mix``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 no converged fit.
"""

import argparse
import logging
import sys
from pathlib import Path

from .data import DataError, load_csv, make_split, standardize, write_csv
from .gem import EPSILON, MAX_ITER
from .report import evaluate_files, replicate_study, write_fit_outputs, write_json, write_study
from .scale import parse_models
from .selection import NoConvergedFitError, ThreadsSettingError, assemble, grid_tasks, make_grid, run_cells
from .simulation import DESIGNS, SAMPLERS, SimulationConfig, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NO_FIT = 0, 1, 2, 3

log = logging.getLogger("spemix")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _models(text):
    try:
        return parse_models(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spe-mix", description="Skew power exponential mixture models.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a (model, G) grid to a CSV file")
    f.add_argument("--data", required=True, metavar="FILE")
    f.add_argument("--label-col", metavar="NAME")
    f.add_argument("--scale", action="store_true", help="standardize columns first")
    f.add_argument("--models", required=True, type=_models, metavar="LIST|all")
    f.add_argument("--g-min", required=True, type=int)
    f.add_argument("--g-max", required=True, type=int)
    f.add_argument("--seed", required=True, type=int)
    f.add_argument("--semi-supervised", action="store_true")
    f.add_argument("--split-fraction", type=float, metavar="F")
    f.add_argument("--split-seed", type=int)
    f.add_argument("--out", required=True, metavar="DIR")
    f.add_argument("--max-iter", type=int, default=MAX_ITER)
    f.add_argument("--epsilon", type=float, default=EPSILON)

    s = sub.add_parser("simulate", help="draw one dataset from a design")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--design", type=int, choices=DESIGNS)
    src.add_argument("--config", metavar="FILE")
    s.add_argument("--seed", required=True, type=int)
    s.add_argument("--sampler", choices=SAMPLERS, default="rejection")
    s.add_argument("--out", required=True, metavar="FILE")

    e = sub.add_parser("evaluate", help="print the ARI between two label files")
    e.add_argument("--pred", required=True, metavar="FILE")
    e.add_argument("--truth", required=True, metavar="FILE")

    r = sub.add_parser("replicate", help="repeat simulate-and-sweep over many datasets")
    r.add_argument("--design", required=True, type=int, choices=DESIGNS)
    r.add_argument("--replicates", required=True, type=int)
    r.add_argument("--seed", required=True, type=int)
    r.add_argument("--models", required=True, type=_models, metavar="LIST|all")
    r.add_argument("--g-min", required=True, type=int)
    r.add_argument("--g-max", required=True, type=int)
    r.add_argument("--out", required=True, metavar="DIR")
    r.add_argument("--scale", action="store_true", help="standardize each dataset first")
    r.add_argument("--sampler", choices=SAMPLERS, default="rejection")
    return parser


def _check_grid(args):
    if args.g_min < 1 or args.g_max < args.g_min:
        raise UsageError("need 1 <= --g-min <= --g-max")


def cmd_fit(args) -> int:
    _check_grid(args)
    if args.max_iter < 1 or not args.epsilon > 0:
        raise UsageError("--max-iter must be positive and --epsilon above zero")
    split_flags = args.split_fraction is not None or args.split_seed is not None
    if split_flags and not args.semi_supervised:
        raise UsageError("--split-fraction and --split-seed need --semi-supervised")
    if args.semi_supervised and args.label_col is None:
        raise UsageError("--semi-supervised needs --label-col")
    fraction = 0.25 if args.split_fraction is None else args.split_fraction
    if not 0 <= fraction <= 1:
        raise UsageError("--split-fraction must lie in [0, 1]")
    ds = load_csv(args.data, label_col=args.label_col)
    if args.scale:
        ds = standardize(ds)
    split = labels = mask = None
    if args.semi_supervised:
        split_seed = args.seed if args.split_seed is None else args.split_seed
        split = make_split(ds, fraction, split_seed)
        labels = split.fit_labels()
        mask = ~split.mask
    grid = make_grid(args.models, (args.g_min, args.g_max))
    results = run_cells(grid_tasks(ds.x, grid, args.seed, labels, args.max_iter, args.epsilon))
    for r in results:
        r.metadata["standardized"] = ds.standardized
    settings = {"models": [m.name for m in args.models], "g_min": args.g_min,
                "g_max": args.g_max, "seed": args.seed, "max_iter": args.max_iter,
                "epsilon": args.epsilon, "scale": args.scale,
                "semi_supervised": args.semi_supervised}
    truth = None if ds.labels is None else ds.labels - 1
    try:
        report = assemble(grid, results, truth, mask)
    except NoConvergedFitError:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_json(Path(args.out) / "report.json", {
            "command": "fit", "settings": settings, "best": None,
            "fits": [{"model": sp.name, "G": G, "converged": r.converged, "failure": r.failure,
                      "iterations": r.iterations, "loglik": r.loglik}
                     for (sp, G), r in zip(grid, results)]})
        print("no fit converged", file=sys.stderr)
        return EXIT_NO_FIT
    doc = write_fit_outputs(args.out, report, ds, settings, split)
    best = doc["best"]
    print(f"best by BIC: {best['model']} G={best['G']} BIC={best['bic']:.4f}"
          + ("" if best["ari"] is None else f" ARI={best['ari']:.4f}"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.design is not None:
        config = SimulationConfig.design_config(args.design, args.seed, args.sampler)
    else:
        config = SimulationConfig.from_json(args.config, args.seed, args.sampler)
    write_csv(args.out, simulate(config))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    print(repr(float(evaluate_files(args.pred, args.truth))))
    return EXIT_OK


def cmd_replicate(args) -> int:
    _check_grid(args)
    if args.replicates < 1:
        raise UsageError("--replicates must be positive")
    config = SimulationConfig.design_config(args.design, 0, args.sampler)
    doc = replicate_study(config, args.replicates, args.seed, args.models,
                          (args.g_min, args.g_max), scale=args.scale)
    write_study(args.out, doc)
    s = doc["summary"]
    med = s["ari"]["median"]
    print(f"G frequencies: {s['g_frequencies']}; median ARI: "
          + ("NA" if med is None else f"{med:.4f}"))
    return EXIT_OK if s["selected"] else EXIT_NO_FIT


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "evaluate": cmd_evaluate,
            "replicate": cmd_replicate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ThreadsSettingError) as exc:
        parser.print_usage(sys.stderr)
        print(f"spe-mix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"spe-mix: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        if args.command in ("simulate", "replicate"):
            print(f"spe-mix: invalid configuration: {exc}", file=sys.stderr)
            return EXIT_DATA
        raise


if __name__ == "__main__":
    sys.exit(main())
