"""Result files: fitted models, sweep reports and replicate studies.

Machine-readable output is JSON with sorted keys and shortest round-trip
float representations, so identical runs give identical bytes.  Non-finite
numbers are written as ``null``.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import DataError, Dataset, LabeledSplit, standardize
from .gem import Component, MixtureModel, observed_loglik
from .metrics import ari
from .scale import ModelSpec, ScaleDecomposition
from .selection import (NoConvergedFitError, SweepReport, assemble, grid_tasks, make_grid,
                        run_cells)
from .simulation import SimulationConfig, simulate

log = logging.getLogger(__name__)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


# -- models -------------------------------------------------------------------

def model_to_dict(model: MixtureModel) -> dict:
    comps = []
    for c in model.components:
        comps.append({
            "mu": c.mu, "beta": c.beta, "eta": c.eta, "psi": c.psi, "sigma": c.sigma,
            "lambda": c.scale.lam, "gamma": c.scale.gamma, "delta": c.scale.delta,
        })
    return {"model": model.spec.name, "G": model.G, "p": model.p,
            "skewed": model.skewed, "pi": model.pi, "components": comps}


def model_from_dict(d: dict) -> MixtureModel:
    """Rebuild a model from :func:`model_to_dict` output.

    The decomposition and ``eta`` are read back directly, so densities are
    reproduced exactly rather than through ``sigma`` and ``psi``.
    """
    comps = [Component(np.array(c["mu"], dtype=float),
                       ScaleDecomposition(c["lambda"], np.array(c["gamma"], dtype=float),
                                          np.array(c["delta"], dtype=float)),
                       c["beta"], np.array(c["eta"], dtype=float))
             for c in d["components"]]
    return MixtureModel(ModelSpec.from_name(d["model"]), np.array(d["pi"], dtype=float),
                        comps, bool(d.get("skewed", True)))


def load_model(path) -> MixtureModel:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return model_from_dict(d["parameters"] if "parameters" in d else d)


# -- summaries ----------------------------------------------------------------

def quartiles(values: Sequence[float]) -> dict:
    """Median and first/third quartiles (linear interpolation between order
    statistics)."""
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return {"median": None, "q1": None, "q3": None}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"median": med, "q1": q1, "q3": q3}


def frequencies(values) -> dict:
    out = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return dict(sorted(out.items()))


def entry_summary(entry) -> dict:
    r = entry.result
    return {"model": entry.spec.name, "G": entry.G, "converged": r.converged,
            "iterations": r.iterations, "loglik": r.loglik, "n_params": r.n_params,
            "bic": r.bic, "icl": r.icl, "ari": entry.ari, "failure": r.failure,
            "standardized": r.metadata.get("standardized", False)}


def best_summary(report: SweepReport) -> dict:
    entry = report.best_entry
    out = entry_summary(entry)
    out["n"] = entry.result.n
    out["parameters"] = model_to_dict(entry.result.model)
    return out


def _fmt(v, digits=2):
    return "NA" if v is None else f"{v:.{digits}f}"


def _freq_text(freq: dict) -> str:
    return "; ".join(f"{k} ({v})" for k, v in freq.items()) or "none"


def sweep_table(report: SweepReport) -> str:
    lines = [f"{'model':<6} {'G':>2} {'conv':>4} {'iter':>5} {'loglik':>12} {'m':>4} "
             f"{'BIC':>12} {'ICL':>12} {'ARI':>6}"]
    for i, e in enumerate(report.entries):
        r = e.result
        mark = " *" if i == report.best else ""
        lines.append(f"{e.spec.name:<6} {e.G:>2} {'yes' if r.converged else 'no':>4} "
                     f"{r.iterations:>5} {r.loglik:>12.4f} {r.n_params:>4} {r.bic:>12.4f} "
                     f"{r.icl:>12.4f} {_fmt(e.ari, 3):>6}{mark}")
    return "\n".join(lines) + "\n"


# -- fit command --------------------------------------------------------------

def fit_report(report: SweepReport, ds: Dataset, settings: dict,
               split: Optional[LabeledSplit] = None) -> dict:
    return {
        "command": "fit",
        "data": {"name": ds.name, "n": ds.N, "p": ds.p, "columns": ds.columns,
                 "standardized": ds.standardized, "has_labels": ds.labels is not None},
        "settings": settings,
        "split": None if split is None else {"fraction": split.fraction, "seed": split.seed,
                                             "labelled": int(split.mask.sum())},
        "fits": [entry_summary(e) for e in report.entries],
        "best": best_summary(report),
    }


def write_predictions(path, labels) -> None:
    """One 1-based label per row under a ``label`` header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"])
        for v in labels:
            w.writerow([int(v) + 1])


def write_fit_outputs(out_dir, report: SweepReport, ds: Dataset, settings: dict,
                      split: Optional[LabeledSplit] = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = fit_report(report, ds, settings, split)
    write_json(out / "report.json", doc)
    write_json(out / "model.json", {"parameters": doc["best"]["parameters"],
                                    "loglik": doc["best"]["loglik"]})
    write_predictions(out / "predictions.csv", report.best_result.labels)
    best = doc["best"]
    text = (f"data: {ds.name} (N={ds.N}, p={ds.p}{', standardized' if ds.standardized else ''})\n"
            f"best by BIC: {best['model']} G={best['G']} BIC={best['bic']:.4f} "
            f"ICL={best['icl']:.4f} ARI={_fmt(best['ari'], 3)}\n\n" + sweep_table(report))
    (out / "summary.txt").write_text(text, encoding="utf-8")
    return doc


def read_labels(path) -> list:
    """Labels from a file with a ``label`` column or a single column."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [c.strip().lower() for c in rows[0]]
    if "label" in header:
        j = header.index("label")
        rows = rows[1:]
    elif len(rows[0]) == 1:
        j = 0
    else:
        raise DataError(f"{path}: no 'label' column")
    out = []
    for i, r in enumerate(rows):
        if len(r) <= j:
            raise DataError(f"{path}: row {i + 1} has no label")
        out.append(r[j].strip())
    return out


def evaluate_files(pred_path, truth_path) -> float:
    pred, truth = read_labels(pred_path), read_labels(truth_path)
    if len(pred) != len(truth):
        raise DataError(f"{len(pred)} predictions but {len(truth)} true labels")
    return ari(truth, pred)


# -- replicate studies --------------------------------------------------------

def replicate_seeds(seed: int, replicates: int) -> list:
    children = np.random.SeedSequence(seed).spawn(replicates)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def replicate_study(config: SimulationConfig, replicates: int, seed: int, specs,
                    G_range, scale: bool = False, workers: Optional[int] = None,
                    max_iter: Optional[int] = None) -> dict:
    """Simulate ``replicates`` datasets and run the (spec, G) sweep on each.

    All fits of all replicates share one worker pool.  Replicates without any
    converged fit are recorded with ``best = null``.
    """
    grid = make_grid(specs, G_range)
    seeds = replicate_seeds(seed, replicates)
    datasets = []
    tasks = []
    for s in seeds:
        ds = simulate(config.with_seed(s))
        if scale:
            ds = standardize(ds)
        datasets.append(ds)
        kw = {} if max_iter is None else {"max_iter": max_iter}
        tasks.extend(grid_tasks(ds.x, grid, seed=s, **kw))
    results = run_cells(tasks, workers)
    for r in results:
        r.metadata["standardized"] = scale
    reps = []
    for r, (s, ds) in enumerate(zip(seeds, datasets)):
        chunk = results[r * len(grid):(r + 1) * len(grid)]
        entry = {"replicate": r + 1, "seed": s, "n": ds.N,
                 "group_sizes": np.bincount(ds.labels, minlength=config.G + 1)[1:]}
        try:
            report = assemble(grid, chunk, ds.labels)
            entry["best"] = best_summary(report)
            entry["converged_fits"] = sum(e.converged for e in report.entries)
        except NoConvergedFitError:
            entry["best"] = None
            entry["converged_fits"] = 0
        entry["fits"] = [
            {"model": spec.name, "G": G, "converged": res.converged, "bic": res.bic,
             "iterations": res.iterations}
            for (spec, G), res in zip(grid, chunk)]
        reps.append(entry)
        log.info("replicate %d/%d done", r + 1, replicates)
    chosen = [e["best"] for e in reps if e["best"] is not None]
    aris = [b["ari"] for b in chosen]
    summary = {
        "replicates": replicates,
        "selected": len(chosen),
        "g_frequencies": frequencies(b["G"] for b in chosen),
        "model_frequencies": frequencies(b["model"] for b in chosen),
        "ari": dict(quartiles(aris), mean=float(np.mean(aris)) if aris else None,
                    min=min(aris) if aris else None, max=max(aris) if aris else None),
    }
    return {
        "command": "replicate",
        "config": config.to_dict(),
        "settings": {"replicates": replicates, "seed": seed,
                     "models": [s.name for s in dict.fromkeys(sp for sp, _ in grid)],
                     "g_min": G_range[0], "g_max": G_range[1], "scale": scale,
                     **({} if max_iter is None else {"max_iter": max_iter})},
        "replicate_results": reps,
        "summary": summary,
    }


def study_table(doc: dict) -> str:
    s = doc["summary"]
    a = s["ari"]
    top = min(s["model_frequencies"].items(), key=lambda kv: (-kv[1], kv[0]), default=None)
    label = f"design {doc['config']['design']}" if doc["config"]["design"] else doc["config"]["name"]
    lines = [
        f"{label}: {s['replicates']} replicates, G = {doc['settings']['g_min']}..{doc['settings']['g_max']}",
        f"{'Frequencies':<12} {_freq_text(s['g_frequencies'])}",
        f"{'ARI':<12} {_fmt(a['median'])} ({_fmt(a['q1'])}, {_fmt(a['q3'])})",
        f"{'Models':<12} {_freq_text(s['model_frequencies'])}",
    ]
    if top is not None:
        lines.append(f"{'Most chosen':<12} {top[0]} ({top[1]})")
    if s["selected"] < s["replicates"]:
        lines.append(f"{s['replicates'] - s['selected']} replicates had no converged fit")
    return "\n".join(lines) + "\n"


def write_study(out_dir, doc: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", doc)
    (out / "summary.txt").write_text(study_table(doc), encoding="utf-8")


def reload_loglik(model_path, ds: Dataset, labels=None) -> float:
    """Observed log-likelihood of a saved model on ``ds`` (``labels`` as in
    a semi-supervised fit)."""
    return observed_loglik(ds.x, load_model(model_path), labels)
