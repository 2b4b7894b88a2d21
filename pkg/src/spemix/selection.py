"""Grid sweeps over (model, G) with BIC selection."""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .gem import EPSILON, MAX_ITER, FitResult, fit
from .metrics import ari
from .scale import ModelSpec, parse_models

log = logging.getLogger(__name__)

THREADS_ENV = "SPE_MIX_THREADS"


class NoConvergedFitError(RuntimeError):
    """Raised when no cell of a sweep produced a converged fit."""


class ThreadsSettingError(ValueError):
    """``SPE_MIX_THREADS`` is not a positive integer."""


@dataclass
class SweepEntry:
    spec: ModelSpec
    G: int
    result: FitResult
    ari: Optional[float] = None

    @property
    def converged(self) -> bool:
        return self.result.converged

    @property
    def bic(self) -> float:
        return self.result.bic

    @property
    def icl(self) -> float:
        return self.result.icl


@dataclass
class SweepReport:
    entries: List[SweepEntry]
    best: int

    @property
    def best_entry(self) -> SweepEntry:
        return self.entries[self.best]

    @property
    def best_result(self) -> FitResult:
        return self.entries[self.best].result


def worker_count(n_tasks: int = None) -> int:
    """Pool size: ``SPE_MIX_THREADS`` if set, else the available CPUs."""
    raw = os.environ.get(THREADS_ENV)
    if raw is not None and raw.strip():
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n < 1:
            raise ThreadsSettingError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    else:
        try:
            n = len(os.sched_getaffinity(0))
        except AttributeError:
            n = os.cpu_count() or 1
    return max(1, min(n, n_tasks)) if n_tasks else n


def select_best(entries: Sequence[SweepEntry]) -> int:
    """Index of the converged entry with the largest BIC.

    Ties go to fewer free parameters, then smaller G, then grid order.
    """
    ok = [i for i, e in enumerate(entries) if e.converged and np.isfinite(e.bic)]
    if not ok:
        raise NoConvergedFitError("no fit in the sweep converged")
    return min(ok, key=lambda i: (-entries[i].bic, entries[i].result.n_params, entries[i].G, i))


def _run_cell(args):
    x, spec, G, seed, labels, max_iter, epsilon = args
    return fit(x, spec, G, labels=labels, seed=seed, max_iter=max_iter, epsilon=epsilon)


def run_cells(tasks, workers: int = None) -> List[FitResult]:
    """Run fit tasks in order, in a process pool when more than one worker
    is allowed.  Results come back in task order."""
    tasks = list(tasks)
    workers = worker_count(len(tasks)) if workers is None else max(1, min(workers, len(tasks)))
    if workers == 1:
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, tasks, chunksize=1))


def make_grid(specs, G_range) -> list:
    specs = parse_models(specs) if isinstance(specs, str) else \
        [s if isinstance(s, ModelSpec) else ModelSpec.from_name(s) for s in specs]
    g_min, g_max = G_range
    if not specs or g_min < 1 or g_max < g_min:
        raise ValueError("empty sweep grid")
    return [(spec, G) for spec in specs for G in range(g_min, g_max + 1)]


def grid_tasks(x, grid, seed=0, labels=None, max_iter=MAX_ITER, epsilon=EPSILON) -> list:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return [(x, spec, G, seed, labels, max_iter, epsilon) for spec, G in grid]


def assemble(grid, results, truth=None, score_mask=None) -> SweepReport:
    """Pair grid cells with their fits and select the best one.

    ``score_mask`` restricts the ARI to a subset of rows (the unlabelled
    rows of a semi-supervised fit).
    """
    entries = []
    for (spec, G), res in zip(grid, results):
        score = None
        if truth is not None:
            keep = slice(None) if score_mask is None else score_mask
            score = ari(np.asarray(truth)[keep], res.labels[keep])
        entries.append(SweepEntry(spec, G, res, score))
        log.debug("%s G=%d bic=%.4f converged=%s", spec.name, G, res.bic, res.converged)
    return SweepReport(entries, select_best(entries))


def sweep(x, specs="all", G_range=(1, 4), seed: int = 0, labels=None, truth=None,
          max_iter: int = MAX_ITER, epsilon: float = EPSILON,
          workers: int = None) -> SweepReport:
    """Fit every (spec, G) cell and pick the best converged fit by BIC.

    ``G_range`` is an inclusive ``(g_min, g_max)`` pair.  ``labels`` (``-1``
    for unknown) switches every fit to semi-supervised mode; ``truth``, when
    given, adds an ARI to each entry, computed on the unlabelled rows only
    in semi-supervised mode.  Failed fits are kept in the report.
    """
    grid = make_grid(specs, G_range)
    results = run_cells(grid_tasks(x, grid, seed, labels, max_iter, epsilon), workers)
    mask = None if labels is None else np.asarray(labels) < 0
    return assemble(grid, results, truth, mask)
