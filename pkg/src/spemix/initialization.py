"""Starting values: a k-means partition, then per-group moments."""

import numpy as np

from .gem import Component, MixtureModel
from .scale import ModelSpec, gaussian_scale_mstep

BETA_START = 0.5
SINGLETON_FLOOR = 1e-4


def _sq_dist(x, centers):
    return np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)


def kmeans(x, G: int, seed=None, max_iter: int = 100, fixed=None, return_trace=False):
    """Lloyd's algorithm from one random draw of ``G`` distinct centers.

    ``fixed`` optionally holds known labels (``-1`` where unknown); those rows
    keep their labels and seed their group's center.  Empty clusters are
    reseeded with the point farthest from its current center.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    N = x.shape[0]
    if N < G:
        raise ValueError(f"cannot form {G} clusters from {N} observations")
    rng = np.random.default_rng(seed)
    free = np.ones(N, dtype=bool)
    centers = x[rng.choice(N, G, replace=False)].copy()
    if fixed is not None:
        fixed = np.asarray(fixed, dtype=int)
        free = fixed < 0
        for g in range(G):
            if np.any(fixed == g):
                centers[g] = x[fixed == g].mean(axis=0)
    labels = np.full(N, -1)
    trace = []
    for _ in range(max_iter):
        d2 = _sq_dist(x, centers)
        new = np.argmin(d2, axis=1)
        if fixed is not None:
            new[~free] = fixed[~free]
        for g in range(G):
            if np.any(new == g):
                continue
            sizes = np.bincount(new, minlength=G)
            own = d2[np.arange(N), new]
            own[~free | (sizes[new] < 2)] = -1.0
            far = int(np.argmax(own))
            new[far] = g
        centers = np.array([x[new == g].mean(axis=0) for g in range(G)])
        trace.append(float(np.sum((x - centers[new]) ** 2)))
        if np.array_equal(new, labels):
            break
        labels = new
    return (labels, trace) if return_trace else labels


def kmeans_labels(x, G, seed=None, fixed=None):
    return kmeans(x, G, seed, fixed=fixed)


def init_params(x, labels, spec: ModelSpec, G: int = None) -> MixtureModel:
    """Moment-based starting model from a hard partition.

    Group means and covariances, with covariances projected onto the scale
    structure of ``spec`` (a Gaussian fit under the structure's constraints);
    shapes start at 0.5 and skewness at zero.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = np.asarray(labels, dtype=int)
    N, p = x.shape
    G = int(labels.max()) + 1 if G is None else G
    counts = np.bincount(labels, minlength=G).astype(float)
    if np.any(counts == 0):
        raise ValueError("every group needs at least one observation")
    overall = float(np.mean(np.var(x, axis=0))) if N > 1 else 1.0
    overall = overall if overall > 0 else 1.0
    means, scatters = [], []
    for g in range(G):
        xg = x[labels == g]
        mu = xg.mean(axis=0)
        r = xg - mu
        cov = r.T @ r / counts[g]
        if counts[g] < 2 or np.linalg.eigvalsh(cov)[0] <= 1e-12 * max(np.trace(cov), 1e-300):
            cov = cov + SINGLETON_FLOOR * overall * np.eye(p)
        means.append(mu)
        scatters.append(counts[g] * cov)
    decs = gaussian_scale_mstep(spec, scatters, counts)
    comps = [Component(mu, dec, BETA_START, np.zeros(p)) for mu, dec in zip(means, decs)]
    return MixtureModel(spec, counts / N, comps)
