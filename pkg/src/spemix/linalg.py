"""Dense symmetric-matrix kernels used throughout the package."""

import logging
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)

SYM_TOL = 1e-10
SINGULAR_TOL = 1e-12
FLOOR_REL = 1e-10


class LinalgError(ValueError):
    pass


class NotSymmetricError(LinalgError):
    pass


class NearSingularError(LinalgError):
    pass


class SymEig(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def _as_square(S):
    S = np.asarray(S, dtype=float)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise LinalgError(f"expected a square matrix, got shape {S.shape}")
    return S


def sym_eig(S) -> SymEig:
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending.

    Raises NotSymmetricError when ``S`` departs from symmetry by more than
    1e-10 relative to its largest entry.
    """
    S = _as_square(S)
    scale = max(np.abs(S).max(), 1e-300)
    if np.abs(S - S.T).max() > SYM_TOL * scale:
        raise NotSymmetricError("matrix is not symmetric")
    values, vectors = np.linalg.eigh(0.5 * (S + S.T))
    return SymEig(values[::-1].copy(), vectors[:, ::-1].copy())


def _checked_eig(S) -> SymEig:
    eig = sym_eig(S)
    top = eig.values[0]
    if top <= 0 or eig.values[-1] < SINGULAR_TOL * top:
        raise NearSingularError(
            f"matrix is near-singular (eigenvalues {eig.values[-1]:.3g} .. {top:.3g})")
    return eig


def floor_eigenvalues(S, rel: float = FLOOR_REL) -> np.ndarray:
    """Return ``S`` with eigenvalues floored at ``rel`` times the largest.

    Degenerate clusters show up mid-fit; flooring keeps them usable and the
    event is logged rather than raised.
    """
    eig = sym_eig(S)
    top = max(eig.values[0], 0.0)
    floor = rel * top if top > 0 else rel
    if eig.values[-1] >= floor:
        return _as_square(S)
    log.warning("flooring %d eigenvalue(s) at %.3g",
                int(np.sum(eig.values < floor)), floor)
    vals = np.maximum(eig.values, floor)
    out = (eig.vectors * vals) @ eig.vectors.T
    return 0.5 * (out + out.T)


def inv_sqrt(S) -> np.ndarray:
    """Symmetric inverse square root ``M`` with ``M @ S @ M = I``."""
    eig = _checked_eig(S)
    out = (eig.vectors / np.sqrt(eig.values)) @ eig.vectors.T
    return 0.5 * (out + out.T)


def sqrtm_spd(S) -> np.ndarray:
    eig = _checked_eig(S)
    out = (eig.vectors * np.sqrt(eig.values)) @ eig.vectors.T
    return 0.5 * (out + out.T)


def log_det(S) -> float:
    return float(np.sum(np.log(_checked_eig(S).values)))


def mahalanobis(x, mu, S):
    """Squared Mahalanobis distance ``(x - mu)' S^{-1} (x - mu)``.

    ``x`` may be a single point or an ``(n, p)`` array of rows.
    """
    S = _as_square(S)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    p = S.shape[0]
    if mu.shape != (p,) or x.shape[-1:] != (p,):
        raise LinalgError(
            f"dimension mismatch: x {x.shape}, mu {mu.shape}, S {S.shape}")
    r = x - mu
    chol = np.linalg.cholesky(S)
    y = np.linalg.solve(chol, r.T if r.ndim > 1 else r)
    return np.sum(y * y, axis=0) if r.ndim > 1 else float(y @ y)
