"""Line-search ascent over orthogonal matrices.

The feasible set is the square Stiefel manifold {Q : Q'Q = I}.  Iterates move
along the Riemannian gradient, are pulled back to the manifold by a QR
retraction, and step lengths come from a Barzilai-Borwein guess followed by
Armijo backtracking.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LineSearchConfig:
    initial_step: float = 1.0
    backtrack: float = 0.5
    sufficient_increase: float = 1e-4
    max_backtracks: int = 20
    max_iter: int = 50
    tol: float = 1e-6
    max_move: float = 0.5

    def __post_init__(self):
        if min(self.initial_step, self.backtrack, self.sufficient_increase,
               self.max_backtracks, self.max_iter, self.tol, self.max_move) <= 0:
            raise ValueError("line-search settings must be positive")
        if self.backtrack >= 1:
            raise ValueError("backtracking factor must be below 1")


def _skew(a):
    return 0.5 * (a - a.T)


def project_tangent(q, g):
    """Riemannian gradient direction ``q skew(q' g)`` for Euclidean gradient ``g``."""
    q = np.asarray(q, dtype=float)
    return q @ _skew(q.T @ np.asarray(g, dtype=float))


def qr_retraction(q, step):
    """QR retraction of ``q + step`` with a non-negative diagonal in ``R``."""
    q = np.asarray(q, dtype=float)
    step = np.asarray(step, dtype=float)
    if not np.any(step):
        return q.copy()
    Q, R = np.linalg.qr(q + step)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def maximize(objective, q0, config: LineSearchConfig = LineSearchConfig()):
    """Ascend ``objective`` from ``q0`` over orthogonal matrices.

    ``objective(q)`` returns ``(value, euclidean_gradient)``.  Returns the
    final iterate; its value is never below ``objective(q0)``.
    """
    q = np.asarray(q0, dtype=float)
    f, G = objective(q)
    xi = project_tangent(q, G)
    gnorm2 = float(np.sum(xi * xi))
    step = config.initial_step
    for _ in range(config.max_iter):
        if np.sqrt(gnorm2) < config.tol:
            break
        # keep the trial move within max_move in Frobenius norm
        t = min(step, config.max_move / np.sqrt(gnorm2))
        for _ in range(config.max_backtracks):
            q_new = qr_retraction(q, t * xi)
            f_new, G_new = objective(q_new)
            if np.isfinite(f_new) and \
                    f_new >= f + config.sufficient_increase * t * gnorm2:
                break
            # quadratic interpolation, safeguarded to [0.01 t, backtrack * t]
            t_q = 0.5 * gnorm2 * t * t / max(f + gnorm2 * t - f_new, 1e-300) \
                if np.isfinite(f_new) else 0.0
            t = min(max(t_q, 0.01 * t), config.backtrack * t)
        else:
            break
        xi_new = project_tangent(q_new, G_new)
        s = q_new - q
        y = xi_new - xi
        sy = -float(np.sum(s * y))
        step = float(np.sum(s * s)) / sy if sy > 0 else config.initial_step
        step = min(max(step, 1e-10), 1e10)
        q, f, xi = q_new, f_new, xi_new
        gnorm2 = float(np.sum(xi * xi))
    return q
