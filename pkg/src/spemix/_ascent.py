"""Safeguarded Newton ascent shared by the conditional M-steps."""

import numpy as np


def ascent_direction(g, H):
    """Newton direction if ``H`` is negative definite, else a scaled gradient."""
    if not np.all(np.isfinite(g)) or not np.any(g):
        return None
    try:
        np.linalg.cholesky(-H)
        d = np.linalg.solve(-H, g)
    except np.linalg.LinAlgError:
        curv = np.max(np.abs(np.diag(H))) if np.all(np.isfinite(H)) else 0
        d = g / curv if curv > 0 else g / max(np.linalg.norm(g), 1.0)
    return d if np.all(np.isfinite(d)) else None


def newton_ascent(f, x0, grad, hess, max_iter=1, max_halvings=40):
    """Take up to ``max_iter`` safeguarded Newton steps on ``f`` from ``x0``.

    Each step is halved until ``f`` does not decrease; a step that never
    yields an increase is dropped, so ``f(result) >= f(x0)``.
    """
    x = np.asarray(x0, dtype=float)
    fx = f(x)
    for _ in range(max_iter):
        d = ascent_direction(grad(x), hess(x))
        if d is None:
            break
        t = 1.0
        for _ in range(max_halvings):
            x_new = x + t * d
            f_new = f(x_new)
            if np.isfinite(f_new) and f_new >= fx:
                break
            t *= 0.5
        else:
            break
        stalled = f_new == fx
        x, fx = x_new, f_new
        if stalled:
            break
    return x, fx
