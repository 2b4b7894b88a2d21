"""Model-selection criteria and partition agreement."""

import numpy as np
from scipy.special import comb

Z_FLOOR = 1e-300


def bic(loglik: float, m: int, n: int) -> float:
    """``2 l - m log n``; larger is better."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    return 2.0 * loglik - m * np.log(n)


def icl(bic_value: float, z) -> float:
    """BIC plus twice the log of each observation's MAP responsibility.

    Equals BIC for hard assignments and is never larger than it.
    """
    z = np.asarray(z, dtype=float)
    top = z[np.arange(z.shape[0]), np.argmax(z, axis=1)]
    return bic_value + 2.0 * float(np.sum(np.log(np.maximum(top, Z_FLOOR))))


def contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label arrays must be 1-D and equal length: {a.shape} vs {b.shape}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max(initial=-1) + 1, ib.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index (Hubert and Arabie) between two partitions."""
    table = contingency(labels_a, labels_b)
    n = int(table.sum())
    pairs = comb(n, 2, exact=True)
    sum_cells = sum(comb(int(v), 2, exact=True) for v in table.ravel())
    sum_a = sum(comb(int(v), 2, exact=True) for v in table.sum(axis=1))
    sum_b = sum(comb(int(v), 2, exact=True) for v in table.sum(axis=0))
    if pairs == 0:
        return 1.0
    expected = sum_a * sum_b / pairs
    top = 0.5 * (sum_a + sum_b)
    if top == expected:
        # both partitions trivial (all-in-one or all singletons)
        return 1.0
    return float((sum_cells - expected) / (top - expected))
