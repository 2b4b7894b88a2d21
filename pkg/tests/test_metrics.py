from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spemix.metrics import ari, bic, contingency, icl


def _pair_ari(a, b):
    """ARI by enumerating every pair of observations."""
    n = len(a)
    pairs = list(combinations(range(n), 2))
    same_a = np.array([a[i] == a[j] for i, j in pairs])
    same_b = np.array([b[i] == b[j] for i, j in pairs])
    index = np.sum(same_a & same_b)
    expected = same_a.sum() * same_b.sum() / len(pairs)
    top = 0.5 * (same_a.sum() + same_b.sum())
    return (index - expected) / (top - expected)


def test_bic_value():
    # 2 * (-100) - 5 * log(150)
    assert bic(-100.0, 5, 150) == pytest.approx(-225.0532, abs=1e-4)
    assert bic(-103.5, 7, 100) == pytest.approx(-239.2362, abs=1e-4)
    with pytest.raises(ValueError):
        bic(0.0, 1, 0)


def test_icl_hard_and_soft():
    assert icl(-10.0, np.eye(3)) == -10.0
    z = np.array([[0.5, 0.5], [0.9, 0.1]])
    assert icl(-10.0, z) == pytest.approx(-10.0 + 2 * (np.log(0.5) + np.log(0.9)))


def test_contingency():
    t = contingency([1, 1, 2, 2], ["a", "b", "a", "b"])
    assert t.tolist() == [[1, 1], [1, 1]]
    with pytest.raises(ValueError):
        contingency([1, 2], [1])


def test_four_point_case():
    a, b = [1, 1, 2, 2], [1, 2, 1, 2]
    assert ari(a, b) == pytest.approx(_pair_ari(a, b), abs=1e-15)
    assert ari(a, b) == pytest.approx(-0.5)


def test_identity_and_relabel():
    a = np.array([0, 0, 1, 2, 2, 1, 3])
    assert ari(a, a) == 1.0
    assert ari(a, (a + 5) * 7) == 1.0


@given(st.lists(st.integers(0, 3), min_size=3, max_size=30), st.integers(0, 2**31))
def test_matches_pair_enumeration(a, seed):
    b = np.random.default_rng(seed).integers(0, 3, len(a)).tolist()
    oracle = _pair_ari(a, b)
    if np.isfinite(oracle):
        assert ari(a, b) == pytest.approx(oracle, abs=1e-12)


def test_symmetric(rng):
    a, b = rng.integers(0, 4, 50), rng.integers(0, 3, 50)
    assert ari(a, b) == pytest.approx(ari(b, a))


def test_random_partitions_center_on_zero(rng):
    vals = [ari(rng.integers(0, 3, 100), rng.integers(0, 3, 100)) for _ in range(1000)]
    assert -0.05 <= np.mean(vals) <= 0.05


def test_trivial_partitions():
    assert ari([1, 1, 1], [1, 1, 1]) == 1.0
    assert ari([1], [2]) == 1.0
