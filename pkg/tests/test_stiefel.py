import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import orthogonal_procrustes

from spemix.stiefel import LineSearchConfig, maximize, project_tangent, qr_retraction

from conftest import random_orthogonal


def _procrustes(A):
    def objective(q):
        return float(np.sum(q * A)), A
    return objective


def test_retraction_stays_orthogonal(rng):
    q = random_orthogonal(rng, 4)
    step = project_tangent(q, rng.standard_normal((4, 4)))
    r = qr_retraction(q, 0.3 * step)
    assert np.allclose(r.T @ r, np.eye(4), atol=1e-12)
    # r'(q + step) is upper triangular with a positive diagonal
    T = r.T @ (q + 0.3 * step)
    assert np.allclose(np.tril(T, -1), 0, atol=1e-12)
    assert np.all(np.diag(T) > 0)


def test_retraction_is_second_order(rng):
    q = random_orthogonal(rng, 3)
    xi = project_tangent(q, rng.standard_normal((3, 3)))
    errs = [np.linalg.norm(qr_retraction(q, t * xi) - (q + t * xi)) for t in (1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_zero_step_is_identity(rng):
    q = random_orthogonal(rng, 3)
    assert np.array_equal(qr_retraction(q, np.zeros((3, 3))), q)


def test_tangent_direction_derivative(rng):
    q = random_orthogonal(rng, 3)
    A = rng.standard_normal((3, 3))
    f = _procrustes(A)
    xi = project_tangent(q, A)
    assert np.allclose(q.T @ xi + xi.T @ q, 0, atol=1e-12)
    h = 1e-6
    fd = (f(qr_retraction(q, h * xi))[0] - f(qr_retraction(q, -h * xi))[0]) / (2 * h)
    assert fd == pytest.approx(np.sum(xi * xi), rel=1e-6)


@given(st.integers(2, 5), st.integers(0, 2**31))
def test_procrustes_matches_svd_oracle(p, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((p, p))
    oracle, _ = orthogonal_procrustes(np.eye(p), A)
    q0 = random_orthogonal(rng, p)
    if np.linalg.det(q0) * np.linalg.det(oracle) < 0:
        q0[:, 0] *= -1  # the QR retraction cannot leave a connected component
    q = maximize(_procrustes(A), q0, LineSearchConfig(max_iter=2000, tol=1e-10))
    assert np.sum(q * A) == pytest.approx(np.sum(oracle * A), abs=1e-7)


@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**31))
def test_never_decreases(p, iters, seed):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((p, p))
    S = S @ S.T
    D = np.diag(np.arange(1.0, p + 1))

    def objective(q):
        # trace(D q' S q) is smooth with many stationary points
        return float(np.trace(D @ q.T @ S @ q)), 2 * S @ q @ D

    q0 = random_orthogonal(rng, p)
    q = maximize(objective, q0, LineSearchConfig(max_iter=iters))
    assert objective(q)[0] >= objective(q0)[0]
    assert np.allclose(q.T @ q, np.eye(p), atol=1e-10)


def test_stationary_start_is_kept():
    q = np.eye(3)
    assert np.array_equal(maximize(_procrustes(np.eye(3)), q), q)


@pytest.mark.parametrize("kw", [{"backtrack": 1.0}, {"max_iter": 0}, {"tol": -1.0},
                                {"max_move": 0.0}])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        LineSearchConfig(**kw)
