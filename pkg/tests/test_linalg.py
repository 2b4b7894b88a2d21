import numpy as np
import pytest
from hypothesis import given, strategies as st

from spemix.linalg import (NearSingularError, NotSymmetricError, floor_eigenvalues, inv_sqrt,
                           log_det, mahalanobis, sqrtm_spd, sym_eig)

from conftest import random_spd


def test_sym_eig_descending_and_reconstructs(rng):
    S = random_spd(rng, 4)
    vals, vecs = sym_eig(S)
    assert np.all(np.diff(vals) <= 0)
    assert np.allclose((vecs * vals) @ vecs.T, S, atol=1e-12)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(NotSymmetricError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_inv_sqrt_whitens(rng):
    S = random_spd(rng, 3, cond=100)
    M = inv_sqrt(S)
    assert np.allclose(M @ S @ M, np.eye(3), atol=1e-10)
    assert np.allclose(M, M.T)


def test_sqrtm_squares_back(rng):
    S = random_spd(rng, 3)
    R = sqrtm_spd(S)
    assert np.allclose(R @ R, S, atol=1e-12)


def test_log_det_matches_slogdet(rng):
    S = random_spd(rng, 5, cond=1e4)
    assert log_det(S) == pytest.approx(np.linalg.slogdet(S)[1], abs=1e-10)


def test_near_singular_raises():
    S = np.diag([1.0, 1e-14])
    with pytest.raises(NearSingularError):
        inv_sqrt(S)
    with pytest.raises(NearSingularError):
        log_det(S)


def test_floor_eigenvalues_makes_usable(caplog):
    S = np.diag([1.0, 0.0])
    out = floor_eigenvalues(S)
    assert np.linalg.eigvalsh(out).min() == pytest.approx(1e-10)
    assert "flooring" in caplog.text


def test_floor_eigenvalues_leaves_good_matrix(rng):
    S = random_spd(rng, 3)
    assert np.array_equal(floor_eigenvalues(S), S)


def test_mahalanobis_identity_is_squared_norm():
    x = np.array([3.0, 4.0])
    assert mahalanobis(x, np.zeros(2), np.eye(2)) == pytest.approx(25.0)


def test_mahalanobis_rows_match_direct_solve(rng):
    S = random_spd(rng, 3)
    x = rng.standard_normal((10, 3))
    mu = rng.standard_normal(3)
    direct = np.einsum("ij,ij->i", (x - mu) @ np.linalg.inv(S), x - mu)
    assert np.allclose(mahalanobis(x, mu, S), direct, rtol=1e-10)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_inv_sqrt_property(p, seed):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, p, cond=1e3)
    M = inv_sqrt(S)
    assert np.allclose(M @ S @ M, np.eye(p), atol=1e-8)
