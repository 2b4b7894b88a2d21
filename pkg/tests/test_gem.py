import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from spemix.distributions import SpeParams, log_density_mspe, sample_mspe_rejection
from spemix.gem import (Component, ConvergenceMonitor, MixtureModel, aitken_converged, e_step,
                        eta_minorizer, fit, maximize_beta, mu_gradient, mu_hessian,
                        observed_loglik, predict, q_beta, q_mu, q_skew, refine_eta, update_eta,
                        update_mu, update_pi)
from spemix.scale import ModelSpec, decompose

from conftest import random_spd


def _component(rng, p, beta):
    return Component(rng.normal(size=p) * 0.2, decompose(random_spd(rng, p, cond=5)), beta,
                     rng.normal(size=p))


def _two_groups(seed, n=300):
    rng = np.random.default_rng(seed)
    a = sample_mspe_rejection(n // 2, SpeParams([0, 0], np.eye(2), 1.5, [2, 0]), rng)
    b = sample_mspe_rejection(n - n // 2, SpeParams([5, 1], np.eye(2), 3, None), rng)
    return np.vstack([a, b]), np.repeat([0, 1], [n // 2, n - n // 2])


def _fd_grad(f, x, h=1e-6):
    out = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


@given(st.integers(1, 4), st.floats(0.4, 6.0), st.integers(0, 2**31))
@settings(max_examples=20)
def test_mu_derivatives_match_finite_differences(p, beta, seed):
    rng = np.random.default_rng(seed)
    comp = _component(rng, p, beta)
    x = rng.normal(size=(60, p)) * 2
    z = rng.uniform(0, 1, 60)
    mu = comp.mu + 0.1
    g = mu_gradient(mu, x, z, comp)
    fd = _fd_grad(lambda m: q_mu(m, x, z, comp), mu)
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(g).max()))
    H = mu_hessian(mu, x, z, comp)
    fdH = np.column_stack([_fd_grad(lambda m: mu_gradient(m, x, z, comp)[j], mu, 1e-5)
                           for j in range(p)])
    assert np.allclose(H, fdH, rtol=1e-4, atol=1e-4 * max(1.0, np.abs(H).max()))


def test_update_mu_never_lowers_q(rng):
    for _ in range(20):
        comp = _component(rng, 3, rng.uniform(0.3, 5))
        x = rng.normal(size=(80, 3)) * 2
        z = rng.uniform(0, 1, 80)
        assert q_mu(update_mu(x, z, comp), x, z, comp) >= q_mu(comp.mu, x, z, comp)


@given(st.integers(1, 3), st.integers(0, 2**31))
@settings(max_examples=20)
def test_eta_minorizer_dominated_and_tangent(p, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(50, p)) * 2
    z = rng.uniform(0, 1, 50)
    mu = rng.normal(size=p)
    eta0 = rng.normal(size=p) * 2
    assert eta_minorizer(eta0, eta0, x, z, mu) == pytest.approx(q_skew(eta0, x, z, mu), rel=1e-12)
    g_true = _fd_grad(lambda e: q_skew(e, x, z, mu), eta0)
    g_min = _fd_grad(lambda e: eta_minorizer(e, eta0, x, z, mu), eta0)
    assert np.allclose(g_true, g_min, rtol=1e-5, atol=1e-6)
    for _ in range(20):
        eta = eta0 + rng.normal(size=p) * rng.choice([0.01, 1.0, 10.0])
        assert eta_minorizer(eta, eta0, x, z, mu) <= q_skew(eta, x, z, mu) + 1e-9


def test_update_eta_maximises_minorizer_and_raises_q(rng):
    x = rng.normal(size=(100, 2)) * 2
    z = rng.uniform(0, 1, 100)
    mu = np.zeros(2)
    eta0 = np.array([0.5, -1.0])
    new = update_eta(x, z, mu, eta0)
    res = optimize.minimize(lambda e: -eta_minorizer(e, eta0, x, z, mu), eta0, tol=1e-12)
    assert np.allclose(new, res.x, atol=1e-5)
    assert q_skew(new, x, z, mu) >= q_skew(eta0, x, z, mu)


def test_refine_eta_reaches_the_concave_maximum(rng):
    x = rng.normal(size=(200, 2)) * 2
    z = rng.uniform(0, 1, 200)
    mu = np.array([0.3, -0.2])
    eta0 = np.zeros(2)
    res = optimize.minimize(lambda e: -q_skew(e, x, z, mu), eta0, method="BFGS",
                            options={"gtol": 1e-10})
    got = refine_eta(x, z, mu, update_eta(x, z, mu, eta0))
    assert np.allclose(got, res.x, atol=1e-5)


@given(st.integers(1, 3), st.integers(0, 5), st.integers(0, 2**31))
@settings(max_examples=25)
def test_refine_eta_never_lowers_q(p, steps, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(40, p)) + rng.normal(size=p)
    z = rng.uniform(0, 1, 40)
    mu = np.zeros(p)
    eta0 = rng.normal(size=p) * 3
    assert q_skew(refine_eta(x, z, mu, eta0, steps), x, z, mu) >= q_skew(eta0, x, z, mu)


@pytest.mark.parametrize("current", [0.3, 1.0, 4.0, 20.0])
def test_maximize_beta_matches_bounded_search(current, rng):
    p = 2
    delta = rng.gamma(1.0, 2.0, 400) ** 0.5
    z = rng.uniform(0, 1, 400)
    got = maximize_beta(z, delta, p, current)
    res = optimize.minimize_scalar(lambda b: -q_beta(b, z, delta, p), bounds=(0.05, 20),
                                   method="bounded", options={"xatol": 1e-10})
    assert got == pytest.approx(res.x, rel=1e-6)
    assert q_beta(got, z, delta, p) >= q_beta(current, z, delta, p)


def test_maximize_beta_stops_at_upper_bound():
    # nearly uniform radii on the unit disc push the shape to the ceiling
    delta = np.linspace(0.01, 1.0, 500)
    assert maximize_beta(np.ones(500), delta, 2, 1.0) == 20.0


def test_pooled_beta_uses_both_columns(rng):
    delta = rng.gamma(1.0, 2.0, (300, 2)) ** 0.5
    z = rng.uniform(0, 1, (300, 2))
    pooled = maximize_beta(z, delta, 2, 1.0)
    res = optimize.minimize_scalar(lambda b: -q_beta(b, z, delta, 2), bounds=(0.05, 20),
                                   method="bounded", options={"xatol": 1e-10})
    assert pooled == pytest.approx(res.x, rel=1e-6)


def test_aitken_on_geometric_trace():
    # l_k = 10 - 0.5^k has limit 10; the gap at step k is 0.5^k
    trace = [10 - 0.5 ** k for k in range(12)]
    fired = next(k for k in range(3, 13) if aitken_converged(trace[:k], 0.005))
    assert 10 - trace[fired - 1] < 0.005
    assert 10 - trace[fired - 2] >= 0.005
    assert not aitken_converged([1.0, 2.0], 0.005)
    assert aitken_converged([1.0, 1.0, 1.0], 0.005)


def test_monitor_collects_trace():
    m = ConvergenceMonitor(0.1)
    for v in (0.0, 1.0, 1.01):
        m.append(v)
    assert m.trace == [0.0, 1.0, 1.01]
    assert m.converged()


@pytest.mark.parametrize("name", ["EIIV", "VVVE", "EEVV", "VVIE"])
def test_fit_is_monotone_and_recovers_groups(name):
    x, truth = _two_groups(0)
    r = fit(x, name, 2, seed=1)
    assert r.failure is None
    assert np.all(np.diff(r.trace) >= -1e-8)
    from spemix.metrics import ari
    assert ari(truth, r.labels) > 0.9
    assert r.loglik == pytest.approx(observed_loglik(x, r.model), rel=1e-12)


def test_fit_is_deterministic():
    x, _ = _two_groups(1)
    a, b = fit(x, "VVVV", 2, seed=5), fit(x, "VVVV", 2, seed=5)
    assert a.trace == b.trace
    assert np.array_equal(a.labels, b.labels)


def test_single_component_and_pi():
    x, _ = _two_groups(2)
    r = fit(x, "VVVV", 1)
    assert r.converged and np.allclose(r.z, 1.0)
    assert update_pi(np.array([[1.0, 0.0], [0.5, 0.5]])).tolist() == [0.75, 0.25]


def test_fully_labelled_fit_keeps_labels():
    x, truth = _two_groups(3)
    r = fit(x, "VVVV", 2, labels=truth)
    assert np.array_equal(r.labels, truth)
    assert set(np.unique(r.z)) <= {0.0, 1.0}
    assert r.metadata["semi_supervised"]


def test_fully_labelled_fit_matches_separate_fits():
    # with every label known the components decouple: each equals a one-group fit
    x, truth = _two_groups(7, n=200)
    joint = fit(x, "VVVV", 2, labels=truth, epsilon=1e-9)
    assert np.allclose(joint.model.pi, [0.5, 0.5])
    for g in (0, 1):
        alone = fit(x[truth == g], "VVVV", 1, epsilon=1e-9).model.components[0]
        comp = joint.model.components[g]
        assert comp.beta == pytest.approx(alone.beta, rel=1e-3)
        assert np.allclose(comp.mu, alone.mu, atol=1e-3)
        assert np.allclose(comp.sigma, alone.sigma, atol=1e-3)


def test_labelled_loglik_counts_only_the_known_component(rng):
    x, truth = _two_groups(4, n=40)
    model = fit(x, "VVVV", 2).model
    labels = np.full(40, -1)
    labels[0] = 1
    L = model.weighted_log_densities(x)
    free = observed_loglik(x, model)
    part = observed_loglik(x, model, labels)
    from scipy.special import logsumexp
    assert part == pytest.approx(free - logsumexp(L[0]) + L[0, 1])


def test_unskewed_fit_has_zero_eta():
    x, _ = _two_groups(5)
    r = fit(x, "EIIV", 2, skewed=False)
    assert all(np.all(c.eta == 0) for c in r.model.components)
    assert r.n_params == 1 + 1 + 4 + 2


def test_component_density_matches_distribution(rng):
    comp = _component(rng, 3, 1.7)
    x = rng.normal(size=(20, 3))
    p = comp.params()
    assert np.allclose(comp.log_density(x), log_density_mspe(x, p), atol=1e-10)


def test_predict_ties_go_to_first_component():
    comp = Component(np.zeros(2), decompose(np.eye(2)), 1.0, np.zeros(2))
    model = MixtureModel(ModelSpec.from_name("EIIE"), np.array([0.5, 0.5]),
                         [comp, comp.copy()])
    labels, z = predict(model, np.zeros((3, 2)))
    assert labels.tolist() == [0, 0, 0]
    assert np.allclose(z, 0.5)


def test_e_step_rows_sum_to_one():
    x, _ = _two_groups(6)
    r = fit(x, "VVVV", 2, max_iter=3)
    resp = e_step(x, r.model)
    assert np.allclose(resp.z.sum(axis=1), 1)


def test_collapsing_component_is_reported_not_raised():
    x = np.vstack([np.random.default_rng(0).normal(size=(30, 2)), np.full((3, 2), 50.0)])
    r = fit(x, "VVVV", 3, seed=0, max_iter=50)
    assert isinstance(r.converged, bool)
    if r.failure is not None:
        assert not r.converged


def test_bad_init_name():
    with pytest.raises(ValueError):
        fit(np.zeros((5, 2)) + np.arange(5)[:, None], "EIIV", 1, init="random")
