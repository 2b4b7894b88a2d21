"""Generalized EM for mixtures of skew power exponential distributions.

Each iteration runs an E-step followed by conditional M-steps in the order
mixing weights, locations, skewness, shape and scale.  Every conditional step
is accepted only if it does not lower the expected complete-data
log-likelihood, so the observed log-likelihood never decreases.

Skewness is carried internally as ``eta = Sigma^{-1/2} psi``; with ``eta`` held
fixed the skewing factor does not depend on the scale matrix, which makes the
scale step an MPE-type problem.  ``psi`` is recovered as ``Sigma^{1/2} eta``.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy import special
from scipy.special import logsumexp

from . import stiefel
from ._ascent import ascent_direction
from .distributions import BETA_MAX, LOG2, SpeParams, log_normalizer, phi_over_Phi
from .metrics import bic, icl
from .scale import (DegenerateComponentError, ModelSpec, ScaleDecomposition,
                    WeightedScatter, d_values, free_param_count, update_scale)

log = logging.getLogger(__name__)

BETA_MIN = 0.05
DELTA_FLOOR = 1e-12
EPSILON = 0.005
MAX_ITER = 1000


@dataclass
class Component:
    mu: np.ndarray
    scale: ScaleDecomposition
    beta: float
    eta: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        self.beta = float(self.beta)

    @property
    def sigma(self) -> np.ndarray:
        return self.scale.sigma()

    @property
    def psi(self) -> np.ndarray:
        return self.scale.power(0.5) @ self.eta

    def params(self) -> SpeParams:
        return SpeParams(self.mu, self.sigma, self.beta, self.psi)

    def copy(self) -> "Component":
        return Component(self.mu.copy(), self.scale.copy(), self.beta, self.eta.copy())

    def log_density(self, x, skewed=True):
        r = np.asarray(x, dtype=float) - self.mu
        delta = d_values(r, self.scale) / self.scale.lam
        out = (log_normalizer(self.mu.shape[0], self.beta) - 0.5 * self.scale.log_det()
               - 0.5 * delta ** self.beta)
        if skewed:
            out = out + LOG2 + special.log_ndtr(r @ self.eta)
        return out


@dataclass
class MixtureModel:
    spec: ModelSpec
    pi: np.ndarray
    components: List[Component]
    skewed: bool = True

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)

    @property
    def G(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].mu.shape[0]

    def copy(self) -> "MixtureModel":
        return MixtureModel(self.spec, self.pi.copy(), [c.copy() for c in self.components],
                            self.skewed)

    def weighted_log_densities(self, x) -> np.ndarray:
        """``(N, G)`` matrix of ``log pi_g + log f_g(x_i)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            logpi = np.log(self.pi)
        return np.column_stack([logpi[g] + c.log_density(x, self.skewed)
                                for g, c in enumerate(self.components)])


@dataclass
class Responsibilities:
    z: np.ndarray
    mask: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return self.z.sum(axis=0)


def _label_mask(labels, N):
    if labels is None:
        return np.full(N, -1), np.zeros(N, dtype=bool)
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (N,):
        raise ValueError("labels must have one entry per observation (-1 = unlabelled)")
    return labels, labels >= 0


def _loglik_from(L, labels, mask):
    total = 0.0
    if np.any(~mask):
        total += float(np.sum(logsumexp(L[~mask], axis=1)))
    if np.any(mask):
        total += float(np.sum(L[mask, labels[mask]]))
    return total


def _posterior(L, labels, mask):
    top = np.max(L, axis=1, keepdims=True)
    bad = ~np.isfinite(top[:, 0])
    if np.any(bad & ~mask):
        log.warning("%d observation(s) underflow in every component; using uniform rows",
                    int(np.sum(bad & ~mask)))
    top[bad] = 0.0
    w = np.exp(L - top)
    w[bad] = 1.0
    z = w / w.sum(axis=1, keepdims=True)
    if np.any(mask):
        z[mask] = 0.0
        z[mask, labels[mask]] = 1.0
    return z


def observed_loglik(x, model: MixtureModel, labels=None) -> float:
    """Observed-data log-likelihood.

    Unlabelled rows contribute ``log sum_g pi_g f_g(x_i)``; rows with a known
    component ``labels[i] >= 0`` contribute ``log pi_{g_i} f_{g_i}(x_i)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels, mask = _label_mask(labels, x.shape[0])
    out = _loglik_from(model.weighted_log_densities(x), labels, mask)
    if not np.isfinite(out):
        raise FloatingPointError("log-likelihood is not finite")
    return out


def e_step(x, model: MixtureModel, labels=None) -> Responsibilities:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels, mask = _label_mask(labels, x.shape[0])
    return Responsibilities(_posterior(model.weighted_log_densities(x), labels, mask), mask)


def update_pi(resp) -> np.ndarray:
    z = resp.z if isinstance(resp, Responsibilities) else np.asarray(resp, dtype=float)
    return z.sum(axis=0) / z.shape[0]


# -- location -----------------------------------------------------------------

def _mu_terms(mu, x, z, comp, skewed, prec, order):
    """Value (and gradient, Hessian when ``order`` is 2) of the location part of Q."""
    r = x - mu
    pr = r @ prec
    delta = np.einsum("ij,ij->i", pr, r)
    b = comp.beta
    val = -0.5 * float(z @ delta ** b)
    if skewed:
        s = r @ comp.eta
        val += float(z @ special.log_ndtr(s))
    if order == 0:
        return val
    dd = np.maximum(delta, DELTA_FLOOR)
    w1 = z * b * dd ** (b - 1.0)
    grad = w1 @ pr
    w2 = 2.0 * (b - 1.0) * w1 / dd
    H = -w1.sum() * prec - (pr * w2[:, None]).T @ pr
    if skewed:
        m = phi_over_Phi(s)
        grad -= float(z @ m) * comp.eta
        H -= float(z @ (s * m + m * m)) * np.outer(comp.eta, comp.eta)
    return val, grad, 0.5 * (H + H.T)


def q_mu(mu, x, z, comp: Component, skewed=True) -> float:
    """Location-dependent part of the expected complete-data log-likelihood."""
    return _mu_terms(mu, x, z, comp, skewed, comp.scale.power(-1.0), 0)


def mu_gradient(mu, x, z, comp: Component, skewed=True) -> np.ndarray:
    return _mu_terms(mu, x, z, comp, skewed, comp.scale.power(-1.0), 2)[1]


def mu_hessian(mu, x, z, comp: Component, skewed=True) -> np.ndarray:
    return _mu_terms(mu, x, z, comp, skewed, comp.scale.power(-1.0), 2)[2]


def update_mu(x, z, comp: Component, skewed=True, steps: int = 1) -> np.ndarray:
    """Safeguarded Newton step(s) for one component's location.

    Falls back to a scaled gradient step when the Hessian is not negative
    definite and halves the step until Q does not decrease.
    """
    x = np.asarray(x, dtype=float)
    prec = comp.scale.power(-1.0)
    mu = comp.mu
    q0, grad, H = _mu_terms(mu, x, z, comp, skewed, prec, 2)
    for k in range(steps):
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite location gradient")
        d = ascent_direction(grad, H)
        if d is None:
            break
        t = 1.0
        for _ in range(40):
            cand = mu + t * d
            q1 = _mu_terms(cand, x, z, comp, skewed, prec, 0)
            if q1 >= q0:
                break
            t *= 0.5
        else:
            break
        mu, q0 = cand, q1
        if k + 1 < steps:
            q0, grad, H = _mu_terms(mu, x, z, comp, skewed, prec, 2)
    return mu


# -- skewness -----------------------------------------------------------------

def q_skew(eta, x, z, mu) -> float:
    return float(z @ special.log_ndtr((np.asarray(x) - mu) @ eta))


def eta_minorizer(eta, eta0, x, z, mu) -> float:
    """Quadratic lower bound on :func:`q_skew` that touches it at ``eta0``.

    Built from ``log Phi(s) >= log Phi(s0) + m(s0)(s - s0) - (s - s0)^2 / 2``.
    """
    r = np.asarray(x) - mu
    s0 = r @ eta0
    ds = r @ (np.asarray(eta) - eta0)
    return float(z @ (special.log_ndtr(s0) + phi_over_Phi(s0) * ds - 0.5 * ds * ds))


def update_eta(x, z, mu, eta0) -> np.ndarray:
    """Maximiser of :func:`eta_minorizer`; a ridge is added if the weighted
    scatter is singular."""
    r = np.asarray(x, dtype=float) - mu
    A = (r * z[:, None]).T @ r
    b = (z * phi_over_Phi(r @ eta0)) @ r
    try:
        np.linalg.cholesky(A)
        step = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        ridge = 1e-8 * max(np.trace(A), 1e-300) / A.shape[0]
        log.warning("singular skewness scatter; adding ridge %.3g", ridge)
        step = np.linalg.solve(A + ridge * np.eye(A.shape[0]), b)
    return eta0 + step


def refine_eta(x, z, mu, eta, steps: int = 20, tol: float = 1e-10) -> np.ndarray:
    """Safeguarded Newton ascent on :func:`q_skew`, which is concave in ``eta``.

    Each step is halved until the objective does not decrease, so the result
    is never worse than ``eta``.  Stops early once the gain falls below
    ``tol``.
    """
    r = np.asarray(x, dtype=float) - mu
    q = q_skew(eta, x, z, mu)
    for _ in range(steps):
        s = r @ eta
        m = phi_over_Phi(s)
        g = (z * m) @ r
        w = z * m * (s + m)
        d = ascent_direction(g, -(r * w[:, None]).T @ r)
        if d is None:
            break
        t = 1.0
        for _ in range(40):
            cand = eta + t * d
            q_new = q_skew(cand, x, z, mu)
            if q_new >= q:
                break
            t *= 0.5
        else:
            break
        gain = q_new - q
        eta, q = cand, q_new
        if gain < tol:
            break
    return eta


# -- shape --------------------------------------------------------------------

def q_beta(beta, z, delta, p) -> float:
    """Shape-dependent part of Q; ``z`` and ``delta`` may be ``(N, k)`` to pool."""
    z = np.atleast_2d(np.asarray(z, dtype=float).T).T
    delta = np.atleast_2d(np.asarray(delta, dtype=float).T).T
    return float(z.sum() * log_normalizer(p, beta) - 0.5 * np.sum(z * delta ** beta))


def _dq_beta(beta, n, z, delta, logd, p, second=False):
    """First (and optionally second) derivative of :func:`q_beta`."""
    a = p / (2.0 * beta)
    psi = special.digamma(1.0 + a) + LOG2
    w = z * delta ** beta * logd
    d1 = n * a / beta * psi - 0.5 * float(np.sum(w))
    if not second:
        return d1
    d2 = -n * (p / beta ** 3 * psi + a * a / beta ** 2 * special.zeta(2.0, 1.0 + a)) \
        - 0.5 * float(w @ logd)
    return d1, d2


def _root_in_bracket(f, lo, hi, f_lo, x0, tol=1e-12, max_iter=100):
    """Newton's method kept inside a sign-change bracket, bisecting when a
    Newton step would leave it."""
    x = x0
    for _ in range(max_iter):
        g, h = f(x)
        if g == 0:
            return x
        if np.sign(g) == np.sign(f_lo):
            lo, f_lo = x, g
        else:
            hi = x
        step = g / h if h != 0 else np.inf
        x_new = x - step
        if not (min(lo, hi) < x_new < max(lo, hi)):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * max(1.0, abs(x)) or abs(hi - lo) <= tol * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


def maximize_beta(z, delta, p, current, bounds=(BETA_MIN, BETA_MAX)) -> float:
    """Maximise :func:`q_beta` on ``bounds`` by a bracketed root search on its
    derivative, starting from ``current``.  Never returns a value worse than
    ``current``."""
    z = np.ravel(z)
    delta = np.ravel(delta)
    keep = (z > 0) & (delta > 0)
    zk, dk = z[keep], delta[keep]
    logd = np.log(dk)
    n = float(z.sum())
    lo, hi = bounds
    b0 = float(np.clip(current, lo, hi))

    def dq(b):
        return _dq_beta(b, n, zk, dk, logd, p)

    def dq2(b):
        return _dq_beta(b, n, zk, dk, logd, p, True)

    g0, h0 = dq2(b0)
    if g0 == 0:
        root = b0
    else:
        a, c = b0, b0
        factor = 2.0 if g0 > 0 else 0.5
        edge = hi if g0 > 0 else lo
        # first trial point: the Newton step when it heads uphill
        newton = b0 - g0 / h0 if h0 < 0 else None
        first = True
        while True:
            if first and newton is not None and newton != b0:
                c = min(newton, hi) if g0 > 0 else max(newton, lo)
            else:
                c = min(c * factor, hi) if g0 > 0 else max(c * factor, lo)
            first = False
            gc = dq(c)
            if np.sign(gc) != np.sign(g0):
                f_a = g0 if a == b0 else dq(a)
                # start from whichever end has the smaller slope
                x0 = c if abs(gc) < abs(f_a) else a
                root = _root_in_bracket(dq2, a, c, f_a, x0)
                break
            if c == edge:
                root = edge
                break
            a = c
    if q_beta(root, z, delta, p) >= q_beta(current, z, delta, p):
        return float(root)
    return float(current)


def update_beta(x, z, model: MixtureModel) -> np.ndarray:
    """Shape update for every component (pooled when the model has equal shapes)."""
    x = np.asarray(x, dtype=float)
    delta = np.column_stack([d_values(x - c.mu, c.scale) / c.scale.lam
                             for c in model.components])
    current = np.array([c.beta for c in model.components])
    if model.spec.equal_beta:
        return np.full(model.G, maximize_beta(z, delta, model.p, current[0]))
    return np.array([maximize_beta(z[:, g], delta[:, g], model.p, current[g])
                     for g in range(model.G)])


# -- convergence --------------------------------------------------------------

def aitken_converged(trace, epsilon: float = EPSILON) -> bool:
    """Aitken-acceleration stopping rule on the last three log-likelihoods."""
    if len(trace) < 3:
        return False
    l0, l1, l2 = trace[-3], trace[-2], trace[-1]
    denom = l1 - l0
    if denom == 0:
        return abs(l2 - l1) < epsilon
    a = (l2 - l1) / denom
    if a == 1:
        return abs(l2 - l1) < epsilon
    l_inf = l1 + (l2 - l1) / (1.0 - a)
    return 0 <= l_inf - l2 < epsilon


@dataclass
class ConvergenceMonitor:
    epsilon: float = EPSILON
    trace: List[float] = field(default_factory=list)

    def append(self, value: float):
        self.trace.append(float(value))

    def converged(self) -> bool:
        return aitken_converged(self.trace, self.epsilon)


# -- fitting ------------------------------------------------------------------

@dataclass
class FitResult:
    model: MixtureModel
    z: np.ndarray
    labels: np.ndarray
    loglik: float
    n_params: int
    n: int
    bic: float
    icl: float
    iterations: int
    converged: bool
    trace: List[float]
    seed: Optional[int] = None
    init: str = "kmeans"
    failure: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    @property
    def spec(self) -> ModelSpec:
        return self.model.spec

    @property
    def G(self) -> int:
        return self.model.G


@dataclass(frozen=True)
class GemConfig:
    """Engine settings.

    ``mu_steps`` Newton steps for each location; ``eta_steps`` Newton steps on
    the exact skewness objective after the closed-form minorizer step (0 keeps
    the minorizer step alone); ``line_search`` bounds the orientation update.
    """

    max_iter: int = MAX_ITER
    epsilon: float = EPSILON
    mu_steps: int = 1
    eta_steps: int = 20
    line_search: stiefel.LineSearchConfig = stiefel.LineSearchConfig(max_iter=1)


def gem_iteration(x, model: MixtureModel, resp: Responsibilities,
                  config: GemConfig = GemConfig()) -> MixtureModel:
    """One round of conditional M-steps given the current responsibilities."""
    z = resp.z
    new = model.copy()
    new.pi = update_pi(z)
    for g, comp in enumerate(new.components):
        comp.mu = update_mu(x, z[:, g], comp, new.skewed, config.mu_steps)
    if new.skewed:
        for g, comp in enumerate(new.components):
            # the quadratic minorizer guarantees this does not lower Q
            comp.eta = update_eta(x, z[:, g], comp.mu, comp.eta)
            if config.eta_steps:
                comp.eta = refine_eta(x, z[:, g], comp.mu, comp.eta, config.eta_steps)
    for comp, b in zip(new.components, update_beta(x, z, new)):
        comp.beta = float(b)
    stats = WeightedScatter.from_data(x, z, [c.mu for c in new.components])
    decs = update_scale(new.spec, stats, [c.scale for c in new.components],
                        [c.beta for c in new.components], config.line_search)
    for comp, dec in zip(new.components, decs):
        comp.scale = dec
    return new


def fit(x, spec: ModelSpec, G: int, init="kmeans", labels=None, seed: int = 0,
        max_iter: int = MAX_ITER, epsilon: float = EPSILON, skewed: bool = True,
        config: Optional[GemConfig] = None) -> FitResult:
    """Fit a G-component mixture by generalized EM.

    ``init`` is ``"kmeans"``, an array of starting hard labels, or a
    :class:`MixtureModel` to warm-start from.  ``labels`` (``-1`` for
    unlabelled rows) switches to semi-supervised classification: labelled rows
    keep one-hot responsibilities throughout.
    """
    from .initialization import init_params, kmeans_labels

    x = np.atleast_2d(np.asarray(x, dtype=float))
    N, p = x.shape
    if isinstance(spec, str):
        spec = ModelSpec.from_name(spec)
    config = config or GemConfig()
    config = replace(config, max_iter=max_iter, epsilon=epsilon)
    labels_arr, mask = _label_mask(labels, N)
    if isinstance(init, MixtureModel):
        model = init.copy()
        model.spec = spec
        model.skewed = skewed
        if not skewed:
            for c in model.components:
                c.eta = np.zeros(p)
        init_name = "model"
    else:
        if isinstance(init, str):
            if init != "kmeans":
                raise ValueError(f"unknown init {init!r}")
            start = kmeans_labels(x, G, seed, labels_arr if np.any(mask) else None)
            init_name = "kmeans"
        else:
            start = np.asarray(init, dtype=int)
            init_name = "labels"
        model = init_params(x, start, spec, G)
        model.skewed = skewed
    m = free_param_count(spec, p, G, skewed)
    monitor = ConvergenceMonitor(config.epsilon)
    failure = None
    converged = False
    L = model.weighted_log_densities(x)
    z = _posterior(L, labels_arr, mask)
    monitor.append(_loglik_from(L, labels_arr, mask))
    iterations = 0
    try:
        for iterations in range(1, config.max_iter + 1):
            model = gem_iteration(x, model, Responsibilities(z, mask), config)
            L = model.weighted_log_densities(x)
            z = _posterior(L, labels_arr, mask)
            ll = _loglik_from(L, labels_arr, mask)
            if not np.isfinite(ll):
                raise FloatingPointError("log-likelihood became non-finite")
            monitor.append(ll)
            if monitor.converged():
                converged = True
                break
    except (DegenerateComponentError, FloatingPointError, np.linalg.LinAlgError) as exc:
        failure = str(exc)
        log.info("fit %s G=%d abandoned: %s", spec.name, G, failure)
    loglik = monitor.trace[-1]
    b = bic(loglik, m, N)
    hard = np.argmax(z, axis=1)
    return FitResult(model=model, z=z, labels=hard, loglik=loglik, n_params=m, n=N,
                     bic=b, icl=icl(b, z), iterations=iterations,
                     converged=converged and failure is None, trace=list(monitor.trace),
                     seed=seed, init=init_name, failure=failure,
                     metadata={"semi_supervised": bool(np.any(mask)), "skewed": skewed})


def predict(model: MixtureModel, x):
    """MAP labels and responsibilities for new observations (ties go to the
    lowest component index)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    L = model.weighted_log_densities(x)
    if not np.all(np.isfinite(np.max(L, axis=1))):
        raise FloatingPointError("density underflow for some observations")
    z = _posterior(L, np.full(x.shape[0], -1), np.zeros(x.shape[0], dtype=bool))
    return np.argmax(z, axis=1), z
