"""Multivariate power exponential (MPE) and skew power exponential (MSPE)
densities, plus samplers.

Parameterisation: location ``mu``, positive-definite scale ``sigma``, shape
``beta`` and skewness ``psi``.  The MSPE density is

    f(x) = 2 g(x | mu, sigma, beta) Phi(psi' sigma^{-1/2} (x - mu))

where ``g`` is the MPE density with kernel ``exp(-delta(x)^beta / 2)``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from .linalg import LinalgError, inv_sqrt, log_det, sqrtm_spd

BETA_MAX = 20.0
LOG2 = np.log(2.0)
SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def log_normalizer(p: int, beta):
    """Log of the MPE normalising constant excluding the ``|sigma|`` factor."""
    a = p / (2.0 * np.asarray(beta, dtype=float))
    return (np.log(p) + special.gammaln(p / 2.0) - 0.5 * p * np.log(np.pi)
            - special.gammaln(1.0 + a) - (1.0 + a) * LOG2)


def log_cdf_normal(s):
    """``log Phi(s)``, accurate far into the lower tail."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("log_cdf_normal requires finite input")
    out = special.log_ndtr(s)
    return float(out) if out.ndim == 0 else out


def phi_over_Phi(s):
    """Inverse Mills ratio ``phi(s) / Phi(s)``.

    Uses ``phi(s)/Phi(s) = sqrt(2/pi) / erfcx(-s/sqrt(2))`` so neither tail
    underflows.
    """
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("phi_over_Phi requires finite input")
    out = SQRT_2_OVER_PI / special.erfcx(-s / np.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def _check_beta(beta):
    if not (0 < beta <= BETA_MAX):
        raise ValueError(f"beta must lie in (0, {BETA_MAX}], got {beta}")


@dataclass(frozen=True)
class SpeParams:
    mu: np.ndarray
    sigma: np.ndarray
    beta: float
    psi: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        p = mu.shape[0]
        sigma = np.asarray(self.sigma, dtype=float).reshape(p, p)
        psi = np.zeros(p) if self.psi is None else np.atleast_1d(
            np.asarray(self.psi, dtype=float))
        if psi.shape != (p,):
            raise ValueError(f"psi must have length {p}")
        _check_beta(self.beta)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "beta", float(self.beta))
        self.sigma_inv_sqrt  # validates positive definiteness

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    @cached_property
    def sigma_inv_sqrt(self):
        return inv_sqrt(self.sigma)

    @cached_property
    def sigma_sqrt(self):
        return sqrtm_spd(self.sigma)

    @cached_property
    def log_det_sigma(self):
        return log_det(self.sigma)

    @property
    def eta(self):
        return self.sigma_inv_sqrt @ self.psi


def _standardised(x, mu, sigma_inv_sqrt):
    x = np.asarray(x, dtype=float)
    p = mu.shape[0]
    if x.shape[-1:] != (p,):
        raise LinalgError(f"x has trailing dimension {x.shape[-1:]}, expected {p}")
    return (x - mu) @ sigma_inv_sqrt


def log_density_mpe(x, mu, sigma, beta):
    """Log MPE density at a point or at the rows of an ``(n, p)`` array."""
    _check_beta(beta)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    p = mu.shape[0]
    sigma = np.asarray(sigma, dtype=float).reshape(p, p)
    y = _standardised(x, mu, inv_sqrt(sigma))
    delta = np.sum(y * y, axis=-1)
    return (log_normalizer(p, beta) - 0.5 * log_det(sigma)
            - 0.5 * delta ** beta)


def log_density_mspe(x, params: SpeParams):
    """Log MSPE density; with zero skewness this is exactly the MPE value."""
    if not np.any(params.psi):
        return log_density_mpe(x, params.mu, params.sigma, params.beta)
    y = _standardised(x, params.mu, params.sigma_inv_sqrt)
    delta = np.sum(y * y, axis=-1)
    s = y @ params.psi
    return (LOG2 + log_normalizer(params.p, params.beta)
            - 0.5 * params.log_det_sigma - 0.5 * delta ** params.beta
            + special.log_ndtr(s))


def sample_mpe(n: int, mu, sigma, beta, seed=None):
    """Draw ``n`` rows from the MPE distribution.

    Uses ``X = mu + R sigma^{1/2} U`` with ``U`` uniform on the sphere and
    ``R^(2 beta) ~ Gamma(p / (2 beta), scale=2)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_beta(beta)
    rng = np.random.default_rng(seed)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    p = mu.shape[0]
    root = sqrtm_spd(np.asarray(sigma, dtype=float).reshape(p, p))
    return _draw_mpe(rng, n, mu, root, beta)


def _draw_mpe(rng, n, mu, root, beta):
    p = mu.shape[0]
    u = rng.standard_normal((n, p))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    t = rng.gamma(p / (2.0 * beta), 2.0, size=n)
    r = t ** (1.0 / (2.0 * beta))
    return mu + r[:, None] * (u @ root)


def sample_mspe_rejection(n: int, params: SpeParams, seed=None,
                          return_proposals: bool = False):
    """Exact MSPE sampler.

    Proposes from the MPE and keeps a proposal with probability
    ``Phi(psi' sigma^{-1/2} (x - mu))``; the expected acceptance rate is 1/2
    for every parameter value.  With ``return_proposals`` the number of
    proposals consumed is returned alongside the sample.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    chunks, kept, proposed = [], 0, 0
    while kept < n:
        m = 2 * (n - kept) + 16
        x = _draw_mpe(rng, m, params.mu, params.sigma_sqrt, params.beta)
        s = ((x - params.mu) @ params.sigma_inv_sqrt) @ params.psi
        accept = rng.random(m) < special.ndtr(s)
        # count proposals only up to the n-th acceptance
        idx = np.flatnonzero(accept)
        need = n - kept
        if idx.size >= need:
            proposed += idx[need - 1] + 1
            idx = idx[:need]
        else:
            proposed += m
        chunks.append(x[idx])
        kept += idx.size
    out = np.concatenate(chunks)
    return (out, int(proposed)) if return_proposals else out


def default_proposal_scale(sigma) -> float:
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    p = sigma.shape[0]
    return 2.4 * np.sqrt(np.trace(sigma) / p ** 2)


def sample_mspe_mh(n: int, params: SpeParams, seed=None, proposal_scale=None,
                   burn_in: int = 1000, thinning: int = 5):
    """Random-walk Metropolis sampler targeting the MSPE density.

    Gaussian isotropic proposals; the chain starts at ``mu``.  Kept for
    cross-checking against :func:`sample_mspe_rejection`, which is exact.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if burn_in < 0 or thinning < 1:
        raise ValueError("burn_in must be >= 0 and thinning >= 1")
    scale = default_proposal_scale(params.sigma) if proposal_scale is None \
        else float(proposal_scale)
    if not scale > 0:
        raise ValueError("proposal_scale must be positive")
    rng = np.random.default_rng(seed)
    p, beta = params.p, params.beta
    W, psi, mu = params.sigma_inv_sqrt, params.psi, params.mu

    def logf(x):
        y = W @ (x - mu)
        return -0.5 * float(y @ y) ** beta + float(special.log_ndtr(y @ psi))

    steps = burn_in + n * thinning
    steps_noise = scale * rng.standard_normal((steps, p))
    log_u = np.log(rng.random(steps))
    out = np.empty((n, p))
    x, fx = mu.copy(), logf(mu)
    k = 0
    for t in range(steps):
        y = x + steps_noise[t]
        fy = logf(y)
        if log_u[t] < fy - fx:
            x, fx = y, fy
        if t >= burn_in and (t - burn_in + 1) % thinning == 0:
            out[k] = x
            k += 1
    return out
