"""Eigen-decomposed scale matrices ``Sigma_g = lambda_g Gamma_g Delta_g Gamma_g'``.

Eight structures are supported; crossing them with an equal (E) or varying (V)
shape parameter gives the 16 model specifications.  The conditional update of
the scale parameters maximises, or at least increases,

    Q_scale = -1/2 sum_g [ n_g log|Sigma_g| + sum_i z_ig (d_ig / lambda_g)^beta_g ]

with ``d_ig = r_ig' Gamma_g Delta_g^{-1} Gamma_g' r_ig``.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from . import stiefel
from ._ascent import newton_ascent
from .linalg import floor_eigenvalues, sym_eig

log = logging.getLogger(__name__)

STRUCTURES = ("EII", "VII", "EEI", "VVI", "EEE", "EEV", "VVE", "VVV")
BETA_CONSTRAINTS = ("E", "V")
LAMBDA_FLOOR = 1e-10
D_FLOOR = 1e-12


class DegenerateComponentError(RuntimeError):
    def __init__(self, group, count):
        super().__init__(f"component {group} is degenerate (soft count {count:.3g})")
        self.group = group
        self.count = count


@dataclass(frozen=True)
class ModelSpec:
    structure: str
    beta_constraint: str

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown scale structure {self.structure!r}")
        if self.beta_constraint not in BETA_CONSTRAINTS:
            raise ValueError(f"beta constraint must be E or V, got {self.beta_constraint!r}")

    @classmethod
    def from_name(cls, name: str) -> "ModelSpec":
        name = name.strip().upper()
        if len(name) != 4:
            raise ValueError(f"model names look like 'VVIE', got {name!r}")
        return cls(name[:3], name[3])

    @property
    def name(self) -> str:
        return self.structure + self.beta_constraint

    @property
    def equal_beta(self) -> bool:
        return self.beta_constraint == "E"

    @property
    def shared_volume_shape(self) -> bool:
        # volume and shape always share the same E/V pattern in this family
        return self.structure[0] == "E"

    @property
    def spherical(self) -> bool:
        return self.structure[1:] == "II"

    @property
    def orientation(self) -> str:
        """'I' (identity), 'E' (shared) or 'V' (per component)."""
        return self.structure[2]

    def __str__(self):
        return self.name


ALL_SPECS = tuple(ModelSpec(s, b) for s in STRUCTURES for b in BETA_CONSTRAINTS)


def parse_models(text: str) -> List[ModelSpec]:
    if text.strip().lower() == "all":
        return list(ALL_SPECS)
    return [ModelSpec.from_name(t) for t in text.split(",") if t.strip()]


def scale_param_count(structure: str, p: int, G: int) -> int:
    full = p * (p + 1) // 2
    return {
        "EII": 1,
        "VII": G,
        "EEI": p,
        "VVI": G * p,
        "EEE": full,
        "EEV": G * full - (G - 1) * p,
        "VVE": full + (G - 1) * p,
        "VVV": G * full,
    }[structure]


def free_param_count(spec: ModelSpec, p: int, G: int, skewed: bool = True) -> int:
    """Total free parameters: scale + mixing weights + locations + skewness + shape."""
    if p < 1 or G < 1:
        raise ValueError("p and G must be positive")
    m = scale_param_count(spec.structure, p, G) + (G - 1) + G * p
    if skewed:
        m += G * p
    m += 1 if spec.equal_beta else G
    return m


@dataclass
class ScaleDecomposition:
    lam: float
    gamma: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        self.lam = float(self.lam)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)

    @property
    def p(self) -> int:
        return self.delta.shape[0]

    def copy(self) -> "ScaleDecomposition":
        return ScaleDecomposition(self.lam, self.gamma.copy(), self.delta.copy())

    @classmethod
    def identity(cls, p: int, lam: float = 1.0) -> "ScaleDecomposition":
        return cls(lam, np.eye(p), np.ones(p))

    def log_det(self) -> float:
        return self.p * np.log(self.lam) + float(np.sum(np.log(self.delta)))

    def sigma(self) -> np.ndarray:
        return compose(self)

    def power(self, a: float) -> np.ndarray:
        """Symmetric matrix power ``Sigma^a``."""
        out = (self.gamma * (self.lam * self.delta) ** a) @ self.gamma.T
        return 0.5 * (out + out.T)


def compose(dec: ScaleDecomposition) -> np.ndarray:
    return dec.power(1.0)


def decompose(S) -> ScaleDecomposition:
    """Split an SPD matrix into volume, orientation and unit-determinant shape."""
    eig = sym_eig(S)
    if eig.values[-1] <= 0:
        raise ValueError("matrix is not positive definite")
    logv = np.log(eig.values)
    lam = float(np.exp(logv.mean()))
    return ScaleDecomposition(lam, eig.vectors, np.exp(logv - logv.mean()))


def _from_diag(b) -> ScaleDecomposition:
    b = np.maximum(np.asarray(b, dtype=float), LAMBDA_FLOOR * max(np.max(b), 1e-300))
    logb = np.log(b)
    return ScaleDecomposition(np.exp(logb.mean()), np.eye(b.shape[0]),
                              np.exp(logb - logb.mean()))


@dataclass
class WeightedScatter:
    """Per-component residuals ``x_i - mu_g`` and responsibilities."""
    residuals: List[np.ndarray]
    z: np.ndarray
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.counts = self.z.sum(axis=0)

    @classmethod
    def from_data(cls, x, z, mus):
        x = np.asarray(x, dtype=float)
        return cls([x - mu for mu in mus], z)

    @property
    def G(self) -> int:
        return self.z.shape[1]

    @property
    def p(self) -> int:
        return self.residuals[0].shape[1]

    def scatter(self, g, weights=None) -> np.ndarray:
        w = self.z[:, g] if weights is None else self.z[:, g] * weights
        r = self.residuals[g]
        out = (r * w[:, None]).T @ r
        return 0.5 * (out + out.T)


def d_values(r, dec: ScaleDecomposition) -> np.ndarray:
    y = r @ dec.gamma
    return (y * y) @ (1.0 / dec.delta)


def q_scale(stats: WeightedScatter, decs: Sequence[ScaleDecomposition], betas) -> float:
    total = 0.0
    for g, dec in enumerate(decs):
        d = d_values(stats.residuals[g], dec)
        total += stats.counts[g] * dec.log_det()
        total += float(stats.z[:, g] @ (d / dec.lam) ** betas[g])
    return -0.5 * total


def update_lambda(z, d, beta, p: int, shared: bool = False) -> np.ndarray:
    """Volume update holding orientation and shape fixed.

    ``z`` and ``d`` are ``(N, G)`` arrays (or length-N vectors for a single
    component), ``beta`` the per-component shapes.  Returns the stationary
    point of ``Q_scale`` in the volume(s): ``lambda_g = [beta_g sum_i z d^beta
    / (n_g p)]^(1/beta_g)``, or a single pooled value when ``shared``.
    """
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float)
    if z.ndim == 1:
        z, d = z[:, None], d[:, None]
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (z.shape[1],))
    n = z.sum(axis=0)
    D = np.sum(z * d ** beta, axis=0)
    if not shared:
        lam = np.where(D > 0, (beta * D / np.maximum(n * p, 1e-300)) ** (1.0 / beta), 0.0)
        return np.maximum(lam, LAMBDA_FLOOR)
    if not np.any(D > 0):
        return np.full(z.shape[1], LAMBDA_FLOOR)
    if np.all(beta == beta[0]):
        b = beta[0]
        lam = (b * D.sum() / (p * n.sum())) ** (1.0 / b)
        return np.full(z.shape[1], max(lam, LAMBDA_FLOOR))
    # convex in t = log(lambda): h'(t) = p sum n - sum beta D exp(-beta t)
    t = np.log(np.sum(beta * D) / (p * n.sum())) / beta.mean()
    for _ in range(100):
        e = beta * D * np.exp(-beta * t)
        h1 = p * n.sum() - e.sum()
        h2 = np.sum(beta * e)
        step = h1 / h2
        t -= np.clip(step, -5.0, 5.0)
        if abs(step) < 1e-13 * max(1.0, abs(t)):
            break
    return np.full(z.shape[1], max(np.exp(t), LAMBDA_FLOOR))


def _blocks(spec: ModelSpec, G: int):
    if spec.structure in ("VII", "VVI", "VVV"):
        return [[g] for g in range(G)]
    return [list(range(G))]


def update_scale(spec: ModelSpec, stats: WeightedScatter,
                 current: Sequence[ScaleDecomposition], beta,
                 stiefel_config: stiefel.LineSearchConfig = stiefel.LineSearchConfig(max_iter=1),
                 min_count: float = None) -> List[ScaleDecomposition]:
    """One generalized M-step for the scale parameters.

    Components whose shapes are all at most 1 use the tangent-line
    minorizer of ``delta -> delta^beta`` and a weighted Gaussian-type update;
    otherwise orientation, shape and volume are improved in turn.  The
    result never lowers ``Q_scale``.
    """
    p, G = stats.p, stats.G
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (G,))
    threshold = p + 1 if min_count is None else min_count
    for g in range(G):
        if stats.counts[g] < threshold:
            raise DegenerateComponentError(g, stats.counts[g])
    out = [dec.copy() for dec in current]
    for block in _blocks(spec, G):
        sub = WeightedScatter([stats.residuals[g] for g in block], stats.z[:, block])
        cur = [out[g] for g in block]
        b = beta[block]
        before = q_scale(sub, cur, b)
        routes = [_mm_update, _block_update] if np.all(b <= 1) else [_block_update]
        for route in routes:
            cand = route(spec, sub, cur, b, stiefel_config)
            after = q_scale(sub, cand, b)
            if np.isfinite(after) and after >= before:
                for g, dec in zip(block, cand):
                    out[g] = dec
                break
    return out


def gaussian_scale_mstep(spec: ModelSpec, scatters, counts, current=None,
                         stiefel_config=stiefel.LineSearchConfig(max_iter=1),
                         passes: int = 3) -> List[ScaleDecomposition]:
    """Maximise ``-1/2 sum_g [n_g log|Sigma_g| + tr(Sigma_g^{-1} W_g)]`` over
    the structure in ``spec`` (closed form except VVE, which iterates)."""
    G = len(scatters)
    p = scatters[0].shape[0]
    counts = np.asarray(counts, dtype=float)
    N = counts.sum()
    W = [floor_eigenvalues(w) if np.any(w) else np.eye(p) * LAMBDA_FLOOR for w in scatters]
    s = spec.structure
    if s == "EII":
        lam = sum(np.trace(w) for w in W) / (p * N)
        return [ScaleDecomposition.identity(p, max(lam, LAMBDA_FLOOR)) for _ in range(G)]
    if s == "VII":
        return [ScaleDecomposition.identity(p, max(np.trace(w) / (p * n), LAMBDA_FLOOR))
                for w, n in zip(W, counts)]
    if s == "EEI":
        dec = _from_diag(sum(np.diag(w) for w in W) / N)
        return [dec.copy() for _ in range(G)]
    if s == "VVI":
        return [_from_diag(np.diag(w) / n) for w, n in zip(W, counts)]
    if s == "EEE":
        dec = decompose(floor_eigenvalues(sum(W) / N))
        return [dec.copy() for _ in range(G)]
    if s == "VVV":
        return [decompose(floor_eigenvalues(w / n)) for w, n in zip(W, counts)]
    if s == "EEV":
        eigs = [sym_eig(w) for w in W]
        A = np.maximum(sum(e.values for e in eigs), LAMBDA_FLOOR)
        shared = _from_diag(A / N)
        return [ScaleDecomposition(shared.lam, e.vectors, shared.delta.copy()) for e in eigs]
    # VVE: alternate diagonal updates with an orientation ascent step
    gamma = current[0].gamma.copy() if current is not None else sym_eig(sum(W)).vectors
    for _ in range(passes):
        B = [np.maximum(np.diag(gamma.T @ w @ gamma) / n, LAMBDA_FLOOR) for w, n in zip(W, counts)]

        def objective(q, B=B):
            val, grad = 0.0, np.zeros_like(q)
            for w, b in zip(W, B):
                wq = w @ q
                val -= 0.5 * np.sum(wq * q / b)
                grad -= wq / b
            return val, grad

        gamma = stiefel.maximize(objective, gamma, stiefel_config)
    out = []
    for w, n in zip(W, counts):
        dec = _from_diag(np.diag(gamma.T @ w @ gamma) / n)
        out.append(ScaleDecomposition(dec.lam, gamma.copy(), dec.delta))
    return out


def _mm_update(spec, stats, current, beta, stiefel_config):
    scatters = []
    for g, dec in enumerate(current):
        delta = np.maximum(d_values(stats.residuals[g], dec) / dec.lam, D_FLOOR)
        w = beta[g] * delta ** (beta[g] - 1.0)
        scatters.append(stats.scatter(g, w))
    return gaussian_scale_mstep(spec, scatters, stats.counts, current, stiefel_config)


def _gamma_objective(stats, groups, decs, beta):
    def objective(q):
        val, grad = 0.0, np.zeros_like(q)
        for g in groups:
            dec = decs[g]
            r, z = stats.residuals[g], stats.z[:, g]
            y = r @ q
            d = np.maximum((y * y) @ (1.0 / dec.delta), 0.0)
            val -= 0.5 * float(z @ (d / dec.lam) ** beta[g])
            c = z * beta[g] * dec.lam ** -beta[g] * np.maximum(d, D_FLOOR) ** (beta[g] - 1.0)
            grad -= (r * c[:, None]).T @ y / dec.delta
        return val, grad
    return objective


def _sum_zero_basis(p):
    centering = np.eye(p) - 1.0 / p
    vals, vecs = np.linalg.eigh(centering)
    return vecs[:, vals > 0.5]


def _delta_step(stats, groups, decs, beta, iters=1):
    """Newton ascent on log(Delta) restricted to sum zero (|Delta| = 1)."""
    p = stats.p
    P = _sum_zero_basis(p)
    parts = []
    for g in groups:
        y = stats.residuals[g] @ decs[g].gamma
        parts.append((y * y, stats.z[:, g], decs[g].lam, beta[g]))
    a0 = np.log(decs[groups[0]].delta)

    def pieces(a):
        e_a = np.exp(-a)
        out = []
        for c, z, lam, b in parts:
            e = c * e_a / lam
            h = e.sum(axis=1)
            out.append((e, h, z, b))
        return out

    def f(v):
        return -0.5 * sum(float(z @ h ** b) for _, h, z, b in pieces(a0 + P @ v))

    def grad(v):
        gvec = np.zeros(p)
        for e, h, z, b in pieces(a0 + P @ v):
            hh = np.maximum(h, D_FLOOR)
            gvec += 0.5 * (z * b * hh ** (b - 1.0)) @ e
        return P.T @ gvec

    def hess(v):
        H = np.zeros((p, p))
        for e, h, z, b in pieces(a0 + P @ v):
            hh = np.maximum(h, D_FLOOR)
            w1 = z * b * (b - 1.0) * hh ** (b - 2.0)
            w2 = z * b * hh ** (b - 1.0)
            H -= 0.5 * ((e * w1[:, None]).T @ e + np.diag(w2 @ e))
        return P.T @ H @ P

    v, _ = newton_ascent(f, np.zeros(P.shape[1]), grad, hess, max_iter=iters)
    a = a0 + P @ v
    a -= a.mean()
    return np.exp(a)


def _block_update(spec, stats, current, beta, stiefel_config):
    decs = [dec.copy() for dec in current]
    G = len(decs)
    if spec.orientation != "I":
        groups_list = [list(range(G))] if spec.orientation == "E" else [[g] for g in range(G)]
        for groups in groups_list:
            q = stiefel.maximize(_gamma_objective(stats, groups, decs, beta),
                                 decs[groups[0]].gamma, stiefel_config)
            for g in groups:
                decs[g].gamma = q.copy()
    if not spec.spherical:
        groups_list = [list(range(G))] if spec.shared_volume_shape else [[g] for g in range(G)]
        for groups in groups_list:
            delta = _delta_step(stats, groups, decs, beta)
            for g in groups:
                decs[g].delta = delta.copy()
    d = np.column_stack([d_values(stats.residuals[g], decs[g]) for g in range(G)])
    lam = update_lambda(stats.z, d, beta, stats.p, shared=spec.shared_volume_shape)
    for g in range(G):
        decs[g].lam = float(lam[g])
    return decs
