"""Simulated mixtures, including the three bundled study designs."""

import json
from dataclasses import dataclass, replace
from importlib import resources
from typing import List, Optional

import numpy as np

from .data import DataError, Dataset
from .distributions import SpeParams, sample_mspe_mh, sample_mspe_rejection

SAMPLERS = ("rejection", "mh")
DESIGNS = (1, 2, 3)


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    proportions: tuple
    components: tuple
    group_sizes: str = "multinomial"
    sampler: str = "rejection"
    seed: int = 0
    design: Optional[int] = None
    name: str = "simulation"

    def __post_init__(self):
        props = np.asarray(self.proportions, dtype=float)
        if self.n < 1:
            raise ValueError("n must be positive")
        if props.ndim != 1 or props.size != len(self.components) or props.size < 1:
            raise ValueError("need one mixing proportion per component")
        if np.any(props <= 0) or abs(props.sum() - 1.0) > 1e-9:
            raise ValueError("mixing proportions must be positive and sum to 1")
        if self.group_sizes not in ("multinomial", "binomial"):
            raise ValueError(f"unknown group-size law {self.group_sizes!r}")
        if self.group_sizes == "binomial" and props.size != 2:
            raise ValueError("binomial group sizes need exactly two components")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if len({c.p for c in self.components}) != 1:
            raise ValueError("components must share one dimension")

    @property
    def p(self) -> int:
        return self.components[0].p

    @property
    def G(self) -> int:
        return len(self.components)

    @classmethod
    def from_dict(cls, d: dict, seed: int = 0, sampler: str = "rejection"):
        comps = []
        for c in d["components"]:
            if "sigma" in c:
                sigma = np.asarray(c["sigma"], dtype=float)
            else:
                gamma = np.asarray(c["gamma"], dtype=float)
                sigma = c.get("lambda", 1.0) * gamma @ np.diag(c["delta"]) @ gamma.T
            comps.append(SpeParams(c["mu"], sigma, c["beta"], c.get("psi")))
        return cls(n=int(d["n"]), proportions=tuple(float(v) for v in d["proportions"]),
                   components=tuple(comps), group_sizes=d.get("group_sizes", "multinomial"),
                   sampler=sampler, seed=seed, design=d.get("design"),
                   name=d.get("name", "simulation"))

    @classmethod
    def from_json(cls, path, seed: int = 0, sampler: str = "rejection"):
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON ({exc})") from None
        try:
            return cls.from_dict(d, seed, sampler)
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: incomplete simulation config ({exc})") from None

    @classmethod
    def design_config(cls, design: int, seed: int = 0, sampler: str = "rejection"):
        """One of the bundled study designs (1, 2 or 3)."""
        if design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        text = resources.files("spemix.designs").joinpath(f"design{design}.json").read_text()
        return cls.from_dict(json.loads(text), seed, sampler)

    def to_dict(self) -> dict:
        return {
            "design": self.design,
            "name": self.name,
            "n": self.n,
            "group_sizes": self.group_sizes,
            "proportions": [float(v) for v in self.proportions],
            "sampler": self.sampler,
            "seed": self.seed,
            "components": [{"mu": c.mu.tolist(), "sigma": c.sigma.tolist(),
                            "beta": c.beta, "psi": c.psi.tolist()}
                           for c in self.components],
        }

    def with_seed(self, seed: int) -> "SimulationConfig":
        return replace(self, seed=seed)


def group_sizes(config: SimulationConfig, rng) -> np.ndarray:
    if config.group_sizes == "binomial":
        n1 = rng.binomial(config.n, config.proportions[0])
        return np.array([n1, config.n - n1])
    return rng.multinomial(config.n, config.proportions)


def simulate(config: SimulationConfig) -> Dataset:
    """Draw group sizes, sample each component, then shuffle the rows.

    Labels are 1..G in component order.
    """
    rng = np.random.default_rng(config.seed)
    sizes = group_sizes(config, rng)
    blocks: List[np.ndarray] = []
    for comp, m in zip(config.components, sizes):
        if m == 0:
            blocks.append(np.empty((0, config.p)))
        elif config.sampler == "mh":
            blocks.append(sample_mspe_mh(int(m), comp, rng))
        else:
            blocks.append(sample_mspe_rejection(int(m), comp, rng))
    x = np.vstack(blocks)
    labels = np.repeat(np.arange(1, config.G + 1), sizes)
    order = rng.permutation(config.n)
    columns = [f"x{j + 1}" for j in range(config.p)]
    name = f"design{config.design}" if config.design else config.name
    return Dataset(name, x[order], columns, labels[order], [str(g) for g in range(1, config.G + 1)])
