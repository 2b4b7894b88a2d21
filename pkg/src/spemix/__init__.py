"""Finite mixtures of multivariate skew power exponential distributions.

Densities and samplers live in :mod:`spemix.distributions`, the fitting
algorithm in :mod:`spemix.gem`, and model selection in
:mod:`spemix.selection`.  The ``spe-mix`` command wraps them.
"""

from .distributions import (SpeParams, log_density_mpe, log_density_mspe, sample_mpe,
                            sample_mspe_mh, sample_mspe_rejection)
from .gem import FitResult, MixtureModel, fit, predict
from .metrics import ari, bic, icl
from .scale import ALL_SPECS, ModelSpec, free_param_count
from .selection import SweepReport, sweep

__all__ = [
    "SpeParams", "log_density_mpe", "log_density_mspe", "sample_mpe", "sample_mspe_mh",
    "sample_mspe_rejection", "FitResult", "MixtureModel", "fit", "predict", "ari", "bic",
    "icl", "ALL_SPECS", "ModelSpec", "free_param_count", "SweepReport", "sweep",
]

__version__ = "0.1.0"
