"""Error-intolerant Bayesian point estimation.

EIC, Wallace-Freeman and the classical MAP/Bayes estimators over a common
problem description, plus the numerical harness used to check them.
"""
from ._kernels import BACKEND
from .errors import ConfigError, EicError
from .estimators import EstimatorSpec, eic_metric, estimate, log_eic_metric, log_wf_metric
from .losses import bhattacharyya, fdivergence, loss_value, no_iia, no_iro, no_isi, quadratic
from .model import EstimationProblem, ObservationSpace, ParameterSpace

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "EicError",
    "EstimatorSpec",
    "EstimationProblem",
    "ObservationSpace",
    "ParameterSpace",
    "bhattacharyya",
    "eic_metric",
    "estimate",
    "fdivergence",
    "log_eic_metric",
    "log_wf_metric",
    "loss_value",
    "no_iia",
    "no_iro",
    "no_isi",
    "quadratic",
    "__version__",
]
