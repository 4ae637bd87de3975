"""Approximate message passing for pooled data and quantitative group testing."""
from .amp_pooled import AmpConfig, AmpTrace, empirical_metrics, quantize, run_amp
from .amp_qgt import QgtConfig, QgtTrace, empirical_fpr_fnr, empirical_sq_corr, run_qgt_amp
from .errors import SolverError, ValidationError
from .model import NoiseSpec, Prior
from .quadrature import GaussianQuadSpec
from .state_evolution import se_qgt_run, se_run

__all__ = [
    "AmpConfig", "AmpTrace", "GaussianQuadSpec", "NoiseSpec", "Prior", "QgtConfig", "QgtTrace",
    "SolverError", "ValidationError", "empirical_fpr_fnr", "empirical_metrics",
    "empirical_sq_corr", "quantize", "run_amp", "run_qgt_amp", "se_qgt_run", "se_run",
]
