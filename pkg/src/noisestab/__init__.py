"""Noise stability of Boolean functions through renormalized Brownian motion on the cube."""

from .fourier import (
    BooleanFunction,
    FourierSpectrum,
    evaluate_multilinear,
    gradient_multilinear,
    influences,
    make_dictator,
    make_majority,
    make_parity,
    make_tribes,
    stability,
    wht_forward,
    wht_inverse,
)
from .gaussian import GaussianStabilityQuery, gaussian_stability, isoperimetric_profile
from .rbm import PathEnsemble, SimConfig, run_N_process, simulate
from .coupling import BrownianPath, simulate_model_process, time_change_on_shared_path
from .transport import DiscreteLaw, quantile_transport
from .harness import VerificationReport, reports_json, run_suite

__version__ = "0.1.0"
