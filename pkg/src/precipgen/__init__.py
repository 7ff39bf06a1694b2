"""Multi-site stochastic precipitation generator: a censored vector
autoregression with scaled skew-t innovations."""

from .data import PrecipPanel, load_network, load_panel, save_network, save_panel
from .errors import ConfigError, DataError, DomainError, FittingError, NumericalError, PrecipGenError
from .evaluation import (
    EvaluationReport,
    all_dry_probability,
    concurrence_histogram,
    dry_probability,
    evaluate,
    mrmse,
    qq_pairs,
    transition_probs,
)
from .generator import (
    SimulationEnsemble,
    parametric_bootstrap,
    predict,
    simulate_conditional_one_step,
    simulate_unconditional,
)
from .inference import CensoredLikelihood, FitOptions, FitResult, ModelParams, fit, gaussian_loglik, loglik
from .occurrence import CutoffField, OccurrenceModel, estimate_cutoffs, fit_occurrence
from .rng import make_rng
from .spatial import GaugeNetwork, build_ar_matrix, check_stationarity

__version__ = "0.1.0"
