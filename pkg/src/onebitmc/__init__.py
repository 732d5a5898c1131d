"""1-bit matrix completion under max-norm and weighted trace-norm constraints."""

from .errors import DomainError, ModelError, OneBitError, SamplingError, SolverError
from .estimators import (
    Diagnostics,
    EstimatorKind,
    EstimatorSpec,
    MarginalsSource,
    estimate,
    max_norm_mle,
    weighted_trace_mle,
)
from .experiments import ExperimentSpec, load_config, make_truth_spectral, make_truth_uniform_factor, run_experiment
from .factors import FactoredPoint
from .linkmodel import LinkKind, LinkModel, beta_alpha, eval_dF, eval_F, l_alpha, u_alpha
from .metrics import hellinger_sq, kl_divergence, lemma2_coefficient, recovery_errors
from .norms import maxnorm_certificate, maxnorm_lower_bound, norm_report, trace_norm, weighted_trace_norm
from .objective import average_loss, factor_gradient
from .sampling import (
    ObservationSet,
    SamplingDistribution,
    draw_with_replacement,
    draw_without_replacement,
    generate_observations,
    uniform,
)
from .solver import (
    SolverConfig,
    SolverMode,
    pgd_solve,
    project_factor_ball,
    project_inf,
    rank_escalation_solve,
    sgd_solve,
)

__version__ = "0.1.0"
