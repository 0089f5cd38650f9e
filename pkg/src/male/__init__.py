"""Maximum approximated likelihood estimation toolkit.

Quadrature rules under the standard normal weight, Smolyak sparse grids,
likelihood integrands with analytic derivatives, approximated-likelihood
maximization, link functions coupling rule size to sample size, error
diagnostics, and the benchmark experiment runners.
"""

__version__ = "0.1.0"

from .errors import ExperimentFailure, NumericFailure, ResourceLimitExceeded
from .quadrature import (
    Rule1D,
    RuleND,
    apply,
    gauss_hermite,
    gauss_legendre,
    gaussian_rule,
    halton,
    inverse_normal_cdf,
    midpoint,
    mlhs,
    monte_carlo_gaussian,
    product_rule,
)
from .sparse_grid import SparseGridSpec, smolyak, sparse_grid_size
from .models import (
    Dataset,
    LikelihoodIntegrand,
    ars_normal_cdf,
    butler_moffitt,
    generate_dataset,
    get_model,
    load_dataset,
    mixed_logit_1d,
    rc_logit_mv,
    rc_regression,
    save_dataset,
)
from .estimator import (
    MalEstimate,
    MalProblem,
    approx_hessian,
    approx_likelihood_contribution,
    approx_loglik,
    approx_score,
    maximize,
)
from .link import LinkFunction, evaluate as link_evaluate, total_cost
from .diagnostics import (
    ErrorReport,
    ProbeSet,
    check_log_composition_bounds,
    default_probes,
    error_curve,
    fd_check,
    fit_rate,
    fit_rate_values,
    scaled_error_series,
)
from .experiments import ExperimentConfig, default_config, run_experiment
