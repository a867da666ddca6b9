"""Large-deviation bounds for sums of indicator variables, with exact oracles."""
from .bounds import (
    IndicatorSumSpec,
    LogBound,
    TailQuery,
    binomial_chernoff,
    binomial_type_bound,
    catalog_bound,
    h,
    variance_aware_bound,
)
from .chernoff import (
    MgfEvaluator,
    g,
    generic_chernoff,
    lower_log_mgf_bound,
    two_point_reduction,
    upper_log_mgf_bound,
    variance_lower_tail,
)
from .dependent import DependentModel, coupling_sample, find_heavy_tail_witness
from .exact import (
    ExactDistribution,
    binomial_distribution,
    cumulants,
    exact_tail,
    poisson_binomial_distribution,
    poisson_tail,
)
from .feller import feller_coefficients, feller_upper_bound
from .pgf import RationalPolynomial, bernoulli_decomposition, is_real_rooted, pgf_of

__version__ = "0.1.0"
