"""Poisson modified quasi-Lindley count distribution.

The distribution is a Poisson law whose rate is drawn from a mixture of an
exponential and a gamma density. The package covers exact probabilities and
moments, sampling, moment and maximum-likelihood estimation (including a
zero-modified variant), and chi-square model comparison against geometric,
negative binomial and Poisson-Lindley baselines.
"""

from .core import (
    MomentSummary,
    PmqldParams,
    ShapeKind,
    ShapeReport,
    cdf,
    classify_shape,
    factorial_moment,
    hazard,
    log_pmf,
    mgf,
    moments,
    mqld_cdf,
    mqld_pdf,
    new_params,
    pgf,
    pmf,
    pmf_ratio,
    posterior_mixture,
    quantile,
    raw_moment,
    survival,
)
from .errors import (
    ConvergenceError,
    DataError,
    DomainError,
    EstimationError,
    GofError,
    NumericError,
    ParameterError,
    PmqldError,
    StudyError,
)
from .estimation import (
    FitResult,
    confidence_intervals,
    fit_mle,
    fit_mme,
    fit_zm_mle,
    log_likelihood,
    lr_test,
    observed_information,
    score,
    zm_log_likelihood,
    zm_score,
)
from .gof import BaselineKind, BaselineModel, chi_square_gof, compare_models, expected_counts, fit_baseline
from .sampling import RandomSource, sample_pmqld_alg1, sample_pmqld_alg2, sample_zmpmqld
from .table import FrequencyTable
from .zeromod import ZmParams, ZmRegime, classify_regime, phi_lower_bound, zm_pmf

__version__ = "0.1.0"
