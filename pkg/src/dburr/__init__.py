"""Discrete Burr distribution: reliability functions, seeded sampling,
likelihood-based and Bayesian estimation, and a simulation-study harness."""

from .distribution import (
    BurrParams,
    DBurrParams,
    dburr_cdf,
    dburr_log_pmf,
    dburr_moment,
    dburr_pmf,
    dburr_survival,
    second_rate_of_failure,
)
from .errors import (
    ConvergenceError,
    DBurrError,
    DegenerateDataError,
    DomainError,
    InternalConsistencyError,
    MomentDoesNotExistError,
)
from .inference import PriorSpec, mle, suff_stats
from .sampling import Sample, SeededGenerator, sample_dburr

__version__ = "0.1.0"
