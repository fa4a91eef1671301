"""Tempered stable distributions: characteristic functions, densities,
samplers, four parametric estimators, a Monte Carlo harness and a financial
goodness-of-fit pipeline."""

from .core import (
    DomainError,
    Family,
    ParamBounds,
    ParamError,
    ParamVector,
    Sample,
    UnsupportedFamilyError,
    cgf,
    char_fn,
    cumulant,
    cumulants,
)
from .density import (
    DensityGrid,
    FftConfig,
    cdf,
    family_grid,
    pdf_interp,
    pdf_stable_subordinator,
    pdf_tss,
    pdf_ts_prime,
    pdf_via_fft,
    quantile,
)
from .estimate import (
    EstimationResult,
    MomentGrid,
    RegularizationScheme,
    bell_moment_conditions,
    build_moment_grid,
    cgmm_kernel,
    empirical_char_fn,
    fit,
    fit_cgmm,
    fit_gmc,
    fit_gmm,
    fit_mle,
    log_likelihood,
    regularized_inverse,
)
from .inference import (
    ConfidenceInterval,
    FisherInfo,
    asymptotic_ci,
    coverage,
    fisher_information,
)
from .montecarlo import MCConfig, MCReport, report_to_table, run_mc
from .simulate import (
    SamplerStats,
    sample_cts,
    sample_nts,
    sample_stable_subordinator,
    sample_ts_prime,
    sample_tss,
)

__version__ = "0.1.0"
