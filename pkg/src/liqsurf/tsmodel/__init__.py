"""Univariate score-series modelling: diagnostics, volatility models, BIC sweeps."""

from .diagnostics import ACF, ADFResult, acf, acf_squared_ar1_residuals, adf_test, fit_ar1, mean_reversion_time
from .distributions import DISTRIBUTIONS, abs_moment, log_density, sample
from .estimation import (
    MEAN_MODELS,
    ModelSpec,
    SweepRow,
    TsFit,
    VolatilityModel,
    VolParams,
    best_row,
    bic,
    bic_sweep,
    evidence_label,
    fit_mle,
    loglik_at,
    simulate,
    volatility_filter,
    write_sweep_csv,
)
from .recursions import GARCH_FAMILY, VOL_MODELS, variance_filter

__all__ = [
    "ACF", "ADFResult", "DISTRIBUTIONS", "GARCH_FAMILY", "MEAN_MODELS", "VOL_MODELS",
    "ModelSpec", "SweepRow", "TsFit", "VolParams", "VolatilityModel",
    "abs_moment", "acf", "acf_squared_ar1_residuals", "adf_test", "best_row", "bic",
    "bic_sweep", "evidence_label", "fit_ar1", "fit_mle", "log_density", "loglik_at",
    "mean_reversion_time", "sample", "simulate", "variance_filter", "volatility_filter", "write_sweep_csv",
]
