"""Noise interference in early-warning signals of a 2D fold bifurcation."""

from .errors import *  # noqa: F401,F403
from .ews_estimators import (
    IndicatorSeries,
    WelchSpec,
    WindowSpec,
    ac1_estimator,
    gls_ar1_rate,
    indicator_trend,
    km_drift_rate,
    psd_fit_rate,
    psd_max,
    var_estimator,
    welch_psd,
    windows,
)
from .ou_analytics import (
    Cov2,
    Mat2,
    Observable,
    OUParams,
    TrendMap,
    deceitful_interval,
    lag_correlation,
    lag_covariance,
    lambda_star,
    observable_autocorrelation,
    observable_variance,
    stationary_covariance,
    theorem_derivatives,
    trend_sign_map,
)
from .sde_sim import (
    FoldSimConfig,
    NoiseMatrix,
    Path,
    analysis_cutoff,
    exact_ou_step,
    observable_series,
    simulate_em,
    simulate_fold,
)

__version__ = "0.1.0"
