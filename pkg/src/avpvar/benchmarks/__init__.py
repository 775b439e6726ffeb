"""Comparison models: one estimation routine and one forecast routine each.

Every fit maps into the shared `ForecastBundle` contract, so predictive
differences across models come from the fitted parameters alone, never from
the simulation code.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..data import build_design
from ..errors import ConfigError
from ..forecasting import ForecastBundle
from ..kernels import SeededStream
from ..model import AvpModelSpec, McmcSettings, fit_avp_var, forecast_bundle
from .constant import (
    OlsVarFit,
    activity_factor,
    augment_with_factor,
    fit_ols_var,
    ols_forecast_bundle,
)
from .eb import EbPosterior, EbSpec, eb_forecast_bundle, run_eb_gibbs
from .flex import FlexPosterior, FlexSpec, flex_forecast_bundle, run_flex_gibbs
from .svot import SvotPosterior, SvotSpec, run_svot_gibbs, svot_forecast_bundle
from .ucsv import UcsvPosterior, UcsvSpec, run_ucsv_gibbs, ucsv_forecast_bundle

FORECAST_KINDS = (
    "AVP-VAR",
    "CP-VAR",
    "CP-VAR-SV",
    "TVP-VAR-FB",
    "TVP-VAR-EB",
    "VAR-SVOt",
    "FAVAR",
    "FAVAR-SV",
    "OLS-VAR",
)

ALL_KINDS = FORECAST_KINDS + ("UC-SV",)


def _flex_spec(lags: int, n_factors: int, tvp: bool, sv: bool) -> FlexSpec:
    return FlexSpec(
        lags=lags,
        n_factors=n_factors,
        tvp_coeffs=tvp,
        tvp_loadings=sv,
        stochastic_vol=sv,
    )


def fit_cp_var(
    panel_values: np.ndarray,
    spec: Optional[FlexSpec] = None,
    settings: Optional[McmcSettings] = None,
    stream: Optional[SeededStream] = None,
    keep_paths: bool = False,
) -> FlexPosterior:
    """Constant coefficients and loadings, homoskedastic diagonal errors."""
    spec = spec or _flex_spec(2, 1, tvp=False, sv=False)
    settings = settings or McmcSettings()
    targets, design = build_design(np.asarray(panel_values, dtype=float), spec.lags)
    return run_flex_gibbs(targets, design, spec, settings, stream, keep_paths=keep_paths)


def fit_tvp_var_fb(
    panel_values: np.ndarray,
    spec: Optional[FlexSpec] = None,
    settings: Optional[McmcSettings] = None,
    stream: Optional[SeededStream] = None,
    keep_paths: bool = False,
) -> FlexPosterior:
    """Random-walk coefficient and loading paths with shrinkage on increments."""
    spec = spec or _flex_spec(2, 1, tvp=True, sv=True)
    settings = settings or McmcSettings()
    targets, design = build_design(np.asarray(panel_values, dtype=float), spec.lags)
    return run_flex_gibbs(targets, design, spec, settings, stream, keep_paths=keep_paths)


def fit_tvp_var_eb(
    panel_values: np.ndarray,
    spec: Optional[EbSpec] = None,
    settings: Optional[McmcSettings] = None,
    stream: Optional[SeededStream] = None,
    ordering: Optional[np.ndarray] = None,
) -> EbPosterior:
    """Triangular time-varying VAR; results depend on the variable ordering."""
    spec = spec or EbSpec()
    settings = settings or McmcSettings()
    y = np.asarray(panel_values, dtype=float)
    if ordering is not None:
        y = y[:, np.asarray(ordering, dtype=int)]
    targets, design = build_design(y, spec.lags)
    return run_eb_gibbs(targets, design, spec, settings, stream)


def fit_var_svot(
    panel_values: np.ndarray,
    spec: Optional[SvotSpec] = None,
    settings: Optional[McmcSettings] = None,
    stream: Optional[SeededStream] = None,
    keep_outliers: bool = False,
) -> SvotPosterior:
    """Minnesota VAR with stochastic volatility and integer outlier states."""
    spec = spec or SvotSpec()
    settings = settings or McmcSettings()
    targets, design = build_design(np.asarray(panel_values, dtype=float), spec.lags)
    return run_svot_gibbs(
        targets, design, spec, settings, stream, keep_outliers=keep_outliers
    )


def fit_favar(
    panel_values: np.ndarray,
    driver_values: np.ndarray,
    with_sv: bool = False,
    spec: Optional[FlexSpec] = None,
    settings: Optional[McmcSettings] = None,
    stream: Optional[SeededStream] = None,
    lags: int = 2,
):
    """Factor-augmented VAR: recursive first PC of the drivers enters last.

    with_sv False fits the closed-form system; True runs the constant-
    coefficient sampler with time-varying loadings and volatilities.
    """
    factor = activity_factor(np.asarray(driver_values, dtype=float))
    augmented = augment_with_factor(panel_values, factor)
    if not with_sv:
        return fit_ols_var(augmented, lags)
    spec = spec or _flex_spec(lags, 1, tvp=False, sv=True)
    settings = settings or McmcSettings()
    targets, design = build_design(augmented, spec.lags)
    return run_flex_gibbs(targets, design, spec, settings, stream)


def fit_ucsv(
    series: np.ndarray,
    spec: Optional[UcsvSpec] = None,
    settings: Optional[McmcSettings] = None,
    stream: Optional[SeededStream] = None,
    keep_paths: bool = False,
) -> UcsvPosterior:
    """Local level with stochastic volatility in both disturbances."""
    spec = spec or UcsvSpec()
    settings = settings or McmcSettings()
    return run_ucsv_gibbs(series, spec, settings, stream, keep_paths=keep_paths)


def fit_forecast_model(
    kind: str,
    panel_values: np.ndarray,
    driver_values: np.ndarray,
    settings: McmcSettings,
    stream: SeededStream,
    lags: int = 2,
    n_factors: int = 1,
) -> ForecastBundle:
    """Fit one model kind on a window and return its forecast bundle.

    Closed-form fits simulate settings.n_retained paths per origin so every
    kind contributes the same number of simulated futures.
    """
    y = np.asarray(panel_values, dtype=float)
    n = y.shape[1]
    tail = y[-lags:]
    if kind == "AVP-VAR":
        spec = AvpModelSpec(lags=lags, n_factors=n_factors)
        post, dat = fit_avp_var(y, driver_values, spec, settings, stream)
        return forecast_bundle(post, dat.tail, dat.driver_at_origin)
    if kind == "CP-VAR":
        post = fit_cp_var(y, _flex_spec(lags, n_factors, False, False), settings, stream)
        return flex_forecast_bundle(post, tail)
    if kind == "CP-VAR-SV":
        post = fit_cp_var(y, _flex_spec(lags, n_factors, False, True), settings, stream)
        return flex_forecast_bundle(post, tail)
    if kind == "TVP-VAR-FB":
        post = fit_tvp_var_fb(y, _flex_spec(lags, n_factors, True, True), settings, stream)
        return flex_forecast_bundle(post, tail)
    if kind == "TVP-VAR-EB":
        post = fit_tvp_var_eb(y, EbSpec(lags=lags), settings, stream)
        return eb_forecast_bundle(post, tail)
    if kind == "VAR-SVOt":
        post = fit_var_svot(y, SvotSpec(lags=lags), settings, stream)
        return svot_forecast_bundle(post, tail)
    if kind in ("FAVAR", "FAVAR-SV"):
        factor = activity_factor(np.asarray(driver_values, dtype=float))
        augmented = augment_with_factor(y, factor)
        aug_tail = augmented[-lags:]
        if kind == "FAVAR":
            fit = fit_ols_var(augmented, lags)
            return ols_forecast_bundle(
                fit, aug_tail, paths_per_draw=settings.n_retained, n_report=n
            )
        targets, design = build_design(augmented, lags)
        post = run_flex_gibbs(
            targets, design, _flex_spec(lags, n_factors, False, True), settings, stream
        )
        bundle = flex_forecast_bundle(post, aug_tail)
        bundle.n_report = n
        return bundle
    if kind == "OLS-VAR":
        fit = fit_ols_var(y, lags)
        return ols_forecast_bundle(fit, tail, paths_per_draw=settings.n_retained)
    raise ConfigError("unknown model kind: %r (expected one of %s)" % (kind, ", ".join(FORECAST_KINDS)))
