"""Bayesian VARs with observable-driver coefficient drift.

Estimation of the driver-augmented VAR, a suite of time-varying and constant
parameter benchmarks, simulation studies of parameter tracking, and a
pseudo out-of-sample forecast evaluation harness.
"""

__version__ = "0.1.0"

from .data import (
    DriverSet,
    StandardizationState,
    TimeSeriesPanel,
    apply_tcode,
    build_design,
    cumulative_drivers,
    read_panel_csv,
    standardize,
    transform_panel,
)
from .kernels import SeededStream
from .model import (
    AvpModelSpec,
    AvpPosterior,
    McmcSettings,
    PRESETS,
    augment_regressors,
    fit_avp_var,
    forecast_paths,
    recover_time_paths,
    run_gibbs,
)
