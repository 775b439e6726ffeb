"""Panel construction: transformations, standardization, drivers, VAR design.

Conventions fixed here and relied on everywhere else:

* transformation codes follow the quarterly-database convention used by the
  empirical work: 1 = levels, 2 = first difference, 5 = log first difference,
  6 = second difference of logs;
* standardization statistics always come from a designated training window
  and use the sample (ddof=1) standard deviation;
* cumulative drivers start at zero and accumulate lagged values:
  C_1 = 0, C_t = C_{t-1} + Z_{t-1}, so the coefficient drift between t-1 and
  t responds to the driver observed at t-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import DomainError, InsufficientDataError

TCODE_LOSSES = {1: 0, 2: 1, 5: 1, 6: 2}


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    out.flags.writeable = False
    return out


def apply_tcode(values: np.ndarray, tcode: int, name: str = "series") -> np.ndarray:
    """Transform one series to stationarity; output is shorter by the diff count."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"{name}: expected a 1-d series, got shape {x.shape}")
    if tcode not in TCODE_LOSSES:
        raise DomainError(f"{name}: unknown transformation code {tcode}")
    loss = TCODE_LOSSES[tcode]
    if x.shape[0] <= loss:
        raise InsufficientDataError(
            f"{name}: {x.shape[0]} observations cannot support tcode {tcode}"
        )
    if tcode == 1:
        return x.copy()
    if tcode == 2:
        return np.diff(x)
    if np.any(x <= 0.0):
        bad = int(np.argmax(x <= 0.0))
        raise DomainError(
            f"{name}: log transform (tcode {tcode}) needs positive values, "
            f"found {x[bad]} at position {bad}"
        )
    logs = np.log(x)
    if tcode == 5:
        return np.diff(logs)
    return np.diff(logs, n=2)


@dataclass
class TimeSeriesPanel:
    """Aligned multivariate series with names and (optional) date labels."""

    values: np.ndarray
    names: tuple
    dates: Optional[tuple] = None
    tcodes: Optional[tuple] = None

    def __post_init__(self):
        self.values = _freeze(np.atleast_2d(self.values))
        self.names = tuple(self.names)
        if self.values.shape[1] != len(self.names):
            raise DomainError(
                f"panel has {self.values.shape[1]} columns but {len(self.names)} names"
            )
        if self.dates is not None:
            self.dates = tuple(self.dates)
            if len(self.dates) != self.values.shape[0]:
                raise DomainError("date labels do not match the number of rows")
        if self.tcodes is not None:
            self.tcodes = tuple(int(c) for c in self.tcodes)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def window(self, start: int, stop: int) -> "TimeSeriesPanel":
        """Row slice [start, stop) preserving names and dates."""
        dates = self.dates[start:stop] if self.dates is not None else None
        return TimeSeriesPanel(self.values[start:stop], self.names, dates, self.tcodes)


@dataclass
class DriverSet:
    """Observable drivers aligned one-to-one with panel rows."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        self.values = _freeze(np.atleast_2d(self.values))
        self.names = tuple(self.names)
        if self.values.shape[1] != len(self.names):
            raise DomainError(
                f"driver set has {self.values.shape[1]} columns but {len(self.names)} names"
            )

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_drivers(self) -> int:
        return self.values.shape[1]

    @classmethod
    def empty(cls, n_obs: int) -> "DriverSet":
        return cls(np.zeros((n_obs, 0)), ())

    def window(self, start: int, stop: int) -> "DriverSet":
        return DriverSet(self.values[start:stop], self.names)


def transform_panel(
    raw: np.ndarray,
    names: Sequence[str],
    tcodes: Sequence[int],
    dates: Optional[Sequence] = None,
) -> TimeSeriesPanel:
    """Apply per-series tcodes and align everything on the common tail."""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    if raw.shape[1] != len(names) or len(names) != len(tcodes):
        raise DomainError("names, tcodes, and columns must line up")
    losses = [TCODE_LOSSES.get(int(c)) for c in tcodes]
    if any(l is None for l in losses):
        bad = names[losses.index(None)]
        raise DomainError(f"{bad}: unknown transformation code")
    max_loss = max(losses) if losses else 0
    t_out = raw.shape[0] - max_loss
    if t_out <= 0:
        raise InsufficientDataError("panel too short for the requested transformations")
    cols = []
    for j, name in enumerate(names):
        x = apply_tcode(raw[:, j], int(tcodes[j]), name=name)
        cols.append(x[x.shape[0] - t_out:])
    out_dates = None
    if dates is not None:
        out_dates = tuple(dates[max_loss:])
    return TimeSeriesPanel(np.column_stack(cols), tuple(names), out_dates, tuple(tcodes))


@dataclass
class StandardizationState:
    """Training-window means and sds used to map to and from model scale."""

    means: np.ndarray
    sds: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        self.means = _freeze(np.atleast_1d(self.means))
        self.sds = _freeze(np.atleast_1d(self.sds))

    @classmethod
    def fit(cls, values: np.ndarray, names: Sequence[str] = ()) -> "StandardizationState":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[0] < 2:
            raise InsufficientDataError("need at least 2 rows to standardize")
        means = values.mean(axis=0)
        sds = values.std(axis=0, ddof=1)
        if np.any(sds <= 0.0):
            j = int(np.argmax(sds <= 0.0))
            label = names[j] if j < len(names) else f"column {j}"
            raise DomainError(f"{label}: zero variance in the training window")
        return cls(means, sds, tuple(names))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.means) / self.sds

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.sds + self.means


def standardize(
    panel: TimeSeriesPanel,
    training_rows: int,
) -> tuple[TimeSeriesPanel, StandardizationState]:
    """Standardize a panel using statistics from its first `training_rows` rows."""
    state = StandardizationState.fit(panel.values[:training_rows], panel.names)
    return (
        TimeSeriesPanel(state.apply(panel.values), panel.names, panel.dates, panel.tcodes),
        state,
    )


def cumulative_drivers(driver_values: np.ndarray) -> np.ndarray:
    """Prefix sums of lagged drivers: C_1 = 0, C_t = C_{t-1} + Z_{t-1}."""
    z = np.atleast_2d(np.asarray(driver_values, dtype=float))
    c = np.zeros_like(z)
    if z.shape[0] > 1:
        np.cumsum(z[:-1], axis=0, out=c[1:])
    return c


def time_step_drivers(t_len: int) -> np.ndarray:
    """Indicator drivers that make the drift recursion a free random walk.

    Z_t = e_t, one indicator per transition, so the cumulated drivers become
    step dummies 1{t >= s} and theta + Gamma C_t carries one unrestricted
    increment per period: the stacked first-difference form of a random-walk
    coefficient path. This estimates the random-walk benchmark with the same
    sampler and priors as the driver-based model.
    """
    if t_len < 2:
        raise DomainError("need at least two rows for step drivers")
    z = np.zeros((t_len, t_len - 1))
    idx = np.arange(t_len - 1)
    z[idx, idx] = 1.0
    return z


def build_design(
    values: np.ndarray,
    lags: int,
    intercept: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Targets and lag-design rows for a VAR(p).

    Returns (targets, design) where targets are rows p..T-1 of `values` and
    design rows are [1, y_{t-1}', ..., y_{t-p}'].
    """
    y = np.atleast_2d(np.asarray(values, dtype=float))
    t_len, n = y.shape
    if lags < 1:
        raise DomainError(f"lag order must be >= 1, got {lags}")
    if t_len <= lags:
        raise InsufficientDataError(f"{t_len} rows cannot support {lags} lags")
    rows = t_len - lags
    blocks = []
    if intercept:
        blocks.append(np.ones((rows, 1)))
    for ell in range(1, lags + 1):
        blocks.append(y[lags - ell: t_len - ell])
    return y[lags:].copy(), np.hstack(blocks)


def read_panel_csv(path) -> tuple[tuple, tuple, np.ndarray]:
    """Read a CSV whose first column is a date label and the rest are numeric.

    Returns (dates, names, values). Errors carry file and column context.
    """
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DomainError(f"{path}: file not found")
    except Exception as exc:  # malformed CSV
        raise DomainError(f"{path}: could not parse CSV ({exc})")
    if frame.shape[1] < 2:
        raise DomainError(f"{path}: need a date column plus at least one series")
    dates = tuple(str(d) for d in frame.iloc[:, 0])
    names = tuple(str(c) for c in frame.columns[1:])
    values = np.empty((frame.shape[0], len(names)))
    for j, name in enumerate(names):
        col = pd.to_numeric(frame[frame.columns[j + 1]], errors="coerce")
        if col.isna().any():
            row = int(col.isna().idxmax())
            raise DomainError(
                f"{path}: series {name} has a missing or non-numeric value "
                f"at data row {row + 1}"
            )
        values[:, j] = col.to_numpy(dtype=float)
    return dates, names, values
