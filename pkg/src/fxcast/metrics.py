"""Forecast accuracy metrics.

NRMSE is the root mean square error normalized by the mean absolute level
of the actuals; MAE is the plain mean absolute error. Both operate on a
ForecastSeries pairing actuals with predictions at a given horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np

from .errors import MetricError


@dataclass(frozen=True)
class ForecastSeries:
    """Aligned actuals and predictions for one evaluation block."""

    y: np.ndarray
    yhat: np.ndarray
    timestamps: Sequence[date] | None = None
    horizon: int = 1

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        yhat = np.asarray(self.yhat, dtype=float)
        if y.ndim != 1 or yhat.ndim != 1:
            raise MetricError("y and yhat must be 1-D")
        if y.shape != yhat.shape:
            raise MetricError(f"length mismatch: {y.shape[0]} actuals vs {yhat.shape[0]} predictions")
        if y.shape[0] < 1:
            raise MetricError("empty forecast series")
        if self.timestamps is not None and len(self.timestamps) != y.shape[0]:
            raise MetricError("timestamps length does not match series length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "yhat", yhat)

    @property
    def T(self) -> int:
        return self.y.shape[0]


def nrmse(fs: ForecastSeries) -> float:
    """Root mean square error divided by the mean absolute actual level.

    Raises MetricError when the actuals are identically zero (the
    denominator vanishes).
    """
    denom = float(np.mean(np.abs(fs.y)))
    if denom <= 0.0:
        raise MetricError("NRMSE undefined: actuals have zero mean absolute level")
    rmse = float(np.sqrt(np.mean((fs.yhat - fs.y) ** 2)))
    return rmse / denom


def mae(fs: ForecastSeries) -> float:
    """Mean absolute error between predictions and actuals."""
    return float(np.mean(np.abs(fs.yhat - fs.y)))
