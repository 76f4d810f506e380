"""Percentage-error forecast metrics with normal-approximation intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    """Error summary of one forecast run.

    mape, maxape, and rmspe are percentages; mspe is percent squared;
    rmse is in price units. The _ci fields are 95% half-widths: a normal
    approximation on the mean absolute percentage error, and the square
    root of the equivalent half-width on the mean squared percentage
    error for rmspe.
    """

    n: int
    mape: float
    mape_ci: float
    maxape: float
    mspe: float
    rmspe: float
    rmspe_ci: float
    rmse: float


def evaluate(predictions: np.ndarray, truth: np.ndarray) -> MetricsReport:
    """Score predictions against strictly positive true values."""
    preds = np.asarray(predictions, dtype=np.float64)
    true = np.asarray(truth, dtype=np.float64)
    if preds.shape != true.shape or preds.ndim != 1:
        raise ValueError(f"shape mismatch: {preds.shape} vs {true.shape}")
    n = preds.size
    if n < 1:
        raise ValueError("nothing to evaluate")
    if np.any(true <= 0):
        raise ValueError("true values must be strictly positive")
    if not (np.all(np.isfinite(preds)) and np.all(np.isfinite(true))):
        raise ValueError("non-finite values")
    frac = (preds - true) / true
    ape = 100.0 * np.abs(frac)
    spe = (100.0 * frac) ** 2
    mape = float(ape.mean())
    mspe = float(spe.mean())
    if n >= 2:
        mape_ci = 1.96 * float(ape.std(ddof=1)) / math.sqrt(n)
        rmspe_ci = math.sqrt(1.96 * float(spe.std(ddof=1)) / math.sqrt(n))
    else:
        mape_ci = 0.0
        rmspe_ci = 0.0
    return MetricsReport(
        n=n,
        mape=mape,
        mape_ci=mape_ci,
        maxape=float(ape.max()),
        mspe=mspe,
        rmspe=math.sqrt(mspe),
        rmspe_ci=rmspe_ci,
        rmse=float(np.sqrt(((preds - true) ** 2).mean())),
    )


def mean_rmspe(reports: Iterable[MetricsReport]) -> float:
    """Plain mean of rmspe over a group of reports."""
    values = [r.rmspe for r in reports]
    if not values:
        raise ValueError("no reports to average")
    return float(np.mean(values))
