"""Correlation and dispersion statistics for daily signal/price pairs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .signals import SignalMatrix, quartiles

_BETACF_MAX_ITER = 300
_BETACF_EPS = 3e-16
_FPMIN = 1e-300


@dataclass(frozen=True)
class CorrelationReport:
    """Association of one signal column with the price high."""

    pearson_r: float | None
    pearson_p: float | None
    distance_corr: float
    sigma: float
    iqr: float


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for T Student-t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def pearson(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """Pearson r and its exact two-sided t-test p-value.

    Requires at least 3 samples and nonconstant inputs.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"length mismatch: {xa.shape} vs {ya.shape}")
    n = xa.size
    if n < 3:
        raise ValueError(f"need at least 3 samples, got {n}")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("zero variance input")
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return (r, 0.0)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return (r, student_t_two_sided_p(t, n - 2))


def distance_correlation(
    x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray
) -> float:
    """Distance correlation of two equal-length 1-d samples.

    Uses the plain (biased) V-statistic: pairwise absolute distances,
    double-centered, dCov^2 = mean of the elementwise product. Returns 0
    when either marginal distance variance vanishes (constant input).
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError(f"length mismatch: {xa.shape} vs {ya.shape}")
    if xa.size < 2:
        raise ValueError(f"need at least 2 samples, got {xa.size}")
    a = np.abs(xa[:, None] - xa[None, :])
    b = np.abs(ya[:, None] - ya[None, :])
    a_centered = a - a.mean(axis=0, keepdims=True) - a.mean(axis=1, keepdims=True) + a.mean()
    b_centered = b - b.mean(axis=0, keepdims=True) - b.mean(axis=1, keepdims=True) + b.mean()
    dcov2 = float((a_centered * b_centered).mean())
    dvarx2 = float((a_centered * a_centered).mean())
    dvary2 = float((b_centered * b_centered).mean())
    if dvarx2 * dvary2 == 0.0:
        return 0.0
    ratio = max(0.0, dcov2) / math.sqrt(dvarx2 * dvary2)
    return min(1.0, math.sqrt(ratio))


def dispersion(x: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """(sample standard deviation, inter-quartile range)."""
    xa = np.asarray(x, dtype=np.float64)
    if xa.ndim != 1 or xa.size < 2:
        raise ValueError("need a 1-d sample of at least 2 values")
    q1, _, q3 = quartiles(xa)
    return (float(np.std(xa, ddof=1)), q3 - q1)


def autocorrelation(x: Sequence[float] | np.ndarray, max_lag: int) -> np.ndarray:
    """Sample autocorrelation at lags 0..max_lag (acf[0] is 1)."""
    xa = np.asarray(x, dtype=np.float64)
    if xa.ndim != 1:
        raise ValueError("need a 1-d sample")
    n = xa.size
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [0, {n - 1}], got {max_lag}")
    xc = xa - xa.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise ValueError("zero variance input")
    acf = np.empty(max_lag + 1, dtype=np.float64)
    acf[0] = 1.0
    for lag in range(1, max_lag + 1):
        acf[lag] = float(xc[:-lag] @ xc[lag:]) / denom
    return acf


def correlation_table(
    signals: SignalMatrix, price_high: np.ndarray
) -> dict[str, CorrelationReport]:
    """Per-column association of a signal matrix with the price high.

    Pearson fields are None for constant columns (undefined), distance
    correlation is 0 there by convention.
    """
    price = np.asarray(price_high, dtype=np.float64)
    if price.shape != (len(signals.dates),):
        raise ValueError(
            f"price length {price.shape} does not match calendar "
            f"of {len(signals.dates)} days"
        )
    table: dict[str, CorrelationReport] = {}
    for i, name in enumerate(signals.columns):
        col = signals.values[:, i]
        try:
            r, p = pearson(col, price)
            pearson_r: float | None = r
            pearson_p: float | None = p
        except ValueError:
            pearson_r = None
            pearson_p = None
        sigma, iqr = dispersion(col)
        table[name] = CorrelationReport(
            pearson_r=pearson_r,
            pearson_p=pearson_p,
            distance_corr=distance_correlation(col, price),
            sigma=sigma,
            iqr=iqr,
        )
    return table


def write_correlation_csv(path: str, table: Mapping[str, CorrelationReport]) -> None:
    """Write a correlation table as CSV; undefined Pearson cells hold ---."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("signal", "pearson_r", "pearson_p", "distance_corr", "sigma", "iqr"))
        for name, rep in table.items():
            writer.writerow(
                (
                    name,
                    "---" if rep.pearson_r is None else repr(rep.pearson_r),
                    "---" if rep.pearson_p is None else repr(rep.pearson_p),
                    repr(rep.distance_corr),
                    repr(rep.sigma),
                    repr(rep.iqr),
                )
            )
