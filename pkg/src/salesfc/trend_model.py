"""Piecewise-linear trend + Fourier seasonality + holiday regression for group totals.

The design columns are ``[t, max(0, t - c_i)..., 1, sin/cos pairs..., holiday
indicators...]`` with ``t`` counted from 0 on the first fitted day. The ridge
penalty applies to the slope changes only, so a clean line or sinusoid is
recovered without shrinkage.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy import linalg

from .errors import LengthError, NumericalError

WEEKLY = 7.0
YEARLY = 365.25


@dataclass
class TrendConfig:
    n_changepoints: int = 10
    changepoint_range: float = 0.8
    weekly_order: int = 3
    yearly_order: int = 5
    yearly_min_days: int = 400
    ridge_lambda: float = 1.0
    holidays: dict = field(default_factory=dict)  # day -> label

    def periods(self, n_days: int) -> list[tuple[float, int]]:
        out = []
        if self.weekly_order > 0:
            out.append((WEEKLY, self.weekly_order))
        if self.yearly_order > 0 and n_days >= self.yearly_min_days:
            out.append((YEARLY, self.yearly_order))
        return out


@dataclass
class TrendModelFit:
    changepoints: np.ndarray  # day indices
    k: float  # base slope
    m: float  # base offset
    deltas: np.ndarray
    fourier: dict  # period -> (n_order, 2) array of (a_n, b_n)
    holiday_effects: dict  # label -> effect
    ridge_lambda: float
    last_day: int
    first_day: int = 1
    holidays: dict = field(default_factory=dict)
    fitted: Optional[np.ndarray] = None
    normal_residual: float = 0.0

    @property
    def final_slope(self) -> float:
        return float(self.k + self.deltas.sum())

    def coefficients(self) -> list[tuple[str, float]]:
        rows = [("k", self.k), ("m", self.m)]
        rows += [(f"delta@{int(c)}", float(d)) for c, d in zip(self.changepoints, self.deltas)]
        for period, ab in self.fourier.items():
            for n, (a, b) in enumerate(ab, start=1):
                rows += [(f"sin{n}@{period:g}", float(a)), (f"cos{n}@{period:g}", float(b))]
        rows += [(f"holiday:{k}", float(v)) for k, v in self.holiday_effects.items()]
        rows.append(("ridge_lambda", float(self.ridge_lambda)))
        return rows

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["name", "value"])
            for name, value in self.coefficients():
                w.writerow([name, repr(float(value))])

    def components(self, days: np.ndarray) -> dict:
        t = np.asarray(days, dtype=float) - self.first_day
        cps = self.changepoints - self.first_day
        hinge = np.maximum(0.0, t[:, None] - cps[None, :])
        trend = self.k * t + self.m + hinge @ self.deltas
        seasonal = np.zeros_like(t)
        for period, ab in self.fourier.items():
            F = _fourier(t, period, len(ab))
            seasonal += F @ ab.reshape(-1)
        holiday = np.zeros_like(t)
        for i, d in enumerate(np.asarray(days, dtype=int)):
            label = self.holidays.get(int(d))
            if label is not None:
                holiday[i] = self.holiday_effects.get(label, 0.0)
        return {"trend": trend, "seasonal": seasonal, "holiday": holiday}

    def predict(self, days) -> np.ndarray:
        c = self.components(np.asarray(days))
        return c["trend"] + c["seasonal"] + c["holiday"]


def _fourier(t: np.ndarray, period: float, order: int) -> np.ndarray:
    n = np.arange(1, order + 1)
    x = 2 * np.pi * t[:, None] * n[None, :] / period
    out = np.empty((len(t), 2 * order))
    out[:, 0::2] = np.sin(x)
    out[:, 1::2] = np.cos(x)
    return out


def place_changepoints(days: np.ndarray, n_changepoints: int, changepoint_range: float):
    """Interior uniform quantiles i / (n + 1) of the first ``changepoint_range`` of the days."""
    days = np.asarray(days)
    hist = int(np.floor(len(days) * changepoint_range))
    if n_changepoints <= 0 or hist < 3:
        return np.zeros(0)
    q = np.arange(1, n_changepoints + 1) / (n_changepoints + 1)
    idx = np.unique(np.round(q * (hist - 1)).astype(int))
    idx = idx[(idx > 0) & (idx < hist - 1)]
    return days[idx].astype(float)


def fit_trend_model(series, config: Optional[TrendConfig] = None,
                    days: Optional[np.ndarray] = None) -> TrendModelFit:
    """Ridge fit on ``series`` observed at ``days`` (default ``1..D``)."""
    config = config or TrendConfig()
    y = np.asarray(series, dtype=float)
    D = len(y)
    days = np.arange(1, D + 1) if days is None else np.asarray(days)
    periods = config.periods(D)
    longest = max((p for p, _ in periods), default=1.0)
    if D < max(2.0, 2 * longest):
        raise LengthError(f"series of length {D} too short; need >= {2 * longest:g} days")

    t = (days - days[0]).astype(float)
    cps = place_changepoints(days, config.n_changepoints, config.changepoint_range)
    labels = sorted({v for d, v in config.holidays.items() if days[0] <= d <= days[-1]})

    cols = [t[:, None], np.maximum(0.0, t[:, None] - (cps - days[0])[None, :]),
            np.ones((D, 1))]
    cols += [_fourier(t, p, order) for p, order in periods]
    hol = np.zeros((D, len(labels)))
    for j, label in enumerate(labels):
        for i, d in enumerate(days):
            if config.holidays.get(int(d)) == label:
                hol[i, j] = 1.0
    cols.append(hol)
    X = np.hstack(cols)
    penalty = np.zeros(X.shape[1])
    penalty[1:1 + len(cps)] = 1.0

    # column scaling keeps the normal equations well conditioned for long histories
    scale = np.sqrt((X ** 2).mean(axis=0))
    scale[scale == 0] = 1.0
    Xs = X / scale
    A = Xs.T @ Xs + config.ridge_lambda * np.diag(penalty / scale ** 2)
    rhs = Xs.T @ y
    try:
        factor = linalg.cho_factor(A, lower=True)
        beta_s = linalg.cho_solve(factor, rhs)
    except linalg.LinAlgError:
        if config.ridge_lambda > 0:
            raise NumericalError("ridge system is not positive definite") from None
        beta_s, *_ = linalg.lstsq(Xs, y)
    if not np.all(np.isfinite(beta_s)):
        raise NumericalError("non-finite trend-model coefficients")
    beta = beta_s / scale
    resid = A @ beta_s - rhs
    rel = float(np.linalg.norm(resid) / max(np.linalg.norm(rhs), 1e-300))

    pos = 0
    k = float(beta[pos]); pos += 1  # noqa: E702
    deltas = beta[pos:pos + len(cps)]; pos += len(cps)  # noqa: E702
    m = float(beta[pos]); pos += 1  # noqa: E702
    fourier = {}
    for p, order in periods:
        fourier[p] = beta[pos:pos + 2 * order].reshape(order, 2)
        pos += 2 * order
    effects = {label: float(beta[pos + j]) for j, label in enumerate(labels)}
    return TrendModelFit(
        changepoints=cps, k=k, m=m, deltas=np.asarray(deltas, dtype=float), fourier=fourier,
        holiday_effects=effects, ridge_lambda=config.ridge_lambda,
        last_day=int(days[-1]), first_day=int(days[0]),
        holidays=dict(config.holidays), fitted=X @ beta, normal_residual=rel,
    )


def forecast_totals(fit: TrendModelFit, from_day: Optional[int] = None,
                    horizon: int = 28, holidays: Optional[Mapping[int, str]] = None) -> np.ndarray:
    """Group totals for ``from_day .. from_day + horizon - 1``, floored at zero."""
    start = fit.last_day + 1 if from_day is None else from_day
    days = np.arange(start, start + horizon)
    if holidays is not None:
        fit = _with_holidays(fit, holidays)
    return np.maximum(fit.predict(days), 0.0)


def _with_holidays(fit: TrendModelFit, holidays: Mapping[int, str]) -> TrendModelFit:
    from dataclasses import replace
    merged = dict(fit.holidays)
    merged.update({int(d): v for d, v in holidays.items()})
    return replace(fit, holidays=merged)
