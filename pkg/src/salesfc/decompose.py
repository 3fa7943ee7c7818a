"""Additive trend / seasonal / holiday / residual decomposition and strength scores.

Scores compare residual variance with the variance of a component plus the
residual; a series is labelled trend-type when its trend score is at least its
seasonality score.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import LengthError


class Group(str, enum.Enum):
    TREND = "TrendType"
    SEASONALITY = "SeasonalityType"


@dataclass
class Components:
    observed: np.ndarray
    trend: np.ndarray
    seasonal: np.ndarray
    holiday: np.ndarray
    residual: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["day", "observed", "trend", "seasonal", "holiday", "residual"])
            for t in range(len(self.observed)):
                w.writerow([t + 1] + [repr(float(v[t])) for v in
                                      (self.observed, self.trend, self.seasonal,
                                       self.holiday, self.residual)])


@dataclass(frozen=True)
class StrengthScores:
    trend_score: float
    seasonality_score: float

    @property
    def group(self) -> Group:
        # ties go to the trend side
        return Group.TREND if self.trend_score >= self.seasonality_score else Group.SEASONALITY


def centered_moving_average(y: np.ndarray, period: int) -> np.ndarray:
    """Centered MA (2 x period for even periods); NaN where the window runs off the ends."""
    n = len(y)
    if period % 2:
        weights = np.full(period, 1.0 / period)
    else:
        weights = np.r_[0.5, np.ones(period - 1), 0.5] / period
    half = len(weights) // 2
    out = np.full(n, np.nan)
    if n >= len(weights):
        out[half:n - half] = np.convolve(y, weights, mode="valid")
    return out


def _fill_holidays(y: np.ndarray, holiday_idx: np.ndarray) -> np.ndarray:
    """Linear interpolation across holiday days so spikes do not leak into the trend."""
    if holiday_idx.size == 0 or holiday_idx.size == len(y):
        return y
    keep = np.ones(len(y), bool)
    keep[holiday_idx] = False
    x = np.arange(len(y))
    filled = y.copy()
    filled[holiday_idx] = np.interp(holiday_idx, x[keep], y[keep])
    return filled


def decompose(series, period: int = 7,
              holiday_days: Optional[Mapping[int, str] | Sequence[int]] = None) -> Components:
    """Split ``series`` into trend, seasonal, holiday and residual parts.

    ``holiday_days`` holds 1-based day indices, either as a collection (one
    shared effect) or a mapping day -> label (one effect per label).
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if period < 2:
        raise LengthError(f"period must be >= 2, got {period}")
    if n < 2 * period:
        raise LengthError(f"series of length {n} is shorter than 2 x period ({2 * period})")

    if holiday_days is None:
        labels: dict[int, str] = {}
    elif isinstance(holiday_days, Mapping):
        labels = {int(d): str(v) for d, v in holiday_days.items() if 1 <= int(d) <= n}
    else:
        labels = {int(d): "holiday" for d in holiday_days if 1 <= int(d) <= n}
    hol_idx = np.array(sorted(d - 1 for d in labels), dtype=int)

    ma = centered_moving_average(_fill_holidays(y, hol_idx), period)
    defined = np.flatnonzero(~np.isnan(ma))
    trend = ma.copy()
    trend[:defined[0]] = ma[defined[0]]
    trend[defined[-1] + 1:] = ma[defined[-1]]

    holiday = np.zeros(n)
    for label in sorted(set(labels.values())):
        idx = np.array([d - 1 for d, v in labels.items() if v == label])
        holiday[idx] = np.mean(y[idx] - trend[idx])

    detrended = y - trend - holiday
    interior = np.zeros(n, bool)
    interior[defined] = True
    interior[hol_idx] = False
    pos = np.arange(n) % period
    means = np.zeros(period)
    for k in range(period):
        sel = interior & (pos == k)
        if sel.any():
            means[k] = detrended[sel].mean()
    means -= means.mean()
    seasonal = means[pos]

    residual = y - trend - seasonal - holiday
    return Components(y, trend, seasonal, holiday, residual)


def _strength(component: np.ndarray, residual: np.ndarray, floor: float = 0.0) -> float:
    denom = np.var(component + residual)
    if denom <= floor:
        return 0.0
    return float(min(1.0, max(0.0, 1.0 - np.var(residual) / denom)))


def strength_scores(c: Components) -> StrengthScores:
    # variances at round-off level of the observed magnitude count as zero
    scale = float(np.abs(c.observed).max()) if len(c.observed) else 0.0
    floor = (1e3 * np.finfo(float).eps * scale) ** 2
    return StrengthScores(_strength(c.trend, c.residual, floor),
                          _strength(c.seasonal, c.residual, floor))


def split_groups(scores: Mapping[str, StrengthScores]) -> tuple[list, list]:
    """Partition series ids into (trend-type, seasonality-type), preserving input order."""
    trend, seasonal = [], []
    for sid, s in scores.items():
        (trend if s.group is Group.TREND else seasonal).append(sid)
    return trend, seasonal


def scores_to_csv(path, scores: Mapping[str, StrengthScores]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series_id", "trend_score", "seasonality_score", "group"])
        for sid, s in scores.items():
            w.writerow([sid, repr(s.trend_score), repr(s.seasonality_score), s.group.value])
