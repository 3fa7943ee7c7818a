"""RMSSE per series and WRMSSE over every level of the aggregation hierarchy."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import CoverageError, LengthError, ShapeError
from .ingest import LEVEL_NAMES, Hierarchy

log = logging.getLogger(__name__)

WINDOW = 28


def rmsse(train, actual, forecast) -> float:
    """Root mean squared scaled error of one series.

    The scale is the mean squared one-step difference of ``train``. A constant
    training series has no scale: the result is 0.0 when the forecast is exact
    and NaN (meaning "exclude from weighting") otherwise.
    """
    train = np.asarray(train, dtype=float)
    actual = np.asarray(actual, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if len(train) < 2:
        raise LengthError("RMSSE needs at least two training observations")
    if actual.shape != forecast.shape or actual.size == 0:
        raise ShapeError(f"actual {actual.shape} and forecast {forecast.shape} must match")
    scale = np.mean(np.diff(train) ** 2)
    mse = np.mean((actual - forecast) ** 2)
    if scale == 0:
        return 0.0 if mse == 0 else float("nan")
    return float(np.sqrt(mse / scale))


def rmsse_rows(train: np.ndarray, actual: np.ndarray, forecast: np.ndarray) -> np.ndarray:
    """Row-wise :func:`rmsse` for (N, T) / (N, h) matrices."""
    scale = np.mean(np.diff(train, axis=1) ** 2, axis=1)
    mse = np.mean((actual - forecast) ** 2, axis=1)
    out = np.full(len(scale), np.nan)
    pos = scale > 0
    out[pos] = np.sqrt(mse[pos] / scale[pos])
    out[~pos & (mse == 0)] = 0.0
    return out


def compute_weights(hierarchy: Hierarchy, prices: Optional[np.ndarray] = None,
                    train_end: Optional[int] = None, window: int = WINDOW) -> np.ndarray:
    """Weights over all hierarchy series from the last ``window`` training days.

    ``prices`` is a (n_bottom, D) daily sell-price matrix in panel order; NaN
    entries count as no revenue. Without prices the weights use unit sales.
    """
    T = hierarchy.values.shape[1] if train_end is None else train_end
    if T < window:
        raise LengthError(f"weight window of {window} days needs T >= {window}, got {T}")
    bottom = _bottom_values(hierarchy)[:, T - window:T]
    if prices is not None:
        p = np.nan_to_num(np.asarray(prices, dtype=float)[:, T - window:T], nan=0.0)
        bottom = bottom * p
    totals = hierarchy.aggregate(bottom.sum(axis=1))
    mass = totals.sum()
    if mass <= 0:
        log.warning("all-zero weighting window; falling back to uniform weights")
        return np.full(len(totals), 1.0 / len(totals))
    return totals / mass


def _bottom_values(hierarchy: Hierarchy) -> np.ndarray:
    n = hierarchy.summing.shape[1]
    bottom_rows = np.flatnonzero(hierarchy.levels == "item/store")
    # the bottom block is a permutation of panel rows
    out = np.empty((n, hierarchy.values.shape[1]))
    sub = hierarchy.summing[bottom_rows]
    out[sub.indices] = hierarchy.values[bottom_rows]
    return out


@dataclass
class MetricReport:
    series_ids: list
    levels: list
    weights: np.ndarray
    rmsse: np.ndarray
    wrmsse: float
    per_level: dict
    excluded: list = field(default_factory=list)
    weighting: str = "revenue"

    @property
    def contributions(self) -> np.ndarray:
        return np.where(np.isnan(self.rmsse), 0.0, self.weights * np.nan_to_num(self.rmsse))

    def summary(self) -> str:
        return f"WRMSSE={self.wrmsse!r}"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# weighting={self.weighting}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series_id", "level", "weight", "rmsse", "contribution"])
            for sid, lvl, wt, r, c in zip(self.series_ids, self.levels, self.weights,
                                          self.rmsse, self.contributions):
                w.writerow([sid, lvl, repr(float(wt)), "" if np.isnan(r) else repr(float(r)),
                            repr(float(c))])
            fh.write(self.summary() + "\n")

    def to_json(self, path) -> None:
        doc = {
            "wrmsse": self.wrmsse,
            "weighting": self.weighting,
            "per_level": self.per_level,
            "excluded": self.excluded,
            "series": [
                {"series_id": s, "level": lv, "weight": float(w),
                 "rmsse": None if np.isnan(r) else float(r), "contribution": float(c)}
                for s, lv, w, r, c in zip(self.series_ids, self.levels, self.weights,
                                          self.rmsse, self.contributions)
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _as_matrix(forecast, hierarchy: Hierarchy, h: int) -> np.ndarray:
    if isinstance(forecast, Mapping):
        ids = [str(i) for i in hierarchy.bottom_ids]
        missing = [i for i in ids if i not in forecast]
        if missing:
            raise CoverageError(f"{len(missing)} series have no forecast: {missing[:10]}",
                                missing)
        return np.vstack([np.asarray(forecast[i], dtype=float) for i in ids])
    fc = np.asarray(forecast, dtype=float)
    if fc.shape != (hierarchy.summing.shape[1], h):
        raise CoverageError(
            f"forecast matrix {fc.shape} does not cover {hierarchy.summing.shape[1]} series x {h}")
    return fc


def wrmsse(hierarchy: Hierarchy, actual, forecast, train_end: Optional[int] = None,
           weights: Optional[np.ndarray] = None, prices: Optional[np.ndarray] = None
           ) -> MetricReport:
    """Weighted RMSSE over every hierarchy series.

    ``hierarchy`` holds the training history (days ``1..train_end`` are used),
    ``actual`` and ``forecast`` are bottom-level (n_bottom, h) matrices in panel
    order (``forecast`` may also be a mapping from panel id to vector).
    Aggregate forecasts are sums of bottom forecasts.
    """
    T = hierarchy.values.shape[1] if train_end is None else train_end
    actual = np.asarray(actual, dtype=float)
    h = actual.shape[1]
    fc = _as_matrix(forecast, hierarchy, h)
    if actual.shape != fc.shape:
        raise ShapeError(f"actual {actual.shape} vs forecast {fc.shape}")
    if weights is None:
        weights = compute_weights(hierarchy, prices, T)
    weights = np.asarray(weights, dtype=float)

    agg_actual = hierarchy.aggregate(actual)
    agg_fc = hierarchy.aggregate(fc)
    scores = rmsse_rows(hierarchy.values[:, :T].astype(float), agg_actual, agg_fc)
    excluded = np.isnan(scores)
    ids = [k.series_id for k in hierarchy.keys]
    levels = [k.level for k in hierarchy.keys]
    if excluded.any():
        log.warning("excluding %d series with constant history and inexact forecasts: %s",
                    int(excluded.sum()), [ids[i] for i in np.flatnonzero(excluded)][:10])
        weights = np.where(excluded, 0.0, weights)
        mass = weights.sum()
        weights = weights / mass if mass > 0 else weights
    contrib = np.where(excluded, 0.0, weights * np.nan_to_num(scores))
    lv = np.asarray(levels, dtype=object)
    per_level = {name: float(contrib[lv == name].sum()) for name in LEVEL_NAMES}
    return MetricReport(
        series_ids=ids, levels=levels, weights=weights, rmsse=scores,
        wrmsse=float(contrib.sum()), per_level=per_level,
        excluded=[ids[i] for i in np.flatnonzero(excluded)],
        weighting="revenue" if prices is not None else "units",
    )
