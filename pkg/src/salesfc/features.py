"""Long-format supervised tables with lag, rolling-mean and calendar features.

Features for an origin day ``t`` only look at sales on days ``<= t``; the label
for horizon ``h`` is the sale on day ``t + h``. Every horizon gets its own
supervised set (direct forecasting), so a prediction never feeds a feature.
Calendar columns for the target day ``t + h`` are appended to the supervised
matrices: the calendar is known ahead, so they carry no future sales.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, EmptyDatasetError, ShapeError
from .ingest import Calendar, Prices, SalesPanel, SeriesKey

DEFAULT_LAGS = (7, 14, 28)
DEFAULT_WINDOWS = (7, 28)
CALENDAR_FEATURES = ("weekday", "month", "event", "snap")


def wide_to_long(panel: SalesPanel) -> pd.DataFrame:
    """One record per (series, day): rows x D records sorted by series then day."""
    n, d = panel.values.shape
    cat = lambda a: pd.Categorical(np.repeat(np.asarray(a, dtype=object), d))  # noqa: E731
    return pd.DataFrame({
        "series_id": cat(panel.ids),
        "item_id": cat(panel.item_ids),
        "dept_id": cat(panel.dept_ids),
        "cat_id": cat(panel.cat_ids),
        "store_id": cat(panel.store_ids),
        "state_id": cat(panel.state_ids),
        "day": np.tile(np.arange(1, d + 1), n),
        "sales": panel.values.reshape(-1),
    })


def long_to_wide(records: pd.DataFrame, calendar: Optional[Calendar] = None,
                 prices: Optional[Prices] = None) -> SalesPanel:
    """Inverse of :func:`wide_to_long`; series keep their first-seen order."""
    order = pd.unique(records["series_id"].astype(object))
    wide = records.pivot(index="series_id", columns="day", values="sales")
    wide = wide.reindex(index=order)
    attrs = (records.drop_duplicates("series_id").set_index("series_id")
             .reindex(order).astype(object))
    return SalesPanel(
        ids=np.asarray(order, dtype=object),
        item_ids=attrs["item_id"].to_numpy(), dept_ids=attrs["dept_id"].to_numpy(),
        cat_ids=attrs["cat_id"].to_numpy(), store_ids=attrs["store_id"].to_numpy(),
        state_ids=attrs["state_id"].to_numpy(),
        values=wide.to_numpy(dtype=np.int64), calendar=calendar, prices=prices,
    )


@dataclass
class FeatureRow:
    series: SeriesKey
    day: int
    horizon: int
    features: np.ndarray
    label: Optional[float]


@dataclass
class FeatureTable:
    """Features on a (series, origin day) grid, sorted by series then day.

    ``X`` has shape (n_series, n_days, n_features); ``sales`` keeps the full
    observed matrix so labels for any horizon can be read off without copying.
    """

    series_ids: np.ndarray
    keys: list
    days: np.ndarray  # 1-based origin days covered by X
    X: np.ndarray
    names: list
    sales: np.ndarray
    horizon: int = 28
    # (n_series, calendar days, k) calendar values by target day; NaN past the calendar
    target: Optional[np.ndarray] = None
    target_names: list = field(default_factory=list)

    @property
    def n_series(self) -> int:
        return self.X.shape[0]

    def labels(self, h: int) -> np.ndarray:
        """(n_series, n_days) labels sales(t + h); NaN past the observed range."""
        out = np.full(self.X.shape[:2], np.nan)
        target = self.days + h
        ok = target <= self.sales.shape[1]
        out[:, ok] = self.sales[:, target[ok] - 1]
        return out

    def subset(self, rows) -> "FeatureTable":
        rows = np.asarray(rows)
        return replace(self, series_ids=self.series_ids[rows], keys=[self.keys[i] for i in rows],
                       X=self.X[rows], names=list(self.names), sales=self.sales[rows],
                       target=None if self.target is None else self.target[rows])

    def with_constant(self, name: str, value: float) -> "FeatureTable":
        extra = np.full(self.X.shape[:2] + (1,), float(value))
        return replace(self, X=np.concatenate([self.X, extra], axis=2),
                       names=self.names + [name])

    def target_block(self, origins: np.ndarray, h: int) -> np.ndarray:
        """(n_series, len(origins), k) target-day calendar values for horizon ``h``."""
        if self.target is None:
            return np.zeros((self.n_series, len(origins), 0))
        day = np.asarray(origins) + h
        out = np.full((self.n_series, len(day), self.target.shape[2]), np.nan)
        ok = day <= self.target.shape[1]
        out[:, ok] = self.target[:, day[ok] - 1]
        return out

    @property
    def model_names(self) -> list:
        """Column names of the supervised matrices (before any horizon column)."""
        return self.names + self.target_names

    def rows(self, horizons: Iterable[int] | None = None) -> Iterator[FeatureRow]:
        horizons = range(1, self.horizon + 1) if horizons is None else horizons
        for i, key in enumerate(self.keys):
            for j, t in enumerate(self.days):
                for h in horizons:
                    y = self.sales[i, t + h - 1] if t + h <= self.sales.shape[1] else None
                    yield FeatureRow(key, int(t), h, self.X[i, j],
                                     None if y is None else float(y))

    def to_csv(self, path, horizons: Iterable[int] | None = None) -> None:
        horizons = list(range(1, self.horizon + 1) if horizons is None else horizons)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series_id", "day", "horizon", *self.names, "label"])
            for i, sid in enumerate(self.series_ids):
                for h in horizons:
                    lab = self.labels(h)[i]
                    for j, t in enumerate(self.days):
                        feats = ["" if np.isnan(v) else repr(float(v)) for v in self.X[i, j]]
                        label = "" if np.isnan(lab[j]) else repr(float(lab[j]))
                        w.writerow([sid, int(t), h, *feats, label])


def _check_config(lags, windows, n_days):
    for name, vals in (("lag", lags), ("window", windows)):
        for v in vals:
            if int(v) < 1:
                raise ConfigError(f"{name} {v} must be positive", key=f"features.{name}s")
            if int(v) > n_days:
                raise ConfigError(f"{name} {v} exceeds the {n_days} observed days",
                                  key=f"features.{name}s")


def panel_features(panel: SalesPanel, lags: Sequence[int] = DEFAULT_LAGS,
                   windows: Sequence[int] = DEFAULT_WINDOWS, horizon: int = 28,
                   end: Optional[int] = None, start: int = 1) -> FeatureTable:
    """Build the feature grid for origin days ``start..end`` straight from a panel.

    ``end`` defaults to the last observed day. Sales past ``end`` stay
    available only as labels.
    """
    Y = np.asarray(panel.values, dtype=float)
    n, D = Y.shape
    end = D if end is None else end
    _check_config(lags, windows, min(end, D))
    days = np.arange(start, end + 1)
    cols, names = [], []

    for k in sorted(set(int(v) for v in lags)):
        src = days - k
        col = np.full((n, len(days)), np.nan)
        ok = src >= 1
        col[:, ok] = Y[:, src[ok] - 1]
        cols.append(col)
        names.append(f"lag_{k}")

    csum = np.concatenate([np.zeros((n, 1)), np.cumsum(Y, axis=1)], axis=1)
    for w in sorted(set(int(v) for v in windows)):
        col = np.full((n, len(days)), np.nan)
        ok = days >= w
        col[:, ok] = (csum[:, days[ok]] - csum[:, days[ok] - w]) / w
        cols.append(col)
        names.append(f"rollmean_{w}")

    cal = panel.calendar
    target, target_names = None, []
    if cal is not None:
        full = _calendar_columns(panel, cal)
        idx = days - 1
        cols += [full[:, idx, j] for j in range(full.shape[2])]
        names += list(CALENDAR_FEATURES)
        target = full
        target_names = [f"target_{c}" for c in CALENDAR_FEATURES]
        price = panel.daily_prices()
        if price is not None:
            cols.append(price[:, idx])
            names.append("price")

    X = np.stack(cols, axis=2) if cols else np.zeros((n, len(days), 0))
    return FeatureTable(
        series_ids=np.asarray(panel.ids), keys=panel.keys, days=days,
        X=np.ascontiguousarray(X), names=names, sales=Y, horizon=horizon,
        target=target, target_names=target_names,
    )


def _calendar_columns(panel: SalesPanel, cal: Calendar) -> np.ndarray:
    """(n_series, calendar days, 4) weekday / month / event / snap for every calendar day."""
    n, L = panel.n_series, len(cal)
    shared = np.stack([np.asarray(cal.weekday, float), np.asarray(cal.month, float),
                       cal.event_flags().astype(float)], axis=1)
    out = np.empty((n, L, 4))
    out[:, :, :3] = shared[None]
    for i, s in enumerate(panel.state_ids):
        out[i, :, 3] = cal.snap_for(s)
    return out


def make_features(records: pd.DataFrame, calendar: Optional[Calendar] = None,
                  prices: Optional[Prices] = None, lags: Sequence[int] = DEFAULT_LAGS,
                  windows: Sequence[int] = DEFAULT_WINDOWS, horizon: int = 28) -> FeatureTable:
    return panel_features(long_to_wide(records, calendar, prices), lags, windows, horizon)


def _usable(table: FeatureTable, train_end: int, h: int, min_day: Optional[int]):
    if not 1 <= h <= table.horizon:
        raise ConfigError(f"horizon {h} outside 1..{table.horizon}", key="grouping.horizon")
    lo = table.days[0] if min_day is None else max(min_day, table.days[0])
    hi = min(train_end - h, table.days[-1])
    if hi < lo:
        raise EmptyDatasetError(
            f"no training origins for horizon {h}: train_end - h = {train_end - h} < {lo}")
    return np.flatnonzero((table.days >= lo) & (table.days <= hi))


def training_matrix(table: FeatureTable, train_end: int, h: int,
                    min_day: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Supervised rows for one horizon: origins t with t <= train_end - h."""
    cols = _usable(table, train_end, h, min_day)
    X = _with_target(table, cols, h)
    y = table.labels(h)[:, cols].reshape(-1)
    return X, y


def _with_target(table: FeatureTable, cols: np.ndarray, h: int) -> np.ndarray:
    X = np.concatenate([table.X[:, cols, :], table.target_block(table.days[cols], h)], axis=2)
    return X.reshape(-1, X.shape[2])


def stacked_training_matrix(table: FeatureTable, train_end: int, horizons: Sequence[int],
                            min_day: Optional[int] = None, stride: int = 1):
    """All horizons in one table, with the horizon appended as the last feature."""
    blocks, labels = [], []
    for h in horizons:
        cols = _usable(table, train_end, h, min_day)
        cols = cols[::-1][::stride][::-1]
        X = _with_target(table, cols, h)
        blocks.append(np.column_stack([X, np.full(len(X), float(h))]))
        labels.append(table.labels(h)[:, cols].reshape(-1))
    return np.concatenate(blocks), np.concatenate(labels)


def prediction_matrix(table: FeatureTable, origin: int, horizons: Sequence[int] | None = None,
                      h: int = 1):
    """Feature rows at ``origin`` for horizon ``h`` (one row per series), or with
    ``horizons`` one row per (series, h), series-major, with the horizon as last column."""
    pos = np.flatnonzero(table.days == origin)
    if pos.size == 0:
        raise ShapeError(f"origin day {origin} not covered by the feature table")
    if horizons is None:
        return _with_target(table, pos[:1], h)
    horizons = list(horizons)
    blocks = np.stack([_with_target(table, pos[:1], k) for k in horizons], axis=1)
    hcol = np.broadcast_to(np.asarray(horizons, float), blocks.shape[:2])[..., None]
    return np.concatenate([blocks, hcol], axis=2).reshape(-1, blocks.shape[2] + 1)

