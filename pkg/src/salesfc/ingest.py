"""Reading M5-style CSV files into a sales panel and its aggregation hierarchy.

The sales file is wide (one row per item x store, one column per day), the
calendar maps day columns ``d_1..d_D`` to dates, and the optional prices file
holds weekly sell prices per item x store.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from .errors import (
    ContinuityError,
    DataValueError,
    DayIndexError,
    DuplicateKeyError,
    SchemaError,
)

ID_COLUMNS = ("id", "item_id", "dept_id", "cat_id", "store_id", "state_id")
KEY_FIELDS = ("item_id", "dept_id", "cat_id", "store_id", "state_id")
CALENDAR_COLUMNS = (
    "date", "wm_yr_wk", "weekday", "wday", "month", "year", "d",
    "event_name_1", "event_type_1", "event_name_2", "event_type_2",
    "snap_CA", "snap_TX", "snap_WI",
)
PRICE_COLUMNS = ("store_id", "item_id", "wm_yr_wk", "sell_price")

# (level name, populated key fields), top of the hierarchy first.
LEVELS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("total", ()),
    ("state", ("state_id",)),
    ("store", ("store_id",)),
    ("category", ("cat_id",)),
    ("department", ("dept_id",)),
    ("state/category", ("state_id", "cat_id")),
    ("state/department", ("state_id", "dept_id")),
    ("store/category", ("store_id", "cat_id")),
    ("store/department", ("store_id", "dept_id")),
    ("item", ("item_id",)),
    ("item/state", ("item_id", "state_id")),
    ("item/store", ("item_id", "store_id")),
)
LEVEL_NAMES = tuple(name for name, _ in LEVELS)
LEVEL_FIELDS = dict(LEVELS)
BOTTOM_LEVEL = "item/store"


@dataclass(frozen=True, order=True)
class SeriesKey:
    level: str
    item_id: Optional[str] = None
    dept_id: Optional[str] = None
    cat_id: Optional[str] = None
    store_id: Optional[str] = None
    state_id: Optional[str] = None

    def __post_init__(self):
        if self.level not in LEVEL_FIELDS:
            raise ValueError(f"unknown aggregation level {self.level!r}")
        populated = {f for f in KEY_FIELDS if getattr(self, f) is not None}
        if populated != set(LEVEL_FIELDS[self.level]):
            raise ValueError(
                f"level {self.level!r} populates {sorted(LEVEL_FIELDS[self.level])}, "
                f"got {sorted(populated)}"
            )

    @property
    def series_id(self) -> str:
        parts = [getattr(self, f) for f in LEVEL_FIELDS[self.level]]
        return "/".join(parts) if parts else "Total"


@dataclass
class Calendar:
    dates: np.ndarray  # datetime64[D]
    day_index: np.ndarray
    weekday: np.ndarray  # M5 wday: 1 = Saturday ... 7 = Friday
    month: np.ndarray
    year: np.ndarray
    wm_yr_wk: Optional[np.ndarray] = None
    event_name: list = field(default_factory=list)
    snap: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.day_index)

    def validate(self):
        n = len(self.day_index)
        if n == 0:
            raise ContinuityError("calendar is empty")
        steps = np.diff(self.dates.astype("datetime64[D]").astype(np.int64))
        bad = np.flatnonzero(steps != 1)
        if bad.size:
            i = int(bad[0])
            raise ContinuityError(
                f"calendar dates not consecutive between row {i + 1} "
                f"({self.dates[i]}) and row {i + 2} ({self.dates[i + 1]})"
            )
        expected = np.arange(1, n + 1)
        if not np.array_equal(self.day_index, expected):
            i = int(np.flatnonzero(self.day_index != expected)[0])
            raise DayIndexError(
                f"day index d_{self.day_index[i]} at row {i + 1}, expected d_{i + 1}"
            )
        return self

    def holidays(self, end: Optional[int] = None) -> dict[int, str]:
        """Map of 1-based day -> event label for days carrying an event."""
        days = {}
        stop = len(self) if end is None else min(end, len(self))
        for i in range(stop):
            label = self.event_name[i] if self.event_name else None
            if label:
                days[i + 1] = label
        return days

    def event_flags(self) -> np.ndarray:
        if not self.event_name:
            return np.zeros(len(self), dtype=np.int8)
        return np.array([1 if e else 0 for e in self.event_name], dtype=np.int8)

    def snap_for(self, state: str) -> np.ndarray:
        flags = self.snap.get(state)
        if flags is None:
            return np.zeros(len(self), dtype=np.int8)
        return np.asarray(flags, dtype=np.int8)

    def to_frame(self) -> pd.DataFrame:
        dates = pd.to_datetime(self.dates)
        events = self.event_name or [None] * len(self)
        frame = pd.DataFrame({
            "date": dates.strftime("%Y-%m-%d"),
            "wm_yr_wk": self.wm_yr_wk if self.wm_yr_wk is not None else 0,
            "weekday": dates.day_name(),
            "wday": self.weekday,
            "month": self.month,
            "year": self.year,
            "d": [f"d_{i}" for i in self.day_index],
            "event_name_1": [e or "" for e in events],
            "event_type_1": ["Event" if e else "" for e in events],
            "event_name_2": "",
            "event_type_2": "",
        })
        for state in ["CA", "TX", "WI"] + sorted(set(self.snap) - {"CA", "TX", "WI"}):
            frame[f"snap_{state}"] = self.snap_for(state)
        return frame

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def m5_wday(date: dt.date) -> int:
    # Saturday = 1
    return (date.weekday() + 2) % 7 + 1


def make_calendar(start: dt.date, n_days: int, events: Mapping[int, str] | None = None,
                  snap: Mapping[str, np.ndarray] | None = None) -> Calendar:
    dates = np.arange(np.datetime64(start, "D"), np.datetime64(start, "D") + n_days)
    py = [start + dt.timedelta(days=i) for i in range(n_days)]
    # Walmart weeks start on Saturday; 11101 is the first M5 week.
    week = np.array([(i + (m5_wday(start) - 1)) // 7 for i in range(n_days)]) + 11101
    events = dict(events or {})
    return Calendar(
        dates=dates,
        day_index=np.arange(1, n_days + 1),
        weekday=np.array([m5_wday(d) for d in py]),
        month=np.array([d.month for d in py]),
        year=np.array([d.year for d in py]),
        wm_yr_wk=week,
        event_name=[events.get(i + 1) for i in range(n_days)],
        snap={k: np.asarray(v, dtype=np.int8) for k, v in (snap or {}).items()},
    ).validate()


@dataclass
class Prices:
    table: pd.DataFrame  # store_id, item_id, wm_yr_wk, sell_price

    def daily(self, item_ids: Sequence[str], store_ids: Sequence[str],
              calendar: Calendar, n_days: int) -> np.ndarray:
        """Sell price per series and day (NaN where no price is listed)."""
        if calendar.wm_yr_wk is None:
            raise SchemaError("calendar has no wm_yr_wk column; cannot map prices", "wm_yr_wk")
        weeks = np.asarray(calendar.wm_yr_wk[:n_days])
        uweeks, week_pos = np.unique(weeks, return_inverse=True)
        keys = pd.MultiIndex.from_arrays([list(item_ids), list(store_ids)])
        table = self.table.set_index(["item_id", "store_id", "wm_yr_wk"])["sell_price"]
        wide = table.unstack("wm_yr_wk")
        wide = wide.reindex(index=keys, columns=uweeks)
        return wide.to_numpy(dtype=float)[:, week_pos]


@dataclass
class SalesPanel:
    ids: np.ndarray
    item_ids: np.ndarray
    dept_ids: np.ndarray
    cat_ids: np.ndarray
    store_ids: np.ndarray
    state_ids: np.ndarray
    values: np.ndarray  # (n_series, n_days) int64
    calendar: Optional[Calendar] = None
    prices: Optional[Prices] = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise DataValueError("sales values must be a 2-d matrix")
        if self.values.size and self.values.min() < 0:
            r, c = np.argwhere(self.values < 0)[0]
            raise DataValueError(f"negative sales at row {r + 1}, day {c + 1}", r + 1, c + 1)
        pairs = list(zip(self.item_ids, self.store_ids))
        if len(set(pairs)) != len(pairs):
            seen = set()
            for p in pairs:
                if p in seen:
                    raise DuplicateKeyError(f"duplicate (item, store) pair {p}")
                seen.add(p)
        if self.calendar is not None and len(self.calendar) < self.n_days:
            raise DayIndexError(
                f"sales reference d_{self.n_days} but the calendar ends at d_{len(self.calendar)}"
            )

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]

    @property
    def keys(self) -> list[SeriesKey]:
        return [SeriesKey(BOTTOM_LEVEL, item_id=i, store_id=s)
                for i, s in zip(self.item_ids, self.store_ids)]

    def attribute(self, name: str) -> np.ndarray:
        return {"item_id": self.item_ids, "dept_id": self.dept_ids, "cat_id": self.cat_ids,
                "store_id": self.store_ids, "state_id": self.state_ids}[name]

    def attach(self, calendar: Optional[Calendar] = None, prices: Optional[Prices] = None):
        return replace(self, calendar=calendar or self.calendar, prices=prices or self.prices)

    def subset(self, rows) -> "SalesPanel":
        rows = np.asarray(rows)
        return replace(
            self, ids=self.ids[rows], item_ids=self.item_ids[rows], dept_ids=self.dept_ids[rows],
            cat_ids=self.cat_ids[rows], store_ids=self.store_ids[rows],
            state_ids=self.state_ids[rows], values=self.values[rows],
        )

    def head_days(self, n_days: int) -> "SalesPanel":
        return replace(self, values=self.values[:, :n_days])

    def daily_prices(self) -> Optional[np.ndarray]:
        if self.prices is None or self.calendar is None:
            return None
        return self.prices.daily(self.item_ids, self.store_ids, self.calendar, self.n_days)

    def to_frame(self) -> pd.DataFrame:
        head = pd.DataFrame({
            "id": self.ids, "item_id": self.item_ids, "dept_id": self.dept_ids,
            "cat_id": self.cat_ids, "store_id": self.store_ids, "state_id": self.state_ids,
        })
        days = pd.DataFrame(self.values, columns=[f"d_{i + 1}" for i in range(self.n_days)])
        return pd.concat([head, days], axis=1)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def _require(columns: Sequence[str], required: Sequence[str], what: str) -> None:
    for col in required:
        if col not in columns:
            raise SchemaError(f"{what}: missing mandatory column {col!r}", col)


def parse_wide_sales(path) -> SalesPanel:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    _require(frame.columns, ID_COLUMNS, str(path))
    day_cols = [c for c in frame.columns if c not in ID_COLUMNS]
    for j, col in enumerate(day_cols):
        if col != f"d_{j + 1}":
            raise SchemaError(f"{path}: expected day column d_{j + 1}, found {col!r}", col)
    raw = frame[day_cols]
    numeric = raw.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(numeric) | (numeric < 0) | (numeric != np.floor(numeric))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataValueError(
            f"{path}: invalid sales value {raw.iat[r, c]!r} at row {r + 1}, column {day_cols[c]}",
            int(r) + 1, day_cols[c],
        )
    arr = lambda col: frame[col].to_numpy(dtype=object)  # noqa: E731
    return SalesPanel(
        ids=arr("id"), item_ids=arr("item_id"), dept_ids=arr("dept_id"), cat_ids=arr("cat_id"),
        store_ids=arr("store_id"), state_ids=arr("state_id"),
        values=numeric.astype(np.int64).reshape(len(frame), len(day_cols)),
    )


def parse_calendar(path) -> Calendar:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    _require(frame.columns, ("date", "d", "wday"), str(path))
    try:
        parsed = pd.to_datetime(frame["date"], format="%Y-%m-%d")
    except (ValueError, TypeError) as exc:
        raise DataValueError(f"{path}: unparseable date: {exc}", column="date") from None
    dates = parsed.to_numpy().astype("datetime64[D]")
    d = frame["d"].str.removeprefix("d_")
    if not d.str.fullmatch(r"\d+").all():
        i = int(np.flatnonzero(~d.str.fullmatch(r"\d+"))[0])
        raise DayIndexError(f"{path}: malformed day label {frame['d'].iat[i]!r} at row {i + 1}")
    month = frame["month"].astype(int).to_numpy() if "month" in frame else parsed.dt.month.to_numpy()
    year = frame["year"].astype(int).to_numpy() if "year" in frame else parsed.dt.year.to_numpy()
    events = None
    if "event_name_1" in frame:
        e1 = frame["event_name_1"]
        e2 = frame["event_name_2"] if "event_name_2" in frame else pd.Series([""] * len(frame))
        events = [a or b or None for a, b in zip(e1, e2)]
    snap = {col[5:]: frame[col].astype(int).to_numpy(dtype=np.int8)
            for col in frame.columns if col.startswith("snap_")}
    wday = frame["wday"].astype(int).to_numpy()
    expected = (parsed.dt.dayofweek.to_numpy() + 2) % 7 + 1
    if not np.array_equal(wday, expected):
        i = int(np.flatnonzero(wday != expected)[0])
        raise DataValueError(
            f"{path}: wday {wday[i]} at row {i + 1} does not match date {frame['date'].iat[i]}",
            i + 1, "wday",
        )
    cal = Calendar(
        dates=dates,
        day_index=d.astype(int).to_numpy(),
        weekday=wday,
        month=month,
        year=year,
        wm_yr_wk=frame["wm_yr_wk"].astype(int).to_numpy() if "wm_yr_wk" in frame else None,
        event_name=events or [],
        snap=snap,
    )
    return cal.validate()


def parse_prices(path) -> Prices:
    frame = pd.read_csv(path, dtype={"store_id": str, "item_id": str})
    _require(frame.columns, PRICE_COLUMNS, str(path))
    frame = frame[list(PRICE_COLUMNS)]
    bad = ~(frame["sell_price"] > 0)
    if bad.any():
        i = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataValueError(f"{path}: non-positive sell_price at row {i + 1}", i + 1, "sell_price")
    return Prices(frame.reset_index(drop=True))


def load_panel(sales_path, calendar_path=None, prices_path=None) -> SalesPanel:
    panel = parse_wide_sales(sales_path)
    calendar = parse_calendar(calendar_path) if calendar_path else None
    prices = parse_prices(prices_path) if prices_path else None
    return panel.attach(calendar, prices)


@dataclass
class Hierarchy:
    keys: list  # SeriesKey per row, grouped by level in LEVELS order
    values: np.ndarray  # (n_total, n_days)
    summing: sparse.csr_matrix  # (n_total, n_bottom), rows follow ``keys``
    bottom_ids: np.ndarray  # panel ids in panel row order

    @property
    def level_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(LEVEL_NAMES, 0)
        for k in self.keys:
            counts[k.level] += 1
        return counts

    @property
    def levels(self) -> np.ndarray:
        return np.array([k.level for k in self.keys], dtype=object)

    @property
    def series(self) -> dict:
        return {k: self.values[i] for i, k in enumerate(self.keys)}

    def index_of(self, key: SeriesKey) -> int:
        if not hasattr(self, "_index"):
            self._index = {k: i for i, k in enumerate(self.keys)}
        return self._index[key]

    def aggregate(self, bottom: np.ndarray) -> np.ndarray:
        """Sum a (n_bottom, h) matrix in panel row order up every level."""
        bottom = np.asarray(bottom)
        return np.asarray(self.summing @ bottom)

    def children(self, i: int) -> np.ndarray:
        """Panel rows aggregated into hierarchy row ``i``."""
        return self.summing[i].indices


def summing_structure(panel: SalesPanel) -> tuple[list, sparse.csr_matrix]:
    n = panel.n_series
    keys: list[SeriesKey] = []
    blocks = []
    for level, fields in LEVELS:
        cols = [panel.attribute(f) for f in fields]
        combos = list(zip(*cols)) if fields else [()] * n
        uniq = sorted(set(combos))
        pos = {c: i for i, c in enumerate(uniq)}
        rows = np.fromiter((pos[c] for c in combos), dtype=np.int64, count=n)
        blocks.append(sparse.csr_matrix(
            (np.ones(n, dtype=np.int64), (rows, np.arange(n))), shape=(len(uniq), n)))
        keys.extend(SeriesKey(level, **dict(zip(fields, c))) for c in uniq)
    return keys, sparse.vstack(blocks, format="csr")


def build_hierarchy(panel: SalesPanel) -> Hierarchy:
    keys, summing = summing_structure(panel)
    values = np.asarray(summing @ panel.values)
    return Hierarchy(keys=keys, values=values, summing=summing, bottom_ids=np.asarray(panel.ids))
