"""Seeded synthetic retail panels with known trend / seasonal archetypes.

Each series is ``round(max(0, base + slope*t + amp*sin(2*pi*t/7) + spike*holiday
+ noise))`` with an independent Bernoulli mask forcing zeros. Every series draws
from its own random substream, keyed by (seed, series index).
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError
from .ingest import Calendar, Prices, SalesPanel, make_calendar

STATE_NAMES = ("CA", "TX", "WI")
CATEGORY_NAMES = ("FOODS", "HOUSEHOLD", "HOBBIES")
START = dt.date(2011, 1, 29)
HOLIDAYS = {(12, 25): "Christmas", (1, 1): "NewYear", (7, 4): "IndependenceDay",
            (10, 31): "Halloween", (2, 14): "ValentinesDay"}


@dataclass(frozen=True)
class Archetype:
    kind: str  # "trend" | "seasonal"
    base: float
    slope: float
    amp: float
    spike: float = 0.0
    zero_inflation: float = 0.0
    noise: float = 0.0


@dataclass
class SynthSpec:
    n_items: int = 10
    n_stores: int = 2
    n_states: int = 1
    n_categories: int = 2
    depts_per_category: int = 2
    days: int = 365
    seed: int = 0
    trend_fraction: float = 0.5
    zero_inflation: float = 0.0
    # (lo, hi): per-series masking rate falling from hi on the smallest base to lo on the
    # largest, so slow movers are the intermittent ones; overrides zero_inflation
    zero_inflation_range: Optional[tuple] = None
    noise: float = 0.5
    spike: float = 0.0
    base_range: tuple = (2.0, 20.0)
    trend_total_growth: float = 1.5  # trend archetypes grow by this multiple of base over D
    seasonal_amp: float = 0.8  # seasonal amplitude as a fraction of base
    archetypes: Optional[Sequence[Archetype]] = None

    @property
    def n_series(self) -> int:
        return self.n_items * self.n_stores

    def validate(self) -> "SynthSpec":
        for name in ("n_items", "n_stores", "n_states", "n_categories", "depts_per_category"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", key=f"synth.{name}")
        if self.n_states > self.n_stores:
            raise ConfigError("need at least one store per state", key="synth.n_states")
        if self.days < 28:
            raise ConfigError("days must be >= 28", key="synth.days")
        if not 0 <= self.zero_inflation < 1:
            raise ConfigError("zero_inflation must lie in [0, 1)", key="synth.zero_inflation")
        if self.zero_inflation_range is not None:
            lo, hi = self.zero_inflation_range
            if not 0 <= lo <= hi < 1:
                raise ConfigError("zero_inflation_range needs 0 <= lo <= hi < 1",
                                  key="synth.zero_inflation_range")
        if not 0 < self.base_range[0] <= self.base_range[1]:
            raise ConfigError("base_range needs 0 < lo <= hi", key="synth.base_range")
        if self.archetypes is not None and len(self.archetypes) != self.n_series:
            raise ConfigError(f"need {self.n_series} archetypes, got {len(self.archetypes)}",
                              key="synth.archetypes")
        return self


@dataclass
class SynthData:
    panel: SalesPanel
    calendar: Calendar
    prices: Prices
    labels: dict = field(default_factory=dict)  # series id -> "trend" | "seasonal"
    archetypes: list = field(default_factory=list)


def _names(prefixes: Sequence[str], n: int, fmt: str) -> list[str]:
    return [prefixes[i] if i < len(prefixes) else fmt.format(i + 1) for i in range(n)]


def synth_calendar(days: int, states: Sequence[str]) -> Calendar:
    events = {}
    for i in range(days):
        d = START + dt.timedelta(days=i)
        label = HOLIDAYS.get((d.month, d.day))
        if label:
            events[i + 1] = label
    dom = np.array([(START + dt.timedelta(days=i)).day for i in range(days)])
    snap = {s: ((dom + k) % 3 == 0).astype(np.int8) for k, s in enumerate(states)}
    return make_calendar(START, days, events, snap)


def _masking_rate(base: float, spec: SynthSpec) -> float:
    if spec.zero_inflation_range is None:
        return spec.zero_inflation
    lo, hi = spec.zero_inflation_range
    b0, b1 = np.log(spec.base_range)
    u = 0.0 if b1 == b0 else (np.log(base) - b0) / (b1 - b0)
    return float(hi - (hi - lo) * u)


def draw_archetype(rng: np.random.Generator, spec: SynthSpec) -> Archetype:
    base = float(np.exp(rng.uniform(*np.log(spec.base_range))))
    zi = _masking_rate(base, spec)
    if rng.random() < spec.trend_fraction:
        slope = spec.trend_total_growth * base / spec.days * rng.uniform(0.7, 1.3)
        return Archetype("trend", base, slope, 0.0, spec.spike, zi, spec.noise * base)
    amp = spec.seasonal_amp * base * rng.uniform(0.8, 1.0)
    return Archetype("seasonal", base, 0.0, amp, spec.spike, zi, spec.noise * base)


def series_values(a: Archetype, days: int, holiday_mask: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    t = np.arange(1, days + 1, dtype=float)
    y = a.base + a.slope * t + a.amp * np.sin(2 * np.pi * t / 7) + a.spike * holiday_mask
    if a.noise > 0:
        y = y + rng.normal(0.0, a.noise, days)
    y = np.round(np.maximum(0.0, y))
    if a.zero_inflation > 0:
        y[rng.random(days) < a.zero_inflation] = 0.0
    return y.astype(np.int64)


def generate(spec: SynthSpec) -> SynthData:
    spec.validate()
    states = _names(STATE_NAMES, spec.n_states, "S{}")
    cats = _names(CATEGORY_NAMES, spec.n_categories, "CAT{}")
    stores = [f"{states[s % spec.n_states]}_{s // spec.n_states + 1}"
              for s in range(spec.n_stores)]
    store_state = {st: states[s % spec.n_states] for s, st in enumerate(stores)}
    items, item_dept, item_cat = [], {}, {}
    for i in range(spec.n_items):
        cat = cats[i % spec.n_categories]
        dept = f"{cat}_{(i // spec.n_categories) % spec.depts_per_category + 1}"
        item = f"{dept}_{i + 1:03d}"
        items.append(item)
        item_dept[item], item_cat[item] = dept, cat

    calendar = synth_calendar(spec.days, states)
    hol = calendar.event_flags().astype(float)
    ids, rows, labels, archetypes = [], [], {}, []
    meta = {k: [] for k in ("item_id", "dept_id", "cat_id", "store_id", "state_id")}
    k = 0
    for item in items:
        for store in stores:
            rng = np.random.default_rng([spec.seed, k])
            a = spec.archetypes[k] if spec.archetypes is not None else draw_archetype(rng, spec)
            sid = f"{item}_{store}_evaluation"
            ids.append(sid)
            rows.append(series_values(a, spec.days, hol, rng))
            labels[sid] = a.kind
            archetypes.append(a)
            meta["item_id"].append(item)
            meta["dept_id"].append(item_dept[item])
            meta["cat_id"].append(item_cat[item])
            meta["store_id"].append(store)
            meta["state_id"].append(store_state[store])
            k += 1

    weeks = np.unique(calendar.wm_yr_wk)
    price_rows = []
    for i, item in enumerate(items):
        price = round(1.0 + (i * 37 % 90) / 10.0, 2)
        for store in stores:
            for wk in weeks:
                price_rows.append((store, item, int(wk), price))
    prices = Prices(pd.DataFrame(price_rows, columns=["store_id", "item_id", "wm_yr_wk",
                                                      "sell_price"]))
    panel = SalesPanel(
        ids=np.array(ids, dtype=object),
        **{f"{k}s": np.array(v, dtype=object) for k, v in meta.items()},
        values=np.vstack(rows), calendar=calendar, prices=prices,
    )
    return SynthData(panel, calendar, prices, labels, archetypes)


def write(data: SynthData, directory) -> dict:
    """Write sales/calendar/prices/labels CSVs in the ingest formats; returns the paths."""
    import pathlib
    d = pathlib.Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {name: d / f"{name}.csv" for name in ("sales", "calendar", "prices", "labels")}
    data.panel.to_csv(paths["sales"])
    data.calendar.to_csv(paths["calendar"])
    data.prices.table.to_csv(paths["prices"], index=False, lineterminator="\n")
    pd.DataFrame({"series_id": list(data.labels), "archetype": list(data.labels.values())}) \
        .to_csv(paths["labels"], index=False, lineterminator="\n")
    return paths
