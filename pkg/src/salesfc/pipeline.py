"""End-to-end hybrid forecast: grouping, trend/seasonality split, GBM weights,
trend-model group totals and proportional allocation."""
from __future__ import annotations

import csv
import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .decompose import Group, StrengthScores, decompose, strength_scores
from .errors import ConfigError, DomainError, NumericalError, SalesfcError
from .features import (
    DEFAULT_LAGS,
    DEFAULT_WINDOWS,
    FeatureTable,
    panel_features,
    prediction_matrix,
    stacked_training_matrix,
    training_matrix,
)
from .gbm import GBMParams, train
from .ingest import Calendar, Prices, SalesPanel
from .trend_model import TrendConfig, fit_trend_model, forecast_totals

log = logging.getLogger(__name__)

GROUP_FIELDS = {"store": "store_id", "state": "state_id", "category": "cat_id",
                "department": "dept_id"}
ALL_SERIES = "all"
CONSERVATION_RTOL = 1e-9


@dataclass
class FeatureConfig:
    lags: tuple = DEFAULT_LAGS
    windows: tuple = DEFAULT_WINDOWS
    history: int = 0  # most recent origin days used for training; 0 = all
    stride: int = 1
    horizon_mode: str = "feature"  # "feature" (one model) | "separate" (one per horizon)


@dataclass
class DecomposeConfig:
    period: int = 7
    score_level: str = "bottom"  # "bottom" | "item"


@dataclass
class GroupingConfig:
    group_by: tuple = ("store",)
    ts_split: bool = True
    horizon: int = 28
    min_group_size: int = 5
    normalize: str = "joint"  # "joint" | "subgroup"
    train_end: Optional[int] = None
    seed: int = 0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    decompose: DecomposeConfig = field(default_factory=DecomposeConfig)
    gbm: GBMParams = field(default_factory=GBMParams)
    trend: TrendConfig = field(default_factory=TrendConfig)

    @property
    def loss(self) -> str:
        return self.gbm.loss

    def validate(self) -> "GroupingConfig":
        unknown = set(self.group_by) - set(GROUP_FIELDS)
        if unknown:
            raise ConfigError(f"unknown group_by fields {sorted(unknown)}; "
                              f"choose from {sorted(GROUP_FIELDS)} or leave empty for all-in-one",
                              key="grouping.group_by")
        if not 1 <= self.horizon:
            raise ConfigError("horizon must be >= 1", key="grouping.horizon")
        if self.normalize not in ("joint", "subgroup"):
            raise ConfigError("normalize must be 'joint' or 'subgroup'", key="grouping.normalize")
        if self.features.horizon_mode not in ("feature", "separate"):
            raise ConfigError("horizon_mode must be 'feature' or 'separate'",
                              key="features.horizon_mode")
        if self.decompose.score_level not in ("bottom", "item"):
            raise ConfigError("score_level must be 'bottom' or 'item'",
                              key="decompose.score_level")
        self.gbm.validate()
        return self


def allocate(weights, total: float) -> np.ndarray:
    """Split ``total`` proportionally to ``weights``; uniformly if they sum to zero."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise DomainError("cannot allocate over an empty group")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("allocation weights must be finite and non-negative")
    if total < 0 or not np.isfinite(total):
        raise DomainError(f"group total must be finite and non-negative, got {total}")
    mass = w.sum()
    if mass == 0:
        return np.full(w.size, total / w.size)
    return w / mass * total


@dataclass
class GroupPlan:
    group_id: str
    members: np.ndarray  # panel rows
    subgroups: dict  # label -> panel rows
    scores: dict = field(default_factory=dict)  # series id -> StrengthScores
    merges: list = field(default_factory=list)


@dataclass
class ForecastSet:
    series_ids: np.ndarray
    days: np.ndarray
    raw: np.ndarray  # (n_series, horizon) GBM weights
    allocated: np.ndarray
    totals: dict  # group id -> G vector
    plans: list
    config_hash: str = ""
    seed: int = 0
    train_end: int = 0
    models: dict = field(default_factory=dict)

    @property
    def groups(self) -> dict:
        return {p.group_id: [str(self.series_ids[i]) for i in p.members] for p in self.plans}

    @property
    def scores(self) -> dict:
        out = {}
        for p in self.plans:
            out.update(p.scores)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series_id", "day", "raw_weight", "allocated_forecast"])
            for i, sid in enumerate(self.series_ids):
                for j, d in enumerate(self.days):
                    w.writerow([sid, int(d), repr(float(self.raw[i, j])),
                                repr(float(self.allocated[i, j]))])

    def totals_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group_id", "day", "G"])
            for gid in sorted(self.totals):
                for d, g in zip(self.days, self.totals[gid]):
                    w.writerow([gid, int(d), repr(float(g))])

    def provenance(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "train_end": int(self.train_end),
            "forecast_days": [int(self.days[0]), int(self.days[-1])],
            "groups": {p.group_id: {
                "series": [str(self.series_ids[i]) for i in p.members],
                "subgroups": {k: [str(self.series_ids[i]) for i in v]
                              for k, v in p.subgroups.items()},
                "merges": p.merges,
            } for p in self.plans},
            "scores": {sid: {"trend_score": s.trend_score,
                             "seasonality_score": s.seasonality_score,
                             "group": s.group.value} for sid, s in self.scores.items()},
            "totals": {gid: [float(v) for v in g] for gid, g in sorted(self.totals.items())},
        }


def group_seed(seed: int, group_id: str, sub: str) -> int:
    return (int(seed) * 1_000_003 + zlib.crc32(f"{group_id}|{sub}".encode())) % (2 ** 31)


def _group_rows(panel: SalesPanel, group_by) -> dict:
    if not group_by:
        return {ALL_SERIES: np.arange(panel.n_series)}
    fields = [GROUP_FIELDS[g] for g in group_by]
    keys = list(zip(*[panel.attribute(f) for f in fields]))
    out = {}
    for combo in sorted(set(keys)):
        gid = ",".join(f"{g}={v}" for g, v in zip(group_by, combo))
        out[gid] = np.array([i for i, k in enumerate(keys) if k == combo])
    return out


def score_series(panel: SalesPanel, rows: np.ndarray, train_end: int,
                 config: GroupingConfig) -> dict:
    """Strength scores for each series in ``rows`` computed on days ``1..train_end``."""
    cal = panel.calendar
    holidays = cal.holidays(train_end) if cal is not None else {}
    period = config.decompose.period
    Y = panel.values[rows, :train_end].astype(float)
    ids = [str(panel.ids[i]) for i in rows]
    if config.decompose.score_level == "item":
        items = panel.item_ids[rows]
        out = {}
        for item in sorted(set(items)):
            sel = items == item
            s = strength_scores(decompose(Y[sel].sum(axis=0), period, holidays))
            out.update({ids[i]: s for i in np.flatnonzero(sel)})
        return {sid: out[sid] for sid in ids}
    return {sid: strength_scores(decompose(y, period, holidays)) for sid, y in zip(ids, Y)}


def plan_group(panel: SalesPanel, group_id: str, rows: np.ndarray, train_end: int,
               config: GroupingConfig) -> GroupPlan:
    if not config.ts_split:
        return GroupPlan(group_id, rows, {ALL_SERIES: rows})
    scores = score_series(panel, rows, train_end, config)
    labels = [scores[str(panel.ids[i])].group for i in rows]
    subs = {g.value: rows[[lab is g for lab in labels]] for g in (Group.TREND, Group.SEASONALITY)}
    merges = []
    small = sorted(subs, key=lambda k: (len(subs[k]), k))
    lo, hi = small[0], small[1]
    if len(subs[lo]) < config.min_group_size:
        if len(subs[lo]):
            msg = (f"{group_id}: subgroup {lo} has {len(subs[lo])} series "
                   f"(< {config.min_group_size}); merged into {hi}")
            log.info(msg)
            merges.append(msg)
        subs[hi] = np.sort(np.concatenate([subs[hi], subs[lo]]))
        del subs[lo]
    subs = {k: v for k, v in subs.items() if len(v)}
    return GroupPlan(group_id, rows, subs, scores, merges)


def plan_groups(panel: SalesPanel, config: GroupingConfig, train_end: int) -> list:
    return [plan_group(panel, gid, rows, train_end, config)
            for gid, rows in _group_rows(panel, config.group_by).items()]


def _subtable(table: FeatureTable, rows: np.ndarray, plan: GroupPlan, sub: str,
              config: GroupingConfig) -> FeatureTable:
    t = table.subset(rows)
    if config.ts_split:
        t = t.with_constant("ts_group", 0.0 if sub == Group.TREND.value else 1.0)
    return t


def _min_day(config: GroupingConfig, train_end: int) -> Optional[int]:
    return max(1, train_end - config.features.history + 1) if config.features.history else None


def train_subgroup(table: FeatureTable, train_end: int, config: GroupingConfig,
                   seed: int) -> list:
    """One model (horizon as a feature) or one model per horizon."""
    H = config.horizon
    params = replace(config.gbm, seed=seed)
    lo = _min_day(config, train_end)
    if config.features.horizon_mode == "feature":
        X, y = stacked_training_matrix(table, train_end, range(1, H + 1), lo,
                                       config.features.stride)
        return [train(X, y, params, table.model_names + ["horizon"])]
    models = []
    for h in range(1, H + 1):
        X, y = training_matrix(table, train_end, h, lo)
        models.append(train(X[::config.features.stride], y[::config.features.stride],
                            params, table.model_names))
    return models


def predict_subgroup(models: list, table: FeatureTable, origin: int,
                     config: GroupingConfig) -> np.ndarray:
    H = config.horizon
    if config.features.horizon_mode == "feature":
        X = prediction_matrix(table, origin, range(1, H + 1))
        p = models[0].predict(X).reshape(table.n_series, H)
    else:
        p = np.column_stack([m.predict(prediction_matrix(table, origin, h=h))
                             for h, m in enumerate(models, start=1)])
    # squared-error models can go negative; weights must not
    return np.maximum(p, 0.0)


def train_group(plan: GroupPlan, table: FeatureTable, train_end: int,
                config: GroupingConfig) -> dict:
    models = {}
    for sub, rows in plan.subgroups.items():
        st = _subtable(table, rows, plan, sub, config)
        try:
            models[sub] = train_subgroup(st, train_end, config,
                                         group_seed(config.seed, plan.group_id, sub))
        except SalesfcError as exc:
            raise type(exc)(f"group {plan.group_id}/{sub}: {exc}") from exc
    return models


def _future_holidays(calendar: Optional[Calendar], start: int, horizon: int) -> dict:
    if calendar is None:
        return {}
    return {d: v for d, v in calendar.holidays().items() if start <= d < start + horizon}


def group_totals(panel: SalesPanel, rows: np.ndarray, train_end: int,
                 config: GroupingConfig) -> np.ndarray:
    cal = panel.calendar
    holidays = cal.holidays(train_end) if cal is not None else {}
    tcfg = replace(config.trend, holidays=holidays)
    agg = panel.values[rows, :train_end].sum(axis=0).astype(float)
    fit = fit_trend_model(agg, tcfg)
    return forecast_totals(fit, train_end + 1, config.horizon,
                           holidays=_future_holidays(cal, train_end + 1, config.horizon))


def forecast_group(panel: SalesPanel, plan: GroupPlan, models: dict, table: FeatureTable,
                   train_end: int, config: GroupingConfig):
    """Raw weights, allocated forecasts (rows follow ``plan.members``) and totals."""
    H = config.horizon
    raw = np.zeros((len(plan.members), H))
    where = {r: i for i, r in enumerate(plan.members)}
    for sub, rows in plan.subgroups.items():
        st = _subtable(table, rows, plan, sub, config)
        raw[[where[r] for r in rows]] = predict_subgroup(models[sub], st, train_end, config)
    alloc = np.zeros_like(raw)
    totals = {}
    if config.normalize == "joint":
        G = group_totals(panel, plan.members, train_end, config)
        for j in range(H):
            alloc[:, j] = allocate(raw[:, j], G[j])
        totals[plan.group_id] = G
    else:
        for sub, rows in plan.subgroups.items():
            G = group_totals(panel, rows, train_end, config)
            idx = [where[r] for r in rows]
            for j in range(H):
                alloc[idx, j] = allocate(raw[idx, j], G[j])
            totals[f"{plan.group_id}|{sub}"] = G
    return raw, alloc, totals


def _train_end(panel: SalesPanel, config: GroupingConfig) -> int:
    T = config.train_end if config.train_end is not None else panel.n_days
    if not 1 <= T <= panel.n_days:
        raise ConfigError(f"train_end {T} outside 1..{panel.n_days}", key="grouping.train_end")
    return int(T)


def build_table(panel: SalesPanel, train_end: int, config: GroupingConfig) -> FeatureTable:
    # truth after train_end is cut off so it can never reach a feature or label
    return panel_features(panel.head_days(train_end), config.features.lags,
                          config.features.windows, config.horizon)


def run_pipeline(panel: SalesPanel, calendar: Optional[Calendar] = None,
                 prices: Optional[Prices] = None, config: Optional[GroupingConfig] = None,
                 threads: int = 1, config_hash: str = "",
                 models: Optional[dict] = None) -> ForecastSet:
    """Forecast days ``train_end + 1 .. train_end + horizon`` for every bottom series.

    ``models`` maps (group id, subgroup) to trained models, as held by a
    previous :class:`ForecastSet`; when given, training is skipped.
    """
    config = (config or GroupingConfig()).validate()
    panel = panel.attach(calendar, prices)
    T = _train_end(panel, config)
    table = build_table(panel, T, config)

    def work(item):
        gid, rows = item
        plan = plan_group(panel, gid, rows, T, config)
        if models is None:
            mods = train_group(plan, table, T, config)
        else:
            missing = [sub for sub in plan.subgroups if (gid, sub) not in models]
            if missing:
                raise SalesfcError(f"group {gid}: no trained model for subgroups {missing}")
            mods = {sub: models[(gid, sub)] for sub in plan.subgroups}
        raw, alloc, totals = forecast_group(panel, plan, mods, table, T, config)
        return plan, mods, raw, alloc, totals

    items = list(_group_rows(panel, config.group_by).items())
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(it) for it in items]

    n, H = panel.n_series, config.horizon
    raw = np.zeros((n, H))
    alloc = np.zeros((n, H))
    totals, plans, trained = {}, [], {}
    for plan, mods, r, a, tot in results:
        raw[plan.members] = r
        alloc[plan.members] = a
        totals.update(tot)
        plans.append(plan)
        for sub, m in mods.items():
            trained[(plan.group_id, sub)] = m
    fs = ForecastSet(
        series_ids=np.asarray(panel.ids), days=np.arange(T + 1, T + H + 1), raw=raw,
        allocated=alloc, totals=totals, plans=plans, config_hash=config_hash,
        seed=config.seed, train_end=T, models=trained,
    )
    gap = check_conservation(fs)
    if gap > CONSERVATION_RTOL:
        raise NumericalError(f"allocated forecasts miss their group totals by {gap:.3g}")
    return fs


def check_conservation(fs: ForecastSet) -> float:
    """Largest relative gap between a group's allocated sum and its total."""
    worst = 0.0
    for plan in fs.plans:
        if plan.group_id in fs.totals:
            parts = [(plan.members, fs.totals[plan.group_id])]
        else:
            parts = [(rows, fs.totals[f"{plan.group_id}|{sub}"])
                     for sub, rows in plan.subgroups.items()]
        for rows, G in parts:
            s = fs.allocated[rows].sum(axis=0)
            gap = np.abs(s - G) / np.maximum(np.abs(G), 1e-300)
            gap[G == 0] = np.abs(s[G == 0])
            worst = max(worst, float(gap.max()))
    return worst


__all__ = [
    "DecomposeConfig", "FeatureConfig", "ForecastSet", "GroupPlan", "GroupingConfig",
    "StrengthScores", "allocate", "check_conservation", "forecast_group", "plan_groups",
    "run_pipeline", "train_group",
]
