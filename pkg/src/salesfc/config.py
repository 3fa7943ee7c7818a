"""Sectioned key-value run configuration (INI syntax) with typed coercion.

Schema version 1. Sections and keys mirror the module dataclasses::

    [meta]       version
    [data]       sales, calendar, prices
    [run]        seed
    [grouping]   group_by (comma list, or "all"), ts_split, horizon, min_group_size,
                 normalize, train_end
    [features]   lags, windows, history, stride, horizon_mode
    [decompose]  period, score_level
    [gbm]        every GBMParams field
    [trend]      every TrendConfig field except holidays
    [evaluate]   weighting (revenue | units)

Unknown sections or keys are rejected. Overrides use ``section.key=value``.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import ConfigError
from .gbm import GBMParams
from .pipeline import DecomposeConfig, FeatureConfig, GroupingConfig
from .trend_model import TrendConfig

SCHEMA_VERSION = 1


@dataclass
class DataConfig:
    sales: str = ""
    calendar: str = ""
    prices: str = ""


@dataclass
class RunSection:
    seed: int = 0


@dataclass
class GroupingSection:
    group_by: tuple = ("store",)
    ts_split: bool = True
    horizon: int = 28
    min_group_size: int = 5
    normalize: str = "joint"
    train_end: Optional[int] = None


@dataclass
class EvaluateConfig:
    weighting: str = "revenue"


@dataclass
class TrendSection:
    n_changepoints: int = 10
    changepoint_range: float = 0.8
    weekly_order: int = 3
    yearly_order: int = 5
    yearly_min_days: int = 400
    ridge_lambda: float = 1.0


SECTIONS = {
    "data": DataConfig, "run": RunSection, "grouping": GroupingSection,
    "features": FeatureConfig, "decompose": DecomposeConfig, "gbm": GBMParams,
    "trend": TrendSection, "evaluate": EvaluateConfig,
}


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    run: RunSection = field(default_factory=RunSection)
    grouping: GroupingSection = field(default_factory=GroupingSection)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    decompose: DecomposeConfig = field(default_factory=DecomposeConfig)
    gbm: GBMParams = field(default_factory=GBMParams)
    trend: TrendSection = field(default_factory=TrendSection)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)

    def as_dict(self) -> dict:
        return {name: _plain(dataclasses.asdict(getattr(self, name))) for name in SECTIONS}

    def config_hash(self) -> str:
        """Hash of the resolved config; data paths are included, thread count is not."""
        blob = json.dumps({"version": SCHEMA_VERSION, **self.as_dict()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def grouping_config(self) -> GroupingConfig:
        g = self.grouping
        cfg = GroupingConfig(
            group_by=tuple(g.group_by), ts_split=g.ts_split, horizon=g.horizon,
            min_group_size=g.min_group_size, normalize=g.normalize, train_end=g.train_end,
            seed=self.run.seed, features=self.features, decompose=self.decompose,
            gbm=dataclasses.replace(self.gbm, seed=self.run.seed),
            trend=TrendConfig(**dataclasses.asdict(self.trend)),
        )
        return cfg.validate()

    def to_ini(self) -> str:
        lines = ["[meta]", f"version = {SCHEMA_VERSION}", ""]
        for name, section in self.as_dict().items():
            lines.append(f"[{name}]")
            for key, value in section.items():
                lines.append(f"{key} = {_format(value)}")
            lines.append("")
        return "\n".join(lines)

    def validate(self) -> "RunConfig":
        if self.evaluate.weighting not in ("revenue", "units"):
            raise ConfigError("weighting must be 'revenue' or 'units'", key="evaluate.weighting")
        self.grouping_config()
        return self


def _plain(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value) if value else "all"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _coerce(value: str, default, key: str, name: str):
    v = value.strip()
    try:
        if isinstance(default, bool):
            low = v.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(v)
        if isinstance(default, tuple):
            if v.lower() in ("", "all", "none"):
                return ()
            parts = [p.strip() for p in v.split(",") if p.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(p) for p in parts)
            return tuple(parts)
        if default is None:  # optional int
            return None if v == "" else int(v)
        if isinstance(default, int):
            return int(v)
        if isinstance(default, float):
            return float(v)
        return v
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} for {key}", key=key) from None


def _set(cfg: RunConfig, section: str, key: str, value: str) -> None:
    path = f"{section}.{key}"
    if section not in SECTIONS:
        raise ConfigError(f"unknown config section {section!r}", key=path)
    obj = getattr(cfg, section)
    names = {f.name: f for f in fields(obj)}
    if key not in names:
        raise ConfigError(f"unknown config key {path!r}", key=path)
    setattr(obj, key, _coerce(value, getattr(type(obj)(), key), path, key))


def parse_config(text: str = "", overrides=()) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", key="") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section == "meta":
            for key, value in parser.items(section):
                if key != "version":
                    raise ConfigError(f"unknown config key meta.{key}", key=f"meta.{key}")
                if value.strip() != str(SCHEMA_VERSION):
                    raise ConfigError(f"unsupported config version {value}", key="meta.version")
            continue
        for key, value in parser.items(section):
            _set(cfg, section, key, value)
    for item in overrides:
        path, sep, value = item.partition("=")
        section, dot, key = path.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value", key=path)
        _set(cfg, section, key, value)
    return cfg.validate()


def load_config(path: Optional[str] = None, overrides=()) -> RunConfig:
    text = ""
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}", key="") from None
    return parse_config(text, overrides)
