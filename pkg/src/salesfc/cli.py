"""Command-line driver: ``salesfc <command> [options]``.

Every command resolves a :class:`~salesfc.config.RunConfig` (config file, then
``--set section.key=value`` overrides and shortcut flags) and writes under
``<out>/<config hash>/{models,forecasts,reports,plotdata,provenance}``.
Failures print one JSON line on stderr and exit with 2 (config) or 3 (data).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import pathlib
import sys
import traceback
from typing import Optional

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig, load_config
from .decompose import decompose, scores_to_csv, strength_scores
from .errors import ConfigError, DataValueError, LengthError, SalesfcError
from .evaluate import wrmsse
from .gbm import BoostedModel
from .ingest import SalesPanel, build_hierarchy, load_panel
from .pipeline import ForecastSet, run_pipeline
from .synth import SynthSpec, generate, write

SUBDIRS = ("models", "forecasts", "reports", "plotdata", "provenance")
FIGURES = ("totals", "store-trends", "sales-histogram")
HISTOGRAM_CAP = 20

log = logging.getLogger("salesfc")


# ---------------------------------------------------------------- helpers

def _run_dir(args, cfg: RunConfig) -> pathlib.Path:
    root = pathlib.Path(args.out) / cfg.config_hash()
    for sub in SUBDIRS:
        (root / sub).mkdir(parents=True, exist_ok=True)
    (root / "config.ini").write_text(cfg.to_ini())
    return root


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _resolve(args) -> RunConfig:
    overrides = list(args.set or [])
    for flag, key in (("sales", "data.sales"), ("calendar", "data.calendar"),
                      ("prices", "data.prices")):
        value = getattr(args, flag, None)
        if value:
            overrides.append(f"{key}={os.path.abspath(value)}")
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    for flag in ("train_end", "horizon"):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"grouping.{flag}={value}")
    return load_config(args.config, overrides)


def _panel(cfg: RunConfig) -> SalesPanel:
    if not cfg.data.sales:
        raise ConfigError("no sales file given (data.sales or --sales)", key="data.sales")
    return load_panel(cfg.data.sales, cfg.data.calendar or None, cfg.data.prices or None)


def _provenance(cfg: RunConfig, command: str, extra: Optional[dict] = None) -> dict:
    doc = {
        "command": command,
        "config": cfg.as_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.run.seed,
        "versions": {"salesfc": __version__, "numpy": np.__version__, "pandas": pd.__version__},
    }
    doc.update(extra or {})
    return doc


def _model_name(group_id: str, sub: str, k: int) -> str:
    return f"{group_id}__{sub}__{k:02d}.gbm"


def _save_models(root: pathlib.Path, models: dict) -> dict:
    index = {}
    for (gid, sub), mods in sorted(models.items()):
        names = []
        for k, m in enumerate(mods):
            name = _model_name(gid, sub, k)
            m.save(root / "models" / name)
            names.append(name)
        index[f"{gid}|{sub}"] = names
    _write_json(root / "models" / "index.json", index)
    return index


def _load_models(directory: pathlib.Path) -> dict:
    index_path = directory / "index.json"
    if not index_path.exists():
        raise DataValueError(f"no model index at {index_path}; run 'train' first")
    with open(index_path) as fh:
        index = json.load(fh)
    out = {}
    for key, names in index.items():
        gid, _, sub = key.partition("|")
        out[(gid, sub)] = [BoostedModel.load(directory / n) for n in names]
    return out


def _write_forecasts(root: pathlib.Path, fs: ForecastSet, cfg: RunConfig, command: str) -> None:
    fs.to_csv(root / "forecasts" / "forecast.csv")
    fs.totals_to_csv(root / "forecasts" / "totals.csv")
    _write_json(root / "provenance" / f"{command}.json",
                _provenance(cfg, command, fs.provenance()))


def _evaluate(root: pathlib.Path, cfg: RunConfig, panel: SalesPanel, forecast: dict,
              train_end: int, horizon: int):
    if panel.n_days < train_end + horizon:
        raise LengthError(f"truth covers {panel.n_days} days; evaluation needs "
                          f"{train_end + horizon}")
    hier = build_hierarchy(panel.head_days(train_end))
    prices = panel.daily_prices() if cfg.evaluate.weighting == "revenue" else None
    actual = panel.values[:, train_end:train_end + horizon]
    report = wrmsse(hier, actual, forecast, train_end, prices=prices)
    report.to_csv(root / "reports" / "metrics.csv")
    report.to_json(root / "reports" / "metrics.json")
    print(report.summary())
    return report


def _read_forecast(path) -> tuple[dict, int, int]:
    df = pd.read_csv(path)
    missing = {"series_id", "day", "allocated_forecast"} - set(df.columns)
    if missing:
        raise DataValueError(f"forecast file {path} lacks columns {sorted(missing)}")
    days = np.sort(df["day"].unique())
    if len(days) == 0 or not np.array_equal(days, np.arange(days[0], days[0] + len(days))):
        raise DataValueError(f"forecast days in {path} must be consecutive")
    wide = df.pivot(index="series_id", columns="day", values="allocated_forecast")
    if wide.isna().any().any():
        raise DataValueError(f"forecast file {path} has gaps")
    vectors = {str(sid): wide.loc[sid].to_numpy(float) for sid in wide.index}
    return vectors, int(days[0]) - 1, len(days)


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    lo_hi = tuple(float(v) for v in args.zero_inflation_range.split(",")) \
        if args.zero_inflation_range else None
    spec = SynthSpec(
        n_items=args.items, n_stores=args.stores, n_states=args.states,
        n_categories=args.categories, days=args.days, seed=args.seed or 0,
        trend_fraction=args.trend_fraction, zero_inflation=args.zero_inflation,
        zero_inflation_range=lo_hi, noise=args.noise, spike=args.spike,
        base_range=tuple(float(v) for v in args.base_range.split(",")),
        seasonal_amp=args.seasonal_amp,
    )
    target = args.dir or os.path.join(args.out, "data")
    paths = write(generate(spec), target)
    for name, p in paths.items():
        print(f"{name}={p}")
    return 0


def cmd_decompose(args) -> int:
    cfg = _resolve(args)
    panel = _panel(cfg)
    root = _run_dir(args, cfg)
    T = cfg.grouping.train_end or panel.n_days
    holidays = panel.calendar.holidays(T) if panel.calendar is not None else {}
    ids = [str(i) for i in panel.ids]
    chosen = args.series or ids
    unknown = [s for s in chosen if s not in ids]
    if unknown:
        raise DataValueError(f"unknown series {unknown[:10]}")
    (root / "reports" / "components").mkdir(exist_ok=True)
    scores = {}
    for sid in chosen:
        c = decompose(panel.values[ids.index(sid), :T], cfg.decompose.period, holidays)
        scores[sid] = strength_scores(c)
        if args.series:
            c.to_csv(root / "reports" / "components" / f"{sid}.csv")
    scores_to_csv(root / "reports" / "scores.csv", scores)
    print(root / "reports" / "scores.csv")
    return 0


def _pipeline(args, cfg: RunConfig, models=None):
    panel = _panel(cfg)
    gc = cfg.grouping_config()
    fs = run_pipeline(panel, config=gc, threads=args.threads, config_hash=cfg.config_hash(),
                      models=models)
    return panel, fs


def cmd_train(args) -> int:
    cfg = _resolve(args)
    root = _run_dir(args, cfg)
    _, fs = _pipeline(args, cfg)
    index = _save_models(root, fs.models)
    _write_json(root / "provenance" / "train.json",
                _provenance(cfg, "train", {"models": index, **fs.provenance()}))
    print(root / "models")
    return 0


def cmd_forecast(args) -> int:
    cfg = _resolve(args)
    root = _run_dir(args, cfg)
    models = _load_models(pathlib.Path(args.models) if args.models else root / "models")
    _, fs = _pipeline(args, cfg, models)
    _write_forecasts(root, fs, cfg, "forecast")
    print(root / "forecasts" / "forecast.csv")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    root = _run_dir(args, cfg)
    path = args.forecasts or root / "forecasts" / "forecast.csv"
    forecast, T, h = _read_forecast(path)
    _evaluate(root, cfg, _panel(cfg), forecast, T, h)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _resolve(args)
    root = _run_dir(args, cfg)
    panel, fs = _pipeline(args, cfg)
    index = _save_models(root, fs.models)
    _write_forecasts(root, fs, cfg, "pipeline")
    _write_json(root / "provenance" / "models.json", index)
    if panel.n_days >= fs.train_end + len(fs.days):
        forecast = {str(s): fs.allocated[i] for i, s in enumerate(fs.series_ids)}
        _evaluate(root, cfg, panel, forecast, fs.train_end, len(fs.days))
    else:
        print(f"forecast written; no truth after day {panel.n_days} to evaluate")
    return 0


def plot_totals(panel: SalesPanel) -> pd.DataFrame:
    df = pd.DataFrame({"day": np.arange(1, panel.n_days + 1),
                       "total": panel.values.sum(axis=0)})
    if panel.calendar is not None:
        df.insert(1, "date", pd.Series(panel.calendar.dates[:panel.n_days]).astype(str))
    return df


def plot_store_trends(panel: SalesPanel, period: int = 7) -> pd.DataFrame:
    holidays = panel.calendar.holidays(panel.n_days) if panel.calendar is not None else {}
    frames = []
    for store in sorted(set(panel.store_ids)):
        y = panel.values[panel.store_ids == store].sum(axis=0).astype(float)
        c = decompose(y, period, holidays)
        frames.append(pd.DataFrame({"store_id": store, "day": np.arange(1, len(y) + 1),
                                    "sales": y, "trend": c.trend}))
    return pd.concat(frames, ignore_index=True)


def plot_sales_histogram(panel: SalesPanel, cap: int = HISTOGRAM_CAP) -> pd.DataFrame:
    v = np.minimum(panel.values.reshape(-1), cap)
    counts = np.bincount(v, minlength=cap + 1)
    labels = [str(i) for i in range(cap)] + [f"{cap}+"]
    return pd.DataFrame({"sales": labels, "count": counts, "share": counts / v.size})


def cmd_plotdata(args) -> int:
    cfg = _resolve(args)
    panel = _panel(cfg)
    root = _run_dir(args, cfg)
    figures = FIGURES if args.figure == "all" else (args.figure,)
    for fig in figures:
        df = {"totals": plot_totals, "store-trends": plot_store_trends,
              "sales-histogram": plot_sales_histogram}[fig](panel)
        path = root / "plotdata" / f"{fig}.csv"
        df.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
        print(path)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default="runs", help="root of run directories")
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--sales")
    data.add_argument("--calendar")
    data.add_argument("--prices")
    data.add_argument("--train-end", type=int, dest="train_end")
    data.add_argument("--horizon", type=int)

    p = argparse.ArgumentParser(prog="salesfc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("--dir", help="output directory (default <out>/data)")
    s.add_argument("--items", type=int, default=10)
    s.add_argument("--stores", type=int, default=2)
    s.add_argument("--states", type=int, default=1)
    s.add_argument("--categories", type=int, default=2)
    s.add_argument("--days", type=int, default=365)
    s.add_argument("--trend-fraction", type=float, default=0.5)
    s.add_argument("--zero-inflation", type=float, default=0.0)
    s.add_argument("--zero-inflation-range", help="lo,hi masking rate by series scale")
    s.add_argument("--noise", type=float, default=0.5)
    s.add_argument("--spike", type=float, default=0.0)
    s.add_argument("--base-range", default="2,20")
    s.add_argument("--seasonal-amp", type=float, default=0.8)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("decompose", parents=[common, data], help="components and scores")
    s.add_argument("--series", action="append", help="series id (repeatable; default all)")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("train", parents=[common, data], help="train GBM models per group")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("forecast", parents=[common, data], help="forecast with trained models")
    s.add_argument("--models", help="model directory (default <run>/models)")
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("evaluate", parents=[common, data], help="WRMSSE of a forecast file")
    s.add_argument("--forecasts", help="forecast CSV (default <run>/forecasts/forecast.csv)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("pipeline", parents=[common, data], help="train, forecast, evaluate")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("plotdata", parents=[common, data], help="tidy CSVs for figures")
    s.add_argument("--figure", choices=FIGURES + ("all",), default="all")
    s.set_defaults(func=cmd_plotdata)
    return p


def _error_line(exc: BaseException) -> dict:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        doc["key"] = exc.key
    frames = [f for f in traceback.extract_tb(exc.__traceback__) if "salesfc" in f.filename]
    if frames:
        doc["module"] = pathlib.Path(frames[-1].filename).stem
    for attr in ("row", "column", "missing"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    return doc


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print(json.dumps({"error": "ConfigError", "message": "--threads must be >= 1",
                          "key": "threads"}), file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except SalesfcError as exc:
        print(json.dumps(_error_line(exc), default=str), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
