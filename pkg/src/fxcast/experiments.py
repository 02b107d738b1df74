"""Experiment configuration, grid search, the rolling backtest runner and
both ablation studies.

A run is declared by an ExperimentConfig (JSON-friendly, fingerprinted by
hash) and executed against aligned feature tables. Cells -- one per
(period, model, frequency, horizon) -- are independent tasks, so they can
be mapped over a process pool; results are merged in configuration order,
which keeps reports identical at any parallelism degree.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .data import FeatureTable, SupervisedDataset, add_lags, make_supervised
from .errors import ConfigError, MetricError
from .gru import (
    ACTIVATION_GRID,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_LOOKBACK,
    HIDDEN_UNITS_GRID,
    N_LAYERS_GRID,
    GruForecaster,
)
from .linear import ALPHA_GRID, fit_lasso, fit_ridge
from .metrics import ForecastSeries, mae, nrmse
from .trees import (
    DEFAULT_LEARNING_RATE,
    MAX_DEPTH_GRID,
    MAX_FEATURES_GRID,
    N_ESTIMATORS_GRID,
    TreeHyperparams,
    fit_extra_trees,
    fit_gbm,
)
from .windows import SUBPERIODS, DateRange, SubperiodSpec, rolling_windows, subperiod_split

logger = logging.getLogger(__name__)

HORIZONS = (1, 5, 10)

MODEL_LABELS = {
    "lgbm": "LGBM",
    "etr": "ETR",
    "xgb": "XGB",
    "ridge": "RIDGE",
    "lasso": "LASSO",
    "gru": "GRU",
}

_TREE_GRID = {
    "n_estimators": list(N_ESTIMATORS_GRID),
    "max_depth": list(MAX_DEPTH_GRID),
    "max_features": list(MAX_FEATURES_GRID),
}

DEFAULT_GRIDS: dict[str, dict[str, list]] = {
    "lgbm": _TREE_GRID,
    "etr": _TREE_GRID,
    "xgb": _TREE_GRID,
    "ridge": {"alpha": list(ALPHA_GRID)},
    "lasso": {"alpha": list(ALPHA_GRID)},
    "gru": {
        "n_layers": list(N_LAYERS_GRID),
        "hidden_units": list(HIDDEN_UNITS_GRID),
        "activation": list(ACTIVATION_GRID),
    },
}

# Extension point: tests may register extra model families. Registered
# entries are only visible in the registering process, so custom models
# require jobs=1.
_CUSTOM_FITTERS: dict[str, Callable] = {}
_CUSTOM_GRIDS: dict[str, list[dict]] = {}


def register_model_family(name: str, fit_fn: Callable, grid: list[dict] | None = None) -> None:
    """fit_fn(hp_dict, seed, config, X, y) -> fitted model with .predict."""
    _CUSTOM_FITTERS[name] = fit_fn
    _CUSTOM_GRIDS[name] = grid or [{}]


def expand_grid(grid: dict[str, list]) -> list[dict]:
    """Cross product of the grid in key order; {} yields [{}]."""
    if not grid:
        return [{}]
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass(frozen=True)
class ExperimentConfig:
    periods: tuple[str, ...] = ("All",)
    frequencies: tuple[str, ...] = ("daily",)
    horizons: tuple[int, ...] = (1,)
    models: tuple[str, ...] = ("lasso",)
    grids: dict = field(default_factory=dict)
    include_calendar: bool = False
    feature_subset: tuple[str, ...] | None = None
    target_lags: int = 0
    covariates: tuple[str, ...] = ("Oil", "Gold", "TSX")
    window_months: int = 30
    stride_months: int = 6
    train_fraction: float = 0.8
    seed: int = 0
    gbm_learning_rate: float = DEFAULT_LEARNING_RATE
    gru_epochs: int = DEFAULT_EPOCHS
    gru_lookback: int = DEFAULT_LOOKBACK
    gru_batch_size: int = DEFAULT_BATCH_SIZE
    gru_learning_rate: float = 1e-3

    def __post_init__(self):
        for p in self.periods:
            if p not in SUBPERIODS:
                raise ConfigError(f"unknown period {p!r}; expected one of {sorted(SUBPERIODS)}")
        for f in self.frequencies:
            if f not in ("daily", "weekly"):
                raise ConfigError(f"unknown frequency {f!r}")
        for h in self.horizons:
            if h not in HORIZONS:
                raise ConfigError(f"horizon must be one of {HORIZONS}, got {h}")
        for m in self.models:
            if m not in DEFAULT_GRIDS and m not in _CUSTOM_FITTERS:
                raise ConfigError(f"unknown model {m!r}; expected one of {sorted(DEFAULT_GRIDS)}")
        for model, grid in self.grids.items():
            if model not in DEFAULT_GRIDS:
                continue  # custom families carry their own grids
            domain = DEFAULT_GRIDS[model]
            for key, values in grid.items():
                if key not in domain:
                    raise ConfigError(f"model {model!r} has no hyperparameter {key!r}")
                bad = [v for v in values if v not in domain[key]]
                if bad:
                    raise ConfigError(f"{model}.{key}: values {bad} outside the search space {domain[key]}")
        if self.target_lags < 0:
            raise ConfigError("target_lags must be >= 0")
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigError("train_fraction must lie in (0, 1)")

    def grid_for(self, model: str) -> list[dict]:
        if model in _CUSTOM_FITTERS and model not in DEFAULT_GRIDS:
            return _CUSTOM_GRIDS[model]
        return expand_grid(self.grids.get(model, DEFAULT_GRIDS[model]))

    def to_dict(self) -> dict:
        return {
            "periods": list(self.periods),
            "frequencies": list(self.frequencies),
            "horizons": list(self.horizons),
            "models": list(self.models),
            "grids": self.grids,
            "include_calendar": self.include_calendar,
            "feature_subset": list(self.feature_subset) if self.feature_subset is not None else None,
            "target_lags": self.target_lags,
            "covariates": list(self.covariates),
            "window_months": self.window_months,
            "stride_months": self.stride_months,
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "gbm_learning_rate": self.gbm_learning_rate,
            "gru_epochs": self.gru_epochs,
            "gru_lookback": self.gru_lookback,
            "gru_batch_size": self.gru_batch_size,
            "gru_learning_rate": self.gru_learning_rate,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {
            "periods",
            "frequencies",
            "horizons",
            "models",
            "grids",
            "include_calendar",
            "feature_subset",
            "target_lags",
            "covariates",
            "window_months",
            "stride_months",
            "train_fraction",
            "seed",
            "gbm_learning_rate",
            "gru_epochs",
            "gru_lookback",
            "gru_batch_size",
            "gru_learning_rate",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        kwargs: dict[str, Any] = dict(doc)
        for key in ("periods", "frequencies", "models", "covariates"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        if "horizons" in kwargs:
            kwargs["horizons"] = tuple(int(h) for h in kwargs["horizons"])
        if kwargs.get("feature_subset") is not None:
            kwargs["feature_subset"] = tuple(kwargs["feature_subset"])
        return cls(**kwargs)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labels (process-independent)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def fit_model(
    name: str,
    hp: dict,
    X: np.ndarray,
    y: np.ndarray,
    config: ExperimentConfig,
    seed: int,
    feature_names=None,
):
    """Dispatch to the model family; returns an object with .predict."""
    if name in _CUSTOM_FITTERS:
        return _CUSTOM_FITTERS[name](hp, seed, config, X, y)
    if name == "ridge":
        return fit_ridge(X, y, alpha=hp["alpha"], feature_names=feature_names)
    if name == "lasso":
        return fit_lasso(X, y, alpha=hp["alpha"], feature_names=feature_names)
    if name == "etr":
        return fit_extra_trees(
            X,
            y,
            TreeHyperparams(
                n_estimators=hp["n_estimators"],
                max_depth=hp["max_depth"],
                max_features=hp["max_features"],
                seed=seed,
            ),
            feature_names=feature_names,
        )
    if name in ("lgbm", "xgb"):
        return fit_gbm(
            X,
            y,
            TreeHyperparams(
                n_estimators=hp["n_estimators"],
                max_depth=hp["max_depth"],
                max_features=hp["max_features"],
                learning_rate=config.gbm_learning_rate,
                seed=seed,
            ),
            feature_names=feature_names,
        )
    if name == "gru":
        return GruForecaster.fit(
            X,
            y,
            hidden_units=hp["hidden_units"],
            n_layers=hp["n_layers"],
            activation=hp["activation"],
            lookback=config.gru_lookback,
            epochs=config.gru_epochs,
            learning_rate=config.gru_learning_rate,
            batch_size=config.gru_batch_size,
            seed=seed,
        )
    raise ConfigError(f"unknown model {name!r}")


def grid_search(
    candidates: list[dict],
    evaluate: Callable[[dict], float],
) -> tuple[dict, float | None]:
    """Argmin of ``evaluate`` over the candidates; ties break by grid order.
    A singleton grid is returned untouched without evaluation."""
    if not candidates:
        raise ConfigError("empty hyperparameter grid")
    if len(candidates) == 1:
        return candidates[0], None
    best_hp, best_score = None, np.inf
    for hp in candidates:
        score = evaluate(hp)
        if score < best_score:
            best_hp, best_score = hp, score
    return best_hp, float(best_score)


def _min_train_rows(model: str, config: ExperimentConfig) -> int:
    if model == "gru":
        return max(4, config.gru_lookback + 1)
    return 4


@dataclass(frozen=True)
class WindowResult:
    window_index: int
    train_range: dict
    test_range: dict
    n_train: int
    n_test: int
    chosen_params: dict
    validation_nrmse: float | None
    nrmse: float | None
    mae: float | None
    fit_seconds: float
    skipped: bool = False
    reason: str = ""

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "window_index": self.window_index,
            "train_range": self.train_range,
            "test_range": self.test_range,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "chosen_params": self.chosen_params,
            "validation_nrmse": self.validation_nrmse,
            "nrmse": self.nrmse,
            "mae": self.mae,
            "skipped": self.skipped,
            "reason": self.reason,
        }
        if include_timing:
            doc["fit_seconds"] = self.fit_seconds
        return doc


@dataclass(frozen=True)
class CellResult:
    period: str
    model: str
    frequency: str
    horizon: int
    windows: tuple[WindowResult, ...]
    nrmse: float | None
    mae: float | None
    n_skipped: int

    def to_dict(self, include_timing: bool = True) -> dict:
        return {
            "period": self.period,
            "model": self.model,
            "frequency": self.frequency,
            "horizon": self.horizon,
            "nrmse": self.nrmse,
            "mae": self.mae,
            "n_skipped": self.n_skipped,
            "windows": [w.to_dict(include_timing) for w in self.windows],
        }


@dataclass(frozen=True)
class ExperimentReport:
    fingerprint: str
    config: dict
    cells: tuple[CellResult, ...]
    total_seconds: float

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "fingerprint": self.fingerprint,
            "config": self.config,
            "cells": [c.to_dict(include_timing) for c in self.cells],
        }
        if include_timing:
            doc["total_seconds"] = self.total_seconds
        return doc

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)

    def summary_rows(self) -> list[dict]:
        """Tables-shaped flat rows: one per (period, model, frequency, horizon)."""
        return [
            {
                "period": c.period,
                "model": MODEL_LABELS.get(c.model, c.model),
                "frequency": c.frequency,
                "horizon": c.horizon,
                "nrmse": c.nrmse,
                "mae": c.mae,
            }
            for c in self.cells
        ]

    def cell(self, period: str, model: str, frequency: str, horizon: int) -> CellResult:
        for c in self.cells:
            if (c.period, c.model, c.frequency, c.horizon) == (period, model, frequency, horizon):
                return c
        raise KeyError((period, model, frequency, horizon))


def build_dataset(
    table: FeatureTable,
    target: str,
    horizon: int,
    config: ExperimentConfig,
    feature_subset: tuple[str, ...] | None = "unset",
    include_calendar: bool | None = None,
) -> SupervisedDataset:
    """Supervised dataset for one cell, honouring subset/calendar/lag config."""
    subset = config.feature_subset if feature_subset == "unset" else feature_subset
    calendar = config.include_calendar if include_calendar is None else include_calendar
    ds = make_supervised(
        table,
        target=target,
        horizon=horizon,
        include_calendar=calendar,
        feature_subset=list(subset) if subset is not None else None,
    )
    if config.target_lags > 0:
        ds = add_lags(ds, target, config.target_lags)
    return ds


def _resolve_windows(ds: SupervisedDataset, period: str, config: ExperimentConfig):
    """Rolling schedule for the full period, single 80:20 split otherwise."""
    prange = SUBPERIODS[period]
    ts = [t for t in ds.timestamps if t in prange]
    if len(ts) < 2:
        return []
    if period == "All":
        schedule = rolling_windows(
            start=ts[0],
            end=ts[-1],
            window_months=config.window_months,
            stride_months=config.stride_months,
            train_fraction=config.train_fraction,
        )
        return schedule.split(ds.timestamps)
    spec = SubperiodSpec.named(period)
    train_idx, test_idx = subperiod_split(spec, ds.timestamps, config.train_fraction)
    return [(train_idx, test_idx)]


def _evaluate_window(
    model_name: str,
    config: ExperimentConfig,
    ds: SupervisedDataset,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    window_index: int,
    seed: int,
) -> WindowResult:
    t_range = {"start": ds.timestamps[train_idx[0]].isoformat(), "end": ds.timestamps[train_idx[-1]].isoformat()}
    s_range = {"start": ds.timestamps[test_idx[0]].isoformat(), "end": ds.timestamps[test_idx[-1]].isoformat()}
    n_train, n_test = int(train_idx.size), int(test_idx.size)
    if n_train < _min_train_rows(model_name, config) or n_test < 1:
        logger.warning(
            "window %d skipped for %s: %d train / %d test rows", window_index, model_name, n_train, n_test
        )
        return WindowResult(
            window_index=window_index,
            train_range=t_range,
            test_range=s_range,
            n_train=n_train,
            n_test=n_test,
            chosen_params={},
            validation_nrmse=None,
            nrmse=None,
            mae=None,
            fit_seconds=0.0,
            skipped=True,
            reason="insufficient rows",
        )
    X_train, y_train = ds.X[train_idx], ds.y[train_idx]
    X_test, y_test = ds.X[test_idx], ds.y[test_idx]
    candidates = config.grid_for(model_name)
    started = time.perf_counter()

    # Hyperparameter selection on the tail of the training window only.
    n_core = max(1, int(np.floor(config.train_fraction * n_train)))
    val_ok = n_core < n_train and n_core >= _min_train_rows(model_name, config)
    if len(candidates) > 1 and val_ok:
        X_core, y_core = X_train[:n_core], y_train[:n_core]
        X_val, y_val = X_train[n_core:], y_train[n_core:]

        def evaluate(hp: dict) -> float:
            fitted = fit_model(model_name, hp, X_core, y_core, config, seed)
            return nrmse(ForecastSeries(y=y_val, yhat=fitted.predict(X_val)))

        chosen, val_score = grid_search(candidates, evaluate)
    else:
        chosen, val_score = candidates[0], None

    model = fit_model(model_name, chosen, X_train, y_train, config, seed)
    fit_seconds = time.perf_counter() - started
    yhat = model.predict(X_test)
    fs = ForecastSeries(y=y_test, yhat=yhat, timestamps=[ds.timestamps[i] for i in test_idx])
    return WindowResult(
        window_index=window_index,
        train_range=t_range,
        test_range=s_range,
        n_train=n_train,
        n_test=n_test,
        chosen_params=chosen,
        validation_nrmse=val_score,
        nrmse=nrmse(fs),
        mae=mae(fs),
        fit_seconds=fit_seconds,
    )


def _run_cell(args) -> CellResult:
    (period, model_name, freq, horizon, config, table, target) = args
    ds = build_dataset(table, target, horizon, config)
    windows = _resolve_windows(ds, period, config)
    results = []
    for wi, win in enumerate(windows):
        if isinstance(win, tuple):
            train_idx, test_idx = win
        else:
            train_idx, test_idx = win.train_idx, win.test_idx
        seed = derive_seed(config.seed, period, model_name, freq, horizon, wi)
        results.append(_evaluate_window(model_name, config, ds, train_idx, test_idx, wi, seed))
    scored = [w for w in results if not w.skipped]
    agg_nrmse = float(np.mean([w.nrmse for w in scored])) if scored else None
    agg_mae = float(np.mean([w.mae for w in scored])) if scored else None
    return CellResult(
        period=period,
        model=model_name,
        frequency=freq,
        horizon=horizon,
        windows=tuple(results),
        nrmse=agg_nrmse,
        mae=agg_mae,
        n_skipped=len(results) - len(scored),
    )


def plan_cells(config: ExperimentConfig) -> list[tuple[str, str, str, int]]:
    """Deterministic cell order: period, frequency, horizon, model."""
    return [
        (p, m, f, h)
        for p in config.periods
        for f in config.frequencies
        for h in config.horizons
        for m in config.models
    ]


def run_experiment(
    config: ExperimentConfig,
    tables: dict[str, FeatureTable],
    target: str,
    jobs: int = 1,
) -> ExperimentReport:
    """Fit every cell of the config and aggregate per-window metrics."""
    for freq in config.frequencies:
        if freq not in tables:
            raise ConfigError(f"no aligned table supplied for frequency {freq!r}")
    started = time.perf_counter()
    cells = plan_cells(config)
    task_args = [(p, m, f, h, config, tables[f], target) for (p, m, f, h) in cells]
    if jobs > 1 and len(task_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, task_args))
    else:
        results = [_run_cell(a) for a in task_args]
    return ExperimentReport(
        fingerprint=config.fingerprint(),
        config=config.to_dict(),
        cells=tuple(results),
        total_seconds=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Ablations


def percent_reduction(baseline: float, variant: float) -> float:
    """100 * (baseline - variant) / baseline; positive means the variant helped."""
    if baseline == 0:
        raise MetricError("percent reduction undefined: baseline NRMSE is zero")
    return 100.0 * (baseline - variant) / baseline


def lag_ablation(
    config: ExperimentConfig,
    tables: dict[str, FeatureTable],
    target: str,
    lags: int = 5,
    jobs: int = 1,
) -> dict:
    """Percentage NRMSE reduction from adding k target lags to the inputs."""
    base_cfg = replace(config, target_lags=0)
    lag_cfg = replace(config, target_lags=lags)
    base = run_experiment(base_cfg, tables, target, jobs=jobs)
    lagged = run_experiment(lag_cfg, tables, target, jobs=jobs)
    rows = []
    for b, v in zip(base.cells, lagged.cells):
        assert (b.period, b.model, b.frequency, b.horizon) == (v.period, v.model, v.frequency, v.horizon)
        if b.nrmse is None or v.nrmse is None:
            pct = None
        else:
            pct = percent_reduction(b.nrmse, v.nrmse)
        rows.append(
            {
                "period": b.period,
                "model": MODEL_LABELS.get(b.model, b.model),
                "frequency": b.frequency,
                "horizon": b.horizon,
                "nrmse_baseline": b.nrmse,
                "nrmse_lagged": v.nrmse,
                "pct_reduction": pct,
            }
        )
    return {
        "kind": "lag_ablation",
        "lags": lags,
        "fingerprint": config.fingerprint(),
        "rows": rows,
    }


def covariate_sets(config: ExperimentConfig) -> list[tuple[str, tuple[str, ...]]]:
    """Cumulative feature sets: calendar only, then each covariate in order."""
    sets: list[tuple[str, tuple[str, ...]]] = [("CalFt", ())]
    acc: list[str] = []
    for cov in config.covariates:
        acc.append(cov)
        sets.append(("CalFt+" + "+".join(acc), tuple(acc)))
    return sets


def incremental_covariate_ablation(
    config: ExperimentConfig,
    tables: dict[str, FeatureTable],
    target: str,
    jobs: int = 1,
) -> dict:
    """NRMSE per cumulative feature set, grouped for plotting."""
    for freq in config.frequencies:
        table = tables.get(freq)
        if table is None:
            raise ConfigError(f"no aligned table supplied for frequency {freq!r}")
        missing = [c for c in config.covariates if c not in table.names]
        if missing:
            raise ConfigError(f"covariate(s) {missing} absent from the {freq} table")
    groups = []
    for label, subset in covariate_sets(config):
        cfg = replace(config, feature_subset=subset, include_calendar=True)
        report = run_experiment(cfg, tables, target, jobs=jobs)
        groups.append({"feature_set": label, "cells": report.summary_rows()})
    return {
        "kind": "covariate_ablation",
        "covariates": list(config.covariates),
        "fingerprint": config.fingerprint(),
        "groups": groups,
    }
