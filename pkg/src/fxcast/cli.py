"""Command-line entry point: validate, run, interpret, ablate, synth.

Experiments are declared as JSON config documents rather than flag soup so
every run carries a reproducible fingerprint. Reports land in the output
directory (``--output`` or $FXCAST_OUTPUT_DIR) as JSON + CSV with rendered
PNG figures alongside.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import numpy as np

from . import plots
from .data import (
    Frequency,
    Manifest,
    align_mixed_frequency,
    load_manifest,
    load_series,
    summarize,
    target_sanity_check,
)
from .errors import ConfigError, FxcastError
from .experiments import (
    ExperimentConfig,
    MODEL_LABELS,
    build_dataset,
    derive_seed,
    fit_model,
    grid_search,
    incremental_covariate_ablation,
    lag_ablation,
    plan_cells,
    run_experiment,
)
from .interpret import (
    coefficient_importance,
    mean_abs_shap,
    permutation_importance,
    shap_timeseries,
    split_gain_importance,
)
from .linear import LinearModel
from .metrics import ForecastSeries, nrmse
from .output import (
    write_attributions_csv,
    write_attributions_json,
    write_covariate_ablation,
    write_importance,
    write_json,
    write_lag_ablation,
    write_run_report,
)
from .synth import synthesize, write_dataset
from .trees import EnsembleModel
from .windows import SUBPERIODS

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "FXCAST_OUTPUT_DIR"
LOCAL_ACCURACY_TOL = 1e-8

_FREQ = {"daily": Frequency.DAILY, "weekly": Frequency.WEEKLY}


def _default_outdir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, "fxcast-output")


def _load_config(path: str, seed_override: int | None) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    config = ExperimentConfig.from_dict(doc)
    if seed_override is not None:
        config = replace(config, seed=seed_override)
    return config


def _build_tables(manifest: Manifest, frequencies) -> tuple[dict, str]:
    series = load_series(manifest)
    ordered = [series[e.name] for e in manifest.entries]
    tables = {f: align_mixed_frequency(ordered, _FREQ[f]) for f in frequencies}
    return tables, manifest.target


def cmd_validate(args) -> int:
    manifest = load_manifest(args.manifest)
    series = load_series(manifest)
    target = manifest.target
    header = f"{'series':<12}{'count':>8}{'mean':>12}{'sd':>12}{'min':>12}{'median':>12}{'max':>12}{'skew':>9}"
    print(header)
    print("-" * len(header))
    stats_by_name = {}
    for entry in manifest.entries:
        st = summarize(series[entry.name])
        stats_by_name[entry.name] = st
        skew = f"{st.skew:9.2f}" if st.skew is not None else "      n/a"
        print(
            f"{st.name:<12}{st.count:>8}{st.mean:>12.2f}{st.sd:>12.2f}"
            f"{st.minimum:>12.2f}{st.median:>12.2f}{st.maximum:>12.2f}{skew}"
        )
    reference = target_sanity_check(stats_by_name[target])
    print(f"\ntarget {target} vs 2009-2021 reference band:")
    for key, check in reference.items():
        mark = "ok" if check["within_tolerance"] else "DEVIATES"
        print(
            f"  {key:<5} observed {check['observed']:8.4f}  reference {check['reference']:6.2f}  "
            f"delta {check['deviation']:+8.4f}  {mark}"
        )
    doc = {
        "series": {
            name: {
                "count": st.count,
                "mean": st.mean,
                "sd": st.sd,
                "min": st.minimum,
                "median": st.median,
                "max": st.maximum,
                "skew": st.skew,
            }
            for name, st in stats_by_name.items()
        },
        "target": target,
        "target_reference_check": reference,
    }
    outdir = Path(args.output)
    write_json(outdir / "validate.json", doc)
    print(f"\nwrote {outdir / 'validate.json'}")
    return 0


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    config = _load_config(args.config, args.seed)
    tables, target = _build_tables(manifest, config.frequencies)
    if args.dry_run:
        print(f"fingerprint: {config.fingerprint()}")
        for period, model, freq, horizon in plan_cells(config):
            ds = build_dataset(tables[freq], target, horizon, config)
            from .experiments import _resolve_windows  # planned schedule only

            wins = _resolve_windows(ds, period, config)
            print(f"cell period={period} model={model} frequency={freq} horizon={horizon}: {len(wins)} window(s)")
            for wi, win in enumerate(wins):
                if isinstance(win, tuple):
                    tr, te = win
                    print(
                        f"  window {wi}: train {ds.timestamps[tr[0]]}..{ds.timestamps[tr[-1]]} "
                        f"({tr.size} rows), test {ds.timestamps[te[0]]}..{ds.timestamps[te[-1]]} ({te.size} rows)"
                    )
                else:
                    print(
                        f"  window {wi}: train {win.train_range.start}..{win.train_range.end} "
                        f"({win.train_idx.size} rows), test ..{win.test_range.end} ({win.test_idx.size} rows)"
                    )
        return 0
    report = run_experiment(config, tables, target, jobs=args.jobs)
    outdir = Path(args.output)
    written = write_run_report(report, outdir)
    for metric in ("nrmse", "mae"):
        written.append(plots.save_metric_bars(report.summary_rows(), outdir / f"figures/{metric}.png", metric))
    for p in written:
        print(f"wrote {p}")
    return 0


def _pick_best_model(report_path: str, period: str, frequency: str, horizon: int) -> str:
    p = Path(report_path)
    if not p.exists():
        raise ConfigError(f"run report not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    best_name, best_score = None, float("inf")
    for cell in doc.get("cells", []):
        if (cell["period"], cell["frequency"], cell["horizon"]) != (period, frequency, horizon):
            continue
        if cell["nrmse"] is not None and cell["nrmse"] < best_score:
            best_name, best_score = cell["model"], cell["nrmse"]
    if best_name is None:
        raise ConfigError(
            f"report has no scored cell for period={period} frequency={frequency} horizon={horizon}"
        )
    return best_name


def cmd_interpret(args) -> int:
    manifest = load_manifest(args.manifest)
    config = _load_config(args.config, args.seed)
    if args.frequency not in config.frequencies:
        config = replace(config, frequencies=(args.frequency,))
    tables, target = _build_tables(manifest, [args.frequency])
    model_name = args.model
    if model_name == "best":
        if not args.report:
            raise ConfigError("--model best requires --report pointing at a run report.json")
        model_name = _pick_best_model(args.report, args.period, args.frequency, args.horizon)
        print(f"best model for {args.period}/{args.frequency}/h{args.horizon}: {MODEL_LABELS.get(model_name, model_name)}")

    ds = build_dataset(tables[args.frequency], target, args.horizon, config)
    period_range = SUBPERIODS[args.period]
    if args.start:
        start = date.fromisoformat(args.start)
        end = date.fromisoformat(args.end) if args.end else period_range.end
    else:
        in_period = [t for t in ds.timestamps if t in period_range]
        if len(in_period) < 5:
            raise ConfigError(f"period {args.period} holds too few rows to attribute")
        start = in_period[int(np.floor(config.train_fraction * len(in_period)))]
        end = in_period[-1]
    attr_idx = np.array([i for i, t in enumerate(ds.timestamps) if start <= t <= end], dtype=int)
    train_idx = np.array([i for i, t in enumerate(ds.timestamps) if t < start], dtype=int)
    if attr_idx.size == 0:
        raise ConfigError(f"no rows to attribute in {start}..{end}")
    if train_idx.size < 8:
        raise ConfigError(f"only {train_idx.size} rows precede {start}; not enough to fit")

    X_train, y_train = ds.X[train_idx], ds.y[train_idx]
    seed = derive_seed(config.seed, "interpret", args.period, args.frequency, args.horizon, model_name)
    candidates = config.grid_for(model_name)
    n_core = max(1, int(np.floor(config.train_fraction * train_idx.size)))
    if len(candidates) > 1 and n_core < train_idx.size:
        def evaluate(hp):
            fitted = fit_model(model_name, hp, X_train[:n_core], y_train[:n_core], config, seed)
            return nrmse(ForecastSeries(y=y_train[n_core:], yhat=fitted.predict(X_train[n_core:])))

        chosen, _ = grid_search(candidates, evaluate)
    else:
        chosen = candidates[0]
    model = fit_model(model_name, chosen, X_train, y_train, config, seed, feature_names=ds.feature_names)

    test_ds = ds.rows(attr_idx)
    background = X_train if not isinstance(model, EnsembleModel) else None
    attributions = shap_timeseries(model, test_ds, background_X=background)
    for i, a in enumerate(attributions):
        pred = float(model.predict(test_ds.X[i].reshape(1, -1))[0])
        gap = abs(a.total - pred)
        if gap > LOCAL_ACCURACY_TOL:
            raise RuntimeError(f"local accuracy violated at {a.timestamp}: gap {gap:.3e}")

    if isinstance(model, EnsembleModel):
        native = split_gain_importance(model)
    elif isinstance(model, LinearModel):
        native = coefficient_importance(model)
    else:
        native = permutation_importance(
            model,
            test_ds.X,
            test_ds.y,
            rng=np.random.default_rng(seed),
            feature_names=ds.feature_names,
        )
    shap_report = mean_abs_shap(attributions, ds.feature_names)

    outdir = Path(args.output)
    label = MODEL_LABELS.get(model_name, model_name)
    written = [
        write_importance(native, outdir / "importance_native.json"),
        write_importance(shap_report, outdir / "importance_mean_abs_shap.json"),
        write_attributions_csv(outdir / "shap_timeseries.csv", ds.feature_names, attributions),
        write_attributions_json(outdir / "shap_timeseries.json", ds.feature_names, attributions),
        write_json(
            outdir / "interpret_summary.json",
            {
                "model": model_name,
                "label": label,
                "chosen_params": chosen,
                "period": args.period,
                "frequency": args.frequency,
                "horizon": args.horizon,
                "range": {"start": start.isoformat(), "end": end.isoformat()},
                "n_attributions": len(attributions),
                "n_train": int(train_idx.size),
            },
        ),
        plots.save_importance_bars(
            native, outdir / "figures/importance_native.png", title=f"{label} native importance"
        ),
        plots.save_importance_bars(
            shap_report, outdir / "figures/importance_mean_abs_shap.png", title=f"{label} mean |SHAP|"
        ),
        plots.save_shap_timeseries(
            attributions,
            ds.feature_names,
            outdir / "figures/shap_timeseries.png",
            title=f"{label} contributions {start}..{end}",
        ),
    ]
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_ablate(args) -> int:
    manifest = load_manifest(args.manifest)
    config = _load_config(args.config, args.seed)
    tables, target = _build_tables(manifest, config.frequencies)
    outdir = Path(args.output)
    if args.kind == "lags":
        doc = lag_ablation(config, tables, target, lags=args.lags, jobs=args.jobs)
        written = write_lag_ablation(doc, outdir)
        written.append(plots.save_lag_ablation_bars(doc, outdir / "figures/lag_ablation.png"))
    else:
        doc = incremental_covariate_ablation(config, tables, target, jobs=args.jobs)
        written = write_covariate_ablation(doc, outdir)
        written.append(
            plots.save_covariate_ablation_bars(doc, outdir / "figures/covariate_ablation.png")
        )
    for p in written:
        print(f"wrote {p}")
    return 0


QUICK_CONFIG = {
    "periods": ["All"],
    "frequencies": ["daily"],
    "horizons": [1],
    "models": ["lasso", "ridge", "lgbm"],
    "grids": {
        "lasso": {"alpha": [0.001, 0.01, 0.1]},
        "ridge": {"alpha": [0.1, 1, 10]},
        "lgbm": {"n_estimators": [100], "max_depth": [3], "max_features": ["sqrt"]},
    },
    "seed": 7,
}


def cmd_synth(args) -> int:
    start = date.fromisoformat(args.start)
    end = date.fromisoformat(args.end)
    series = synthesize(seed=args.seed if args.seed is not None else 0, start=start, end=end)
    manifest_path = write_dataset(series, args.outdir)
    config_path = Path(args.outdir) / "config_quick.json"
    write_json(config_path, QUICK_CONFIG)
    print(f"wrote {manifest_path}")
    print(f"wrote {config_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fxcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, jobs=True):
        p.add_argument("-o", "--output", default=_default_outdir(), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("validate", help="data-sanity report for a manifest")
    p.add_argument("manifest")
    add_common(p, jobs=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="execute a backtest config")
    p.add_argument("manifest")
    p.add_argument("config")
    add_common(p)
    p.add_argument("--dry-run", action="store_true", help="print the window schedule without fitting")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("interpret", help="importance + SHAP attribution files")
    p.add_argument("manifest")
    p.add_argument("config")
    add_common(p, jobs=False)
    p.add_argument("--model", default="best", help="model name or 'best' (needs --report)")
    p.add_argument("--report", default=None, help="run report.json used to resolve 'best'")
    p.add_argument("--period", default="All", choices=sorted(SUBPERIODS))
    p.add_argument("--frequency", default="daily", choices=["daily", "weekly"])
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--start", default=None, help="first attributed date (ISO)")
    p.add_argument("--end", default=None, help="last attributed date (ISO, inclusive)")
    p.set_defaults(func=cmd_interpret)

    p = sub.add_parser("ablate", help="lagged-input or incremental-covariate ablation")
    p.add_argument("manifest")
    p.add_argument("config")
    p.add_argument("--kind", required=True, choices=["lags", "covariates"])
    p.add_argument("--lags", type=int, default=5)
    add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="write a synthetic dataset + manifest")
    p.add_argument("outdir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="2009-01-01")
    p.add_argument("--end", default="2021-12-31")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FxcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - surface as runtime failure
        logger.exception("unhandled failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
