"""Interpretable machine-learning backtests for macro-driven FX forecasting."""

__version__ = "0.1.0"

from .data import (
    FeatureTable,
    Frequency,
    SupervisedDataset,
    TimeSeries,
    add_lags,
    align_mixed_frequency,
    load_csv,
    load_manifest,
    make_supervised,
    resample_weekly,
)
from .interpret import (
    Attribution,
    ImportanceReport,
    brute_force_shapley,
    coefficient_importance,
    linear_shap,
    mean_abs_shap,
    permutation_importance,
    shap_timeseries,
    split_gain_importance,
    tree_shap,
)
from .linear import LinearModel, fit_lasso, fit_ridge, soft_threshold, standardize
from .metrics import ForecastSeries, mae, nrmse
from .trees import EnsembleModel, TreeHyperparams, fit_extra_trees, fit_gbm, fit_tree
from .gru import GruForecaster, GruParams, fit_gru, gru_backward, gru_forward, init_gru_params
from .windows import SubperiodSpec, WindowSchedule, rolling_windows, subperiod_split

__all__ = [
    "Attribution",
    "EnsembleModel",
    "FeatureTable",
    "ForecastSeries",
    "Frequency",
    "GruForecaster",
    "GruParams",
    "ImportanceReport",
    "LinearModel",
    "SubperiodSpec",
    "SupervisedDataset",
    "TimeSeries",
    "TreeHyperparams",
    "WindowSchedule",
    "add_lags",
    "align_mixed_frequency",
    "brute_force_shapley",
    "coefficient_importance",
    "fit_extra_trees",
    "fit_gbm",
    "fit_gru",
    "fit_lasso",
    "fit_ridge",
    "fit_tree",
    "gru_backward",
    "gru_forward",
    "init_gru_params",
    "linear_shap",
    "load_csv",
    "load_manifest",
    "mae",
    "make_supervised",
    "mean_abs_shap",
    "nrmse",
    "permutation_importance",
    "resample_weekly",
    "rolling_windows",
    "shap_timeseries",
    "soft_threshold",
    "split_gain_importance",
    "standardize",
    "subperiod_split",
    "tree_shap",
]
