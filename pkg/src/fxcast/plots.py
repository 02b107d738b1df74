"""Matplotlib figure rendering for the report paths.

Figures are written next to the delimited output so a run leaves both
machine-readable tables and ready-to-look-at PNGs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .interpret import Attribution, ImportanceReport


def save_importance_bars(report: ImportanceReport, path: str | Path, title: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    order = np.argsort(report.scores)
    names = [report.feature_names[i] for i in order]
    scores = report.scores[order]
    fig, ax = plt.subplots(figsize=(6, max(2.0, 0.35 * len(names) + 1)))
    ax.barh(names, scores, color="#4878d0")
    ax.set_xlabel(f"normalized score ({report.method})")
    ax.set_xlim(0, 1.05)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_shap_timeseries(
    attributions: Sequence[Attribution],
    feature_names: Sequence[str],
    path: str | Path,
    title: str = "",
    max_features: int = 8,
) -> Path:
    """Signed contribution lines over time for the most active features."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mat = np.stack([a.phi for a in attributions])
    stamps = [a.timestamp for a in attributions]
    keep = np.argsort(-np.abs(mat).mean(axis=0))[:max_features]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for j in keep:
        ax.plot(stamps, mat[:, j], label=feature_names[j], linewidth=1.2)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_ylabel("contribution to prediction")
    ax.legend(loc="upper left", fontsize=8, ncol=2)
    if title:
        ax.set_title(title)
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_metric_bars(summary_rows: list[dict], path: str | Path, metric: str = "nrmse") -> Path:
    """Grouped bars of the aggregate metric per model, one panel per period."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    periods = sorted({r["period"] for r in summary_rows})
    fig, axes = plt.subplots(1, len(periods), figsize=(4.5 * len(periods), 3.6), squeeze=False)
    for ax, period in zip(axes[0], periods):
        rows = [r for r in summary_rows if r["period"] == period and r[metric] is not None]
        combos = sorted({(r["frequency"], r["horizon"]) for r in rows})
        models = sorted({r["model"] for r in rows})
        width = 0.8 / max(1, len(combos))
        xs = np.arange(len(models))
        for ci, combo in enumerate(combos):
            vals = []
            for m in models:
                match = [r[metric] for r in rows if r["model"] == m and (r["frequency"], r["horizon"]) == combo]
                vals.append(match[0] if match else np.nan)
            ax.bar(xs + ci * width, vals, width=width, label=f"{combo[0]} h={combo[1]}")
        ax.set_xticks(xs + 0.4 - width / 2)
        ax.set_xticklabels(models, rotation=45, ha="right", fontsize=8)
        ax.set_title(period, fontsize=9)
        ax.set_ylabel(metric.upper())
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_covariate_ablation_bars(doc: dict, path: str | Path, metric: str = "nrmse") -> Path:
    """One panel per feature set, bars per model/frequency/horizon combo."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    groups = doc["groups"]
    fig, axes = plt.subplots(1, len(groups), figsize=(3.8 * len(groups), 3.6), sharey=True, squeeze=False)
    for ax, group in zip(axes[0], groups):
        rows = [r for r in group["cells"] if r[metric] is not None]
        models = sorted({r["model"] for r in rows})
        combos = sorted({(r["frequency"], r["horizon"]) for r in rows})
        width = 0.8 / max(1, len(combos))
        xs = np.arange(len(models))
        for ci, combo in enumerate(combos):
            vals = []
            for m in models:
                match = [r[metric] for r in rows if r["model"] == m and (r["frequency"], r["horizon"]) == combo]
                vals.append(match[0] if match else np.nan)
            ax.bar(xs + ci * width, vals, width=width, label=f"{combo[0]} h={combo[1]}")
        ax.set_xticks(xs + 0.4 - width / 2)
        ax.set_xticklabels(models, rotation=45, ha="right", fontsize=8)
        ax.set_title(group["feature_set"], fontsize=9)
        ax.legend(fontsize=7)
    axes[0][0].set_ylabel(metric.upper())
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_lag_ablation_bars(doc: dict, path: str | Path) -> Path:
    """Percent NRMSE reduction per cell; negative bars mean lags hurt."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [r for r in doc["rows"] if r["pct_reduction"] is not None]
    labels = [f'{r["period"]}/{r["model"]}/{r["frequency"]}/h{r["horizon"]}' for r in rows]
    values = [r["pct_reduction"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(rows) + 2), 4))
    colors = ["#4878d0" if v >= 0 else "#d65f5f" for v in values]
    ax.bar(np.arange(len(rows)), values, color=colors)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xticks(np.arange(len(rows)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("% NRMSE reduction from target lags")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
