"""Report emission: atomic file writes, JSON/CSV serialization.

Every artifact is written via temp-file-plus-rename so an interrupted run
never leaves a truncated report behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .experiments import ExperimentReport
from .interpret import Attribution, ImportanceReport


def atomic_write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path: str | Path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return atomic_write_text(path, buf.getvalue())


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_run_report(report: ExperimentReport, outdir: str | Path) -> list[Path]:
    """report.json (canonical), report.csv (per window), summary.csv and
    long-format plotdata.csv."""
    outdir = Path(outdir)
    written = [atomic_write_text(outdir / "report.json", report.to_json() + "\n")]
    rows = []
    for cell in report.cells:
        for w in cell.windows:
            rows.append(
                [
                    cell.period,
                    cell.model,
                    cell.frequency,
                    cell.horizon,
                    w.window_index,
                    w.train_range["start"],
                    w.test_range["end"],
                    _fmt(w.nrmse),
                    _fmt(w.mae),
                    "skipped" if w.skipped else "ok",
                    json.dumps(w.chosen_params, sort_keys=True),
                ]
            )
    written.append(
        write_csv(
            outdir / "report.csv",
            [
                "period",
                "model",
                "frequency",
                "horizon",
                "window",
                "train_start",
                "test_end",
                "nrmse",
                "mae",
                "status",
                "chosen_params",
            ],
            rows,
        )
    )
    summary = report.summary_rows()
    written.append(
        write_csv(
            outdir / "summary.csv",
            ["period", "model", "frequency", "horizon", "nrmse", "mae"],
            [[r["period"], r["model"], r["frequency"], r["horizon"], _fmt(r["nrmse"]), _fmt(r["mae"])] for r in summary],
        )
    )
    long_rows = []
    for r in summary:
        for metric in ("nrmse", "mae"):
            long_rows.append([r["period"], r["model"], r["frequency"], r["horizon"], metric, _fmt(r[metric])])
    written.append(
        write_csv(
            outdir / "plotdata.csv",
            ["period", "model", "frequency", "horizon", "metric", "value"],
            long_rows,
        )
    )
    return written


def write_importance(report: ImportanceReport, path: str | Path) -> Path:
    return write_json(path, report.to_dict())


def write_attributions_csv(
    path: str | Path, feature_names: Sequence[str], attributions: Sequence[Attribution]
) -> Path:
    header = ["timestamp", "base_value", "prediction"] + [f"phi_{n}" for n in feature_names]
    rows = []
    for a in attributions:
        stamp = a.timestamp.isoformat() if a.timestamp else ""
        rows.append([stamp, repr(a.base_value), repr(a.total)] + [repr(float(p)) for p in a.phi])
    return write_csv(path, header, rows)


def write_attributions_json(
    path: str | Path, feature_names: Sequence[str], attributions: Sequence[Attribution]
) -> Path:
    doc = [
        {
            "timestamp": a.timestamp.isoformat() if a.timestamp else None,
            "base_value": a.base_value,
            "prediction": a.total,
            "phi": {n: float(p) for n, p in zip(feature_names, a.phi)},
        }
        for a in attributions
    ]
    return write_json(path, doc)


def write_lag_ablation(doc: dict, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    written = [write_json(outdir / "lag_ablation.json", doc)]
    written.append(
        write_csv(
            outdir / "lag_ablation.csv",
            ["period", "model", "frequency", "horizon", "nrmse_baseline", "nrmse_lagged", "pct_reduction"],
            [
                [
                    r["period"],
                    r["model"],
                    r["frequency"],
                    r["horizon"],
                    _fmt(r["nrmse_baseline"]),
                    _fmt(r["nrmse_lagged"]),
                    _fmt(r["pct_reduction"]),
                ]
                for r in doc["rows"]
            ],
        )
    )
    return written


def write_covariate_ablation(doc: dict, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    written = [write_json(outdir / "covariate_ablation.json", doc)]
    rows = []
    for group in doc["groups"]:
        for cell in group["cells"]:
            rows.append(
                [
                    group["feature_set"],
                    cell["period"],
                    cell["model"],
                    cell["frequency"],
                    cell["horizon"],
                    _fmt(cell["nrmse"]),
                    _fmt(cell["mae"]),
                ]
            )
    written.append(
        write_csv(
            outdir / "covariate_ablation.csv",
            ["feature_set", "period", "model", "frequency", "horizon", "nrmse", "mae"],
            rows,
        )
    )
    return written
