"""Seeded synthetic dataset: random-walk macro series plus a planted
oil-driven signal in the target.

The roster mirrors the real variable set (six daily series, five monthly)
so configs written for real data run unchanged. The target is a noisy
monotone function of the previous day's oil level and of nothing else,
which gives end-to-end tests a known ground truth for importance rankings
and the incremental ablation.
"""

from __future__ import annotations

import json
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .data import Frequency, TimeSeries

DAILY_WALKS = {
    # name: (start level, daily step sd)
    "Oil": (70.0, 1.2),
    "Gold": (1385.0, 8.0),
    "TSX": (14300.0, 60.0),
    "SP500": (2150.0, 12.0),
    "ED": (0.8, 0.01),
}

MONTHLY_WALKS = {
    "IR": (1.0, 0.05),
    "PPI": (101.0, 0.5),
    "M1": (107.0, 1.0),
    "UnEmp": (7.3, 0.1),
    "IndProd": (98.0, 0.4),
}

TARGET_NAME = "CADUSD"
TARGET_BASE = 0.85
TARGET_OIL_GAIN = 0.12
TARGET_OIL_SCALE = 40.0
TARGET_NOISE_SD = 0.004


def business_days(start: date, end: date) -> list[date]:
    days = []
    d = start
    while d <= end:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def month_fifteenths(start: date, end: date) -> list[date]:
    days = []
    y, m = start.year, start.month
    while (y, m) <= (end.year, end.month):
        d = date(y, m, 15)
        if start <= d <= end:
            days.append(d)
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return days


def planted_target(oil: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Noisy function of the previous day's oil level only."""
    prev = np.concatenate([[oil[0]], oil[:-1]])
    signal = TARGET_BASE + TARGET_OIL_GAIN * np.tanh((prev - DAILY_WALKS["Oil"][0]) / TARGET_OIL_SCALE)
    return signal + rng.normal(0.0, TARGET_NOISE_SD, size=oil.shape[0])


def synthesize(
    seed: int = 0,
    start: date = date(2009, 1, 1),
    end: date = date(2021, 12, 31),
) -> dict[str, TimeSeries]:
    """Generate the full synthetic roster, deterministically from the seed."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    daily = business_days(start, end)
    monthly = month_fifteenths(start, end)
    if len(daily) < 10 or len(monthly) < 2:
        raise ValueError("date range too short for a synthetic dataset")
    series: dict[str, TimeSeries] = {}
    walks: dict[str, np.ndarray] = {}
    for name, (level, sd) in DAILY_WALKS.items():
        values = level + np.cumsum(rng.normal(0.0, sd, size=len(daily)))
        walks[name] = values
        series[name] = TimeSeries(name=name, frequency=Frequency.DAILY, dates=tuple(daily), values=values)
    for name, (level, sd) in MONTHLY_WALKS.items():
        values = level + np.cumsum(rng.normal(0.0, sd, size=len(monthly)))
        series[name] = TimeSeries(name=name, frequency=Frequency.MONTHLY, dates=tuple(monthly), values=values)
    target = planted_target(walks["Oil"], rng)
    series[TARGET_NAME] = TimeSeries(
        name=TARGET_NAME, frequency=Frequency.DAILY, dates=tuple(daily), values=target
    )
    return series


def write_dataset(series: dict[str, TimeSeries], outdir: str | Path) -> Path:
    """Write one CSV per series plus the manifest; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest: dict[str, dict] = {}
    for name, ts in series.items():
        filename = f"{name.lower()}.csv"
        lines = [f"{d.isoformat()},{float(v)!r}" for d, v in zip(ts.dates, ts.values)]
        (outdir / filename).write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest[name] = {
            "path": filename,
            "frequency": ts.frequency.value,
            "role": "target" if name == TARGET_NAME else "feature",
        }
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path
