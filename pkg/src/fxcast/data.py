"""Loading, validation, alignment and feature engineering of macro time series.

Raw input is one CSV per variable (``date,value`` rows, ISO-8601 dates).
A JSON manifest names each variable, its frequency and its role. Mixed
daily/monthly series are aligned onto a single date grid by forward fill
from the observation date (never backward, to avoid look-ahead), then
turned into supervised datasets with a horizon-shifted target and optional
calendar features and target lags.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from datetime import date
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    ConfigError,
    FrequencyError,
    InsufficientDataError,
    ParseError,
    ValidationError,
)


class Frequency(str, Enum):
    DAILY = "daily"
    WEEKLY = "weekly"
    MONTHLY = "monthly"

    @classmethod
    def parse(cls, text: str) -> "Frequency":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown frequency {text!r} (expected daily/weekly/monthly)")


# Ordering from finest to coarsest, used by alignment.
_FINENESS = {Frequency.DAILY: 0, Frequency.WEEKLY: 1, Frequency.MONTHLY: 2}


@dataclass(frozen=True)
class TimeSeries:
    """One named, dated, single-frequency numeric series."""

    name: str
    frequency: Frequency
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.dates) == 0:
            raise ValidationError(f"series {self.name!r} is empty")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.dates),):
            raise ValidationError(f"series {self.name!r}: dates/values length mismatch")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"series {self.name!r} contains non-finite values")
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise ValidationError(f"series {self.name!r}: dates not strictly increasing at {b}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def start(self) -> date:
        return self.dates[0]

    @property
    def end(self) -> date:
        return self.dates[-1]


def load_csv(path: str | Path, name: str, frequency: Frequency, has_header: bool = False) -> TimeSeries:
    """Read a two-column ``date,value`` CSV into a validated TimeSeries.

    Rows may arrive out of order (they are sorted); duplicate dates are an
    error. Malformed dates or numbers raise ParseError with the line number.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError("file not found", path=str(path), line=0)
    rows: list[tuple[date, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and has_header:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ParseError("expected two columns (date,value)", path=str(path), line=lineno)
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"bad ISO-8601 date {row[0]!r}", path=str(path), line=lineno)
            try:
                v = float(row[1])
            except ValueError:
                raise ParseError(f"bad number {row[1]!r}", path=str(path), line=lineno)
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {row[1]!r}", path=str(path), line=lineno)
            rows.append((d, v))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    for (a, _), (b, _) in zip(rows, rows[1:]):
        if a == b:
            raise ValidationError(f"{path}: duplicate date {a.isoformat()}")
    return TimeSeries(
        name=name,
        frequency=frequency,
        dates=tuple(d for d, _ in rows),
        values=np.array([v for _, v in rows], dtype=float),
    )


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: Path
    frequency: Frequency
    role: str  # "target" or "feature"


@dataclass(frozen=True)
class Manifest:
    """Maps variable names to their CSV files, frequencies and roles."""

    entries: tuple[ManifestEntry, ...]

    @property
    def target(self) -> str:
        targets = [e.name for e in self.entries if e.role == "target"]
        if len(targets) != 1:
            raise ConfigError(f"manifest must declare exactly one target, found {len(targets)}")
        return targets[0]

    def names(self) -> list[str]:
        return [e.name for e in self.entries]


def load_manifest(path: str | Path) -> Manifest:
    """Parse a JSON manifest: {name: {path, frequency, role}}."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}")
    if not isinstance(doc, dict) or not doc:
        raise ConfigError("manifest must be a non-empty JSON object")
    entries = []
    for name, spec in doc.items():
        if not isinstance(spec, dict):
            raise ConfigError(f"manifest entry {name!r} must be an object")
        for key in ("path", "frequency", "role"):
            if key not in spec:
                raise ConfigError(f"manifest entry {name!r} is missing {key!r}")
        role = spec["role"]
        if role not in ("target", "feature"):
            raise ConfigError(f"manifest entry {name!r}: role must be target|feature, got {role!r}")
        csv_path = Path(spec["path"])
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        entries.append(
            ManifestEntry(name=name, path=csv_path, frequency=Frequency.parse(spec["frequency"]), role=role)
        )
    manifest = Manifest(entries=tuple(entries))
    manifest.target  # validates exactly one target
    return manifest


def load_series(manifest: Manifest) -> dict[str, TimeSeries]:
    return {e.name: load_csv(e.path, e.name, e.frequency) for e in manifest.entries}


@dataclass(frozen=True)
class FeatureTable:
    """Aligned columns on a shared date grid (no missing entries)."""

    timestamps: tuple[date, ...]
    names: tuple[str, ...]
    values: np.ndarray  # [n_rows x n_cols]
    frequency: Frequency

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.timestamps), len(self.names)):
            raise ValidationError("table shape does not match timestamps/names")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("duplicate column names")
        if not np.all(np.isfinite(values)):
            raise ValidationError("table contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise ConfigError(f"unknown column {name!r}")
        return self.values[:, self.names.index(name)]

    def restrict(self, start: date, end: date) -> "FeatureTable":
        """Rows with start <= timestamp < end."""
        keep = [i for i, t in enumerate(self.timestamps) if start <= t < end]
        return FeatureTable(
            timestamps=tuple(self.timestamps[i] for i in keep),
            names=self.names,
            values=self.values[keep, :],
            frequency=self.frequency,
        )


def _forward_fill(grid: list[date], obs_dates: tuple[date, ...], obs_values: np.ndarray) -> np.ndarray:
    """Most recent observation at or before each grid date; NaN before the first."""
    out = np.full(len(grid), np.nan)
    j = -1
    for i, g in enumerate(grid):
        while j + 1 < len(obs_dates) and obs_dates[j + 1] <= g:
            j += 1
        if j >= 0:
            out[i] = obs_values[j]
    return out


def align_mixed_frequency(series: list[TimeSeries], target_freq: Frequency) -> FeatureTable:
    """Align series of mixed frequency onto one grid at target_freq.

    The grid is the union of observation dates of the series already at the
    target frequency (daily series are first resampled when the target is
    weekly). Coarser series are forward-filled from their observation date;
    leading rows where any column is still unfilled are dropped.
    """
    if target_freq not in (Frequency.DAILY, Frequency.WEEKLY):
        raise AlignmentError("target frequency must be daily or weekly")
    if not series:
        raise AlignmentError("no series to align")
    names = [s.name for s in series]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate series names")

    prepared: list[TimeSeries] = []
    for s in series:
        if _FINENESS[s.frequency] < _FINENESS[target_freq]:
            prepared.append(resample_weekly(s))  # daily -> weekly is the only finer case
        else:
            prepared.append(s)

    grid_sources = [s for s in prepared if s.frequency == target_freq]
    if not grid_sources:
        raise AlignmentError(f"no series at or finer than {target_freq.value} to define the date grid")

    grid = sorted({d for s in grid_sources for d in s.dates})

    # Overlap check: the latest series start must not exceed the earliest end.
    latest_start = max(s.start for s in prepared)
    earliest_end = min(s.end for s in prepared)
    if latest_start > earliest_end:
        raise AlignmentError(
            f"series date ranges do not overlap (latest start {latest_start}, earliest end {earliest_end})"
        )

    cols = np.column_stack([_forward_fill(grid, s.dates, s.values) for s in prepared])
    filled = np.all(np.isfinite(cols), axis=1)
    first = int(np.argmax(filled)) if filled.any() else len(grid)
    if first == len(grid):
        raise AlignmentError("no grid row has every column filled")
    # Only leading rows may be unfilled; forward fill guarantees the rest.
    return FeatureTable(
        timestamps=tuple(grid[first:]),
        names=tuple(names),
        values=cols[first:, :],
        frequency=target_freq,
    )


def resample_weekly(series: TimeSeries) -> TimeSeries:
    """Collapse a daily series to one point per ISO week (last observation).

    The weekly point keeps the date of the last daily observation in the
    week, typically the Friday on business-day data.
    """
    if series.frequency != Frequency.DAILY:
        raise FrequencyError(f"resample_weekly expects a daily series, got {series.frequency.value}")
    dates: list[date] = []
    values: list[float] = []
    current_key: tuple[int, int] | None = None
    for d, v in zip(series.dates, series.values):
        iso = d.isocalendar()
        key = (iso[0], iso[1])
        if key == current_key:
            dates[-1] = d
            values[-1] = v
        else:
            dates.append(d)
            values.append(v)
            current_key = key
    return TimeSeries(
        name=series.name,
        frequency=Frequency.WEEKLY,
        dates=tuple(dates),
        values=np.array(values, dtype=float),
    )


def week_of_month(d: date) -> int:
    """1..5, counting 7-day blocks from the 1st of the month."""
    return (d.day - 1) // 7 + 1


def calendar_feature_names(frequency: Frequency) -> list[str]:
    """Calendar dummy columns; weekly data has no day-of-week."""
    if frequency == Frequency.DAILY:
        return ["cal_day_of_week", "cal_week_of_month", "cal_month_of_year"]
    return ["cal_week_of_month", "cal_month_of_year"]


def calendar_features(timestamps: tuple[date, ...], frequency: Frequency) -> np.ndarray:
    cols = []
    if frequency == Frequency.DAILY:
        cols.append([float(t.weekday()) for t in timestamps])
    cols.append([float(week_of_month(t)) for t in timestamps])
    cols.append([float(t.month) for t in timestamps])
    return np.column_stack(cols)


@dataclass(frozen=True)
class SupervisedDataset:
    """Feature matrix X at time t paired with the target at t+h.

    ``target_current`` keeps the target's own level at each row's timestamp
    so that target lags can be appended after construction.
    """

    timestamps: tuple[date, ...]
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    horizon: int
    frequency: Frequency
    target_name: str
    target_current: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        tc = np.asarray(self.target_current, dtype=float)
        n = len(self.timestamps)
        if X.shape != (n, len(self.feature_names)):
            raise ValidationError("X shape does not match timestamps/feature_names")
        if y.shape != (n,) or tc.shape != (n,):
            raise ValidationError("y/target_current length mismatch")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValidationError("duplicate feature names")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("supervised dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "target_current", tc)

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def rows(self, idx: np.ndarray | list[int]) -> "SupervisedDataset":
        idx = np.asarray(idx, dtype=int)
        return replace(
            self,
            timestamps=tuple(self.timestamps[i] for i in idx),
            X=self.X[idx, :],
            y=self.y[idx],
            target_current=self.target_current[idx],
        )


def make_supervised(
    table: FeatureTable,
    target: str,
    horizon: int,
    include_calendar: bool = False,
    feature_subset: list[str] | None = None,
) -> SupervisedDataset:
    """Pair features at t with the target level at t+h.

    ``feature_subset=None`` selects every non-target column; an explicit
    empty list keeps only calendar features (the ablation baseline). The
    last ``horizon`` rows are dropped because their target is unknown.
    """
    if target not in table.names:
        raise ConfigError(f"target column {target!r} not in table")
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    if horizon >= table.n_rows:
        raise InsufficientDataError(f"horizon {horizon} >= number of rows {table.n_rows}")
    if feature_subset is None:
        selected = [n for n in table.names if n != target]
    else:
        unknown = [n for n in feature_subset if n not in table.names]
        if unknown:
            raise ConfigError(f"unknown feature name(s): {unknown}")
        selected = list(feature_subset)

    n = table.n_rows - horizon
    target_col = table.column(target)
    blocks = []
    names: list[str] = []
    if selected:
        blocks.append(np.column_stack([table.column(c) for c in selected])[:n, :])
        names.extend(selected)
    if include_calendar:
        blocks.append(calendar_features(table.timestamps[:n], table.frequency))
        names.extend(calendar_feature_names(table.frequency))
    if not blocks:
        raise ConfigError("no features selected: empty subset without calendar features")
    X = np.column_stack(blocks) if len(blocks) > 1 else blocks[0]
    return SupervisedDataset(
        timestamps=table.timestamps[:n],
        feature_names=tuple(names),
        X=X,
        y=target_col[horizon:],
        horizon=horizon,
        frequency=table.frequency,
        target_name=target,
        target_current=target_col[:n],
    )


def add_lags(dataset: SupervisedDataset, column: str, k: int) -> SupervisedDataset:
    """Append ``column_lag1..column_lagk`` (value at t-j) and drop the first k rows.

    ``column`` may be any feature or the dataset's own target, whose
    contemporaneous level is carried in ``target_current``.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k >= dataset.n_rows:
        raise InsufficientDataError(f"k={k} >= number of rows {dataset.n_rows}")
    if column == dataset.target_name:
        source = dataset.target_current
    elif column in dataset.feature_names:
        source = dataset.X[:, dataset.feature_names.index(column)]
    else:
        raise ConfigError(f"unknown column {column!r}")
    n = dataset.n_rows
    lag_cols = np.column_stack([source[k - j : n - j] for j in range(1, k + 1)])
    lag_names = [f"{column}_lag{j}" for j in range(1, k + 1)]
    clash = set(lag_names) & set(dataset.feature_names)
    if clash:
        raise ConfigError(f"lag column(s) already present: {sorted(clash)}")
    return SupervisedDataset(
        timestamps=dataset.timestamps[k:],
        feature_names=dataset.feature_names + tuple(lag_names),
        X=np.column_stack([dataset.X[k:, :], lag_cols]),
        y=dataset.y[k:],
        horizon=dataset.horizon,
        frequency=dataset.frequency,
        target_name=dataset.target_name,
        target_current=dataset.target_current[k:],
    )


@dataclass(frozen=True)
class SeriesStats:
    name: str
    count: int
    mean: float
    sd: float
    minimum: float
    median: float
    maximum: float
    skew: float | None  # None when undefined (zero variance)


def summarize(series: TimeSeries) -> SeriesStats:
    """Descriptive statistics (population moments, Fisher skewness)."""
    v = series.values
    mean = float(np.mean(v))
    sd = float(np.std(v))
    if sd > 0:
        skew = float(np.mean((v - mean) ** 3) / sd**3)
    else:
        skew = None
    return SeriesStats(
        name=series.name,
        count=len(v),
        mean=mean,
        sd=sd,
        minimum=float(np.min(v)),
        median=float(np.median(v)),
        maximum=float(np.max(v)),
        skew=skew,
    )


# Reference statistics for the CAD/USD target over 2009-2021, used by the
# data-sanity report (informative, never a hard failure).
TARGET_REFERENCE_STATS = {"mean": 0.86, "sd": 0.10, "min": 0.69, "max": 1.06}
TARGET_REFERENCE_TOLERANCE = 0.02


def target_sanity_check(stats: SeriesStats) -> dict:
    """Compare target stats against the 2009-2021 reference band."""
    observed = {"mean": stats.mean, "sd": stats.sd, "min": stats.minimum, "max": stats.maximum}
    checks = {}
    for key, ref in TARGET_REFERENCE_STATS.items():
        dev = observed[key] - ref
        checks[key] = {
            "observed": observed[key],
            "reference": ref,
            "deviation": dev,
            "within_tolerance": abs(dev) <= TARGET_REFERENCE_TOLERANCE,
        }
    return checks
