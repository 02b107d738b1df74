"""Rolling train/test schedules and fixed subperiod splits.

A schedule is a sequence of month-aligned windows slid forward by a fixed
stride. The 80:20 train/test boundary inside a window is taken over
observation counts (not calendar fractions) once the schedule is resolved
against actual row timestamps, with the train count floored so no boundary
observation leaks into training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np

from .errors import ConfigError, ScheduleError, ValidationError


def _month_index(d: date) -> int:
    return d.year * 12 + (d.month - 1)


def _month_start(index: int) -> date:
    return date(index // 12, index % 12 + 1, 1)


def add_months(d: date, months: int) -> date:
    """First day of the month ``months`` after d's month."""
    return _month_start(_month_index(d) + months)


@dataclass(frozen=True)
class DateRange:
    """Half-open interval [start, end)."""

    start: date
    end: date

    def __post_init__(self):
        if self.start >= self.end:
            raise ValidationError(f"empty date range {self.start}..{self.end}")

    def __contains__(self, d: date) -> bool:
        return self.start <= d < self.end

    def to_json(self) -> dict:
        return {"start": self.start.isoformat(), "end": self.end.isoformat()}


@dataclass(frozen=True)
class WindowSplit:
    """One window resolved against data rows."""

    index: int
    window: DateRange
    train_idx: np.ndarray
    test_idx: np.ndarray
    train_range: DateRange
    test_range: DateRange


@dataclass(frozen=True)
class WindowSchedule:
    windows: tuple[DateRange, ...]
    window_months: int
    stride_months: int
    train_fraction: float

    def __len__(self) -> int:
        return len(self.windows)

    def split(self, timestamps: Sequence[date]) -> list[WindowSplit]:
        """Resolve the train/test boundary of each window by row count.

        Within a window the chronologically first floor(train_fraction * n)
        rows train and the remainder test. Windows with fewer than two rows
        on either side are dropped (nothing to fit or score).
        """
        ts = list(timestamps)
        for a, b in zip(ts, ts[1:]):
            if a >= b:
                raise ValidationError("timestamps must be strictly increasing")
        out: list[WindowSplit] = []
        for i, win in enumerate(self.windows):
            rows = np.array([j for j, t in enumerate(ts) if t in win], dtype=int)
            if rows.size < 2:
                continue
            n_train = int(np.floor(self.train_fraction * rows.size))
            if n_train < 1 or n_train >= rows.size:
                continue
            train, test = rows[:n_train], rows[n_train:]
            out.append(
                WindowSplit(
                    index=i,
                    window=win,
                    train_idx=train,
                    test_idx=test,
                    train_range=DateRange(ts[train[0]], ts[test[0]]),
                    test_range=DateRange(ts[test[0]], win.end),
                )
            )
        return out

    def to_json(self) -> dict:
        return {
            "window_months": self.window_months,
            "stride_months": self.stride_months,
            "train_fraction": self.train_fraction,
            "windows": [w.to_json() for w in self.windows],
        }

    def to_json_str(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def rolling_windows(
    start: date,
    end: date,
    window_months: int = 30,
    stride_months: int = 6,
    train_fraction: float = 0.8,
) -> WindowSchedule:
    """Month-aligned windows covering [start, end] inclusive of end's month.

    Window i spans months [start + i*stride, start + i*stride + window);
    only windows that fit wholly inside the range are generated, giving
    floor((total - window) / stride) + 1 of them.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError("train_fraction must lie in (0, 1)")
    if window_months < 1 or stride_months < 1:
        raise ConfigError("window_months and stride_months must be >= 1")
    total_months = _month_index(end) - _month_index(start) + 1
    if total_months < window_months:
        raise ScheduleError(
            f"range of {total_months} months is shorter than one {window_months}-month window"
        )
    m0 = _month_index(start)
    n_windows = (total_months - window_months) // stride_months + 1
    windows = tuple(
        DateRange(_month_start(m0 + i * stride_months), _month_start(m0 + i * stride_months + window_months))
        for i in range(n_windows)
    )
    return WindowSchedule(
        windows=windows,
        window_months=window_months,
        stride_months=stride_months,
        train_fraction=train_fraction,
    )


# Fixed subperiods marked by distinct economic cycles; the endpoints are
# hard-coded by design (see module docs).
SUBPERIODS: dict[str, DateRange] = {
    "All": DateRange(date(2009, 1, 1), date(2022, 1, 1)),
    "EconomicExpansion": DateRange(date(2009, 1, 1), date(2012, 1, 1)),
    "EconomicStagnation": DateRange(date(2014, 1, 1), date(2017, 1, 1)),
    "Covid": DateRange(date(2019, 1, 1), date(2022, 1, 1)),
}

SUBPERIOD_LABELS = {
    "All": "All (2009-2021)",
    "EconomicExpansion": "Economic Expansion (2009-2011)",
    "EconomicStagnation": "Economic Stagnation (2014-2016)",
    "Covid": "Covid (2019-2021)",
}


@dataclass(frozen=True)
class SubperiodSpec:
    name: str
    range: DateRange

    def __post_init__(self):
        if self.name not in SUBPERIODS:
            raise ConfigError(f"unknown subperiod {self.name!r}; expected one of {sorted(SUBPERIODS)}")
        if self.range != SUBPERIODS[self.name]:
            raise ConfigError(f"subperiod {self.name!r} must cover {SUBPERIODS[self.name]}")

    @classmethod
    def named(cls, name: str) -> "SubperiodSpec":
        if name not in SUBPERIODS:
            raise ConfigError(f"unknown subperiod {name!r}; expected one of {sorted(SUBPERIODS)}")
        return cls(name=name, range=SUBPERIODS[name])


def subperiod_split(
    spec: SubperiodSpec,
    timestamps: Sequence[date],
    train_fraction: float = 0.8,
) -> tuple[np.ndarray, np.ndarray]:
    """Single chronological split of the rows inside the subperiod.

    Returns (train_idx, test_idx) with floor(train_fraction * n) rows in
    train.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError("train_fraction must lie in (0, 1)")
    rows = np.array([i for i, t in enumerate(timestamps) if t in spec.range], dtype=int)
    if rows.size < 2:
        raise ScheduleError(f"subperiod {spec.name} holds {rows.size} rows; need at least 2")
    n_train = int(np.floor(train_fraction * rows.size))
    n_train = max(1, min(n_train, rows.size - 1))
    return rows[:n_train], rows[n_train:]
