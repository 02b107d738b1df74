from datetime import date

import numpy as np
import pytest

from fxcast.data import Frequency, align_mixed_frequency
from fxcast.synth import synthesize


@pytest.fixture(scope="session")
def synth_series():
    """Two years of synthetic data with the planted oil signal."""
    return synthesize(seed=0, start=date(2019, 1, 1), end=date(2020, 12, 31))


@pytest.fixture(scope="session")
def daily_table(synth_series):
    return align_mixed_frequency(list(synth_series.values()), Frequency.DAILY)


@pytest.fixture(scope="session")
def weekly_table(synth_series):
    return align_mixed_frequency(list(synth_series.values()), Frequency.WEEKLY)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
