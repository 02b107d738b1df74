import numpy as np
import pytest

from fxcast.errors import MetricError
from fxcast.metrics import ForecastSeries, mae, nrmse


def fs(y, yhat):
    return ForecastSeries(y=np.asarray(y, float), yhat=np.asarray(yhat, float))


def test_nrmse_perfect_forecast_is_zero():
    assert nrmse(fs([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])) == 0.0


def test_nrmse_hand_computed_unit_errors():
    # RMSE 1 over actuals with mean |y| = 2
    assert nrmse(fs([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])) == pytest.approx(0.5, abs=1e-12)


def test_nrmse_hand_computed_signed_actuals():
    assert nrmse(fs([2.0, -2.0], [0.0, 0.0])) == pytest.approx(1.0, abs=1e-12)


def test_nrmse_all_zero_actuals_rejected():
    with pytest.raises(MetricError):
        nrmse(fs([0.0, 0.0], [1.0, 2.0]))


def test_mae_perfect_forecast_is_zero():
    assert mae(fs([5.0, 6.0], [5.0, 6.0])) == 0.0


def test_mae_hand_computed():
    assert mae(fs([0.0, 0.0], [1.0, -3.0])) == pytest.approx(2.0, abs=1e-12)


def test_nrmse_scale_invariant_and_mae_homogeneous(rng):
    for _ in range(100):
        n = int(rng.integers(2, 40))
        y = rng.normal(size=n)
        if np.abs(y).sum() == 0:
            y[0] = 1.0
        yhat = y + rng.normal(size=n)
        c = float(rng.uniform(0.1, 50.0))
        base_nrmse = nrmse(fs(y, yhat))
        base_mae = mae(fs(y, yhat))
        assert nrmse(fs(c * y, c * yhat)) == pytest.approx(base_nrmse, rel=1e-10)
        assert mae(fs(c * y, c * yhat)) == pytest.approx(c * base_mae, rel=1e-10)
        assert mae(fs(-c * y, -c * yhat)) == pytest.approx(c * base_mae, rel=1e-10)


def test_series_validation():
    with pytest.raises(MetricError):
        ForecastSeries(y=np.array([1.0, 2.0]), yhat=np.array([1.0]))
    with pytest.raises(MetricError):
        ForecastSeries(y=np.array([]), yhat=np.array([]))
    with pytest.raises(MetricError):
        ForecastSeries(y=np.array([1.0]), yhat=np.array([1.0]), timestamps=[])
