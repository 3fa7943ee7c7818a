import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from salesfc.errors import LengthError
from salesfc.trend_model import (TrendConfig, fit_trend_model, forecast_totals,
                                 place_changepoints)

LINE_ONLY = dict(weekly_order=0, yearly_order=0)


def test_exact_line_recovered():
    t = np.arange(1, 101)
    y = 2.0 * (t - 1) + 3  # the time axis starts at 0 on day 1
    fit = fit_trend_model(y, TrendConfig(ridge_lambda=0.0))
    assert fit.k == pytest.approx(2, abs=1e-8)
    assert fit.m == pytest.approx(3, abs=1e-8)
    assert np.abs(fit.deltas).max() < 1e-8
    assert np.abs(fit.fourier[7.0]).max() < 1e-8
    G = forecast_totals(fit, 101, 28)
    np.testing.assert_allclose(G, 2.0 * (np.arange(101, 129) - 1) + 3, atol=1e-6)


def test_weekly_sine():
    t = np.arange(1, 141)
    y = 5 + 2 * np.sin(2 * np.pi * t / 7)
    fit = fit_trend_model(y)
    a, b = fit.fourier[7.0][0]
    assert np.hypot(a, b) == pytest.approx(2, abs=1e-3)
    assert abs(fit.final_slope) < 1e-3
    G = forecast_totals(fit, 141, 28)
    assert np.corrcoef(G[:-7], G[7:])[0, 1] > 0.99


def test_slope_change():
    t = np.arange(100, dtype=float)
    y = np.where(t < 50, t, 50 + 3 * (t - 50))
    fit = fit_trend_model(y, TrendConfig(**LINE_ONLY))
    assert np.sqrt(np.mean((fit.fitted - y) ** 2)) < 0.1


def test_all_zero_series():
    fit = fit_trend_model(np.zeros(60))
    np.testing.assert_array_equal(forecast_totals(fit, 61, 28), 0.0)


def test_forecast_floored_at_zero():
    y = 100 - 2.0 * np.arange(60)
    fit = fit_trend_model(y, TrendConfig(**LINE_ONLY, ridge_lambda=0))
    assert (forecast_totals(fit, 61, 28) >= 0).all()


def test_too_short():
    with pytest.raises(LengthError):
        fit_trend_model(np.ones(13))


def test_yearly_terms_only_for_long_series():
    assert [p for p, _ in TrendConfig().periods(399)] == [7.0]
    assert [p for p, _ in TrendConfig().periods(400)] == [7.0, 365.25]


def test_changepoints_in_first_80_percent():
    cps = place_changepoints(np.arange(1, 101), 10, 0.8)
    assert len(cps) == 10
    assert cps.min() > 1 and cps.max() < 80


def test_normal_equations_solved():
    rng = np.random.default_rng(0)
    y = rng.poisson(20, 200).astype(float)
    fit = fit_trend_model(y, TrendConfig(holidays={30: "X", 100: "X", 150: "Y"}))
    assert fit.normal_residual < 1e-8
    assert set(fit.holiday_effects) == {"X", "Y"}


def test_holiday_effect_and_future_holidays():
    y = np.full(140, 50.0)
    y[[20, 90]] += 30
    fit = fit_trend_model(y, TrendConfig(holidays={21: "H", 91: "H"}))
    assert fit.holiday_effects["H"] == pytest.approx(30, abs=1e-6)
    G = forecast_totals(fit, 141, 28, holidays={150: "H"})
    assert G[150 - 141] - G[149 - 141] == pytest.approx(30, abs=1e-4)


def test_affine_beyond_last_changepoint():
    rng = np.random.default_rng(1)
    y = np.cumsum(rng.normal(1, 1, 120))
    fit = fit_trend_model(y, TrendConfig(**LINE_ONLY))
    G = forecast_totals(fit, 121, 28)
    assert np.abs(np.diff(G, 2)).max() < 1e-9


def test_coefficients_dump(tmp_path):
    fit = fit_trend_model(np.arange(60, dtype=float))
    fit.to_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "name,value" and lines[1].startswith("k,")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.1, 50))
def test_linear_in_observations(seed, alpha):
    y = np.random.default_rng(seed).poisson(10, 70).astype(float)
    cfg = TrendConfig(ridge_lambda=0.0)
    a, b = fit_trend_model(y, cfg), fit_trend_model(alpha * y, cfg)
    np.testing.assert_allclose(alpha * a.fitted, b.fitted, rtol=1e-7, atol=1e-7 * alpha)
    assert b.k == pytest.approx(alpha * a.k, rel=1e-6, abs=1e-7 * alpha)


def test_deterministic():
    y = np.random.default_rng(3).poisson(10, 90).astype(float)
    a, b = fit_trend_model(y), fit_trend_model(y)
    assert a.coefficients() == b.coefficients()
