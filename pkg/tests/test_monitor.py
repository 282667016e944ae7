"""
Tests for price ingestion, loss computation and regime-change detection.

Run with:
    uv run pytest tests/test_monitor.py -v
"""
import math
from datetime import date, timedelta

import numpy as np
import pytest

from eprocess import EGree, EMixture, run_eprocess
from evidence import Hypothesis, ShapeClass
from monitor import (
    DataFormatError,
    LossSeries,
    NullEstimate,
    PriceSeries,
    detect,
    estimate_null,
    load_prices,
    restrict,
    to_losses,
    write_prices,
)
from simharness import NL, replicate_rng

START = date(2020, 1, 1)


def days(n: int, start: date = START):
    return tuple(start + timedelta(days=k) for k in range(n))


def write_csv(path, text: str):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_two_rows(tmp_path):
    path = write_csv(tmp_path / "p.csv", "date,close\n2020-01-02,100\n2020-01-03,90\n")
    series = load_prices(path)
    assert series.dates == (date(2020, 1, 2), date(2020, 1, 3))
    assert series.prices == (100.0, 90.0)


def test_load_sorts_rows(tmp_path):
    text = "date,close\n2020-01-05,103\n2020-01-02,100\n2020-01-03,101\n"
    series = load_prices(write_csv(tmp_path / "p.csv", text))
    assert series.dates == (date(2020, 1, 2), date(2020, 1, 3), date(2020, 1, 5))
    assert series.prices == (100.0, 101.0, 103.0)


def test_load_custom_columns(tmp_path):
    text = "Day,Open,Adj Close\n2020-01-02,1,100.5\n2020-01-03,1,99.5\n"
    series = load_prices(write_csv(tmp_path / "p.csv", text), "Day", "Adj Close")
    assert series.prices == (100.5, 99.5)


@pytest.mark.parametrize(
    "text,message",
    [
        ("date,close\n2020-01-02,100\n2020-01-03,0\n", "line 3"),
        ("date,close\n2020-01-02,100\n2020-01-03,-5\n", "line 3"),
        ("date,close\n2020-01-02,abc\n2020-01-03,90\n", "line 2"),
        ("date,close\n2020-13-02,100\n2020-01-03,90\n", "line 2"),
        ("date,close\n2020-01-02,100\n2020-01-03,\n", "line 3"),
        ("date,close\n2020-01-02,100\n\n2020-01-03,90\n", "line 3: empty row"),
        ("date,close\n2020-01-02,100\n2020-01-03,90\n\n2020-01-04,95\n", "line 4: empty row"),
        ("date,close\n2020-01-02,100\n2020-01-03,90\n2020-01-02,95\n", "duplicate date"),
        ("day,close\n2020-01-02,100\n2020-01-03,90\n", "missing column"),
        ("date,close\n2020-01-02,100\n", "at least 2 rows"),
    ],
)
def test_load_rejects_malformed_files(tmp_path, text, message):
    with pytest.raises(DataFormatError, match=message):
        load_prices(write_csv(tmp_path / "p.csv", text))


def test_write_then_load_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    prices = tuple(float(v) for v in 100.0 * np.exp(np.cumsum(rng.normal(0, 0.01, 250))))
    series = PriceSeries(dates=days(250), prices=prices)
    path = tmp_path / "round_trip.csv"
    write_prices(series, path)
    assert load_prices(path) == series


def test_price_series_validation():
    with pytest.raises(ValueError):
        PriceSeries(dates=days(2), prices=(100.0, 0.0))
    with pytest.raises(ValueError):
        PriceSeries(dates=(START, START), prices=(100.0, 90.0))
    with pytest.raises(ValueError):
        PriceSeries(dates=days(1), prices=(100.0,))


def test_to_losses_sign_convention():
    falling = to_losses(PriceSeries(dates=days(2), prices=(100.0, 90.0)))
    assert falling.losses[0] == pytest.approx(0.10)
    assert falling.dates == (days(2)[1],)
    rising = to_losses(PriceSeries(dates=days(2), prices=(100.0, 110.0)))
    assert rising.losses[0] == pytest.approx(-0.10)
    flat = to_losses(PriceSeries(dates=days(5), prices=(50.0,) * 5))
    assert flat.losses == (0.0,) * 4


def test_log_losses():
    losses = to_losses(PriceSeries(dates=days(2), prices=(100.0, 90.0)), log_losses=True)
    assert losses.losses[0] == pytest.approx(-math.log(0.9))


def test_restrict_is_inclusive():
    losses = LossSeries(dates=days(10), losses=tuple(float(k) for k in range(10)))
    window = restrict(losses, days(10)[2], days(10)[5])
    assert window.losses == (2.0, 3.0, 4.0, 5.0)
    assert len(restrict(losses, None, days(10)[1])) == 2
    assert len(restrict(losses, days(10)[8], None)) == 2


def test_estimate_null_two_points():
    estimate = estimate_null(LossSeries(dates=days(2), losses=(0.01, 0.03)))
    assert estimate.mu_hat == pytest.approx(0.02)
    assert estimate.sigma_hat == pytest.approx(math.sqrt(0.0002))
    assert estimate.count == 2


def test_estimate_null_errors():
    with pytest.raises(ValueError, match="zero variance"):
        estimate_null(LossSeries(dates=days(3), losses=(0.01, 0.01, 0.01)))
    with pytest.raises(ValueError, match="at least 2"):
        estimate_null(LossSeries(dates=days(3), losses=(0.01, 0.02, 0.03)), days(3)[2], None)


def test_detect_without_deviation_never_crosses():
    estimate = NullEstimate(mu_hat=0.001, sigma_hat=0.01, window=(None, None), count=100)
    losses = LossSeries(dates=days(50), losses=(0.001,) * 50)
    result = detect(losses, estimate, EGree(), ShapeClass.PLAIN)
    assert result.report.crossing_index == (None, None, None, None)
    assert all(row[2] is None for row in result.rows())
    assert max(result.log_wealth) <= 0.0


def test_detect_matches_fold_of_updates():
    rng = np.random.default_rng(17)
    losses = LossSeries(dates=days(120), losses=tuple(float(v) for v in rng.normal(0.004, 0.012, 120)))
    estimate = NullEstimate(mu_hat=-0.001, sigma_hat=0.012, window=(None, None), count=500)
    for strategy, shape in [(EGree(), ShapeClass.SYMMETRIC), (EMixture(), ShapeClass.UNIMODAL)]:
        result = detect(losses, estimate, strategy, shape)
        state = run_eprocess(losses.losses, Hypothesis(estimate.spec, shape), strategy)
        np.testing.assert_allclose(result.log_wealth, np.log(state.trajectory), rtol=1e-12, atol=1e-12)
        indices = [i for i in result.report.crossing_index if i is not None]
        assert indices == sorted(indices)
        for _, index, day in result.rows():
            if index is not None:
                assert day == losses.dates[index - 1]


@pytest.mark.slow
def test_regime_shift_is_detected():
    """400 points from the fitted regime, then the mean moves up by 2 sigma_hat."""
    scale = 0.01
    detected = 0
    runs = 200
    for run in range(runs):
        rng = replicate_rng(515, run)
        history = scale * NL(0.0, 1.0).sample(400, rng)
        estimate = estimate_null(LossSeries(dates=days(400), losses=tuple(history)))
        shifted = scale * NL(0.0, 1.0).sample(500, rng) + estimate.mu_hat + 2.0 * estimate.sigma_hat
        window = LossSeries(dates=days(500, START + timedelta(days=400)), losses=tuple(shifted))
        result = detect(window, estimate, EGree(), ShapeClass.PLAIN, thresholds=[20.0])
        detected += result.report.crossing_index[0] is not None
    assert detected / runs >= 0.95
