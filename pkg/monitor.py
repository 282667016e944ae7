"""
Regime monitoring on daily losses of a price series.

Sign convention: a positive loss is money lost. L_t = -(S_{t+1} - S_t) / S_t,
which is the negative of the usual simple return. The null H(mu_hat, sigma_hat)
is fitted on a historical window and an e-process is run over the losses of a
later testing window; threshold crossings flag that the historical regime no
longer describes the data.
"""

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from eprocess import (
    DEFAULT_THRESHOLDS,
    BettingStrategy,
    DetectionReport,
    first_crossing,
    run_eprocess,
)
from evidence import Hypothesis, MeanVarSpec, ShapeClass

logger = logging.getLogger(__name__)

DEFAULT_DATE_COLUMN = "date"
DEFAULT_PRICE_COLUMN = "close"
NO_DETECTION = "-"


class DataFormatError(ValueError):
    """Malformed price file; the message names the file line."""


@dataclass(frozen=True)
class PriceSeries:
    dates: Tuple[date, ...]
    prices: Tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.prices):
            raise ValueError("dates and prices must have the same length")
        if len(self.prices) < 2:
            raise ValueError("a price series needs at least 2 rows")
        if any(not (math.isfinite(p) and p > 0) for p in self.prices):
            raise ValueError("prices must be positive and finite")
        if any(later <= earlier for earlier, later in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")


@dataclass(frozen=True)
class LossSeries:
    # each loss is dated by the later of its two prices
    dates: Tuple[date, ...]
    losses: Tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.losses):
            raise ValueError("dates and losses must have the same length")

    def __len__(self) -> int:
        return len(self.losses)


@dataclass(frozen=True)
class NullEstimate:
    mu_hat: float
    sigma_hat: float
    window: Tuple[Optional[date], Optional[date]]
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"an estimate needs at least 2 observations, got {self.count}")
        if not self.sigma_hat > 0:
            raise ValueError(f"sigma_hat must be positive, got {self.sigma_hat}")

    @property
    def spec(self) -> MeanVarSpec:
        return MeanVarSpec(self.mu_hat, self.sigma_hat)


@dataclass(frozen=True)
class MonitorResult:
    report: DetectionReport
    dates: Tuple[date, ...]
    log_wealth: Tuple[float, ...]

    def crossing_date(self, index: Optional[int]) -> Optional[date]:
        return None if index is None else self.dates[index - 1]

    def rows(self) -> List[Tuple[float, Optional[int], Optional[date]]]:
        return [(level, index, self.crossing_date(index)) for level, index in self.report.rows()]


def _is_blank(value) -> bool:
    return pd.isna(value) or not str(value).strip()


def _parse_date(value: str, line: int) -> date:
    try:
        return date.fromisoformat(value.strip())
    except (AttributeError, ValueError):
        raise DataFormatError(f"line {line}: unparsable date {value!r}") from None


def _parse_price(value: str, line: int) -> float:
    try:
        price = float(value)
    except (TypeError, ValueError):
        raise DataFormatError(f"line {line}: unparsable price {value!r}") from None
    if not (math.isfinite(price) and price > 0):
        raise DataFormatError(f"line {line}: price must be positive, got {value!r}")
    return price


def load_prices(
    path: Union[str, Path],
    date_column: str = DEFAULT_DATE_COLUMN,
    price_column: str = DEFAULT_PRICE_COLUMN,
) -> PriceSeries:
    """
    Load a close-price CSV with a header row.

    Rows are sorted by date (stable). Line numbers in errors count the header
    as line 1.

    Raises:
        DataFormatError: Missing columns, unparsable rows, non-positive prices
            or duplicate dates
    """
    # blank rows are kept so that line numbers match the file
    frame = pd.read_csv(
        path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8"
    )
    missing = [c for c in (date_column, price_column) if c not in frame.columns]
    if missing:
        raise DataFormatError(f"line 1: missing column(s) {', '.join(missing)} in {path}")

    rows = []
    for offset, (raw_date, raw_price) in enumerate(zip(frame[date_column], frame[price_column])):
        line = offset + 2
        if _is_blank(raw_date) and _is_blank(raw_price):
            raise DataFormatError(f"line {line}: empty row")
        rows.append((_parse_date(raw_date, line), _parse_price(raw_price, line), line))

    if len(rows) < 2:
        raise DataFormatError(f"{path}: a price series needs at least 2 rows, got {len(rows)}")

    rows.sort(key=lambda row: row[0])
    for previous, current in zip(rows, rows[1:]):
        if current[0] == previous[0]:
            raise DataFormatError(f"line {current[2]}: duplicate date {current[0].isoformat()}")

    logger.debug("loaded %d prices from %s", len(rows), path)
    return PriceSeries(dates=tuple(r[0] for r in rows), prices=tuple(r[1] for r in rows))


def write_prices(
    series: PriceSeries,
    path: Union[str, Path],
    date_column: str = DEFAULT_DATE_COLUMN,
    price_column: str = DEFAULT_PRICE_COLUMN,
) -> None:
    """Write a price CSV that load_prices reads back exactly."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([date_column, price_column])
        for day, price in zip(series.dates, series.prices):
            writer.writerow([day.isoformat(), repr(float(price))])


def to_losses(series: PriceSeries, log_losses: bool = False) -> LossSeries:
    """Daily fractional losses; log_losses=True uses -log(S_{t+1} / S_t)."""
    prices = np.asarray(series.prices, dtype=float)
    if log_losses:
        losses = -np.log(prices[1:] / prices[:-1])
    else:
        losses = -(prices[1:] - prices[:-1]) / prices[:-1]
    return LossSeries(dates=tuple(series.dates[1:]), losses=tuple(float(v) for v in losses))


def restrict(losses: LossSeries, start: Optional[date] = None, end: Optional[date] = None) -> LossSeries:
    """Losses dated within [start, end]; None leaves that side open."""
    kept = [
        (day, value)
        for day, value in zip(losses.dates, losses.losses)
        if (start is None or day >= start) and (end is None or day <= end)
    ]
    return LossSeries(dates=tuple(d for d, _ in kept), losses=tuple(v for _, v in kept))


def estimate_null(
    losses: LossSeries, start: Optional[date] = None, end: Optional[date] = None
) -> NullEstimate:
    """
    Sample mean and sample standard deviation (denominator n - 1) over a window.

    Raises:
        ValueError: Fewer than 2 observations in the window or zero variance
    """
    window = restrict(losses, start, end)
    values = np.asarray(window.losses, dtype=float)
    if values.size < 2:
        raise ValueError(f"estimation window holds {values.size} observation(s), need at least 2")
    sigma_hat = float(np.std(values, ddof=1))
    if sigma_hat == 0:
        raise ValueError("estimation window has zero variance")
    return NullEstimate(
        mu_hat=float(np.mean(values)),
        sigma_hat=sigma_hat,
        window=(start, end),
        count=int(values.size),
    )


def detect(
    losses: LossSeries,
    estimate: NullEstimate,
    strategy: BettingStrategy,
    shape: ShapeClass = ShapeClass.PLAIN,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> MonitorResult:
    """
    Run the e-process for H(mu_hat, sigma_hat) over the testing-window losses.

    Crossing indices count trading days from the first loss of the window.
    """
    hypothesis = Hypothesis(estimate.spec, ShapeClass.parse(shape))
    state = run_eprocess(losses.losses, hypothesis, strategy)
    report = first_crossing(state.trajectory, thresholds)
    with np.errstate(divide="ignore"):
        log_wealth = tuple(float(v) for v in np.log(np.asarray(state.trajectory, dtype=float)))

    logger.info(
        "monitored %d losses under H(%.6g, %.6g): crossings %s",
        len(losses),
        estimate.mu_hat,
        estimate.sigma_hat,
        report.crossing_index,
    )
    return MonitorResult(report=report, dates=losses.dates, log_wealth=log_wealth)
