"""
Sequential e-processes built by betting.

Wealth starts at M_0 = 1 and is multiplied at each step by a nonnegative
factor with conditional mean at most one under the null:

    e-mixture / e-GREE   1 - lambda_i + lambda_i * E_i
    GRAPA / aGRAPA       1 + lambda_i * (X_i - mu)

Every lambda_i is computed from observations strictly before X_i, so the
wealth process is a nonnegative supermartingale under the null and, by
Ville's inequality, P(sup_t M_t >= 1/alpha) <= alpha.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from evidence import (
    Hypothesis,
    InvalidObservationError,
    MeanVarSpec,
    OneSidedUpper,
    ShapeClass,
    TwoSided,
    e_value,
    e_value_two_sided,
    standardize,
)

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(round(0.01 * k, 2) for k in range(1, 21))
DEFAULT_CAP = 0.5
DEFAULT_C = 0.5
DEFAULT_THRESHOLDS = (2.0, 5.0, 10.0, 20.0)

PHI_RATIO = 2 / (1 + math.sqrt(5))
GOLDEN_TOL = 1e-9


@dataclass(frozen=True)
class EMixture:
    """Average of constant-lambda e-processes over a grid."""

    grid: Tuple[float, ...] = DEFAULT_GRID

    def __post_init__(self):
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ValueError("EMixture grid must be nonempty")
        if any(not 0.0 <= v < 1.0 for v in grid):
            raise ValueError(f"EMixture grid values must lie in [0, 1), got {grid}")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class EGree:
    """Empirical growth-rate maximising bet, capped."""

    cap: float = DEFAULT_CAP

    def __post_init__(self):
        if not 0.0 < self.cap < 1.0:
            raise ValueError(f"EGree cap must lie in (0, 1), got {self.cap}")


@dataclass(frozen=True)
class Grapa:
    """Bets on X - mu for data in [0, 1]; exact=False uses the Taylor plug-in."""

    c: float = DEFAULT_C
    exact: bool = True
    one_sided: bool = False

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"GRAPA c must lie in (0, 1], got {self.c}")


@dataclass(frozen=True)
class Agrapa:
    """Approximate GRAPA."""

    c: float = DEFAULT_C
    one_sided: bool = False

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"aGRAPA c must lie in (0, 1], got {self.c}")


BettingStrategy = Union[EMixture, EGree, Grapa, Agrapa]


def _bets_on_raw_data(strategy: BettingStrategy) -> bool:
    return isinstance(strategy, (Grapa, Agrapa))


@dataclass
class EProcessState:
    hypothesis: Hypothesis
    strategy: BettingStrategy
    t: int = 0
    wealth: float = 1.0
    per_lambda_wealth: List[float] = field(default_factory=list)
    # past e-values (EGree) or past raw observations (GRAPA variants)
    history: List[float] = field(default_factory=list)
    # lambda_i actually used at step i (EGree and GRAPA variants)
    lambdas: List[float] = field(default_factory=list)
    trajectory: List[float] = field(default_factory=list)
    # running moments of raw observations for aGRAPA
    running_mean: float = 0.0
    running_m2: float = 0.0

    @property
    def max_wealth(self) -> float:
        return max(self.trajectory) if self.trajectory else 1.0


@dataclass(frozen=True)
class DetectionReport:
    thresholds: Tuple[float, ...]
    # 1-based first index with M_t >= threshold, None when never crossed
    crossing_index: Tuple[Optional[int], ...]

    def rows(self) -> List[Tuple[float, Optional[int]]]:
        return list(zip(self.thresholds, self.crossing_index))

    def detected(self, threshold: float) -> bool:
        for level, index in self.rows():
            if level == threshold:
                return index is not None
        raise KeyError(f"threshold {threshold} not in report")


def evidence_label(e: float) -> str:
    """Jeffreys-style verbal scale for an e-value."""
    if e >= 10**1.5:
        return "very strong"
    if e >= 10:
        return "strong"
    if e >= math.sqrt(10):
        return "substantial"
    return "none"


def _grapa_mu(hypothesis: Hypothesis) -> float:
    mu = hypothesis.spec.mu
    if not 0.0 < mu < 1.0:
        raise ValueError(
            f"GRAPA strategies need data supported on [0, 1] and mu in (0, 1), got mu={mu}"
        )
    return mu


def eprocess_init(hypothesis: Hypothesis, strategy: BettingStrategy) -> EProcessState:
    """
    Start an e-process at wealth 1.

    Raises:
        ValueError: If a GRAPA strategy is paired with a mean outside (0, 1)
            or with a two-sided hypothesis
    """
    if _bets_on_raw_data(strategy):
        _grapa_mu(hypothesis)
        if hypothesis.is_two_sided:
            raise ValueError("GRAPA strategies test a single mean; use a one-sided hypothesis")

    state = EProcessState(hypothesis=hypothesis, strategy=strategy)
    if isinstance(strategy, EMixture):
        state.per_lambda_wealth = [1.0] * len(strategy.grid)
    return state


def _log_growth(lam: float, e_arr: np.ndarray) -> float:
    return float(np.mean(np.log1p(lam * (e_arr - 1.0))))


def gree_lambda(history: Sequence[float], cap: float = DEFAULT_CAP) -> float:
    """
    Bet maximising the empirical log-growth of past e-values, capped.

    The objective lambda -> mean(log(1 - lambda + lambda * E_j)) is concave, so
    the sign of its derivative at 0 and at cap decides boundary optima; an
    interior optimum is located by golden-section search.

    Raises:
        ValueError: If history is empty
    """
    e_arr = np.asarray(history, dtype=float)
    if e_arr.size == 0:
        raise ValueError("gree_lambda needs at least one past e-value")
    if not 0.0 < cap < 1.0:
        raise ValueError(f"cap must lie in (0, 1), got {cap}")

    if np.any(np.isinf(e_arr)):
        return float(cap)
    d = e_arr - 1.0
    if np.mean(d) <= 0:
        return 0.0
    if np.mean(d / (1.0 + cap * d)) >= 0:
        return float(cap)

    lo, hi = 0.0, float(cap)
    x1 = hi - PHI_RATIO * (hi - lo)
    x2 = lo + PHI_RATIO * (hi - lo)
    f1 = _log_growth(x1, e_arr)
    f2 = _log_growth(x2, e_arr)
    while hi - lo > GOLDEN_TOL:
        if f2 > f1:
            lo = x1
            x1, f1 = x2, f2
            x2 = lo + PHI_RATIO * (hi - lo)
            f2 = _log_growth(x2, e_arr)
        else:
            hi = x2
            x2, f2 = x1, f1
            x1 = hi - PHI_RATIO * (hi - lo)
            f1 = _log_growth(x1, e_arr)
    return 0.5 * (lo + hi)


def _grapa_bounds(mu: float, c: float, one_sided: bool) -> Tuple[float, float]:
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    if not 0.0 < c <= 1.0:
        raise ValueError(f"c must lie in (0, 1], got {c}")
    lower = 0.0 if one_sided else -c / (1.0 - mu)
    return lower, c / mu


def agrapa_lambda(
    n_prev: int,
    mean_prev: float,
    var_prev: float,
    mu: float,
    c: float = DEFAULT_C,
    one_sided: bool = False,
) -> float:
    """Taylor plug-in (mean - mu) / (var + (mean - mu)^2), clipped to [-c/(1-mu), c/mu]."""
    lower, upper = _grapa_bounds(mu, c, one_sided)
    if n_prev == 0:
        return 0.0
    diff = mean_prev - mu
    if diff == 0:
        return 0.0
    raw = diff / (var_prev + diff * diff)
    return min(max(raw, lower), upper)


def grapa_lambda_exact(
    history: Sequence[float],
    mu: float,
    c: float = DEFAULT_C,
    one_sided: bool = False,
) -> float:
    """
    Root of mean((X_j - mu) / (1 + lambda (X_j - mu))) = 0, clipped to the bet range.

    The left-hand side is decreasing in lambda, so when it keeps one sign over
    the clip range the corresponding endpoint is returned.
    """
    lower, upper = _grapa_bounds(mu, c, one_sided)
    x_arr = np.asarray(history, dtype=float)
    if x_arr.size == 0:
        raise ValueError("grapa_lambda_exact needs at least one past observation")
    if np.any((x_arr < 0) | (x_arr > 1)):
        raise ValueError("GRAPA observations must lie in [0, 1]")

    d = x_arr - mu
    if not np.any(d):
        return 0.0
    if c == 1.0:
        # keep 1 + lambda * d away from 0 at the endpoints
        lower *= 1.0 - 1e-12
        upper *= 1.0 - 1e-12

    def score(lam: float) -> float:
        return float(np.mean(d / (1.0 + lam * d)))

    if score(lower) <= 0:
        return lower
    if score(upper) >= 0:
        return upper
    return float(optimize.brentq(score, lower, upper, xtol=1e-12))


def _next_lambda(state: EProcessState) -> float:
    strategy = state.strategy
    if isinstance(strategy, EGree):
        return gree_lambda(state.history, strategy.cap) if state.history else 0.0

    mu = state.hypothesis.spec.mu
    if isinstance(strategy, Grapa) and strategy.exact:
        if not state.history:
            return 0.0
        return grapa_lambda_exact(state.history, mu, strategy.c, strategy.one_sided)

    one_sided = strategy.one_sided
    variance = state.running_m2 / state.t if state.t else 0.0
    return agrapa_lambda(state.t, state.running_mean, variance, mu, strategy.c, one_sided)


def _e_of(hypothesis: Hypothesis, x: float) -> float:
    side = hypothesis.side
    if isinstance(side, TwoSided):
        return e_value_two_sided(x, side.mu_lower, side.mu_upper, hypothesis.spec.sigma)
    return e_value(standardize(x, hypothesis.spec), hypothesis.shape)


def eprocess_update(state: EProcessState, x: float) -> Tuple[EProcessState, float]:
    """
    Feed one observation and return the updated state with the new wealth M_t.

    Raises:
        InvalidObservationError: If x is not finite
        ValueError: If a GRAPA strategy receives x outside [0, 1]
    """
    x = float(x)
    if not math.isfinite(x):
        raise InvalidObservationError(f"invalid observation: {x}")
    strategy = state.strategy

    if isinstance(strategy, EMixture):
        e = _e_of(state.hypothesis, x)
        grid = np.asarray(strategy.grid)
        # a zero bet leaves wealth unchanged even when e is infinite
        with np.errstate(invalid="ignore"):
            factors = np.where(grid > 0, 1.0 - grid + grid * e, 1.0)
        wealths = np.asarray(state.per_lambda_wealth) * factors
        state.per_lambda_wealth = wealths.tolist()
        state.wealth = float(np.mean(wealths))

    elif isinstance(strategy, EGree):
        e = _e_of(state.hypothesis, x)
        lam = _next_lambda(state)
        state.lambdas.append(lam)
        state.wealth *= 1.0 if lam == 0 else 1.0 - lam + lam * e
        state.history.append(e)

    else:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"GRAPA observations must lie in [0, 1], got {x}")
        lam = _next_lambda(state)
        state.lambdas.append(lam)
        state.wealth *= 1.0 + lam * (x - state.hypothesis.spec.mu)
        if isinstance(strategy, Grapa) and strategy.exact:
            state.history.append(x)
        # Welford update; population variance is running_m2 / t
        delta = x - state.running_mean
        state.running_mean += delta / (state.t + 1)
        state.running_m2 += delta * (x - state.running_mean)

    state.t += 1
    state.trajectory.append(state.wealth)
    return state, state.wealth


def run_eprocess(
    xs: Sequence[float], hypothesis: Hypothesis, strategy: BettingStrategy
) -> EProcessState:
    """Fold eprocess_update over a sequence of observations."""
    state = eprocess_init(hypothesis, strategy)
    for x in xs:
        eprocess_update(state, x)
    logger.debug(
        "e-process %s finished: t=%d wealth=%.6g max=%.6g",
        type(strategy).__name__,
        state.t,
        state.wealth,
        state.max_wealth,
    )
    return state


def init_two_sided_pair(
    side: TwoSided, sigma: float, shape: ShapeClass, strategy: BettingStrategy
) -> Tuple[EProcessState, EProcessState]:
    """
    Build the two one-sided e-processes whose average tests a mean interval.

    The upper process tests E[X] <= mu_upper, the lower one tests
    E[-X] <= -mu_lower. Any shape class may be used: symmetry and unimodality
    survive the reflection x -> -x.
    """
    if _bets_on_raw_data(strategy):
        raise ValueError("the averaged two-sided construction uses e-variable strategies")
    shape = ShapeClass.parse(shape)
    upper = Hypothesis(MeanVarSpec(side.mu_upper, sigma), shape, OneSidedUpper())
    lower = Hypothesis(MeanVarSpec(-side.mu_lower, sigma), shape, OneSidedUpper())
    return eprocess_init(upper, strategy), eprocess_init(lower, strategy)


def update_two_sided_pair(
    state_upper: EProcessState, state_lower: EProcessState, x: float
) -> float:
    eprocess_update(state_upper, x)
    eprocess_update(state_lower, -float(x))
    return two_sided_avg_process(state_upper, state_lower)


def two_sided_avg_process(state_upper: EProcessState, state_lower: EProcessState) -> float:
    if state_upper.t != state_lower.t:
        raise ValueError(
            f"two-sided components are out of step: t={state_upper.t} vs t={state_lower.t}"
        )
    return 0.5 * (state_upper.wealth + state_lower.wealth)


def first_crossing(trajectory: Sequence[float], thresholds: Sequence[float]) -> DetectionReport:
    """
    First 1-based index at which the trajectory reaches each threshold.

    Thresholds are reported in increasing order, so crossing indices are
    non-decreasing down the report.
    """
    levels = sorted(float(v) for v in thresholds)
    if not levels:
        raise ValueError("at least one threshold is required")
    if any(level <= 1.0 for level in levels):
        raise ValueError(f"thresholds must exceed 1, got {levels}")

    path = np.asarray(trajectory, dtype=float)
    if path.size and (np.any(np.isnan(path)) or np.any(path < 0)):
        raise ValueError("wealth trajectory must be nonnegative")

    running_max = np.maximum.accumulate(path) if path.size else path
    crossings: List[Optional[int]] = []
    for level in levels:
        # searchsorted on the running maximum finds the first index reaching level
        index = int(np.searchsorted(running_max, level, side="left"))
        crossings.append(index + 1 if index < path.size else None)
    return DetectionReport(thresholds=tuple(levels), crossing_index=tuple(crossings))
