"""
Fixed-sample combination methods.

P-Fisher and P-Simes merge per-observation p-values; they stay valid here
because each p-value is valid conditionally on the past. E-batch and P-batch
apply the single-observation results to the sample mean T, whose mean is at
most mu and whose variance is at most sigma^2 / n when the observations are
independent. Unimodality of the observations does not carry over to T, so the
batch methods only use symmetry.
"""

from typing import Sequence

import numpy as np
from scipy import special

from evidence import MeanVarSpec, ShapeClass, p_value_from_e0

P_FLOOR = 1e-300


def as_pvector(ps: Sequence[float]) -> np.ndarray:
    values = np.asarray(ps, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("at least one p-value is required")
    if np.any(np.isnan(values)) or np.any(values < 0) or np.any(values > 1):
        raise ValueError("p-values must lie in [0, 1]")
    return values


def chi2_sf(x: float, df: int) -> float:
    """
    Survival function of the chi-square distribution with even df.

    Evaluated as the regularized upper incomplete gamma Q(df/2, x/2), which uses
    the power series below a + 1 and the continued fraction above it.
    """
    if int(df) != df or df <= 0 or int(df) % 2:
        raise ValueError(f"df must be a positive even integer, got {df}")
    if not x >= 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0:
        return 1.0
    return float(special.gammaincc(int(df) / 2.0, x / 2.0))


def fisher_combine(ps: Sequence[float]) -> float:
    """P = 1 - F_{chi2, 2n}(-2 sum log P_i)."""
    values = np.clip(as_pvector(ps), P_FLOOR, 1.0)
    statistic = -2.0 * float(np.sum(np.log(values)))
    # log(1) is exactly 0, but guard against a -0.0 statistic
    return chi2_sf(max(statistic, 0.0), 2 * values.size)


def simes_combine(ps: Sequence[float]) -> float:
    """P = min_i (n / i) P_(i), capped at 1."""
    values = np.sort(as_pvector(ps))
    n = values.size
    ranks = np.arange(1, n + 1)
    return float(min(1.0, np.min(n * values / ranks)))


def _batch_e0(xs: Sequence[float], spec: MeanVarSpec) -> float:
    values = np.asarray(xs, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("batch methods need at least one observation")
    if not np.all(np.isfinite(values)):
        raise ValueError("batch observations must be finite")
    excess = max(float(np.mean(values)) - spec.mu, 0.0)
    return values.size * excess * excess / (spec.sigma * spec.sigma)


def e_batch(xs: Sequence[float], spec: MeanVarSpec, shape: ShapeClass) -> float:
    """n (T - mu)_+^2 / sigma^2, doubled under symmetry."""
    e0 = _batch_e0(xs, spec)
    return 2.0 * e0 if ShapeClass.parse(shape).is_symmetric else e0


def p_batch(xs: Sequence[float], spec: MeanVarSpec, shape: ShapeClass) -> float:
    """(1 + E0)^-1, or min{(2 E0)^-1, (1 + E0)^-1} under symmetry."""
    e0 = _batch_e0(xs, spec)
    batch_shape = ShapeClass.SYMMETRIC if ShapeClass.parse(shape).is_symmetric else ShapeClass.PLAIN
    return p_value_from_e0(e0, batch_shape)

