"""
Closed-form p-variables and e-variables for one observation.

Each hypothesis fixes an upper bound on the conditional mean (mu) and on the
conditional variance (sigma^2), optionally together with a shape constraint
(symmetry, unimodality or both). All formulas are stated for the standardized
observation z = (x - mu) / sigma and its baseline e-value E0 = max(z, 0)^2.

    shape               e-value     p-value
    plain               E0          P0 = 1 / (1 + E0)
    symmetric           2 E0        min{1 / (2 E0), P0}
    unimodal            E0          max{4/9 P0, (4 P0 - 1) / 3}
    unimodal-symmetric  2 E0        2 / (9 E0)            if E0 >= 4/3
                                    (3 - sqrt(3 E0)) / 6  if 0 < E0 < 4/3
                                    1                     if E0 = 0

The same functions serve hypotheses stated with equalities
(E[X] = mu, Var(X) = sigma^2).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

# Breakpoints of the piecewise formulas, in z units
SYMMETRIC_BREAK = 1.0
UNIMODAL_BREAK = math.sqrt(5.0 / 3.0)
UNIMODAL_SYMMETRIC_BREAK = math.sqrt(4.0 / 3.0)


class InvalidObservationError(ValueError):
    """Raised for NaN or infinite observations."""


class ShapeClass(str, Enum):
    PLAIN = "plain"
    SYMMETRIC = "symmetric"
    UNIMODAL = "unimodal"
    UNIMODAL_SYMMETRIC = "us"

    @property
    def is_symmetric(self) -> bool:
        return self in (ShapeClass.SYMMETRIC, ShapeClass.UNIMODAL_SYMMETRIC)

    @classmethod
    def parse(cls, value: Union[str, "ShapeClass"]) -> "ShapeClass":
        if isinstance(value, ShapeClass):
            return value
        aliases = {
            "plain": cls.PLAIN,
            "h": cls.PLAIN,
            "symmetric": cls.SYMMETRIC,
            "s": cls.SYMMETRIC,
            "unimodal": cls.UNIMODAL,
            "u": cls.UNIMODAL,
            "us": cls.UNIMODAL_SYMMETRIC,
            "unimodal-symmetric": cls.UNIMODAL_SYMMETRIC,
            "unimodal_symmetric": cls.UNIMODAL_SYMMETRIC,
        }
        try:
            return aliases[str(value).strip().lower()]
        except KeyError:
            raise ValueError(
                f"unknown shape {value!r}; expected one of plain, symmetric, unimodal, us"
            ) from None


@dataclass(frozen=True)
class MeanVarSpec:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValueError(f"mu and sigma must be finite, got mu={self.mu}, sigma={self.sigma}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class OneSidedUpper:
    """Null bounds the mean from above: E[X] <= mu."""


@dataclass(frozen=True)
class TwoSided:
    """Null confines the mean to [mu_lower, mu_upper]."""

    mu_lower: float
    mu_upper: float

    def __post_init__(self):
        if not (math.isfinite(self.mu_lower) and math.isfinite(self.mu_upper)):
            raise ValueError("two-sided bounds must be finite")
        if self.mu_lower > self.mu_upper:
            raise ValueError(
                f"invalid interval: mu_lower={self.mu_lower} > mu_upper={self.mu_upper}"
            )


Sidedness = Union[OneSidedUpper, TwoSided]


@dataclass(frozen=True)
class Hypothesis:
    spec: MeanVarSpec
    shape: ShapeClass = ShapeClass.PLAIN
    side: Sidedness = field(default_factory=OneSidedUpper)

    def __post_init__(self):
        if isinstance(self.side, TwoSided) and self.shape is not ShapeClass.PLAIN:
            raise ValueError(
                "two-sided hypotheses only support the plain shape; "
                "use eprocess.init_two_sided_pair to exploit shape constraints"
            )

    @property
    def is_two_sided(self) -> bool:
        return isinstance(self.side, TwoSided)


@dataclass(frozen=True)
class Evidence:
    e: float
    p: float

    def __post_init__(self):
        if not self.e >= 0:
            raise ValueError(f"e-value must be nonnegative, got {self.e}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p-value must lie in [0, 1], got {self.p}")


def _check_z(z: float) -> float:
    z = float(z)
    if math.isnan(z):
        raise InvalidObservationError("invalid observation: z is NaN")
    return z


def standardize(x: float, spec: MeanVarSpec) -> float:
    """Return (x - mu) / sigma."""
    x = float(x)
    if not math.isfinite(x):
        raise InvalidObservationError(f"invalid observation: {x}")
    return (x - spec.mu) / spec.sigma


def baseline_e(z: float) -> float:
    """E0 = max(z, 0)^2."""
    z = _check_z(z)
    return z * z if z > 0 else 0.0


def e_value(z: float, shape: ShapeClass) -> float:
    e0 = baseline_e(z)
    if ShapeClass.parse(shape).is_symmetric:
        return 2.0 * e0
    return e0


def p_value_from_e0(e0: float, shape: ShapeClass) -> float:
    """p-variable written as a function of the baseline e-value E0."""
    shape = ShapeClass.parse(shape)
    if e0 == 0:
        return 1.0
    if math.isinf(e0):
        return 0.0
    p0 = 1.0 / (1.0 + e0)

    if shape is ShapeClass.PLAIN:
        return p0
    if shape is ShapeClass.SYMMETRIC:
        return min(1.0 / (2.0 * e0), p0)
    if shape is ShapeClass.UNIMODAL:
        return max(4.0 / 9.0 * p0, (4.0 * p0 - 1.0) / 3.0)
    # unimodal-symmetric
    if e0 >= 4.0 / 3.0:
        return 2.0 / (9.0 * e0)
    return (3.0 - math.sqrt(3.0 * e0)) / 6.0


def p_value(z: float, shape: ShapeClass) -> float:
    return p_value_from_e0(baseline_e(z), shape)


def e_value_two_sided(x: float, mu_lower: float, mu_upper: float, sigma: float) -> float:
    """E = ((x - mu_upper)_+^2 + (x - mu_lower)_-^2) / sigma^2."""
    TwoSided(mu_lower, mu_upper)
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    x = float(x)
    if not math.isfinite(x):
        raise InvalidObservationError(f"invalid observation: {x}")

    above = max(x - mu_upper, 0.0)
    below = max(mu_lower - x, 0.0)
    return (above * above + below * below) / (sigma * sigma)


def evaluate(x: float, hypothesis: Hypothesis) -> Evidence:
    """
    Compute the e-value and p-value of one observation under a hypothesis.

    Two-sided hypotheses use the two-sided e-variable and its calibrated
    p-value min(1, 1/e) (Chebyshev's bound when mu_lower == mu_upper).

    Raises:
        InvalidObservationError: If x is not finite
    """
    spec = hypothesis.spec
    if isinstance(hypothesis.side, TwoSided):
        e = e_value_two_sided(x, hypothesis.side.mu_lower, hypothesis.side.mu_upper, spec.sigma)
        p = 1.0 if e <= 1.0 else 1.0 / e
        return Evidence(e=e, p=p)

    z = standardize(x, spec)
    return Evidence(e=e_value(z, hypothesis.shape), p=p_value(z, hypothesis.shape))


def e_values(xs, hypothesis: Hypothesis) -> np.ndarray:
    """Vectorised e-values for a sequence of observations."""
    xs = np.asarray(xs, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise InvalidObservationError("invalid observation: sequence contains NaN or inf")
    spec = hypothesis.spec
    if isinstance(hypothesis.side, TwoSided):
        above = np.maximum(xs - hypothesis.side.mu_upper, 0.0)
        below = np.maximum(hypothesis.side.mu_lower - xs, 0.0)
        return (above**2 + below**2) / spec.sigma**2
    z = np.maximum((xs - spec.mu) / spec.sigma, 0.0)
    factor = 2.0 if hypothesis.shape.is_symmetric else 1.0
    return factor * z * z


def quantile_bound_us(alpha: float) -> float:
    """
    Largest (1 - alpha)-quantile over unimodal-symmetric laws with mean 0 and variance <= 1.

    For alpha in (1/2, 1) the bound is 0, attained by the point mass at 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha <= 1.0 / 6.0:
        return math.sqrt(2.0 / (9.0 * alpha))
    if alpha <= 0.5:
        return math.sqrt(3.0) * (1.0 - 2.0 * alpha)
    return 0.0


def quantile_bound_unimodal(alpha: float) -> float:
    """Largest (1 - alpha)-quantile over unimodal laws with mean 0 and variance <= 1."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    tail = max(4.0 / (9.0 * alpha) - 1.0, 0.0)
    return max(math.sqrt(tail), math.sqrt((3.0 - 3.0 * alpha) / (1.0 + 3.0 * alpha)))
