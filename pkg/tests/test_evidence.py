"""
Tests for the closed-form e-values and p-values of one observation.

Run with:
    uv run pytest tests/test_evidence.py -v
"""
import math

import numpy as np
import pytest

from evidence import (
    SYMMETRIC_BREAK,
    UNIMODAL_BREAK,
    UNIMODAL_SYMMETRIC_BREAK,
    Evidence,
    Hypothesis,
    InvalidObservationError,
    MeanVarSpec,
    ShapeClass,
    TwoSided,
    baseline_e,
    e_value,
    e_value_two_sided,
    e_values,
    evaluate,
    p_value,
    p_value_from_e0,
    quantile_bound_unimodal,
    quantile_bound_us,
    standardize,
)

ALL_SHAPES = list(ShapeClass)
Z_GRID = np.linspace(-5.0, 30.0, 3501)


@pytest.mark.parametrize(
    "shape,expected_e,expected_p",
    [
        (ShapeClass.PLAIN, 9.0, 0.1),
        (ShapeClass.SYMMETRIC, 18.0, 1.0 / 18.0),
        (ShapeClass.UNIMODAL, 9.0, 2.0 / 45.0),
        (ShapeClass.UNIMODAL_SYMMETRIC, 18.0, 2.0 / 81.0),
    ],
)
def test_standardized_three(shape, expected_e, expected_p):
    """An observation three standard deviations above the mean bound."""
    assert abs(e_value(3.0, shape) - expected_e) < 1e-12
    assert abs(p_value(3.0, shape) - expected_p) < 1e-12


def test_standardize():
    spec = MeanVarSpec(mu=0.0, sigma=1.0)
    assert standardize(3.0, spec) == 3.0
    assert standardize(5.0, MeanVarSpec(mu=1.0, sigma=2.0)) == 2.0
    assert standardize(1.7, MeanVarSpec(mu=1.7, sigma=0.3)) == 0.0


@pytest.mark.parametrize("x", [math.nan, math.inf, -math.inf])
def test_standardize_rejects_non_finite(x):
    with pytest.raises(InvalidObservationError, match="invalid observation"):
        standardize(x, MeanVarSpec(0.0, 1.0))


@pytest.mark.parametrize("shape", ALL_SHAPES)
def test_nonpositive_z_carries_no_evidence(shape):
    assert e_value(-1.0, shape) == 0.0
    assert p_value(-1.0, shape) == 1.0
    assert p_value(0.0, shape) == 1.0


@pytest.mark.parametrize(
    "shape,z,expected",
    [
        (ShapeClass.SYMMETRIC, SYMMETRIC_BREAK, 0.5),
        (ShapeClass.UNIMODAL, UNIMODAL_BREAK, 1.0 / 6.0),
        (ShapeClass.UNIMODAL_SYMMETRIC, UNIMODAL_SYMMETRIC_BREAK, 1.0 / 6.0),
    ],
)
def test_values_at_breakpoints(shape, z, expected):
    assert abs(p_value(z, shape) - expected) < 1e-12


def test_branch_continuity():
    """Both branches of each piecewise formula agree at the breakpoint."""
    e0 = SYMMETRIC_BREAK**2
    assert abs(1.0 / (2.0 * e0) - 1.0 / (1.0 + e0)) < 1e-12

    p0 = 1.0 / (1.0 + UNIMODAL_BREAK**2)
    assert abs(4.0 / 9.0 * p0 - (4.0 * p0 - 1.0) / 3.0) < 1e-12

    e0 = UNIMODAL_SYMMETRIC_BREAK**2
    assert abs(2.0 / (9.0 * e0) - (3.0 - math.sqrt(3.0 * e0)) / 6.0) < 1e-12

    for shape, z in [
        (ShapeClass.SYMMETRIC, SYMMETRIC_BREAK),
        (ShapeClass.UNIMODAL, UNIMODAL_BREAK),
        (ShapeClass.UNIMODAL_SYMMETRIC, UNIMODAL_SYMMETRIC_BREAK),
    ]:
        left, right = p_value(z * (1 - 1e-14), shape), p_value(z * (1 + 1e-14), shape)
        assert abs(left - right) < 1e-12, f"{shape.value} jumps at z={z}"


@pytest.mark.parametrize("shape", ALL_SHAPES)
def test_range_and_monotonicity(shape):
    ps = np.array([p_value(z, shape) for z in Z_GRID])
    es = np.array([e_value(z, shape) for z in Z_GRID])
    assert np.all((ps >= 0) & (ps <= 1))
    assert np.all(es >= 0)
    assert np.all(np.diff(ps) <= 1e-15), "p-values must not increase with z"
    assert np.all(np.diff(es) >= 0), "e-values must not decrease with z"


@pytest.mark.parametrize("shape", ALL_SHAPES)
def test_p_at_most_calibrated_e(shape):
    for z in Z_GRID:
        e = e_value(z, shape)
        bound = 1.0 if e <= 1 else 1.0 / e
        assert p_value(z, shape) <= bound + 1e-15, f"z={z}"


def test_ordering_of_p_values():
    for z in np.linspace(UNIMODAL_BREAK, 40.0, 500):
        p0 = p_value(z, ShapeClass.PLAIN)
        ps = p_value(z, ShapeClass.SYMMETRIC)
        pu = p_value(z, ShapeClass.UNIMODAL)
        pus = p_value(z, ShapeClass.UNIMODAL_SYMMETRIC)
        assert p0 > ps > pu > pus, f"ordering fails at z={z}"


def test_unimodal_symmetric_is_smallest():
    for z in Z_GRID[Z_GRID > 0]:
        pus = p_value(z, ShapeClass.UNIMODAL_SYMMETRIC)
        assert pus <= min(p_value(z, ShapeClass.UNIMODAL), p_value(z, ShapeClass.SYMMETRIC)) + 1e-15


def test_plain_p_is_reciprocal_of_one_plus_e():
    for z in Z_GRID:
        assert p_value(z, ShapeClass.PLAIN) == pytest.approx(1.0 / (1.0 + baseline_e(z)), abs=1e-15)


def test_p_value_from_e0_extremes():
    for shape in ALL_SHAPES:
        assert p_value_from_e0(0.0, shape) == 1.0
        assert p_value_from_e0(math.inf, shape) == 0.0


def test_e_value_two_sided():
    assert e_value_two_sided(3.0, 0.0, 0.0, 1.0) == 9.0
    assert e_value_two_sided(2.0, -1.0, 1.0, 1.0) == 1.0
    assert e_value_two_sided(0.5, 0.0, 1.0, 2.0) == 0.0
    assert e_value_two_sided(-3.0, -1.0, 1.0, 2.0) == 1.0


def test_two_sided_reduces_to_squared_deviation():
    mu, sigma = 0.3, 1.7
    for x in np.linspace(-10.0, 10.0, 1000):
        expected = (x - mu) ** 2 / sigma**2
        assert abs(e_value_two_sided(x, mu, mu, sigma) - expected) <= 1e-12 * max(1.0, expected)


def test_two_sided_rejects_inverted_interval():
    with pytest.raises(ValueError, match="invalid interval"):
        e_value_two_sided(0.0, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        TwoSided(2.0, 1.0)


def test_quantile_bound_us():
    assert quantile_bound_us(1.0 / 6.0) == pytest.approx(math.sqrt(4.0 / 3.0), abs=1e-12)
    assert quantile_bound_us(0.5) == pytest.approx(0.0, abs=1e-15)
    assert quantile_bound_us(1.0 / 18.0) == pytest.approx(2.0, abs=1e-12)
    assert quantile_bound_us(0.75) == 0.0
    for alpha in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            quantile_bound_us(alpha)


def test_quantile_bound_us_inverts_p_value():
    for alpha in np.linspace(0.001, 0.499, 200):
        z = quantile_bound_us(alpha)
        assert abs(p_value(z, ShapeClass.UNIMODAL_SYMMETRIC) - alpha) < 1e-10


def test_quantile_bound_unimodal():
    assert quantile_bound_unimodal(1.0 / 6.0) == pytest.approx(math.sqrt(5.0 / 3.0), abs=1e-12)
    # first term vanishes; second is sqrt((3 - 4/3) / (1 + 4/3))
    assert quantile_bound_unimodal(4.0 / 9.0) == pytest.approx(math.sqrt(5.0 / 7.0), abs=1e-12)
    assert quantile_bound_unimodal(1.0 - 1e-9) < 1e-4
    with pytest.raises(ValueError):
        quantile_bound_unimodal(1.0)


def test_shape_parse_aliases():
    assert ShapeClass.parse("us") is ShapeClass.UNIMODAL_SYMMETRIC
    assert ShapeClass.parse("Unimodal-Symmetric") is ShapeClass.UNIMODAL_SYMMETRIC
    assert ShapeClass.parse("S") is ShapeClass.SYMMETRIC
    assert ShapeClass.parse(ShapeClass.UNIMODAL) is ShapeClass.UNIMODAL
    with pytest.raises(ValueError, match="unknown shape"):
        ShapeClass.parse("bimodal")


def test_spec_and_hypothesis_validation():
    with pytest.raises(ValueError):
        MeanVarSpec(0.0, 0.0)
    with pytest.raises(ValueError):
        MeanVarSpec(math.nan, 1.0)
    with pytest.raises(ValueError, match="plain shape"):
        Hypothesis(MeanVarSpec(0.0, 1.0), ShapeClass.SYMMETRIC, TwoSided(-1.0, 1.0))
    with pytest.raises(ValueError):
        Evidence(e=1.0, p=1.5)


def test_evaluate_one_sided_and_two_sided():
    evidence = evaluate(3.0, Hypothesis(MeanVarSpec(0.0, 1.0), ShapeClass.UNIMODAL_SYMMETRIC))
    assert evidence.e == pytest.approx(18.0)
    assert evidence.p == pytest.approx(2.0 / 81.0)

    two_sided = Hypothesis(MeanVarSpec(1.0, 1.0), ShapeClass.PLAIN, TwoSided(-1.0, 1.0))
    assert evaluate(0.0, two_sided) == Evidence(e=0.0, p=1.0)
    far = evaluate(5.0, two_sided)
    assert far.e == pytest.approx(16.0)
    assert far.p == pytest.approx(1.0 / 16.0)


def test_vectorised_e_values_match_scalar():
    xs = np.linspace(-3.0, 6.0, 37)
    for shape in ALL_SHAPES:
        hypothesis = Hypothesis(MeanVarSpec(0.5, 1.5), shape)
        expected = [evaluate(x, hypothesis).e for x in xs]
        np.testing.assert_allclose(e_values(xs, hypothesis), expected, rtol=1e-14, atol=0)
    with pytest.raises(InvalidObservationError):
        e_values([0.0, math.nan], Hypothesis(MeanVarSpec(0.0, 1.0)))


def test_quantile_bound_unimodal_inverts_p_value():
    for alpha in np.linspace(0.001, 0.999, 200):
        z = quantile_bound_unimodal(alpha)
        assert abs(p_value(z, ShapeClass.UNIMODAL) - alpha) < 1e-10
