#!/usr/bin/env python3
"""
MCP server exposing anytime-valid mean/variance tests.

Tools return plain text. Invalid input is reported as an "Error ..." message
rather than raised, so a client always gets a readable answer.
"""

from typing import List, Optional

from fastmcp import FastMCP

from eprocess import (
    DEFAULT_THRESHOLDS,
    Agrapa,
    EGree,
    EMixture,
    Grapa,
    evidence_label,
    first_crossing,
    run_eprocess,
)
from evidence import Hypothesis, MeanVarSpec, ShapeClass, TwoSided, evaluate
from pcombine import e_batch, fisher_combine, p_batch, simes_combine


# Initialize MCP server
mcp = FastMCP("meanvar-evidence")

MAX_OBSERVATIONS = 100_000

STRATEGIES = {
    "emixture": EMixture,
    "egree": EGree,
    "grapa": Grapa,
    "agrapa": Agrapa,
}

SHAPE_NOTES = {
    ShapeClass.PLAIN: "only E[X] <= mu and Var(X) <= sigma^2",
    ShapeClass.SYMMETRIC: "X is also symmetric about its mean",
    ShapeClass.UNIMODAL: "X is also unimodal",
    ShapeClass.UNIMODAL_SYMMETRIC: "X is also unimodal and symmetric",
}


def _fmt(value: float) -> str:
    return format(float(value), ".12g")


@mcp.tool()
def compute_evidence(
    x: float,
    mu: float = 0.0,
    sigma: float = 1.0,
    shape: str = "plain",
    mu_lower: Optional[float] = None,
    mu_upper: Optional[float] = None,
) -> str:
    """
    Compute the e-value and p-value of one observation.

    Tests H: E[X] <= mu and Var(X) <= sigma^2 (or E[X] in [mu_lower, mu_upper]
    when both interval ends are given, plain shape only).

    Args:
        x: The observation
        mu: Mean bound under the null (default: 0)
        sigma: Standard deviation bound under the null (default: 1)
        shape: plain, symmetric, unimodal or us (unimodal-symmetric)
        mu_lower: Optional lower end of a two-sided mean interval
        mu_upper: Optional upper end of a two-sided mean interval

    Returns:
        e-value, p-value and a verbal evidence label
    """
    try:
        if (mu_lower is None) != (mu_upper is None):
            raise ValueError("mu_lower and mu_upper must be given together")
        parsed = ShapeClass.parse(shape)
        if mu_lower is not None:
            hypothesis = Hypothesis(MeanVarSpec(mu_upper, sigma), parsed, TwoSided(mu_lower, mu_upper))
            null = f"E[X] in [{_fmt(mu_lower)}, {_fmt(mu_upper)}], Var(X) <= {_fmt(sigma)}^2"
        else:
            hypothesis = Hypothesis(MeanVarSpec(mu, sigma), parsed)
            null = f"E[X] <= {_fmt(mu)}, Var(X) <= {_fmt(sigma)}^2"
        evidence = evaluate(x, hypothesis)
    except Exception as e:
        return f"Error computing evidence: {str(e)}"

    output = [f"Evidence for x = {_fmt(x)}"]
    output.append(f"Null: {null} ({parsed.value}: {SHAPE_NOTES[parsed]})")
    output.append("-" * 80)
    output.append(f"e-value: {_fmt(evidence.e)}")
    output.append(f"p-value: {_fmt(evidence.p)}")
    output.append(f"Evidence against the null: {evidence_label(evidence.e)}")
    return "\n".join(output)


@mcp.tool()
def combine_pvalues(
    values: List[float],
    method: str = "fisher",
    mu: float = 0.0,
    sigma: float = 1.0,
    shape: str = "plain",
) -> str:
    """
    Combine evidence from a fixed sample.

    Args:
        values: p-values for fisher and simes, raw observations for ebatch and pbatch
        method: fisher, simes, ebatch or pbatch
        mu: Mean bound for the batch methods (default: 0)
        sigma: Standard deviation bound for the batch methods (default: 1)
        shape: Shape class for the batch methods; only symmetry is used

    Returns:
        The combined p-value or batch e-value/p-value
    """
    try:
        method = method.strip().lower()
        if method == "fisher":
            value, kind = fisher_combine(values), "p-value"
        elif method == "simes":
            value, kind = simes_combine(values), "p-value"
        elif method in ("ebatch", "pbatch"):
            spec = MeanVarSpec(mu, sigma)
            parsed = ShapeClass.parse(shape)
            if method == "ebatch":
                value, kind = e_batch(values, spec, parsed), "e-value"
            else:
                value, kind = p_batch(values, spec, parsed), "p-value"
        else:
            raise ValueError(f"unknown method {method!r}; use fisher, simes, ebatch or pbatch")
    except Exception as e:
        return f"Error combining values: {str(e)}"

    return f"{method} over {len(values)} values: {kind} = {_fmt(value)}"


@mcp.tool(name="run_eprocess")
def run_eprocess_tool(
    observations: List[float],
    mu: float = 0.0,
    sigma: float = 1.0,
    shape: str = "plain",
    strategy: str = "egree",
    thresholds: Optional[List[float]] = None,
) -> str:
    """
    Run a sequential e-process over observations in order.

    The null is rejected at level alpha the first time the wealth reaches 1/alpha,
    whenever the data are inspected.

    Args:
        observations: Data in arrival order (at most 100000 values)
        mu: Mean bound under the null (default: 0)
        sigma: Standard deviation bound under the null (default: 1)
        shape: plain, symmetric, unimodal or us
        strategy: emixture, egree, grapa or agrapa (GRAPA variants need data in [0, 1])
        thresholds: Rejection thresholds, each > 1 (default: 2, 5, 10, 20)

    Returns:
        First crossing index per threshold, final and peak wealth
    """
    try:
        if not observations:
            raise ValueError("at least one observation is required")
        if len(observations) > MAX_OBSERVATIONS:
            raise ValueError(f"at most {MAX_OBSERVATIONS} observations are accepted, got {len(observations)}")
        key = strategy.strip().lower()
        if key not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}; use {', '.join(STRATEGIES)}")
        hypothesis = Hypothesis(MeanVarSpec(mu, sigma), ShapeClass.parse(shape))
        state = run_eprocess(observations, hypothesis, STRATEGIES[key]())
        report = first_crossing(state.trajectory, thresholds or DEFAULT_THRESHOLDS)
    except Exception as e:
        return f"Error running e-process: {str(e)}"

    output = [f"{key} e-process over {state.t} observations"]
    output.append(f"{'Threshold':<12} {'First crossing':<15}")
    output.append("-" * 30)
    for level, index in report.rows():
        output.append(f"{_fmt(level):<12} {'-' if index is None else index:<15}")
    output.append("-" * 30)
    output.append(f"Final wealth: {_fmt(state.wealth)}")
    output.append(f"Peak wealth: {_fmt(state.max_wealth)} ({evidence_label(state.max_wealth)} evidence)")
    return "\n".join(output)


@mcp.tool()
def list_methods() -> str:
    """
    List the shape classes, betting strategies and combination methods.

    Returns:
        A short reference of accepted parameter values
    """
    output = ["Shape classes:\n"]
    for shape, note in SHAPE_NOTES.items():
        output.append(f"  {shape.value:<12} {note}")
    output.append("\nBetting strategies (run_eprocess):\n")
    output.append(f"  {'emixture':<12} average over a fixed grid of bets 0.01..0.20")
    output.append(f"  {'egree':<12} empirical growth-optimal bet, capped at 1/2")
    output.append(f"  {'grapa':<12} growth-optimal bet on X - mu, data in [0, 1]")
    output.append(f"  {'agrapa':<12} Taylor approximation of grapa")
    output.append("\nCombination methods (combine_pvalues):\n")
    output.append(f"  {'fisher':<12} Fisher combination of p-values")
    output.append(f"  {'simes':<12} Simes combination of p-values")
    output.append(f"  {'ebatch':<12} e-value of the sample mean")
    output.append(f"  {'pbatch':<12} p-value of the sample mean")
    return "\n".join(output)


if __name__ == "__main__":
    # Run the MCP server
    mcp.run()
