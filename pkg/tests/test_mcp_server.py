"""
In-memory tests for the meanvar-evidence MCP server.

They use FastMCP's in-memory Client, so no transport or network is involved.

Run with:
    uv run pytest tests/test_mcp_server.py -v
"""
import re

import pytest
from fastmcp import Client

from mcp_server import mcp


@pytest.mark.asyncio
async def test_server_ping():
    """The server initializes and responds to ping requests."""
    async with Client(mcp) as client:
        result = await client.ping()
        assert result is True, "Server should respond to ping"


@pytest.mark.asyncio
async def test_list_tools():
    """
    The server exposes exactly 4 tools:
    - compute_evidence: e-value and p-value of one observation
    - combine_pvalues: fixed-sample combination methods
    - run_eprocess: sequential e-process over a list of observations
    - list_methods: reference of accepted parameter values
    """
    async with Client(mcp) as client:
        tools = await client.list_tools()
        tool_names = {tool.name for tool in tools}

        assert len(tools) == 4, f"Expected 4 tools, found {len(tools)}"
        assert tool_names == {"compute_evidence", "combine_pvalues", "run_eprocess", "list_methods"}


@pytest.mark.asyncio
async def test_compute_evidence_unimodal_symmetric():
    async with Client(mcp) as client:
        result = await client.call_tool("compute_evidence", {"x": 3.0, "shape": "us"})
        content = result.content[0].text

        assert "e-value: 18" in content
        assert f"p-value: {format(2 / 81, '.12g')}" in content
        assert "very strong" not in content, "18 is strong, not very strong evidence"
        assert "strong" in content


@pytest.mark.asyncio
async def test_compute_evidence_two_sided():
    async with Client(mcp) as client:
        result = await client.call_tool(
            "compute_evidence", {"x": 5.0, "mu_lower": -1.0, "mu_upper": 1.0}
        )
        content = result.content[0].text

        assert "E[X] in [-1, 1]" in content
        assert "e-value: 16" in content
        assert "p-value: 0.0625" in content


@pytest.mark.asyncio
async def test_compute_evidence_reports_errors():
    async with Client(mcp) as client:
        result = await client.call_tool("compute_evidence", {"x": 1.0, "sigma": -1.0})
        content = result.content[0].text
        assert content.startswith("Error computing evidence:")

        result = await client.call_tool("compute_evidence", {"x": 1.0, "mu_lower": 0.0})
        assert "together" in result.content[0].text


@pytest.mark.asyncio
async def test_combine_pvalues():
    async with Client(mcp) as client:
        result = await client.call_tool("combine_pvalues", {"values": [0.1, 0.1], "method": "fisher"})
        content = result.content[0].text
        match = re.search(r"p-value = ([0-9.e-]+)", content)
        assert match, f"Unexpected output: {content}"
        assert abs(float(match.group(1)) - 0.0560517) < 1e-6

        result = await client.call_tool(
            "combine_pvalues", {"values": [0.0, 1.0, 0.5, 0.5], "method": "ebatch", "shape": "symmetric"}
        )
        assert "e-value = 2" in result.content[0].text


@pytest.mark.asyncio
async def test_combine_pvalues_rejects_unknown_method():
    async with Client(mcp) as client:
        result = await client.call_tool("combine_pvalues", {"values": [0.5], "method": "stouffer"})
        assert result.content[0].text.startswith("Error combining values:")


@pytest.mark.asyncio
async def test_run_eprocess_crosses_thresholds():
    async with Client(mcp) as client:
        result = await client.call_tool(
            "run_eprocess", {"observations": [4.0] * 10, "strategy": "egree", "thresholds": [2, 20]}
        )
        content = result.content[0].text

        assert "egree e-process over 10 observations" in content
        assert re.search(r"^2\s+2\s*$", content, re.MULTILINE), content
        assert "Peak wealth" in content


@pytest.mark.asyncio
async def test_run_eprocess_reports_errors():
    async with Client(mcp) as client:
        result = await client.call_tool("run_eprocess", {"observations": [0.5], "strategy": "grapa"})
        assert result.content[0].text.startswith("Error running e-process:")

        result = await client.call_tool("run_eprocess", {"observations": [], "strategy": "egree"})
        assert "at least one observation" in result.content[0].text


@pytest.mark.asyncio
async def test_list_methods():
    async with Client(mcp) as client:
        result = await client.call_tool("list_methods", {})
        content = result.content[0].text

        for name in ("plain", "symmetric", "unimodal", "us", "emixture", "egree", "grapa", "agrapa",
                     "fisher", "simes", "ebatch", "pbatch"):
            assert name in content, f"{name} should be listed"
