"""
MCP stdio server exposing the certificate, competitor, boundary-condition and
moment-killing tools. `ldlab serve` runs it.
"""

import asyncio
import json
import logging
from typing import Any, Callable, Dict, List

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import Tool, TextContent

from ldlab.tools.bc_energies import get_bc_energies
from ldlab.tools.certificates import batch_certificates, get_certificate
from ldlab.tools.competitor import get_lattice_competitor
from ldlab.tools.moment_kill import run_moment_kill

logger = logging.getLogger("ldlab")

TOOL_HANDLERS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "optimize_certificate": get_certificate,
    "batch_certificates": batch_certificates,
    "build_competitor": get_lattice_competitor,
    "bc_energies": get_bc_energies,
    "moment_kill": run_moment_kill,
}

_THETA = {"type": "number", "description": "Background density theta in (0, 1]."}
_E_STAR = {"type": ["number", "null"], "description": "Reference energy per volume; ball ansatz if omitted.",
           "default": None}
_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}


def tool_definitions() -> List[Tool]:
    """The tools served by ldlab."""
    return [
        Tool(
            name="optimize_certificate",
            description="Optimize the lower-bound certificate (omega, R) for a background density",
            inputSchema={
                "type": "object",
                "properties": {"theta": _THETA, "e_star": _E_STAR},
                "required": ["theta"]
            }
        ),
        Tool(
            name="batch_certificates",
            description="Optimize lower-bound certificates for several background densities in one request",
            inputSchema={
                "type": "object",
                "properties": {
                    "requests": {
                        "type": "array",
                        "description": "List of certificate requests",
                        "items": {
                            "type": "object",
                            "properties": {"theta": _THETA, "e_star": _E_STAR},
                            "required": ["theta"]
                        }
                    }
                },
                "required": ["requests"]
            }
        ),
        Tool(
            name="build_competitor",
            description="Build the cubic lattice competitor and optionally evaluate its energy",
            inputSchema={
                "type": "object",
                "properties": {
                    "theta": {"type": "number", "description": "Background density theta in (0, 1/2]."},
                    "L": {"type": "number", "description": "Box side with theta^(1/3) L >= 10."},
                    "near_cutoff": {"type": "integer", "description": "Near/far cutoff M.", "default": 10},
                    "offset": dict(_VECTOR, description="Ball offset in units of the cell side."),
                    "evaluate": {"type": "boolean", "description": "Evaluate the energy decomposition.",
                                 "default": False},
                    "e_star": _E_STAR
                },
                "required": ["theta", "L"]
            }
        ),
        Tool(
            name="bc_energies",
            description="Energies of a seeded random neutral set under the four boundary conditions",
            inputSchema={
                "type": "object",
                "properties": {
                    "theta": _THETA,
                    "n": {"type": "integer", "description": "Cells per box side."},
                    "L": {"type": ["number", "null"], "description": "Box side; defaults to n.", "default": None},
                    "seed": {"type": "integer", "description": "Seed of the random set.", "default": 0},
                    "smoothing": {"type": "number", "description": "Noise smoothing in cells.", "default": 1.5}
                },
                "required": ["theta", "n"]
            }
        ),
        Tool(
            name="moment_kill",
            description="Cancel charge, dipole and quadrupole of an ellipsoid against a fitted cuboid cell",
            inputSchema={
                "type": "object",
                "properties": {
                    "semi_axes": dict(_VECTOR, description="The ellipsoid semi-axes."),
                    "l0": {"type": "number", "description": "Base cell side, at least 5 diameters."},
                    "center": dict(_VECTOR, description="Ellipsoid center."),
                    "rotation": {"type": "array", "description": "3x3 rotation matrix.",
                                 "items": _VECTOR, "minItems": 3, "maxItems": 3}
                },
                "required": ["semi_axes", "l0"]
            }
        ),
    ]


def format_result(result: Dict[str, Any]) -> str:
    """Text returned to the MCP client for a tool response."""
    if result.get("status") in ["success", "partial_success"]:
        return json.dumps(result.get("result", {}), indent=2, sort_keys=True, default=str)
    if "result" in result:
        # A batch where every item failed still carries the per-item errors.
        return json.dumps(result["result"], indent=2, sort_keys=True, default=str)
    error_msg = result.get("error", {}).get("message", "Unknown error")
    return f"Error: {error_msg}"


def dispatch(name: str, arguments: Dict[str, Any]) -> str:
    """Run a tool by name and format its response."""
    handler = TOOL_HANDLERS.get(name)
    if handler is None:
        logger.error(f"Unknown tool: {name}")
        return f"Error: Unknown tool '{name}'"
    result = handler(**(arguments or {}))
    if result.get("status") == "error":
        logger.error(f"Error in {name}: {result.get('error', {}).get('message', 'see per-item errors')}")
    return format_result(result)


async def serve_async() -> None:
    """Serve tool_definitions() over stdio until the client disconnects."""
    server = Server("ldlab")

    @server.list_tools()
    async def list_tools() -> List[Tool]:
        return tool_definitions()

    @server.call_tool()
    async def call_tool(name: str, arguments: Dict[str, Any]) -> List[TextContent]:
        logger.info(f"Tool call: {name}, arguments: {arguments}")
        try:
            # Tools run on a worker thread.
            text = await asyncio.to_thread(dispatch, name, arguments)
        except Exception as e:
            logger.error(f"Error handling tool call: {name}, error: {e}")
            text = f"Error: {str(e)}"
        return [TextContent(type="text", text=text)]

    try:
        options = server.create_initialization_options()
        async with stdio_server() as (read_stream, write_stream):
            await server.run(read_stream, write_stream, options, raise_exceptions=True)
    except Exception as e:
        logger.error(f"Error running server: {e}")
        raise


def serve() -> None:
    """
    Synchronous wrapper for the async serve function.
    This is used by the 'ldlab serve' command.
    """
    asyncio.run(serve_async())
