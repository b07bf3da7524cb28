"""
Main entry point for ldlab.
This module defines the main function behind the 'ldlab' command.
"""

import argparse
import logging
import sys
from typing import List, Optional

from ldlab import __version__
from ldlab.harness import load_config, run_sweep, verify_suite
from ldlab.shared.data_types import ErrorCode, LdlabError
from ldlab.shared.utils import parse_cli_overrides

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    """Command-line parser; configuration overrides are collected separately."""
    parser = argparse.ArgumentParser(
        prog="ldlab",
        description="ldlab - upper and lower bounds for the liquid drop model with a neutralizing background"
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}"
    )

    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging"
    )

    commands = parser.add_subparsers(dest="command", required=True)
    run = commands.add_parser("run", help="Run a theta sweep and write results.csv and report.json")
    run.add_argument("--config", required=True, help="Path to a 'key = value' configuration file")
    verify = commands.add_parser("verify", help="Run the invariant checks and write verify.json")
    verify.add_argument("--config", default=None, help="Path to a 'key = value' configuration file")
    verify.add_argument("--perimeter-fault", type=int, default=0, help=argparse.SUPPRESS)
    commands.add_parser("serve", help="Serve the ldlab tools over MCP stdio")
    return parser


def run_command(argv: Optional[List[str]] = None) -> int:
    """
    Execute one command and return its exit code.

    0 on success, 1 if an invariant assertion fails, 2 for configuration
    and output errors.
    """
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    log_level = logging.DEBUG if args.debug else logging.INFO
    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    logger = logging.getLogger("ldlab")

    if args.command == "serve":
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        from ldlab.server import serve
        serve()
        return EXIT_OK

    try:
        config = load_config(args.config, parse_cli_overrides(extra))
        if args.command == "run":
            report = run_sweep(config)
            return report.exit_code
        report = verify_suite(config, perimeter_fault=args.perimeter_fault)
        return EXIT_OK if report["passed"] else EXIT_ASSERTION
    except LdlabError as e:
        if e.code in (ErrorCode.CONFIG_ERROR, ErrorCode.OUTPUT_ERROR):
            logger.error(f"{e.code.value}: {e.message}")
            print(f"Error: {e.message}", file=sys.stderr)
            return EXIT_CONFIG
        raise


def main() -> None:
    """
    Parse command line arguments and run the requested ldlab command.
    This function is the entry point for the ldlab command.
    """
    try:
        sys.exit(run_command())
    except KeyboardInterrupt:
        print("\nShutdown requested.")
        sys.exit(0)
    except Exception as e:
        print(f"Error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
