# SPDX-License-Identifier: GPL-3.0-or-later
# Copyright (C) 2026 The disagg-planner authors
#
# This file is part of disagg-planner.
#
# disagg-planner is free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later
# version.
#
# disagg-planner is distributed in the hope that it will be useful, but WITHOUT ANY
# WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A
# PARTICULAR PURPOSE. See the GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License along with
# disagg-planner. If not, see <https://www.gnu.org/licenses/>.

"""Capacity planning and decode simulation for model-attention disaggregation."""

import argparse
import asyncio
import difflib
import logging
import re
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

from disagg_planner import validators
from disagg_planner.attention import DTYPES
from disagg_planner.command.commands import command_names_value, get_command_class
from disagg_planner.configuration import get_configuration
from disagg_planner.constants import (
    DOMAIN_ERROR_EXIT_CODE,
    PROGRAM_NAME,
    PROGRAM_VERSION,
    USAGE_ERROR_EXIT_CODE,
)
from disagg_planner.errors import PlannerError

logger = logging.getLogger(__name__)

INVALID_CHOICE = re.compile(r"invalid choice: '([^']*)' \(choose from (.*)\)")
UNRECOGNIZED = re.compile(r"unrecognized arguments: (.*)")


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser adding "did you mean" hints to usage errors."""

    def option_strings(self) -> list[str]:
        options: list[str] = []
        for action in self._actions:
            options.extend(action.option_strings)
            if isinstance(action, argparse._SubParsersAction):  # noqa: SLF001
                for parser in action.choices.values():
                    options.extend(parser.option_strings())
        return options

    def suggestion(self, message: str) -> str:
        if match := INVALID_CHOICE.search(message):
            word = match[1]
            candidates = [c.strip().strip("'") for c in match[2].split(",")]
        elif match := UNRECOGNIZED.search(message):
            word, candidates = match[1].split()[0], self.option_strings()
        else:
            return ""
        if close := difflib.get_close_matches(word, candidates, n=1):
            return f" (did you mean '{close[0]}'?)"
        return ""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(
            USAGE_ERROR_EXIT_CODE,
            f"{self.prog}: error: {message}{self.suggestion(message)}\n",
        )


def set_logging(verbose: int) -> None:
    if verbose == 0:
        level = logging.WARNING
    elif verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG

    logging.basicConfig(level=level)


def add_model_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "-m",
        "--model",
        required=True,
        help="catalog model name or model JSON file",
    )


def add_out_argument(parser: argparse.ArgumentParser, help_text: str) -> None:
    parser.add_argument("-o", "--out", type=Path, help=help_text)


def add_trace_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--trace", type=Path, help="trace CSV file")
    source.add_argument("--profile", help="catalog trace profile to synthesize")
    parser.add_argument(
        "--requests",
        type=validators.positive_int,
        help="synthetic trace length",
    )
    parser.add_argument(
        "--rate",
        type=validators.positive_float,
        help="synthetic arrivals per second",
    )
    parser.add_argument("--seed", type=validators.non_negative_int, default=0)


def add_simulation_arguments(
    parser: argparse.ArgumentParser,
    n_batches: int = 1,
) -> None:
    parser.add_argument(
        "--overlap",
        action="store_true",
        default=False,
        help="send Q early and overlap attention with the KV transfer",
    )
    parser.add_argument(
        "--n-batches",
        type=validators.positive_int,
        default=n_batches,
        help=f"pipelined sub-batches over n-1 replicas (default {n_batches})",
    )
    parser.add_argument(
        "--horizon-s",
        type=validators.positive_float,
        help="stop at this simulated time",
    )
    parser.add_argument("--network", help="network preset, overrides configuration")


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:  # noqa: PLR0915
    """Argument parser definition."""
    parser = ArgumentParser(prog=PROGRAM_NAME, description=__doc__)
    parser.add_argument("--verbose", action="count", help="set verbose mode", default=0)
    parser.add_argument("-c", "--config-file", type=Path)
    parser.add_argument("--catalog", type=Path, help="user catalog JSON file")
    parser.add_argument("--output-dir", type=Path, help="where relative outputs go")
    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"{PROGRAM_NAME} {PROGRAM_VERSION}",
    )

    command_subparser = parser.add_subparsers(dest="command", required=True)
    subparsers = {
        name: command_subparser.add_parser(name, help=help_text)
        for name, help_text in zip(
            command_names_value,
            (
                "roofline time and utilization of decode operators",
                "network bandwidth needed between the pools",
                "requests whose KV cache fits in device memory",
                "check split-and-merge attention against exact attention",
                "cut an operator graph into model slices",
                "rotational staggered pipeline timeline",
                "simulate decoding a trace on one cluster",
                "rank cluster configurations by tokens per dollar",
                "write a synthetic request trace",
            ),
            strict=True,
        )
    }

    # Roofline subparser
    subparser = subparsers["roofline"]
    add_model_argument(subparser)
    subparser.add_argument("-d", "--device", default="H100")
    subparser.add_argument("--count", type=validators.positive_int, default=1)
    subparser.add_argument("-b", "--batch", type=validators.positive_int, default=1)
    subparser.add_argument("-s", "--seq", type=validators.positive_int, default=8192)
    subparser.add_argument(
        "--sweep-batch",
        type=validators.int_list,
        help="comma separated batch sizes, writes plot data",
    )
    add_out_argument(subparser, "JSON result, or CSV plot data with --sweep-batch")

    # Min bandwidth subparser
    subparser = subparsers["min-bandwidth"]
    add_model_argument(subparser)
    subparser.add_argument("-b", "--batch", type=validators.positive_int, default=300)
    subparser.add_argument("-s", "--seq", type=validators.positive_int, default=8192)
    subparser.add_argument(
        "--alpha",
        type=validators.fraction,
        default=0.2,
        help="network time allowed as a share of compute time",
    )
    subparser.add_argument(
        "--dop",
        type=validators.dop,
        action="append",
        help="a,b device counts, repeatable (default 2,4)",
    )
    subparser.add_argument("--compute-device", default="H100")
    subparser.add_argument("--memory-device", default="H20")
    subparser.add_argument(
        "--tm-ms",
        type=validators.positive_float,
        help="measured non-attention time per iteration",
    )
    subparser.add_argument(
        "--ta-ms",
        type=validators.positive_float,
        help="measured attention time per iteration",
    )
    subparser.add_argument("--sweep-batch", type=validators.int_list)
    add_out_argument(subparser, "JSON result, or CSV plot data with --sweep-batch")

    # KV capacity subparser
    subparser = subparsers["kv-capacity"]
    add_model_argument(subparser)
    subparser.add_argument("-d", "--device", default="H100")
    subparser.add_argument("--count", type=validators.positive_int, default=1)
    subparser.add_argument("-s", "--seq", type=validators.positive_int, default=8192)
    subparser.add_argument("--headroom", type=validators.headroom)
    add_out_argument(subparser, "JSON result")

    # Attention check subparser
    subparser = subparsers["attention-check"]
    subparser.add_argument("--d-head", type=validators.positive_int, default=64)
    subparser.add_argument("--heads", type=validators.positive_int, default=8)
    subparser.add_argument("--length", type=validators.positive_int, default=256)
    subparser.add_argument("--splits", type=validators.positive_int, default=4)
    subparser.add_argument("--seed", type=validators.non_negative_int, default=0)
    subparser.add_argument("--trials", type=validators.positive_int, default=100)
    subparser.add_argument("--devices", type=validators.positive_int, default=1)
    subparser.add_argument("--gqa-group", type=validators.positive_int, default=1)
    subparser.add_argument("--dtype", choices=sorted(DTYPES), default="float64")
    subparser.add_argument("--tolerance", type=validators.positive_float, default=1e-6)
    add_out_argument(subparser, "JSON result")

    # Split subparser
    subparser = subparsers["split"]
    subparser.add_argument(
        "-g",
        "--graph",
        default="llama-block",
        help="graph JSON file or bundled graph name",
    )
    subparser.add_argument("-b", "--batch", type=validators.positive_int, default=1)
    add_out_argument(subparser, "slices JSON")

    # Pipeline subparser
    subparser = subparsers["pipeline"]
    subparser.add_argument("-n", "--n", type=validators.positive_int, required=True)
    subparser.add_argument("--tm-ms", type=validators.positive_float, required=True)
    subparser.add_argument("--ta-ms", type=validators.positive_float, required=True)
    subparser.add_argument("--slots", type=validators.positive_int, default=1000)
    subparser.add_argument("--n-slices", type=validators.positive_int, default=1)
    subparser.add_argument(
        "--no-stretch",
        action="store_true",
        default=False,
        help="fail instead of stretching slots for a mismatched attention time",
    )
    add_out_argument(subparser, "timeline CSV")
    subparser.add_argument("--report", type=Path, help="validation report JSON")

    # Simulate subparser
    subparser = subparsers["simulate"]
    add_model_argument(subparser)
    cluster = subparser.add_mutually_exclusive_group(required=True)
    cluster.add_argument("--cluster", type=Path, help="cluster JSON file")
    cluster.add_argument("--dop", type=validators.dop, help="a,b device counts")
    cluster.add_argument(
        "--homogeneous",
        type=validators.positive_int,
        help="tensor-parallel devices of --compute-device",
    )
    subparser.add_argument("--compute-device", default="H100")
    subparser.add_argument("--memory-device", default="H20")
    add_trace_arguments(subparser)
    add_simulation_arguments(subparser)
    add_out_argument(subparser, "metrics JSON")

    # Optimize subparser
    subparser = subparsers["optimize"]
    add_model_argument(subparser)
    subparser.add_argument("--devices", type=Path, help="catalog JSON to search")
    subparser.add_argument("--compute-device", default="H100")
    subparser.add_argument("--memory-device", default="H20")
    subparser.add_argument("--a-max", type=validators.positive_int, default=4)
    subparser.add_argument("--b-max", type=validators.positive_int, default=8)
    subparser.add_argument(
        "--homogeneous-max",
        type=validators.non_negative_int,
        help="largest homogeneous baseline (default --a-max)",
    )
    add_trace_arguments(subparser)
    # Homogeneous baselines still run unpipelined.
    add_simulation_arguments(subparser, n_batches=2)
    add_out_argument(subparser, "plan CSV")
    subparser.add_argument("--plot-data", type=Path, help="tokens per dollar CSV")
    subparser.add_argument("--comparison", type=Path, help="equal-cost JSON")

    # Gen trace subparser
    subparser = subparsers["gen-trace"]
    subparser.add_argument("--profile", help="catalog trace profile")
    subparser.add_argument("--requests", type=validators.positive_int)
    subparser.add_argument("--mean-prompt", type=validators.positive_float)
    subparser.add_argument("--mean-output", type=validators.positive_float)
    subparser.add_argument("--rate", type=validators.positive_float)
    subparser.add_argument("--sigma", type=float)
    subparser.add_argument("--seed", type=validators.non_negative_int, default=0)
    subparser.add_argument("-o", "--out", type=Path, required=True, help="trace CSV")

    args = parser.parse_args(argv)
    check_args(parser, args)
    return args


def check_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Rules spanning several flags."""
    if args.command == "min-bandwidth" and (args.tm_ms is None) != (args.ta_ms is None):
        parser.error("--tm-ms and --ta-ms go together")
    if args.command == "gen-trace" and not args.profile:
        if missing := [
            flag
            for flag, value in (
                ("--requests", args.requests),
                ("--mean-prompt", args.mean_prompt),
                ("--mean-output", args.mean_output),
            )
            if value is None
        ]:
            parser.error(f"without --profile, {', '.join(missing)} are required")
    if args.command == "simulate" and args.cluster and args.network:
        parser.error("--network comes from the cluster file with --cluster")


async def main_async(args: argparse.Namespace) -> None:
    try:
        configuration = get_configuration(
            config_file=args.config_file,
            requested_output_dir=args.output_dir,
            requested_catalog=args.catalog,
        )
        command_class = get_command_class(args.command)
        await command_class(configuration=configuration, args=args).execute_wrapper()
    except PlannerError as e:
        logger.error("%s: %s", type(e).__name__, e)  # noqa: TRY400
        sys.exit(DOMAIN_ERROR_EXIT_CODE)
    except OSError as e:
        logger.error("%s", e)  # noqa: TRY400
        sys.exit(DOMAIN_ERROR_EXIT_CODE)
    except SystemExit as e:
        logger.info("Quit requested.")
        sys.exit(e.code)
    except:  # noqa:E722
        logger.exception("Error")
        sys.exit(DOMAIN_ERROR_EXIT_CODE)


def main(argv: Sequence[str] | None = None) -> None:
    """Main program entry point."""
    # Parse arguments and set logging.
    args = parse_args(argv)
    set_logging(args.verbose)
    logger.info("User supplied arguments: '%s'.", args)

    asyncio.run(main_async(args))


if __name__ == "__main__":
    main()
