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

import argparse
import logging
import time
from collections.abc import Mapping
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Any

from disagg_planner import report
from disagg_planner.catalog import Catalog, get_catalog
from disagg_planner.sim.trace import gen_trace, read_trace
from disagg_planner.specs import (
    DeviceSpec,
    LlmSpec,
    TraceRecord,
    load_llm_spec,
    read_json_document,
)

if TYPE_CHECKING:
    from disagg_planner.configuration import Configuration


logger = logging.getLogger(__name__)


class BaseCommand:
    """Base class for subcommands.

    Attributes:
        command_name: subcommand name, used for logging.
        configuration: user configuration.
        args: parsed command line.
    """

    command_name: str

    def __init__(
        self,
        configuration: "Configuration",
        args: argparse.Namespace,
    ) -> None:
        self.configuration = configuration
        self.args = args

    @cached_property
    def catalog(self) -> Catalog:
        return get_catalog(self.configuration.catalog)

    def model(self, name: str) -> LlmSpec:
        """A catalog model, or a model document when `name` is a .json file."""
        if name.endswith(".json"):
            return load_llm_spec(read_json_document(Path(name)))
        return self.catalog.model(name)

    def device(self, name: str) -> DeviceSpec:
        return self.catalog.device(name)

    def trace(self) -> tuple[TraceRecord, ...]:
        """The --trace file, or a synthetic trace from --profile."""
        if self.args.trace:
            return read_trace(self.args.trace)
        profile = self.catalog.trace_profile(self.args.profile).with_overrides(
            n_requests=self.args.requests,
            arrival_rate=self.args.rate or self.configuration.arrival_rate,
            seed=self.args.seed,
            sigma=self.configuration.trace_sigma,
        )
        return gen_trace(profile)

    def output_path(self, path: Path) -> Path:
        return report.resolve_output(path, self.configuration.output_dir)

    def write_document(self, document: Mapping[str, Any]) -> None:
        """Summary to stdout, full document to --out when given."""
        if summary := report.format_pairs(document):
            print(summary)
        if self.args.out:
            report.write_json(document, self.output_path(self.args.out))

    async def execute_wrapper(self) -> None:
        """Calls execute(). Wrapped to get elapsed time."""
        start_time = time.perf_counter()

        await self.execute()

        elapsed = time.perf_counter() - start_time
        logger.info("%s.execute(): %ssec", self.command_name, f"{elapsed:.3f}")

    async def execute(self) -> None:
        """Run this command."""
        raise NotImplementedError
