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

import logging
from typing import TYPE_CHECKING, Literal

from disagg_planner.errors import PreconditionError

if TYPE_CHECKING:
    from .base import BaseCommand

logger = logging.getLogger(__name__)

# Used for argparse subcommands.
command_names_value = (
    "roofline",
    "min-bandwidth",
    "kv-capacity",
    "attention-check",
    "split",
    "pipeline",
    "simulate",
    "optimize",
    "gen-trace",
)

# Used on get_command_class() as variable type.
command_names_type = Literal[
    "roofline",
    "min-bandwidth",
    "kv-capacity",
    "attention-check",
    "split",
    "pipeline",
    "simulate",
    "optimize",
    "gen-trace",
]


def get_command_class(name: command_names_type) -> type["BaseCommand"]:
    klass: type[BaseCommand]
    logger.debug("get_command_class: asked for '%s'.", name)
    match name.strip().lower():
        case "roofline":
            from disagg_planner.command.analytic import RooflineCommand  # noqa: PLC0415

            klass = RooflineCommand
        case "min-bandwidth":
            from disagg_planner.command.analytic import (  # noqa: PLC0415
                MinBandwidthCommand,
            )

            klass = MinBandwidthCommand
        case "kv-capacity":
            from disagg_planner.command.analytic import (  # noqa: PLC0415
                KvCapacityCommand,
            )

            klass = KvCapacityCommand
        case "attention-check":
            from disagg_planner.command.attention_check import (  # noqa: PLC0415
                AttentionCheckCommand,
            )

            klass = AttentionCheckCommand
        case "split":
            from disagg_planner.command.split import SplitCommand  # noqa: PLC0415

            klass = SplitCommand
        case "pipeline":
            from disagg_planner.command.pipeline import PipelineCommand  # noqa: PLC0415

            klass = PipelineCommand
        case "simulate":
            from disagg_planner.command.simulate import SimulateCommand  # noqa: PLC0415

            klass = SimulateCommand
        case "optimize":
            from disagg_planner.command.optimize import OptimizeCommand  # noqa: PLC0415

            klass = OptimizeCommand
        case "gen-trace":
            from disagg_planner.command.simulate import GenTraceCommand  # noqa: PLC0415

            klass = GenTraceCommand
        case _:
            raise PreconditionError(f"Invalid command '{name}'.")
    return klass
