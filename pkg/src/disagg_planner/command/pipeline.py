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

from disagg_planner import report
from disagg_planner.command.base import BaseCommand
from disagg_planner.pipeline import (
    PipelineConfig,
    build_schedule,
    steady_throughput,
    validate,
)

logger = logging.getLogger(__name__)


class PipelineCommand(BaseCommand):
    """Rotational staggered schedule of --n batches and its validation."""

    command_name = "pipeline"

    async def execute(self) -> None:
        cfg = PipelineConfig(
            n_batches=self.args.n,
            t_model=self.args.tm_ms / 1e3,
            t_attn=self.args.ta_ms / 1e3,
            n_slices=self.args.n_slices,
            tolerance=self.configuration.feasibility_tolerance,
        )
        timeline = build_schedule(
            cfg,
            self.args.slots,
            allow_stretch=not self.args.no_stretch,
        )
        document = validate(timeline).to_document() | {
            "n_batches": cfg.n_batches,
            "replicas": cfg.replicas,
            "slots": self.args.slots,
            "slot_us": float(timeline.slot),
            "mismatch": cfg.mismatch,
            "steady_tasks_per_s": steady_throughput(cfg),
        }
        print(
            report.format_table(
                [
                    {"resource": resource, "idle_fraction": idle}
                    for resource, idle in document["idle_fractions"].items()
                ],
                ("resource", "idle_fraction"),
            ),
        )
        print(report.format_pairs(document))
        if self.args.out:
            timeline.write_csv(self.output_path(self.args.out))
        if self.args.report:
            report.write_json(document, self.output_path(self.args.report))
