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
from disagg_planner.catalog import get_catalog
from disagg_planner.command.base import BaseCommand
from disagg_planner.planner import (
    PlanLimits,
    compare_equal_cost,
    enumerate_dops,
    plan_async,
)
from disagg_planner.sim.engine import SimOptions

logger = logging.getLogger(__name__)

TABLE_COLUMNS = (
    "rank",
    "label",
    "cost_per_hr",
    "throughput_tps",
    "avg_batch",
    "tbt_p50_ms",
    "tokens_per_dollar",
    "compute_saturated",
)


class OptimizeCommand(BaseCommand):
    """Every DOP within the limits plus homogeneous baselines, ranked."""

    command_name = "optimize"

    async def execute(self) -> None:
        if self.args.devices:
            self.catalog = get_catalog(self.args.devices)
        model = self.model(self.args.model)
        network = self.args.network or self.configuration.network
        configs = enumerate_dops(
            PlanLimits(
                a_max=self.args.a_max,
                b_max=self.args.b_max,
                homogeneous_max=self.args.homogeneous_max,
            ),
            model,
            self.device(self.args.compute_device),
            self.device(self.args.memory_device),
            network,
            self.configuration.kv_headroom,
        )
        results = await plan_async(
            model,
            self.trace(),
            configs,
            SimOptions(
                overlap=self.args.overlap,
                n_batches=self.args.n_batches,
                seed=self.args.seed,
                horizon_s=self.args.horizon_s,
                check_ledger=False,
                eff=self.configuration.efficiency,
                headroom=self.configuration.kv_headroom,
                host_time_per_request=self.configuration.host_time_per_request,
                allreduce_latency=self.configuration.allreduce_latency,
            ),
            self.catalog.network,
            self.configuration.saturation_threshold,
        )
        rows = [r.to_row() for r in results]
        print(report.format_table(rows, TABLE_COLUMNS))
        if comparison := compare_equal_cost(
            results, self.configuration.equal_cost_tolerance
        ):
            print()
            print(report.format_pairs(comparison.to_document()))
        else:
            logger.warning("No homogeneous baseline within the equal-cost tolerance.")
        if self.args.out:
            report.write_frame(
                report.plan_frame(rows), self.output_path(self.args.out)
            )
        if self.args.plot_data:
            report.emit_plot_data(
                [
                    report.PlotPoint(r.config.label, r.config.mode, r.tokens_per_dollar)
                    for r in results
                ],
                self.output_path(self.args.plot_data),
                x_name="config",
                value_name="tokens_per_dollar",
            )
        if self.args.comparison and comparison:
            report.write_json(
                comparison.to_document(), self.output_path(self.args.comparison)
            )
