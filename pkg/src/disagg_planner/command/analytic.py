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

"""Closed-form estimates: roofline times, bandwidth needs, KV capacity."""

import logging
import math
from typing import Any

from disagg_planner import report
from disagg_planner.command.base import BaseCommand
from disagg_planner.constants import GB
from disagg_planner.errors import CapacityError
from disagg_planner.perf_model import (
    EfficiencyProfile,
    TimingEstimate,
    attn_cost,
    comm_volume,
    estimate_timing,
    kv_bytes_per_token,
    max_batch,
    mbu,
    measured_timing,
    memory_cost_efficiency,
    mfu,
    min_bandwidth,
    nonattn_cost,
    per_device_bandwidth,
    roofline_time,
)
from disagg_planner.specs import (
    DevicePool,
    LlmSpec,
    WorkloadPoint,
    disaggregated_cluster,
)

logger = logging.getLogger(__name__)

ROOFLINE_COLUMNS = (
    "batch",
    "nonattn_ms",
    "nonattn_bound",
    "nonattn_mfu",
    "attn_ms",
    "attn_mbu",
)
BANDWIDTH_COLUMNS = ("dop", "t_model_ms", "t_attn_ms", "min_bw_gbps", "per_device_gbps")
SWEEP_COLUMNS = ("dop", "batch", "t_model_ms", "t_attn_ms", "min_bw_gbps")


def roofline_point(
    model: LlmSpec,
    pool: DevicePool,
    point: WorkloadPoint,
    eff: EfficiencyProfile,
) -> dict[str, Any]:
    row: dict[str, Any] = {"batch": point.batch, "seq_len": point.seq_len}
    for prefix, cost, kind in (
        ("nonattn", nonattn_cost(model, point.batch), "gemm"),
        ("attn", attn_cost(model, point.batch, point.seq_len), "attention"),
    ):
        time = roofline_time(cost, pool, eff, kind)  # type: ignore[arg-type]
        row |= {
            f"{prefix}_flops": cost.flops,
            f"{prefix}_bytes": cost.bytes,
            f"{prefix}_intensity": cost.intensity,
            f"{prefix}_ms": time.seconds * 1e3,
            f"{prefix}_bound": str(time.bound),
            f"{prefix}_mfu": mfu(cost.flops, time.seconds, pool),
            f"{prefix}_mbu": mbu(cost.bytes, time.seconds, pool),
        }
    row["attn_time_fraction"] = row["attn_ms"] / (row["attn_ms"] + row["nonattn_ms"])
    return row


class RooflineCommand(BaseCommand):
    command_name = "roofline"

    async def execute(self) -> None:
        model = self.model(self.args.model)
        pool = DevicePool(self.device(self.args.device), self.args.count)
        eff = self.configuration.efficiency
        if not self.args.sweep_batch:
            point = WorkloadPoint(self.args.batch, self.args.seq)
            document = roofline_point(model, pool, point, eff)
            document |= {
                "model": model.name,
                "device": pool.device.name,
                "count": pool.count,
                "memory_cost": memory_cost_efficiency(pool.device),
            }
            self.write_document(document)
            return

        rows = [
            roofline_point(model, pool, WorkloadPoint(batch, self.args.seq), eff)
            for batch in self.args.sweep_batch
        ]
        print(report.format_table(rows, ROOFLINE_COLUMNS))
        if self.args.out:
            report.emit_plot_data(
                [
                    report.PlotPoint(row["batch"], series, row[key])
                    for row in rows
                    for series, key in (
                        ("nonattn", "nonattn_mfu"),
                        ("attn", "attn_mfu"),
                    )
                ],
                self.output_path(self.args.out),
                x_name="batch",
                value_name="mfu",
            )


def bandwidth_row(
    model: LlmSpec,
    dop: tuple[int, int],
    timing: TimingEstimate,
    point: WorkloadPoint,
    alpha: float,
) -> dict[str, Any]:
    bandwidth = min_bandwidth(model, point.batch, point.seq_len, alpha, timing)
    return {
        "dop": f"{dop[0]},{dop[1]}",
        "batch": point.batch,
        "seq_len": point.seq_len,
        "t_model_ms": timing.t_model * 1e3,
        "t_attn_ms": timing.t_attn * 1e3,
        "timing_source": str(timing.source),
        "min_bw_gbps": bandwidth / GB,
        "per_device_gbps": per_device_bandwidth(bandwidth, dop[1]) / GB,
    }


class MinBandwidthCommand(BaseCommand):
    command_name = "min-bandwidth"

    def timing(
        self,
        model: LlmSpec,
        dop: tuple[int, int],
        batch: int,
    ) -> TimingEstimate:
        if self.args.tm_ms is not None:
            return measured_timing(self.args.tm_ms / 1e3, self.args.ta_ms / 1e3)
        cluster = disaggregated_cluster(
            self.device(self.args.compute_device),
            dop[0],
            self.device(self.args.memory_device),
            dop[1],
            self.configuration.network,
        )
        return estimate_timing(
            model,
            cluster,
            [self.args.seq] * batch,
            self.configuration.efficiency,
        )

    async def execute(self) -> None:
        model = self.model(self.args.model)
        dops = self.args.dop or [(2, 4)]
        batches = self.args.sweep_batch or [self.args.batch]
        rows = [
            bandwidth_row(
                model,
                dop,
                self.timing(model, dop, batch),
                WorkloadPoint(batch, self.args.seq),
                self.args.alpha,
            )
            for dop in dops
            for batch in batches
        ]
        if self.args.sweep_batch:
            print(report.format_table(rows, SWEEP_COLUMNS))
            if self.args.out:
                report.emit_plot_data(
                    [
                        report.PlotPoint(
                            row["batch"], f"DOP({row['dop']})", row["min_bw_gbps"]
                        )
                        for row in rows
                    ],
                    self.output_path(self.args.out),
                    x_name="batch",
                    value_name="min_bw_gbps",
                )
            return

        print(report.format_table(rows, BANDWIDTH_COLUMNS))
        self.write_document(
            {
                "model": model.name,
                "batch": self.args.batch,
                "seq_len": self.args.seq,
                "alpha": self.args.alpha,
                "bytes_per_iter": comm_volume(model, self.args.batch),
                "min_bw_gbps": rows[0]["min_bw_gbps"],
                "dops": rows,
            },
        )


class KvCapacityCommand(BaseCommand):
    command_name = "kv-capacity"

    async def execute(self) -> None:
        model = self.model(self.args.model)
        pool = DevicePool(self.device(self.args.device), self.args.count)
        headroom = (
            self.configuration.kv_headroom
            if self.args.headroom is None
            else self.args.headroom
        )
        per_token = kv_bytes_per_token(model)
        try:
            with_weights: int | None = max_batch(
                pool.mem_bytes,
                model.weight_bytes,
                model,
                self.args.seq,
                headroom,
            )
        except CapacityError as e:
            logger.warning("Weights do not fit next to the KV cache: %s.", e)
            with_weights = None
        self.write_document(
            {
                "model": model.name,
                "device": pool.device.name,
                "count": pool.count,
                "seq_len": self.args.seq,
                "kv_bytes_per_token": per_token,
                "kv_bytes_per_request": per_token * self.args.seq,
                "requests": math.floor(pool.mem_bytes / (per_token * self.args.seq)),
                "requests_with_weights": with_weights,
                "headroom": headroom,
            },
        )
