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
from disagg_planner.sim.engine import SimOptions, simulate
from disagg_planner.sim.trace import TraceProfile, gen_trace, trace_summary, write_trace
from disagg_planner.specs import (
    ClusterConfig,
    disaggregated_cluster,
    homogeneous_cluster,
    load_cluster_config,
    read_json_document,
)

logger = logging.getLogger(__name__)

SUMMARY_FIELDS = (
    "label",
    "tokens_generated",
    "wall_time",
    "throughput",
    "avg_batch",
    "max_batch",
    "tokens_per_dollar",
    "completed",
    "unfinished",
    "rejected",
)


class SimulateCommand(BaseCommand):
    """One deterministic decode simulation of a trace on one cluster."""

    command_name = "simulate"

    def cluster(self) -> ClusterConfig:
        network = self.args.network or self.configuration.network
        if self.args.cluster:
            return load_cluster_config(
                read_json_document(self.args.cluster),
                self.catalog,
            )
        compute = self.device(self.args.compute_device)
        if self.args.homogeneous:
            return homogeneous_cluster(compute, self.args.homogeneous, network)
        a, b = self.args.dop
        return disaggregated_cluster(
            compute, a, self.device(self.args.memory_device), b, network
        )

    def options(self) -> SimOptions:
        return SimOptions(
            overlap=self.args.overlap,
            n_batches=self.args.n_batches,
            seed=self.args.seed,
            horizon_s=self.args.horizon_s,
            eff=self.configuration.efficiency,
            headroom=self.configuration.kv_headroom,
            host_time_per_request=self.configuration.host_time_per_request,
            allreduce_latency=self.configuration.allreduce_latency,
        )

    async def execute(self) -> None:
        model = self.model(self.args.model)
        cluster = self.cluster()
        trace = self.trace()
        logger.info("Trace: %s.", trace_summary(trace))
        metrics = simulate(
            model,
            cluster,
            trace,
            self.options(),
            self.catalog.network(cluster.network),
        )
        document = metrics.to_document()
        print(report.format_pairs({f: document[f] for f in SUMMARY_FIELDS}))
        print(f"tbt_p50_ms  {metrics.tbt.p50 * 1e3:.3f}")
        print(f"tbt_p99_ms  {metrics.tbt.p99 * 1e3:.3f}")
        if self.args.out:
            report.write_json(document, self.output_path(self.args.out))


class GenTraceCommand(BaseCommand):
    """Synthetic trace from a catalog profile or explicit means."""

    command_name = "gen-trace"

    def profile(self) -> TraceProfile:
        overrides = {
            "n_requests": self.args.requests,
            "mean_prompt": self.args.mean_prompt,
            "mean_output": self.args.mean_output,
            "arrival_rate": self.args.rate or self.configuration.arrival_rate,
            "seed": self.args.seed,
            "sigma": (
                self.configuration.trace_sigma
                if self.args.sigma is None
                else self.args.sigma
            ),
        }
        if self.args.profile:
            return self.catalog.trace_profile(self.args.profile).with_overrides(
                **overrides
            )
        return TraceProfile(name="custom", **overrides)  # type: ignore[arg-type]

    async def execute(self) -> None:
        records = gen_trace(self.profile())
        print(report.format_pairs(trace_summary(records)))
        write_trace(records, self.output_path(self.args.out))
