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

"""Hardware configuration search ranked by tokens per dollar."""

import asyncio
import dataclasses
import logging
from collections.abc import Callable, Sequence
from typing import Any

from disagg_planner.constants import (
    DEFAULT_EQUAL_COST_TOLERANCE,
    DEFAULT_KV_HEADROOM,
    DEFAULT_NETWORK,
    DEFAULT_SATURATION_THRESHOLD,
)
from disagg_planner.errors import NoFeasibleConfigError, PlannerError, PreconditionError
from disagg_planner.sim.engine import SimOptions, simulate
from disagg_planner.sim.metrics import SimMetrics
from disagg_planner.sim.network import NetPreset
from disagg_planner.specs import (
    ClusterConfig,
    DeviceSpec,
    LlmSpec,
    TraceRecord,
    disaggregated_cluster,
    homogeneous_cluster,
)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PlanLimits:
    """Attributes:
    a_max: most compute devices.
    b_max: most memory devices.
    homogeneous_max: most devices of a homogeneous baseline, a_max if unset.
    """

    a_max: int
    b_max: int
    homogeneous_max: int | None = None

    def __post_init__(self) -> None:
        if self.a_max < 1 or self.b_max < 1:
            raise PreconditionError("a_max and b_max must be >= 1")
        if self.homogeneous_max is not None and self.homogeneous_max < 0:
            raise PreconditionError("homogeneous_max must be >= 0")


@dataclasses.dataclass(frozen=True)
class PlanResult:
    config: ClusterConfig
    metrics: SimMetrics
    cost_per_hour: float
    tokens_per_dollar: float
    rank: int = 0
    compute_saturated: bool = False

    def to_row(self) -> dict[str, Any]:
        return {
            "a": self.config.a,
            "b": self.config.b,
            "cost_per_hr": self.cost_per_hour,
            "throughput_tps": self.metrics.throughput,
            "avg_batch": self.metrics.avg_batch,
            "tbt_p50_ms": self.metrics.tbt.p50 * 1e3,
            "tokens_per_dollar": self.tokens_per_dollar,
            "rank": self.rank,
            "mode": self.config.mode,
            "label": self.config.label,
            "compute_saturated": self.compute_saturated,
        }


def enumerate_dops(
    limits: PlanLimits,
    model: LlmSpec,
    compute_device: DeviceSpec,
    memory_device: DeviceSpec,
    network: str = DEFAULT_NETWORK,
    headroom: float = DEFAULT_KV_HEADROOM,
) -> list[ClusterConfig]:
    """Every (a, b) whose compute devices hold the weights, then homogeneous (a, 0).

    Homogeneous baselines need memory left for KV caches after the weights.
    """
    configs = [
        disaggregated_cluster(compute_device, a, memory_device, b, network)
        for a in range(1, limits.a_max + 1)
        if a * compute_device.mem_bytes >= model.weight_bytes
        for b in range(1, limits.b_max + 1)
    ]
    homogeneous_max = (
        limits.a_max if limits.homogeneous_max is None else limits.homogeneous_max
    )
    configs.extend(
        homogeneous_cluster(compute_device, a, network)
        for a in range(1, homogeneous_max + 1)
        if a * compute_device.mem_bytes * (1 - headroom) > model.weight_bytes
    )
    logger.info("Enumerated %s configurations.", len(configs))
    return configs


def rank_results(
    runs: Sequence[tuple[ClusterConfig, SimMetrics]],
    saturation_threshold: float = DEFAULT_SATURATION_THRESHOLD,
) -> list[PlanResult]:
    """Tokens per dollar descending, then cost ascending, then label."""
    throughput = {
        (c.mode, c.a, c.b): m.throughput for c, m in runs
    }
    results = [
        PlanResult(
            config=config,
            metrics=metrics,
            cost_per_hour=config.cost_per_hour,
            tokens_per_dollar=metrics.tokens_per_dollar,
            compute_saturated=(
                config.mode == "disaggregated"
                and (previous := throughput.get((config.mode, config.a, config.b - 1)))
                is not None
                and metrics.throughput < previous * (1 + saturation_threshold)
            ),
        )
        for config, metrics in runs
    ]
    results.sort(key=lambda r: (-r.tokens_per_dollar, r.cost_per_hour, r.config.label))
    return [dataclasses.replace(r, rank=i) for i, r in enumerate(results, start=1)]


async def plan_async(
    model: LlmSpec,
    trace: Sequence[TraceRecord],
    configs: Sequence[ClusterConfig],
    options: SimOptions,
    preset_for: Callable[[str], NetPreset],
    saturation_threshold: float = DEFAULT_SATURATION_THRESHOLD,
) -> list[PlanResult]:
    """Simulate every config in worker threads and rank them once all finish.

    Homogeneous baselines run unpipelined whatever `options.n_batches` asks.
    """
    if not configs:
        raise NoFeasibleConfigError("no configuration holds the model weights")
    serial = dataclasses.replace(options, n_batches=1)

    async def run(config: ClusterConfig) -> tuple[ClusterConfig, SimMetrics] | None:
        try:
            metrics = await asyncio.to_thread(
                simulate,
                model,
                config,
                trace,
                options if config.mode == "disaggregated" else serial,
                preset_for(config.network),
            )
        except PlannerError as e:
            logger.warning("Skipping %s: %s.", config.label, e)
            return None
        return config, metrics

    outcomes = await asyncio.gather(*[run(config) for config in configs])
    if not (runs := [o for o in outcomes if o is not None]):
        raise NoFeasibleConfigError("every configuration failed to simulate")
    return rank_results(runs, saturation_threshold)


def plan(
    model: LlmSpec,
    trace: Sequence[TraceRecord],
    configs: Sequence[ClusterConfig],
    options: SimOptions,
    preset_for: Callable[[str], NetPreset],
    saturation_threshold: float = DEFAULT_SATURATION_THRESHOLD,
) -> list[PlanResult]:
    return asyncio.run(
        plan_async(model, trace, configs, options, preset_for, saturation_threshold),
    )


@dataclasses.dataclass(frozen=True)
class EqualCostComparison:
    disaggregated: PlanResult
    homogeneous: PlanResult

    @property
    def cost_difference(self) -> float:
        """Relative to the homogeneous cost."""
        return (
            self.disaggregated.cost_per_hour - self.homogeneous.cost_per_hour
        ) / self.homogeneous.cost_per_hour

    @property
    def throughput_gain(self) -> float:
        """In percent."""
        base = self.homogeneous.metrics.throughput
        return (self.disaggregated.metrics.throughput / base - 1) * 100 if base else 0.0

    @property
    def avg_batch_ratio(self) -> float:
        base = self.homogeneous.metrics.avg_batch
        return self.disaggregated.metrics.avg_batch / base if base else 0.0

    def to_document(self) -> dict[str, Any]:
        return {
            "disaggregated": self.disaggregated.config.label,
            "homogeneous": self.homogeneous.config.label,
            "disaggregated_cost_per_hr": self.disaggregated.cost_per_hour,
            "homogeneous_cost_per_hr": self.homogeneous.cost_per_hour,
            "cost_difference": self.cost_difference,
            "throughput_gain_pct": self.throughput_gain,
            "avg_batch_ratio": self.avg_batch_ratio,
            "disaggregated_tbt_p50_ms": self.disaggregated.metrics.tbt.p50 * 1e3,
            "homogeneous_tbt_p50_ms": self.homogeneous.metrics.tbt.p50 * 1e3,
        }


def compare_equal_cost(
    results: Sequence[PlanResult],
    tolerance: float = DEFAULT_EQUAL_COST_TOLERANCE,
) -> EqualCostComparison | None:
    """Best-ranked disaggregated result against the fastest homogeneous one
    costing within `tolerance` of it.
    """
    homogeneous = sorted(
        (r for r in results if r.config.mode == "homogeneous-TP"),
        key=lambda r: (-r.metrics.throughput, r.cost_per_hour),
    )
    for candidate in sorted(results, key=lambda r: r.rank):
        if candidate.config.mode != "disaggregated":
            continue
        for baseline in homogeneous:
            if (
                abs(candidate.cost_per_hour - baseline.cost_per_hour)
                <= tolerance * baseline.cost_per_hour
            ):
                return EqualCostComparison(candidate, baseline)
    return None
