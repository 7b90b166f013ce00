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

"""Simulation results."""

import dataclasses
import logging
from collections.abc import Sequence
from typing import Any

import numpy as np

from disagg_planner.constants import MICROSECONDS_PER_SECOND

logger = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600


@dataclasses.dataclass(frozen=True)
class TbtStats:
    """Time between tokens, in seconds."""

    mean: float = 0.0
    p50: float = 0.0
    p99: float = 0.0
    samples: int = 0

    @classmethod
    def from_ticks(cls, samples: Sequence[int]) -> "TbtStats":
        if not samples:
            return cls()
        seconds = np.asarray(samples, dtype=np.float64) / MICROSECONDS_PER_SECOND
        return cls(
            mean=float(np.mean(seconds)),
            p50=float(np.percentile(seconds, 50)),
            p99=float(np.percentile(seconds, 99)),
            samples=len(samples),
        )


@dataclasses.dataclass(frozen=True)
class SimMetrics:
    """Outcome of one simulated trace.

    Attributes:
        label: cluster label, such as "DOP(2,4) H100+H20".
        wall_time: seconds from the first arrival to the last token.
        tbt: time between consecutive tokens of a request.
        avg_batch: time-weighted mean of requests being decoded.
        util: busy fraction per pool ("compute", "memory").
        breakdown: mean seconds per iteration spent in model slices
            (tensor-parallel collectives included), attention, network
            transfers, host-side batch preparation and in total.
        overlap_approximate: the overlap timing is a mechanistic
            approximation, set whenever overlap was enabled.
    """

    mode: str
    label: str
    tokens_generated: int = 0
    wall_time: float = 0.0
    throughput: float = 0.0
    tbt: TbtStats = dataclasses.field(default_factory=TbtStats)
    avg_batch: float = 0.0
    max_batch: int = 0
    util: dict[str, float] = dataclasses.field(default_factory=dict)
    cost_per_hour: float = 0.0
    tokens_per_dollar: float = 0.0
    breakdown: dict[str, float] = dataclasses.field(default_factory=dict)
    kv_capacity_bytes: float = 0.0
    kv_peak_bytes: int = 0
    completed: int = 0
    unfinished: int = 0
    rejected: int = 0
    seed: int = 0
    overlap: bool = False
    overlap_approximate: bool = False
    n_batches: int = 1

    @staticmethod
    def rates(
        tokens: int,
        wall_time: float,
        cost_per_hour: float,
    ) -> tuple[float, float]:
        """Throughput and tokens per dollar, zero when nothing ran."""
        throughput = tokens / wall_time if wall_time > 0 else 0.0
        return throughput, throughput * SECONDS_PER_HOUR / cost_per_hour

    def to_document(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

