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

"""Rotational staggered pipelining.

n batches share n - 1 model replicas and one memory pool. Slice k of batch j
runs on replica (j + k) mod (n - 1) + 1, and consecutive replicas start one
slot apart, a slot lasting t_model / (n - 1). All times are integer
microsecond ticks.
"""

import dataclasses
import enum
import logging
import math
from collections import defaultdict
from fractions import Fraction
from pathlib import Path
from typing import Any

import pandas as pd

from disagg_planner.constants import (
    DEFAULT_FEASIBILITY_TOLERANCE,
    MICROSECONDS_PER_SECOND,
    TIMELINE_COLUMNS,
)
from disagg_planner.errors import (
    InfeasibleScheduleError,
    PreconditionError,
    SpecValidationError,
)

logger = logging.getLogger(__name__)

MEMORY_POOL = "memory-pool"


class TaskKind(enum.StrEnum):
    model_slice = "model-slice"
    attention = "attention"


def replica_name(replica: int) -> str:
    return f"replica-{replica}"


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    """Batches and task times of a staggered pipeline.

    Attributes:
        n_batches: concurrent batches (n).
        t_model: seconds one model-slice task occupies a replica (t_m).
        t_attn: seconds of one attention task (t_a).
        n_slices: slices per model pass, used to label tasks.
        tolerance: relative mismatch between t_attn and t_model / (n - 1)
            still treated as balanced.
    """

    n_batches: int
    t_model: float
    t_attn: float
    n_slices: int = 1
    tolerance: float = DEFAULT_FEASIBILITY_TOLERANCE

    def __post_init__(self) -> None:
        if self.n_batches < 2:  # noqa: PLR2004
            raise SpecValidationError("n_batches", "must be >= 2")
        if not (self.t_model > 0 and self.t_attn > 0):
            raise SpecValidationError("t_model", "times must be > 0")
        if self.n_slices < 1:
            raise SpecValidationError("n_slices", "must be >= 1")
        if round(self.t_model * MICROSECONDS_PER_SECOND) < self.n_batches - 1:
            raise SpecValidationError("t_model", "shorter than one tick per replica")

    @property
    def replicas(self) -> int:
        return self.n_batches - 1

    @property
    def balanced_attn(self) -> float:
        """Attention time that keeps every device busy."""
        return self.t_model / self.replicas

    @property
    def mismatch(self) -> float:
        return abs(self.t_attn - self.balanced_attn) / self.balanced_attn

    @property
    def feasible(self) -> bool:
        return self.mismatch <= self.tolerance

    @property
    def t_model_ticks(self) -> int:
        return round(self.t_model * MICROSECONDS_PER_SECOND)

    @property
    def t_attn_ticks(self) -> int:
        return round(self.t_attn * MICROSECONDS_PER_SECOND)

    @property
    def slot(self) -> Fraction:
        """Slot length in ticks, stretched to t_attn when attention is slower."""
        balanced = Fraction(self.t_model_ticks, self.replicas)
        return balanced if self.feasible else max(Fraction(self.t_attn_ticks), balanced)


def replica_for(j: int, k: int, n: int) -> int:
    """Replica (1-based) running slice `k` of batch `j`."""
    if n < 2:  # noqa: PLR2004
        raise PreconditionError(f"n must be >= 2, got {n}")
    return (j + k) % (n - 1) + 1


@dataclasses.dataclass(frozen=True)
class TimelineEntry:
    resource: str
    batch: int
    kind: TaskKind
    start: int
    end: int
    slice_index: int = 0


@dataclasses.dataclass(frozen=True)
class Timeline:
    """Tasks placed on replicas and the memory pool.

    Attributes:
        entries: sorted by resource, then start.
        horizon: last tick covered.
        steady_start: first tick after the warm-up slots.
        stretched: slots were lengthened to fit a mismatched t_attn.
        slot: slot length in ticks.
    """

    entries: tuple[TimelineEntry, ...]
    horizon: int
    steady_start: int = 0
    stretched: bool = False
    slot: Fraction = Fraction(0)

    @property
    def resources(self) -> list[str]:
        return sorted({e.resource for e in self.entries})

    def busy_ticks(self, resource: str, since: int = 0) -> int:
        return sum(
            min(e.end, self.horizon) - max(e.start, since)
            for e in self.entries
            if e.resource == resource and e.end > since
        )

    def idle_fraction(self, resource: str) -> float:
        """Idle share of the steady-state window."""
        window = self.horizon - self.steady_start
        if window <= 0:
            return 0.0
        return 1 - self.busy_ticks(resource, self.steady_start) / window

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (e.resource, e.batch, str(e.kind), e.start, e.end)
                for e in self.entries
            ],
            columns=list(TIMELINE_COLUMNS),
        )

    def write_csv(self, path: Path) -> None:
        logger.info("Writing %s timeline entries to '%s'.", len(self.entries), path)
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def build_schedule(
    cfg: PipelineConfig,
    horizon_slots: int,
    allow_stretch: bool = True,  # noqa: FBT001, FBT002
) -> Timeline:
    """Steady-state schedule over `horizon_slots` slots.

    Global task t = j + k * n (batch j, slice k) starts at slot t on replica
    t mod (n - 1) + 1; its attention starts at slot t + n - 1 on the memory
    pool. Slot boundaries are floor(i * slot), so rounding error stays below
    one tick per slot. Tasks that would end after the horizon are left out.
    """
    if horizon_slots < 1:
        raise PreconditionError(f"horizon_slots must be >= 1, got {horizon_slots}")
    if not cfg.feasible:
        if not allow_stretch:
            raise InfeasibleScheduleError(
                f"t_attn {cfg.t_attn:.6g}s differs from t_model/(n-1) "
                f"{cfg.balanced_attn:.6g}s by {cfg.mismatch:.1%}",
            )
        logger.warning(
            "Attention time %.6gs does not match t_model/(n-1) = %.6gs, "
            "stretching the slot to %s ticks.",
            cfg.t_attn,
            cfg.balanced_attn,
            math.floor(cfg.slot),
        )
    n = cfg.n_batches
    slot = cfg.slot

    def boundary(i: int) -> int:
        return math.floor(i * slot)

    horizon = boundary(horizon_slots)
    entries: list[TimelineEntry] = []
    for t in range(horizon_slots):
        j, k = t % n, t // n
        start = boundary(t)
        if (end := start + cfg.t_model_ticks) <= horizon:
            entries.append(
                TimelineEntry(
                    resource=replica_name(replica_for(j, k, n)),
                    batch=j,
                    kind=TaskKind.model_slice,
                    start=start,
                    end=end,
                    slice_index=k % cfg.n_slices,
                ),
            )
        attn_start = boundary(t + n - 1)
        attn_end = boundary(t + n) if cfg.feasible else attn_start + cfg.t_attn_ticks
        if attn_end <= horizon:
            entries.append(
                TimelineEntry(
                    resource=MEMORY_POOL,
                    batch=j,
                    kind=TaskKind.attention,
                    start=attn_start,
                    end=attn_end,
                    slice_index=k % cfg.n_slices,
                ),
            )
    entries.sort(key=lambda e: (e.resource, e.start, e.end))
    return Timeline(
        entries=tuple(entries),
        horizon=horizon,
        steady_start=boundary(n),
        stretched=not cfg.feasible,
        slot=slot,
    )


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    conflicts: int
    bubbles: tuple[tuple[str, int], ...]
    migrations: int
    idle_fractions: dict[str, float]
    stretched: bool = False

    def to_document(self) -> dict[str, Any]:
        return {
            "conflicts": self.conflicts,
            "bubbles": [{"resource": r, "gap_us": g} for r, g in self.bubbles],
            "migrations": self.migrations,
            "idle_fractions": self.idle_fractions,
            "stretched": self.stretched,
        }


def validate(timeline: Timeline) -> ValidationReport:
    """Overlaps, steady-state gaps and cross-replica hand-offs of a timeline."""
    by_resource: defaultdict[str, list[TimelineEntry]] = defaultdict(list)
    by_batch: defaultdict[int, list[TimelineEntry]] = defaultdict(list)
    for entry in timeline.entries:
        by_resource[entry.resource].append(entry)
        if entry.kind == TaskKind.model_slice:
            by_batch[entry.batch].append(entry)
    conflicts = 0
    bubbles: list[tuple[str, int]] = []
    for resource in sorted(by_resource):
        ordered = sorted(by_resource[resource], key=lambda e: (e.start, e.end))
        for previous, current in zip(ordered, ordered[1:], strict=False):
            if current.start < previous.end:
                conflicts += 1
            elif (
                current.start > previous.end
                and previous.start >= timeline.steady_start
            ):
                bubbles.append((resource, current.start - previous.end))
    migrations = 0
    for batch in sorted(by_batch):
        ordered = sorted(by_batch[batch], key=lambda e: e.start)
        migrations += sum(
            previous.resource != current.resource
            for previous, current in zip(ordered, ordered[1:], strict=False)
        )
    report = ValidationReport(
        conflicts=conflicts,
        bubbles=tuple(bubbles),
        migrations=migrations,
        idle_fractions={r: timeline.idle_fraction(r) for r in sorted(by_resource)},
        stretched=timeline.stretched,
    )
    logger.info(
        "Timeline: %s conflicts, %s bubbles, %s migrations.",
        conflicts,
        len(bubbles),
        migrations,
    )
    return report


def steady_throughput(cfg: PipelineConfig) -> float:
    """Model-slice tasks completed per second once the pipeline is full."""
    return MICROSECONDS_PER_SECOND / float(cfg.slot)
