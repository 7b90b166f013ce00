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

"""Network presets: one-way message latency plus achievable bandwidth."""

import dataclasses
import math
from collections.abc import Mapping
from typing import Any

from disagg_planner.errors import PreconditionError, SpecValidationError
from disagg_planner.specs import as_number, as_text, check_fields


@dataclasses.dataclass(frozen=True)
class NetPreset:
    """Calibrated transport between the compute and memory pools.

    Attributes:
        base_latency: one-way seconds per message, all stack overheads included.
        achievable_bw: bytes/s a single link sustains for large messages.
    """

    name: str
    base_latency: float
    achievable_bw: float

    def __post_init__(self) -> None:
        if not self.base_latency >= 0:
            raise SpecValidationError("base_latency", "must be >= 0")
        if not self.achievable_bw > 0:
            raise SpecValidationError("achievable_bw", "must be > 0")

    @property
    def round_trip(self) -> float:
        return 2 * self.base_latency

    def to_document(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def load_net_preset(document: Mapping[str, Any]) -> NetPreset:
    check_fields(
        document,
        "NetPreset",
        required=("name", "base_latency", "achievable_bw"),
    )
    return NetPreset(
        name=as_text(document["name"], "name"),
        base_latency=as_number(document["base_latency"], "base_latency"),
        achievable_bw=as_number(document["achievable_bw"], "achievable_bw"),
    )


def xfer_time(num_bytes: float, preset: NetPreset, links: int = 1) -> float:
    """Seconds to move `num_bytes` split evenly over `links` parallel links."""
    if num_bytes < 0:
        raise PreconditionError(f"bytes must be >= 0, got {num_bytes}")
    if links < 1:
        raise PreconditionError(f"links must be >= 1, got {links}")
    if math.isinf(preset.achievable_bw):
        return preset.base_latency
    return preset.base_latency + num_bytes / (links * preset.achievable_bw)


def capped_preset(preset: NetPreset, line_rate: float) -> NetPreset:
    """The preset limited to a NIC line rate in bytes/s.

    The ideal (infinite bandwidth) preset is never capped.
    """
    if math.isinf(preset.achievable_bw) or line_rate >= preset.achievable_bw:
        return preset
    return dataclasses.replace(preset, achievable_bw=line_rate)
