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

"""KV cache accounting on the attention pool."""

import dataclasses
import logging

from disagg_planner.errors import LedgerOverflowError

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class KvLedger:
    """Token reservations against a byte capacity.

    A request reserves its final footprint on admission and fills it one
    token per decode iteration, so growth never needs preemption.

    Attributes:
        capacity: bytes available for KV caches.
        bytes_per_token: KV bytes of one token across all layers.
    """

    capacity: float
    bytes_per_token: int
    _reserved: dict[str, int] = dataclasses.field(default_factory=dict, repr=False)
    _used: dict[str, int] = dataclasses.field(default_factory=dict, repr=False)
    reserved_tokens: int = 0
    used_tokens: int = 0
    peak_reserved_tokens: int = 0

    @property
    def reserved_bytes(self) -> int:
        return self.reserved_tokens * self.bytes_per_token

    @property
    def used_bytes(self) -> int:
        return self.used_tokens * self.bytes_per_token

    @property
    def peak_bytes(self) -> int:
        return self.peak_reserved_tokens * self.bytes_per_token

    def can_ever_fit(self, tokens: int) -> bool:
        return tokens * self.bytes_per_token <= self.capacity

    def fits(self, tokens: int) -> bool:
        return (self.reserved_tokens + tokens) * self.bytes_per_token <= self.capacity

    def reserve(self, request_id: str, final_tokens: int, initial_tokens: int) -> None:
        if request_id in self._reserved:
            raise LedgerOverflowError(f"request '{request_id}' is already admitted")
        if not self.fits(final_tokens):
            raise LedgerOverflowError(
                f"request '{request_id}' needs {final_tokens} tokens, "
                f"{self.reserved_tokens} of the capacity are reserved",
            )
        self._reserved[request_id] = final_tokens
        self._used[request_id] = initial_tokens
        self.reserved_tokens += final_tokens
        self.used_tokens += initial_tokens
        self.peak_reserved_tokens = max(self.peak_reserved_tokens, self.reserved_tokens)

    def grow(self, request_id: str, tokens: int = 1) -> None:
        if self._used[request_id] + tokens > self._reserved[request_id]:
            raise LedgerOverflowError(f"request '{request_id}' outgrew its reservation")
        self._used[request_id] += tokens
        self.used_tokens += tokens

    def release(self, request_id: str) -> None:
        self.reserved_tokens -= self._reserved.pop(request_id)
        self.used_tokens -= self._used.pop(request_id)

    def check(self) -> None:
        """Raise when the reservations exceed the capacity."""
        if self.reserved_bytes > self.capacity:
            raise LedgerOverflowError(
                f"{self.reserved_bytes} bytes reserved, capacity {self.capacity:.0f}",
            )
