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

from disagg_planner.attention import check_attention
from disagg_planner.command.base import BaseCommand

logger = logging.getLogger(__name__)


class AttentionCheckCommand(BaseCommand):
    """Split-and-merge attention against exact attention on random inputs."""

    command_name = "attention-check"

    async def execute(self) -> None:
        document = check_attention(
            d_head=self.args.d_head,
            heads=self.args.heads,
            length=self.args.length,
            splits=self.args.splits,
            seed=self.args.seed,
            trials=self.args.trials,
            devices=self.args.devices,
            gqa_group=self.args.gqa_group,
            dtype=self.args.dtype,
        )
        document["tolerance"] = self.args.tolerance
        document["passed"] = (
            document["max_relative_error"] <= self.args.tolerance
            and document["head_partition_exact"]
        )
        if not document["passed"]:
            logger.warning(
                "Merged attention differs from exact attention by %.3g.",
                document["max_relative_error"],
            )
        self.write_document(document)
