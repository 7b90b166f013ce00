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
from pathlib import Path

from disagg_planner import report
from disagg_planner.command.base import BaseCommand
from disagg_planner.graph.ir import CompGraph, bundled_graph, read_graph
from disagg_planner.graph.slicer import slices_document

logger = logging.getLogger(__name__)


class SplitCommand(BaseCommand):
    command_name = "split"

    def graph(self) -> CompGraph:
        """A graph file, or a bundled graph by name."""
        if (path := Path(self.args.graph)).suffix == ".json":
            return read_graph(path)
        return bundled_graph(self.args.graph)

    async def execute(self) -> None:
        document = slices_document(self.graph(), self.args.batch)
        print(
            report.format_table(
                [
                    {
                        "slice": s["index"],
                        "ops": len(s["ops"]),
                        "attention": s["attention"] or "",
                        "context_bytes": sum(e["bytes"] for e in s["context_out"]),
                    }
                    for s in document["slices"]
                ],
                ("slice", "ops", "attention", "context_bytes"),
            ),
        )
        if self.args.out:
            report.write_json(document, self.output_path(self.args.out))
