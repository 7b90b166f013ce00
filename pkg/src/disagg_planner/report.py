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

"""Machine outputs (JSON, CSV, plot data) and aligned text tables."""

import dataclasses
import json
import logging
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import pandas as pd

from disagg_planner.constants import PLAN_COLUMNS
from disagg_planner.errors import PreconditionError

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PlotPoint:
    x: float | int | str
    series: str
    value: float


def resolve_output(path: Path, output_dir: Path) -> Path:
    """Relative paths land in `output_dir`, created on demand."""
    resolved = path if path.is_absolute() else output_dir / path
    resolved.parent.mkdir(parents=True, exist_ok=True)
    return resolved


def _plain(value: Any) -> Any:  # noqa: ANN401
    """JSON has no infinity, write it as null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    return value


def to_json(document: Mapping[str, Any]) -> str:
    return json.dumps(_plain(document), indent=2, sort_keys=True) + "\n"


def write_json(document: Mapping[str, Any], path: Path) -> None:
    logger.info("Writing '%s'.", path)
    path.write_text(to_json(document), encoding="utf-8")


def write_frame(frame: pd.DataFrame, path: Path) -> None:
    logger.info("Writing %s rows to '%s'.", len(frame), path)
    frame.to_csv(path, index=False, lineterminator="\n")


def plot_frame(
    points: Sequence[PlotPoint],
    x_name: str = "x",
    value_name: str = "value",
) -> pd.DataFrame:
    if not points:
        raise PreconditionError("no points to write")
    return pd.DataFrame(
        [(p.x, p.series, p.value) for p in points],
        columns=[x_name, "series", value_name],
    )


def emit_plot_data(
    points: Sequence[PlotPoint],
    path: Path,
    x_name: str = "x",
    value_name: str = "value",
) -> None:
    """Tidy CSV, one row per point."""
    write_frame(plot_frame(points, x_name, value_name), path)


def plan_frame(rows: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(
        [[row[c] for c in PLAN_COLUMNS] for row in rows],
        columns=list(PLAN_COLUMNS),
    )


def _cell(value: Any) -> str:  # noqa: ANN401
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, float):
        if abs(value) < 1e-3 or abs(value) >= 1e6:  # noqa: PLR2004
            return f"{value:.4g}"
        return f"{value:.3f}"
    return str(value)


def format_table(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> str:
    """Rows under their column names, missing cells left blank."""
    if not rows:
        return ""
    frame = pd.DataFrame(
        [[row.get(c) for c in columns] for row in rows],
        columns=list(columns),
        dtype=object,
    )
    return frame.to_string(index=False, formatters=dict.fromkeys(columns, _cell))


def format_pairs(document: Mapping[str, Any]) -> str:
    """Flat key/value listing of the scalar entries of a document."""
    pairs = [
        (key, _cell(value))
        for key, value in document.items()
        if not isinstance(value, Mapping | list | tuple)
    ]
    if not pairs:
        return ""
    width = max(len(key) for key, _ in pairs)
    return "\n".join(f"{key:<{width}}  {value}" for key, value in pairs)
