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

"""Request traces: synthetic generation and CSV I/O."""

import dataclasses
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from disagg_planner.constants import DEFAULT_TRACE_SIGMA, TRACE_COLUMNS
from disagg_planner.errors import SchemaError, SpecValidationError
from disagg_planner.specs import TraceRecord

logger = logging.getLogger(__name__)

# Arrival times are kept at microsecond resolution so CSV files round-trip.
ARRIVAL_DECIMALS = 6


@dataclasses.dataclass(frozen=True)
class TraceProfile:
    """Parameters of a synthetic trace.

    Prompt and output lengths are lognormal with the given means, arrivals are
    Poisson with `arrival_rate` requests per second.
    """

    name: str
    n_requests: int
    mean_prompt: float
    mean_output: float
    arrival_rate: float
    seed: int = 0
    sigma: float = DEFAULT_TRACE_SIGMA

    def __post_init__(self) -> None:
        for field in ("n_requests", "mean_prompt", "mean_output", "arrival_rate"):
            if not getattr(self, field) > 0:
                raise SpecValidationError(field, "must be > 0")
        if not self.sigma >= 0:
            raise SpecValidationError("sigma", "must be >= 0")

    def with_overrides(self, **changes: float | int | None) -> "TraceProfile":
        return dataclasses.replace(
            self,
            **{k: v for k, v in changes.items() if v is not None},  # type: ignore[arg-type]
        )


def lognormal_lengths(
    rng: np.random.Generator,
    mean: float,
    sigma: float,
    size: int,
) -> np.ndarray:
    """Integer lengths >= 1 whose underlying lognormal has the given mean."""
    mu = np.log(mean) - sigma**2 / 2
    return np.maximum(1, np.rint(rng.lognormal(mu, sigma, size))).astype(np.int64)


def gen_trace(profile: TraceProfile) -> tuple[TraceRecord, ...]:
    logger.info("Generating trace from profile %s.", profile)
    rng = np.random.default_rng(profile.seed)
    gaps = rng.exponential(1.0 / profile.arrival_rate, profile.n_requests)
    arrivals = np.round(np.cumsum(gaps), ARRIVAL_DECIMALS)
    prompts = lognormal_lengths(
        rng, profile.mean_prompt, profile.sigma, profile.n_requests
    )
    outputs = lognormal_lengths(
        rng, profile.mean_output, profile.sigma, profile.n_requests
    )
    return tuple(
        TraceRecord(
            request_id=f"req-{i:06d}",
            arrival_s=float(arrivals[i]),
            prompt_tokens=int(prompts[i]),
            output_tokens=int(outputs[i]),
        )
        for i in range(profile.n_requests)
    )


def constant_trace(
    n_requests: int,
    prompt_tokens: int,
    output_tokens: int,
    interval_s: float = 0.0,
) -> tuple[TraceRecord, ...]:
    """Identical requests, `interval_s` apart starting at time 0."""
    return tuple(
        TraceRecord(
            request_id=f"req-{i:06d}",
            arrival_s=round(i * interval_s, ARRIVAL_DECIMALS),
            prompt_tokens=prompt_tokens,
            output_tokens=output_tokens,
        )
        for i in range(n_requests)
    )


def trace_frame(records: Sequence[TraceRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        [dataclasses.astuple(r) for r in records],
        columns=list(TRACE_COLUMNS),
    )


def write_trace(records: Sequence[TraceRecord], path: Path) -> None:
    logger.info("Writing %s trace records to '%s'.", len(records), path)
    trace_frame(records).to_csv(
        path,
        index=False,
        float_format=f"%.{ARRIVAL_DECIMALS}f",
        lineterminator="\n",
    )


def read_trace(path: Path) -> tuple[TraceRecord, ...]:
    logger.info("Reading trace '%s'.", path)
    frame = pd.read_csv(
        path, dtype={"request_id": str}, float_precision="round_trip"
    )
    if tuple(frame.columns) != TRACE_COLUMNS:
        raise SchemaError(
            f"{path}: trace header must be {','.join(TRACE_COLUMNS)}, "
            f"got {','.join(map(str, frame.columns))}",
        )
    try:
        return tuple(
            TraceRecord(
                request_id=str(row.request_id),
                arrival_s=float(row.arrival_s),
                prompt_tokens=int(row.prompt_tokens),
                output_tokens=int(row.output_tokens),
            )
            for row in frame.itertuples(index=False)
        )
    except (TypeError, ValueError) as e:
        raise SchemaError(f"{path}: malformed trace row ({e})") from e


def trace_summary(records: Sequence[TraceRecord]) -> dict[str, float]:
    if not records:
        return {"n_requests": 0, "mean_prompt": 0.0, "mean_output": 0.0}
    return {
        "n_requests": len(records),
        "mean_prompt": float(np.mean([r.prompt_tokens for r in records])),
        "mean_output": float(np.mean([r.output_tokens for r in records])),
    }
