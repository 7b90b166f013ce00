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

from typing import Literal

PROGRAM_NAME = "disagg-planner"
PROGRAM_VERSION = "0.1.0"

ENV_OUTPUT_DIR = "DISAGG_PLANNER_OUTPUT_DIR"
ENV_CATALOG = "DISAGG_PLANNER_CATALOG"

DOMAIN_ERROR_EXIT_CODE = 1
USAGE_ERROR_EXIT_CODE = 2

# Decimal units, as used by accelerator data sheets.
GB = 1e9
MICROSECONDS_PER_SECOND = 1_000_000

DEFAULT_GEMM_EFF = 0.55
DEFAULT_GEMM_MFU = 0.70
DEFAULT_ATTN_MBU = 0.80
DEFAULT_KV_HEADROOM = 0.05
DEFAULT_NETWORK = "FHBN"
DEFAULT_TRACE_SIGMA = 0.6
DEFAULT_ARRIVAL_RATE = 10.0
DEFAULT_EQUAL_COST_TOLERANCE = 0.10
DEFAULT_SATURATION_THRESHOLD = 0.05
DEFAULT_FEASIBILITY_TOLERANCE = 0.01

# Host-side scheduling, input preparation and sampling, per request and iteration.
DEFAULT_HOST_TIME_PER_REQUEST = 60e-6
# Fixed cost of one tensor-parallel all-reduce on top of its ring transfer.
DEFAULT_ALLREDUCE_LATENCY = 8e-6

# Head size used when a model document omits num_heads.
DEFAULT_HEAD_DIM = 128

mode_t = Literal[
    "disaggregated",
    "homogeneous-TP",
]

mode_choices = (
    "disaggregated",
    "homogeneous-TP",
)

op_kind_t = Literal[
    "gemm",
    "attention",
]

op_kind_choices = (
    "gemm",
    "attention",
)

TRACE_COLUMNS = ("request_id", "arrival_s", "prompt_tokens", "output_tokens")
TIMELINE_COLUMNS = ("resource", "batch", "kind", "start_us", "end_us")
PLAN_COLUMNS = (
    "a",
    "b",
    "cost_per_hr",
    "throughput_tps",
    "avg_batch",
    "tbt_p50_ms",
    "tokens_per_dollar",
    "rank",
)
