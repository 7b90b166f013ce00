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

import dataclasses
import logging
import os
from os import environ
from pathlib import Path
from typing import Any

import tomllib

from disagg_planner.constants import (
    DEFAULT_ALLREDUCE_LATENCY,
    DEFAULT_ARRIVAL_RATE,
    DEFAULT_ATTN_MBU,
    DEFAULT_EQUAL_COST_TOLERANCE,
    DEFAULT_FEASIBILITY_TOLERANCE,
    DEFAULT_GEMM_EFF,
    DEFAULT_GEMM_MFU,
    DEFAULT_HOST_TIME_PER_REQUEST,
    DEFAULT_KV_HEADROOM,
    DEFAULT_NETWORK,
    DEFAULT_SATURATION_THRESHOLD,
    DEFAULT_TRACE_SIGMA,
    ENV_CATALOG,
    ENV_OUTPUT_DIR,
    PROGRAM_NAME,
)
from disagg_planner.errors import SchemaError
from disagg_planner.perf_model import EfficiencyProfile

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class Configuration:
    gemm_eff: float = DEFAULT_GEMM_EFF
    gemm_mfu: float = DEFAULT_GEMM_MFU
    attn_mbu: float = DEFAULT_ATTN_MBU
    kv_headroom: float = DEFAULT_KV_HEADROOM
    network: str = DEFAULT_NETWORK
    trace_sigma: float = DEFAULT_TRACE_SIGMA
    arrival_rate: float = DEFAULT_ARRIVAL_RATE
    equal_cost_tolerance: float = DEFAULT_EQUAL_COST_TOLERANCE
    saturation_threshold: float = DEFAULT_SATURATION_THRESHOLD
    feasibility_tolerance: float = DEFAULT_FEASIBILITY_TOLERANCE
    host_time_per_request: float = DEFAULT_HOST_TIME_PER_REQUEST
    allreduce_latency: float = DEFAULT_ALLREDUCE_LATENCY
    output_dir: Path = Path()
    catalog: Path | None = None

    @property
    def efficiency(self) -> EfficiencyProfile:
        return EfficiencyProfile(
            gemm_eff=self.gemm_eff,
            attn_mbu=self.attn_mbu,
            gemm_mfu=self.gemm_mfu,
        )


NUMBER_KEYS = (
    "gemm_eff",
    "gemm_mfu",
    "attn_mbu",
    "kv_headroom",
    "trace_sigma",
    "arrival_rate",
    "equal_cost_tolerance",
    "saturation_threshold",
    "feasibility_tolerance",
    "host_time_per_request",
    "allreduce_latency",
)
TEXT_KEYS = ("network", "output_dir", "catalog")


def configuration_folders() -> list[Path]:
    dir_paths: list[Path] = []
    if "XDG_CONFIG_HOME" in os.environ:
        dir_path = Path(os.environ["XDG_CONFIG_HOME"])
    else:
        dir_path = Path.home() / ".config"

    dir_paths.append(dir_path / PROGRAM_NAME)
    dir_paths.append(Path("/etc/") / PROGRAM_NAME)
    return dir_paths


def default_configuration_file() -> Path | None:
    for dir_path in configuration_folders():
        file_path = dir_path / f"{PROGRAM_NAME}.toml"
        if file_path.exists():
            return file_path
    return None


def check_data(data: dict[str, Any], source: Path) -> None:
    if unknown := sorted(set(data) - {*NUMBER_KEYS, *TEXT_KEYS}):
        raise SchemaError(f"{source}: unknown key(s) {', '.join(unknown)}")
    for key in NUMBER_KEYS:
        if key in data and (
            isinstance(data[key], bool) or not isinstance(data[key], int | float)
        ):
            raise SchemaError(f"{source}: '{key}' must be a number")
    for key in TEXT_KEYS:
        if key in data and not isinstance(data[key], str):
            raise SchemaError(f"{source}: '{key}' must be a string")


def get_configuration(
    config_file: Path | None,
    requested_output_dir: Path | None = None,
    requested_catalog: Path | None = None,
) -> Configuration:
    config_file = config_file or default_configuration_file()
    logger.info("Loading configuration from file '%s'.", config_file)
    if config_file:
        try:
            with config_file.open("rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise SchemaError(f"{config_file}: {e}") from e
        check_data(data, config_file)
    else:
        data = {}

    logger.debug("Configuration file data: '%s'.", data)

    if requested_output_dir:  # command line --output-dir
        output_dir = requested_output_dir
    elif ENV_OUTPUT_DIR in environ:
        output_dir = Path(environ[ENV_OUTPUT_DIR])
    elif "output_dir" in data:
        output_dir = Path(data["output_dir"])
    else:
        output_dir = Path()

    catalog: Path | None
    if requested_catalog:  # command line --catalog
        catalog = requested_catalog
    elif ENV_CATALOG in environ:
        catalog = Path(environ[ENV_CATALOG])
    elif "catalog" in data:
        catalog = Path(data["catalog"])
    else:
        catalog = None

    configuration = Configuration(
        **{key: float(data[key]) for key in NUMBER_KEYS if key in data},
        network=data.get("network", DEFAULT_NETWORK),
        output_dir=output_dir,
        catalog=catalog,
    )
    # Raises on out of range efficiencies.
    _ = configuration.efficiency

    logger.info("Using configuration: %s.", configuration)

    return configuration
