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

"""Bundled accelerator, model, network and trace data."""

import dataclasses
import difflib
import functools
import importlib.resources
import json
import logging
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any, TypeVar

from disagg_planner.errors import CatalogLookupError, SchemaError
from disagg_planner.sim.network import NetPreset, load_net_preset
from disagg_planner.sim.trace import TraceProfile
from disagg_planner.specs import (
    DeviceSpec,
    LlmSpec,
    as_count,
    as_number,
    as_text,
    check_fields,
    load_device_spec,
    load_llm_spec,
    read_json_document,
)

logger = logging.getLogger(__name__)

CATALOG_RESOURCE = "catalog.json"

# Zero latency and unlimited bandwidth, for analytic comparisons.
IDEAL_NETWORK = NetPreset(name="ideal", base_latency=0.0, achievable_bw=math.inf)

T = TypeVar("T")


def _lookup(table: Mapping[str, T], kind: str, name: str) -> T:
    try:
        return table[name.strip().lower()]
    except KeyError:
        suggestions = difflib.get_close_matches(name.lower(), list(table), n=3)
        hint = f" (did you mean {', '.join(suggestions)}?)" if suggestions else ""
        raise CatalogLookupError(f"no {kind} named '{name}'{hint}") from None


def _index(entries: list[T], key: str = "name") -> dict[str, T]:
    return {getattr(entry, key).lower(): entry for entry in entries}


def _load_trace_shape(document: Mapping[str, Any]) -> TraceProfile:
    check_fields(
        document,
        "TraceProfile",
        required=("name", "n_requests", "mean_prompt", "mean_output"),
        optional=("arrival_rate", "seed", "sigma"),
    )
    optional: dict[str, Any] = {}
    if "seed" in document:
        optional["seed"] = as_count(document["seed"], "seed")
    if "sigma" in document:
        optional["sigma"] = as_number(document["sigma"], "sigma")
    return TraceProfile(
        name=as_text(document["name"], "name"),
        n_requests=as_count(document["n_requests"], "n_requests"),
        mean_prompt=as_number(document["mean_prompt"], "mean_prompt"),
        mean_output=as_number(document["mean_output"], "mean_output"),
        arrival_rate=as_number(document.get("arrival_rate", 10.0), "arrival_rate"),
        **optional,
    )


@dataclasses.dataclass
class Catalog:
    """Named specifications, looked up case-insensitively.

    Attributes:
        devices: accelerators by lower-case name.
        models: model specifications by lower-case name.
        networks: network presets by lower-case name.
        traces: trace profiles by lower-case name.
    """

    devices: dict[str, DeviceSpec] = dataclasses.field(default_factory=dict)
    models: dict[str, LlmSpec] = dataclasses.field(default_factory=dict)
    networks: dict[str, NetPreset] = dataclasses.field(default_factory=dict)
    traces: dict[str, TraceProfile] = dataclasses.field(default_factory=dict)

    def device(self, name: str) -> DeviceSpec:
        return _lookup(self.devices, "device", name)

    def model(self, name: str) -> LlmSpec:
        return _lookup(self.models, "model", name)

    def network(self, name: str) -> NetPreset:
        return _lookup(self.networks, "network preset", name)

    def trace_profile(self, name: str) -> TraceProfile:
        return _lookup(self.traces, "trace profile", name)

    def lookup(self, name: str) -> DeviceSpec | LlmSpec:
        """A device or a model, whichever carries the name."""
        key = name.strip().lower()
        if key in self.devices:
            return self.devices[key]
        if key in self.models:
            return self.models[key]
        return _lookup({**self.devices, **self.models}, "catalog entry", name)

    def merged(self, other: "Catalog") -> "Catalog":
        """A new catalog where entries of `other` replace same-named ones."""
        return Catalog(
            devices={**self.devices, **other.devices},
            models={**self.models, **other.models},
            networks={**self.networks, **other.networks},
            traces={**self.traces, **other.traces},
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "devices": [d.to_document() for d in self.devices.values()],
            "models": [m.to_document() for m in self.models.values()],
            "networks": [
                n.to_document()
                for n in self.networks.values()
                if math.isfinite(n.achievable_bw)
            ],
            "traces": [
                {
                    "name": t.name,
                    "n_requests": t.n_requests,
                    "mean_prompt": t.mean_prompt,
                    "mean_output": t.mean_output,
                }
                for t in self.traces.values()
            ],
        }


def load_catalog(document: Mapping[str, Any]) -> Catalog:
    check_fields(
        document,
        "Catalog",
        required=(),
        optional=("devices", "models", "networks", "traces"),
    )
    for section in ("devices", "models", "networks", "traces"):
        if not isinstance(document.get(section, []), list):
            raise SchemaError(f"Catalog: '{section}' must be a list")
    return Catalog(
        devices=_index([load_device_spec(d) for d in document.get("devices", [])]),
        models=_index([load_llm_spec(m) for m in document.get("models", [])]),
        networks=_index([load_net_preset(n) for n in document.get("networks", [])]),
        traces=_index([_load_trace_shape(t) for t in document.get("traces", [])]),
    )


@functools.cache
def builtin_catalog() -> Catalog:
    resource = importlib.resources.files("disagg_planner.data") / CATALOG_RESOURCE
    catalog = load_catalog(json.loads(resource.read_text(encoding="utf-8")))
    catalog.networks[IDEAL_NETWORK.name] = IDEAL_NETWORK
    logger.debug(
        "Built-in catalog: %s devices, %s models, %s networks, %s traces.",
        len(catalog.devices),
        len(catalog.models),
        len(catalog.networks),
        len(catalog.traces),
    )
    return catalog


def get_catalog(path: Path | None = None) -> Catalog:
    """The bundled catalog, with the user catalog at `path` merged over it."""
    if path is None:
        return builtin_catalog()
    logger.info("Merging user catalog '%s' over the bundled one.", path)
    return builtin_catalog().merged(load_catalog(read_json_document(path)))
