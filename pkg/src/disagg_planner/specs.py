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

"""Shared domain types, their validation and their JSON document form."""

import dataclasses
import json
import logging
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import TYPE_CHECKING, Any

from disagg_planner.constants import DEFAULT_HEAD_DIM, mode_choices, mode_t
from disagg_planner.errors import SchemaError, SpecValidationError

if TYPE_CHECKING:
    from disagg_planner.catalog import Catalog

logger = logging.getLogger(__name__)

VALID_BYTES_PER_ELEM = (1, 2, 4)
WEIGHT_BYTES_TOLERANCE = 0.10


def check_fields(
    document: Mapping[str, Any],
    type_name: str,
    required: Sequence[str],
    optional: Sequence[str] = (),
) -> None:
    """Reject documents with missing or unknown fields."""
    if not isinstance(document, Mapping):
        raise SchemaError(f"{type_name}: expected an object, got {type(document)}")
    if missing := [f for f in required if f not in document]:
        raise SchemaError(f"{type_name}: missing field(s) {', '.join(missing)}")
    known = set(required) | set(optional)
    if unknown := sorted(f for f in document if f not in known):
        raise SchemaError(f"{type_name}: unknown field(s) {', '.join(unknown)}")


def as_count(value: Any, field: str) -> int:  # noqa: ANN401
    """Integers, or integral floats such as 70e9 written in JSON."""
    if isinstance(value, bool):
        raise SchemaError(f"{field}: expected an integer, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise SchemaError(f"{field}: expected an integer, got {value!r}")


def as_number(value: Any, field: str) -> float:  # noqa: ANN401
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise SchemaError(f"{field}: expected a number, got {value!r}")
    return float(value)


def as_text(value: Any, field: str) -> str:  # noqa: ANN401
    if not isinstance(value, str) or not value:
        raise SchemaError(f"{field}: expected a non-empty string, got {value!r}")
    return value


def read_json_document(path: Path) -> Any:  # noqa: ANN401
    logger.debug("Reading JSON document '%s'.", path)
    with path.open("rb") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON ({e})") from e


def _positive(value: float, field: str) -> None:
    if not value > 0 or not math.isfinite(value):
        raise SpecValidationError(
            field, f"must be a positive finite number, got {value}"
        )


@dataclasses.dataclass(frozen=True)
class LlmSpec:
    """Model constants used by every performance formula.

    Attributes:
        n_params: parameter count (N).
        hidden_dim: hidden size (d).
        layers: transformer layers (L).
        gqa_group: query heads sharing one KV head (G).
        bytes_per_elem: element size (e).
        weight_bytes: measured weight footprint, may differ from N*e.
        num_heads: query heads.
        num_heads_assumed: num_heads was not given and defaults to d/128.
    """

    name: str
    n_params: int
    hidden_dim: int
    layers: int
    gqa_group: int
    bytes_per_elem: int
    weight_bytes: float
    num_heads: int
    num_heads_assumed: bool = False

    def __post_init__(self) -> None:
        for field in ("n_params", "hidden_dim", "layers", "num_heads"):
            if getattr(self, field) <= 0:
                raise SpecValidationError(field, "must be > 0")
        if self.gqa_group < 1:
            raise SpecValidationError("gqa_group", "must be >= 1")
        if self.bytes_per_elem not in VALID_BYTES_PER_ELEM:
            raise SpecValidationError(
                "bytes_per_elem",
                f"must be one of {VALID_BYTES_PER_ELEM}, got {self.bytes_per_elem}",
            )
        if self.hidden_dim % self.num_heads:
            raise SpecValidationError(
                "num_heads",
                f"hidden_dim {self.hidden_dim} is not divisible by {self.num_heads}",
            )
        if self.num_heads % self.gqa_group:
            raise SpecValidationError(
                "gqa_group",
                f"num_heads {self.num_heads} is not divisible by {self.gqa_group}",
            )
        _positive(self.weight_bytes, "weight_bytes")
        nominal = self.n_params * self.bytes_per_elem
        if abs(self.weight_bytes - nominal) > WEIGHT_BYTES_TOLERANCE * nominal:
            raise SpecValidationError(
                "weight_bytes",
                f"{self.weight_bytes:.4g} is not within 10% of n_params * "
                f"bytes_per_elem = {nominal:.4g}",
            )

    @property
    def kv_heads(self) -> int:
        return self.num_heads // self.gqa_group

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.num_heads

    @property
    def kv_dim(self) -> int:
        """Width of the K (or V) projection, d/G."""
        return self.hidden_dim // self.gqa_group

    def to_document(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def load_llm_spec(document: Mapping[str, Any]) -> LlmSpec:
    check_fields(
        document,
        "LlmSpec",
        required=(
            "name",
            "n_params",
            "hidden_dim",
            "layers",
            "gqa_group",
            "bytes_per_elem",
            "weight_bytes",
        ),
        optional=("num_heads", "num_heads_assumed"),
    )
    name = as_text(document["name"], "name")
    hidden_dim = as_count(document["hidden_dim"], "hidden_dim")
    if "num_heads" in document:
        num_heads = as_count(document["num_heads"], "num_heads")
        assumed = bool(document.get("num_heads_assumed", False))
    else:
        if hidden_dim <= 0 or hidden_dim % DEFAULT_HEAD_DIM:
            raise SpecValidationError(
                "num_heads",
                f"absent and hidden_dim {hidden_dim} is not a multiple of "
                f"{DEFAULT_HEAD_DIM}",
            )
        num_heads = hidden_dim // DEFAULT_HEAD_DIM
        assumed = True
        logger.warning(
            "Model '%s': num_heads not given, assuming %s (d/%s).",
            name,
            num_heads,
            DEFAULT_HEAD_DIM,
        )
    return LlmSpec(
        name=name,
        n_params=as_count(document["n_params"], "n_params"),
        hidden_dim=hidden_dim,
        layers=as_count(document["layers"], "layers"),
        gqa_group=as_count(document["gqa_group"], "gqa_group"),
        bytes_per_elem=as_count(document["bytes_per_elem"], "bytes_per_elem"),
        weight_bytes=as_number(document["weight_bytes"], "weight_bytes"),
        num_heads=num_heads,
        num_heads_assumed=assumed,
    )


@dataclasses.dataclass(frozen=True)
class DeviceSpec:
    """One accelerator model.

    Attributes:
        peak_flops: dense 16-bit flop/s.
        mem_bytes: device memory in bytes.
        mem_bw: memory bandwidth in bytes/s.
        nic_bw: network interface rate in bits/s.
        price_per_hour: rental price.
        power_w: informational, None when unpublished.
        price_note: provenance of the price when it is an estimate.
        purchase_price: one-off price, when known.
        ici_bw: inter-chip bandwidth in bytes/s, informational.
    """

    name: str
    peak_flops: float
    mem_bytes: float
    mem_bw: float
    nic_bw: float
    price_per_hour: float
    power_w: float | None = None
    price_note: str = ""
    purchase_price: float | None = None
    ici_bw: float | None = None

    def __post_init__(self) -> None:
        for field in ("peak_flops", "mem_bytes", "mem_bw", "nic_bw", "price_per_hour"):
            _positive(getattr(self, field), field)
        for field in ("power_w", "purchase_price", "ici_bw"):
            if (value := getattr(self, field)) is not None:
                _positive(value, field)

    @property
    def link_bw(self) -> float:
        """NIC rate in bytes/s."""
        return self.nic_bw / 8

    def to_document(self) -> dict[str, Any]:
        document = dataclasses.asdict(self)
        return {k: v for k, v in document.items() if v not in (None, "")}


def load_device_spec(document: Mapping[str, Any]) -> DeviceSpec:
    check_fields(
        document,
        "DeviceSpec",
        required=(
            "name",
            "peak_flops",
            "mem_bytes",
            "mem_bw",
            "nic_bw",
            "price_per_hour",
        ),
        optional=("power_w", "price_note", "purchase_price", "ici_bw"),
    )
    optional = {
        field: as_number(document[field], field)
        for field in ("power_w", "purchase_price", "ici_bw")
        if field in document
    }
    return DeviceSpec(
        name=as_text(document["name"], "name"),
        peak_flops=as_number(document["peak_flops"], "peak_flops"),
        mem_bytes=as_number(document["mem_bytes"], "mem_bytes"),
        mem_bw=as_number(document["mem_bw"], "mem_bw"),
        nic_bw=as_number(document["nic_bw"], "nic_bw"),
        price_per_hour=as_number(document["price_per_hour"], "price_per_hour"),
        price_note=str(document.get("price_note", "")),
        **optional,
    )


@dataclasses.dataclass(frozen=True)
class DevicePool:
    device: DeviceSpec
    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise SpecValidationError("count", f"must be >= 1, got {self.count}")

    @property
    def mem_bytes(self) -> float:
        return self.device.mem_bytes * self.count

    @property
    def cost_per_hour(self) -> float:
        return self.device.price_per_hour * self.count

    def to_document(self) -> dict[str, Any]:
        return {"device": self.device.to_document(), "count": self.count}


def _merge_pool(pools: Sequence[DevicePool], field: str) -> DevicePool | None:
    if not pools:
        return None
    names = {p.device.name for p in pools}
    if len(names) > 1:
        raise SpecValidationError(
            field,
            f"mixed device types in one pool are not supported: {sorted(names)}",
        )
    return DevicePool(device=pools[0].device, count=sum(p.count for p in pools))


@dataclasses.dataclass(frozen=True)
class ClusterConfig:
    """Devices of one deployment and how operators are placed on them.

    Disaggregated clusters run non-attention operators on `compute_devices`
    (a devices) and attention on `memory_devices` (b devices). Homogeneous
    tensor-parallel clusters run everything on `compute_devices`.
    """

    compute_devices: tuple[DevicePool, ...]
    memory_devices: tuple[DevicePool, ...]
    network: str
    mode: mode_t

    def __post_init__(self) -> None:
        if self.mode not in mode_choices:
            raise SpecValidationError("mode", f"unknown mode {self.mode!r}")
        if not self.network:
            raise SpecValidationError("network", "must name a network preset")
        # Raises on mixed pools.
        _merge_pool(self.compute_devices, "compute_devices")
        _merge_pool(self.memory_devices, "memory_devices")
        if self.a < 1:
            raise SpecValidationError("compute_devices", "needs at least one device")
        if self.mode == "disaggregated" and self.b < 1:
            raise SpecValidationError(
                "memory_devices",
                "disaggregated mode needs at least one memory device",
            )
        if self.mode == "homogeneous-TP" and self.b != 0:
            raise SpecValidationError(
                "memory_devices",
                "homogeneous mode takes no memory devices",
            )

    @property
    def a(self) -> int:
        return sum(p.count for p in self.compute_devices)

    @property
    def b(self) -> int:
        return sum(p.count for p in self.memory_devices)

    @property
    def compute_pool(self) -> DevicePool:
        pool = _merge_pool(self.compute_devices, "compute_devices")
        assert pool is not None  # noqa: S101
        return pool

    @property
    def memory_pool(self) -> DevicePool | None:
        return _merge_pool(self.memory_devices, "memory_devices")

    @property
    def attention_pool(self) -> DevicePool:
        """Pool holding the KV cache and running attention."""
        return self.memory_pool or self.compute_pool

    @property
    def cost_per_hour(self) -> float:
        pools = (*self.compute_devices, *self.memory_devices)
        return sum(p.cost_per_hour for p in pools)

    @property
    def label(self) -> str:
        if self.mode == "homogeneous-TP":
            return f"{self.a}x{self.compute_pool.device.name}"
        memory_pool = self.memory_pool
        assert memory_pool is not None  # noqa: S101
        return (
            f"DOP({self.a},{self.b}) "
            f"{self.compute_pool.device.name}+{memory_pool.device.name}"
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "compute_devices": [p.to_document() for p in self.compute_devices],
            "memory_devices": [p.to_document() for p in self.memory_devices],
            "network": self.network,
            "mode": self.mode,
        }


def disaggregated_cluster(
    compute: DeviceSpec,
    a: int,
    memory: DeviceSpec,
    b: int,
    network: str,
) -> ClusterConfig:
    return ClusterConfig(
        compute_devices=(DevicePool(compute, a),),
        memory_devices=(DevicePool(memory, b),),
        network=network,
        mode="disaggregated",
    )


def homogeneous_cluster(device: DeviceSpec, count: int, network: str) -> ClusterConfig:
    return ClusterConfig(
        compute_devices=(DevicePool(device, count),),
        memory_devices=(),
        network=network,
        mode="homogeneous-TP",
    )


def _load_pools(
    entries: Any,  # noqa: ANN401
    field: str,
    catalog: "Catalog",
) -> tuple[DevicePool, ...]:
    if not isinstance(entries, list):
        raise SchemaError(f"{field}: expected a list")
    pools: list[DevicePool] = []
    for entry in entries:
        check_fields(entry, field, required=("device", "count"))
        device = entry["device"]
        spec = (
            catalog.device(device)
            if isinstance(device, str)
            else load_device_spec(device)
        )
        pools.append(DevicePool(spec, as_count(entry["count"], "count")))
    return tuple(pools)


def load_cluster_config(
    document: Mapping[str, Any],
    catalog: "Catalog",
) -> ClusterConfig:
    """Devices may be catalog names or inline DeviceSpec objects."""
    check_fields(
        document,
        "ClusterConfig",
        required=("compute_devices", "mode"),
        optional=("memory_devices", "network"),
    )
    mode = document["mode"]
    if mode not in mode_choices:
        raise SchemaError(f"mode: expected one of {mode_choices}, got {mode!r}")
    return ClusterConfig(
        compute_devices=_load_pools(
            document["compute_devices"], "compute_devices", catalog
        ),
        memory_devices=_load_pools(
            document.get("memory_devices", []), "memory_devices", catalog
        ),
        network=as_text(document.get("network", "FHBN"), "network"),
        mode=mode,
    )


@dataclasses.dataclass(frozen=True)
class WorkloadPoint:
    batch: int
    seq_len: int

    def __post_init__(self) -> None:
        if self.batch < 1:
            raise SpecValidationError("batch", "must be >= 1")
        if self.seq_len < 1:
            raise SpecValidationError("seq_len", "must be >= 1")


@dataclasses.dataclass(frozen=True)
class TraceRecord:
    request_id: str
    arrival_s: float
    prompt_tokens: int
    output_tokens: int

    def __post_init__(self) -> None:
        if not self.arrival_s >= 0:
            raise SpecValidationError("arrival_s", "must be >= 0")
        if self.prompt_tokens < 1:
            raise SpecValidationError("prompt_tokens", "must be >= 1")
        if self.output_tokens < 1:
            raise SpecValidationError("output_tokens", "must be >= 1")

    @property
    def final_tokens(self) -> int:
        """Context length once every output token is generated."""
        return self.prompt_tokens + self.output_tokens
