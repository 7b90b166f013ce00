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

"""Analytic decode performance model.

Operator flop and byte counts, roofline timing, utilization figures, KV cache
accounting and the interconnect bandwidth needed to disaggregate attention.
"""

import dataclasses
import enum
import logging
import math
from collections.abc import Sequence

from disagg_planner.constants import (
    DEFAULT_ATTN_MBU,
    DEFAULT_GEMM_EFF,
    DEFAULT_GEMM_MFU,
    DEFAULT_KV_HEADROOM,
    GB,
    op_kind_t,
)
from disagg_planner.errors import CapacityError, PreconditionError, SpecValidationError
from disagg_planner.sim.network import NetPreset, capped_preset, xfer_time
from disagg_planner.specs import ClusterConfig, DevicePool, DeviceSpec, LlmSpec

logger = logging.getLogger(__name__)


class Bound(enum.StrEnum):
    compute = "compute"
    bandwidth = "bandwidth"


class TimingSource(enum.StrEnum):
    roofline = "roofline"
    measured = "measured"


@dataclasses.dataclass(frozen=True)
class OpCost:
    flops: float
    bytes: float

    def __post_init__(self) -> None:
        if self.flops < 0 or self.bytes < 0:
            raise SpecValidationError("OpCost", "flops and bytes must be >= 0")

    def __add__(self, other: "OpCost") -> "OpCost":
        return OpCost(self.flops + other.flops, self.bytes + other.bytes)

    @property
    def intensity(self) -> float:
        return self.flops / self.bytes if self.bytes else math.inf


@dataclasses.dataclass(frozen=True)
class EfficiencyProfile:
    """Achievable fraction of peak, per operator class.

    GEMMs have separate fractions for the two roofline terms: `gemm_eff` for
    streaming weights from memory and `gemm_mfu` for compute-bound shapes.
    Attention is bandwidth-bound and uses `attn_mbu` for both.
    """

    gemm_eff: float = DEFAULT_GEMM_EFF
    attn_mbu: float = DEFAULT_ATTN_MBU
    gemm_mfu: float = DEFAULT_GEMM_MFU

    def __post_init__(self) -> None:
        for field in ("gemm_eff", "attn_mbu", "gemm_mfu"):
            if not 0 < getattr(self, field) <= 1:
                raise SpecValidationError(field, "must be within (0, 1]")

    def compute_fraction(self, kind: op_kind_t) -> float:
        return self.gemm_mfu if kind == "gemm" else self.attn_mbu

    def memory_fraction(self, kind: op_kind_t) -> float:
        return self.gemm_eff if kind == "gemm" else self.attn_mbu


@dataclasses.dataclass(frozen=True)
class RooflineTime:
    seconds: float
    bound: Bound
    compute_s: float
    memory_s: float


@dataclasses.dataclass(frozen=True)
class TimingEstimate:
    """Per decode iteration times.

    Attributes:
        t_model: non-attention time (t_m).
        t_attn: attention time (t_a).
        t_net: exposed network time.
        bound_model: roofline term bounding t_model, None when measured.
        bound_attn: roofline term bounding t_attn, None when measured.
        source: roofline estimate or user measurement.
    """

    t_model: float
    t_attn: float
    t_net: float = 0.0
    bound_model: Bound | None = None
    bound_attn: Bound | None = None
    source: TimingSource = TimingSource.roofline

    def __post_init__(self) -> None:
        for field in ("t_model", "t_attn", "t_net"):
            if not getattr(self, field) >= 0:
                raise SpecValidationError(field, "must be >= 0")

    @property
    def total(self) -> float:
        return self.t_model + self.t_attn + self.t_net


def _require_positive(**values: int) -> None:
    for name, value in values.items():
        if value < 1:
            raise PreconditionError(f"{name} must be >= 1, got {value}")


def nonattn_cost(spec: LlmSpec, batch: int) -> OpCost:
    """Weights read once per iteration, activations in and out per token."""
    _require_positive(batch=batch)
    return OpCost(
        flops=float(2 * spec.n_params * batch),
        bytes=float(
            spec.bytes_per_elem * (spec.n_params + 2 * batch * spec.hidden_dim)
        ),
    )


def nonattn_intensity(spec: LlmSpec, batch: int) -> float:
    _require_positive(batch=batch)
    # Integer numerator and denominator give a correctly rounded quotient.
    return (2 * spec.n_params * batch) / (
        spec.bytes_per_elem * (spec.n_params + 2 * batch * spec.hidden_dim)
    )


def attn_cost(spec: LlmSpec, batch: int, seq_len: int) -> OpCost:
    """KV cache reads dominate, the per-token query and output are left out."""
    _require_positive(batch=batch, seq_len=seq_len)
    tokens = seq_len * batch * spec.layers
    return OpCost(
        flops=float(4 * spec.hidden_dim * tokens),
        bytes=float(2 * spec.bytes_per_elem * spec.kv_dim * tokens),
    )


def batch_attn_cost(spec: LlmSpec, contexts: Sequence[int]) -> OpCost:
    """Attention over requests holding different context lengths."""
    if not (total := sum(contexts)):
        return OpCost(0.0, 0.0)
    return attn_cost(spec, 1, total)


def roofline_time(
    cost: OpCost,
    pool: DevicePool,
    eff: EfficiencyProfile,
    kind: op_kind_t,
) -> RooflineTime:
    compute_s = cost.flops / (
        pool.count * pool.device.peak_flops * eff.compute_fraction(kind)
    )
    memory_s = cost.bytes / (
        pool.count * pool.device.mem_bw * eff.memory_fraction(kind)
    )
    bound = Bound.compute if compute_s > memory_s else Bound.bandwidth
    return RooflineTime(
        seconds=max(compute_s, memory_s),
        bound=bound,
        compute_s=compute_s,
        memory_s=memory_s,
    )


def _utilization(amount: float, seconds: float, capacity: float, name: str) -> float:
    if not seconds > 0:
        raise PreconditionError(f"time must be > 0, got {seconds}")
    value = amount / (seconds * capacity)
    if value > 1:
        logger.warning("%s of %.3f exceeds 1, inputs are inconsistent.", name, value)
    return value


def mfu(flops: float, seconds: float, pool: DevicePool) -> float:
    return _utilization(flops, seconds, pool.count * pool.device.peak_flops, "MFU")


def mbu(num_bytes: float, seconds: float, pool: DevicePool) -> float:
    return _utilization(num_bytes, seconds, pool.count * pool.device.mem_bw, "MBU")


def kv_bytes_per_token(spec: LlmSpec) -> int:
    """K and V for one token across all layers."""
    return 2 * spec.bytes_per_elem * spec.kv_dim * spec.layers


def max_batch(
    pool_mem_bytes: float,
    reserved_weight_bytes: float,
    spec: LlmSpec,
    seq_len: int,
    headroom: float = DEFAULT_KV_HEADROOM,
) -> int:
    """Requests of `seq_len` tokens whose KV cache fits next to the weights."""
    _require_positive(seq_len=seq_len)
    if reserved_weight_bytes > pool_mem_bytes:
        raise CapacityError(
            f"weights of {reserved_weight_bytes / GB:.1f} GB exceed pool memory of "
            f"{pool_mem_bytes / GB:.1f} GB",
        )
    free = pool_mem_bytes - reserved_weight_bytes - headroom * pool_mem_bytes
    return max(0, math.floor(free / (kv_bytes_per_token(spec) * seq_len)))


def comm_volume(spec: LlmSpec, batch: int) -> int:
    """Bytes exchanged between the pools in one decode iteration.

    Q and the attention output move d elements per token, K and V d/G each.
    """
    _require_positive(batch=batch)
    token_bytes = spec.bytes_per_elem * batch * spec.layers
    return 2 * token_bytes * (spec.hidden_dim + spec.kv_dim)


@dataclasses.dataclass(frozen=True)
class LayerMessages:
    """Per layer transfer sizes: Q and KV go to the memory pool, output returns."""

    q_bytes: int
    kv_bytes: int
    out_bytes: int

    @property
    def send_bytes(self) -> int:
        return self.q_bytes + self.kv_bytes


def layer_messages(spec: LlmSpec, batch: int) -> LayerMessages:
    token_bytes = spec.bytes_per_elem * batch
    return LayerMessages(
        q_bytes=token_bytes * spec.hidden_dim,
        kv_bytes=2 * token_bytes * spec.kv_dim,
        out_bytes=token_bytes * spec.hidden_dim,
    )


def min_bandwidth(
    spec: LlmSpec,
    batch: int,
    seq_len: int,
    alpha: float,
    timing: TimingEstimate,
) -> float:
    """Bandwidth keeping transfers within `alpha` of the compute time.

    `seq_len` enters only through `timing`.
    """
    _require_positive(seq_len=seq_len)
    if not alpha > 0:
        raise PreconditionError(f"alpha must be > 0, got {alpha}")
    if not (timing.t_model > 0 and timing.t_attn > 0):
        raise PreconditionError("t_model and t_attn must be > 0")
    return comm_volume(spec, batch) / (alpha * (timing.t_model + timing.t_attn))


def per_device_bandwidth(bandwidth: float, memory_devices: int) -> float:
    """Requirement per memory device when traffic spreads over all of them."""
    _require_positive(memory_devices=memory_devices)
    return bandwidth / memory_devices


def allreduce_time(num_bytes: float, pool: DevicePool, latency: float) -> float:
    """Ring all-reduce of `num_bytes` across the devices of `pool`.

    Every device moves 2(p-1)/p of the buffer over its inter-chip link. A single
    device, or one without a known link rate, needs no collective.
    """
    p = pool.count
    if p == 1 or pool.device.ici_bw is None:
        return 0.0
    return 2 * (p - 1) / p * num_bytes / pool.device.ici_bw + latency


def tp_layer_time(
    spec: LlmSpec,
    batch: int,
    pool: DevicePool,
    latency: float,
) -> float:
    """Tensor-parallel collectives of one layer: after the attention output
    projection and after the MLP.
    """
    _require_positive(batch=batch)
    activations = spec.bytes_per_elem * batch * spec.hidden_dim
    return 2 * allreduce_time(activations, pool, latency)


def network_links(cluster: ClusterConfig, preset: NetPreset) -> tuple[NetPreset, int]:
    """The preset capped by the slower NIC, and the number of parallel links."""
    memory_pool = cluster.memory_pool
    if memory_pool is None:
        return preset, 1
    line_rate = min(cluster.compute_pool.device.link_bw, memory_pool.device.link_bw)
    return capped_preset(preset, line_rate), min(cluster.a, cluster.b)


def estimate_timing(
    spec: LlmSpec,
    cluster: ClusterConfig,
    contexts: Sequence[int],
    eff: EfficiencyProfile,
    preset: NetPreset | None = None,
) -> TimingEstimate:
    """Roofline times of one decode iteration.

    `contexts` holds the context length of every request in the batch.
    """
    batch = len(contexts)
    model = roofline_time(nonattn_cost(spec, batch), cluster.compute_pool, eff, "gemm")
    attention = roofline_time(
        batch_attn_cost(spec, contexts),
        cluster.attention_pool,
        eff,
        "attention",
    )
    t_net = 0.0
    if preset is not None and cluster.mode == "disaggregated":
        link, links = network_links(cluster, preset)
        messages = layer_messages(spec, batch)
        t_net = spec.layers * (
            xfer_time(messages.send_bytes, link, links)
            + xfer_time(messages.out_bytes, link, links)
        )
    return TimingEstimate(
        t_model=model.seconds,
        t_attn=attention.seconds,
        t_net=t_net,
        bound_model=model.bound,
        bound_attn=attention.bound,
    )


def measured_timing(
    t_model: float,
    t_attn: float,
    t_net: float = 0.0,
) -> TimingEstimate:
    return TimingEstimate(
        t_model=t_model,
        t_attn=t_attn,
        t_net=t_net,
        source=TimingSource.measured,
    )


def attn_time_fraction(timing: TimingEstimate) -> float:
    """Share of compute time spent in attention."""
    busy = timing.t_model + timing.t_attn
    return timing.t_attn / busy if busy else 0.0


def kv_projection_share(spec: LlmSpec) -> float:
    """Fraction of a layer's non-attention work placed after the Q projection.

    Only the K and V projections (2 * d * d/G parameters) can follow Q when Q
    is scheduled first.
    """
    kv_params = 2 * spec.hidden_dim * spec.kv_dim
    return min(1.0, kv_params / (spec.n_params / spec.layers))


def memory_cost_efficiency(device: DeviceSpec) -> dict[str, float | str]:
    """Price per GB of capacity and per GB/s of bandwidth."""
    if device.purchase_price is not None:
        price, basis = device.purchase_price, "purchase"
    else:
        price, basis = device.price_per_hour, "hourly"
    return {
        "basis": basis,
        "usd_per_gb": price / (device.mem_bytes / GB),
        "usd_per_gbps": price / (device.mem_bw / GB),
    }
