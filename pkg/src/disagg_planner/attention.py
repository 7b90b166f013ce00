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

"""Exact and partial attention, and the merge that lets attention be split.

A partial result over a token set keeps the value sum and the softmax
denominator under a common max-shift, so partials computed on different
devices (or over previous and new tokens) combine into the exact output.
"""

import dataclasses
import heapq
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np
import numpy.typing as npt

from disagg_planner.errors import (
    EmptyPartialError,
    HeadDivisibilityError,
    PreconditionError,
    SpecValidationError,
)

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.floating[Any]]

DTYPES: Mapping[str, type[np.floating[Any]]] = {
    "float64": np.float64,
    "float32": np.float32,
}


@dataclasses.dataclass(frozen=True)
class AttnInstance:
    """One query head over `length` cached tokens.

    Attributes:
        q: query vector, shape (d_head,).
        keys: shape (length, d_head).
        values: shape (length, d_head).
        scale: logit scale, 1/sqrt(d_head) unless given.
    """

    q: FloatArray
    keys: FloatArray
    values: FloatArray
    scale: float = 0.0

    def __post_init__(self) -> None:
        if self.q.ndim != 1:
            raise SpecValidationError(
                "q", f"expected a vector, got shape {self.q.shape}"
            )
        d_head = self.q.shape[0]
        for field in ("keys", "values"):
            array = getattr(self, field)
            if array.ndim != 2 or array.shape[1] != d_head:  # noqa: PLR2004
                raise SpecValidationError(
                    field,
                    f"expected shape (length, {d_head}), got {array.shape}",
                )
        if self.keys.shape[0] != self.values.shape[0]:
            raise SpecValidationError("values", "row count differs from keys")
        for field in ("q", "keys", "values"):
            if not np.all(np.isfinite(getattr(self, field))):
                raise SpecValidationError(field, "entries must be finite")
        if not self.scale:
            object.__setattr__(self, "scale", 1.0 / math.sqrt(d_head))

    @property
    def length(self) -> int:
        return int(self.keys.shape[0])

    @property
    def d_head(self) -> int:
        return int(self.q.shape[0])

    def logits(self) -> FloatArray:
        return (self.keys @ self.q) * self.q.dtype.type(self.scale)


@dataclasses.dataclass(frozen=True)
class PartialAttention:
    """Attention over a subset of tokens, before normalization.

    Attributes:
        acc: sum of exp(logit - max_logit) * value over the subset.
        log_denom: log of the sum of exp(logit - max_logit).
        max_logit: the shift applied to every logit.
        token_count: size of the subset.
    """

    acc: FloatArray
    log_denom: float
    max_logit: float
    token_count: int

    @classmethod
    def identity(
        cls,
        d_head: int,
        dtype: type[np.floating[Any]] = np.float64,
    ) -> "PartialAttention":
        return cls(
            acc=np.zeros(d_head, dtype=dtype),
            log_denom=-math.inf,
            max_logit=-math.inf,
            token_count=0,
        )

    @property
    def is_empty(self) -> bool:
        return self.token_count == 0


def exact_attention(inst: AttnInstance) -> FloatArray:
    """softmax(q K^T scale) V with the maximum logit subtracted."""
    if not inst.length:
        raise EmptyPartialError("attention over an empty key set")
    logits = inst.logits()
    weights = np.exp(logits - logits.max())
    return (weights / weights.sum()) @ inst.values


def partial_attention(
    inst: AttnInstance,
    indices: Sequence[int] | npt.NDArray[np.integer[Any]] | None = None,
) -> PartialAttention:
    """Partial over the tokens at `indices`, all tokens when None."""
    selected = (
        np.arange(inst.length)
        if indices is None
        else np.asarray(indices, dtype=np.intp)
    )
    if not selected.size:
        return PartialAttention.identity(inst.d_head, inst.q.dtype.type)
    logits = inst.logits()[selected]
    max_logit = logits.max()
    weights = np.exp(logits - max_logit)
    return PartialAttention(
        acc=weights @ inst.values[selected],
        log_denom=float(np.log(weights.sum())),
        max_logit=float(max_logit),
        token_count=int(selected.size),
    )


def merge(p1: PartialAttention, p2: PartialAttention) -> PartialAttention:
    """Combine partials over disjoint token sets of one instance.

    Both are re-shifted to the larger max_logit, which keeps every exponent
    at or below zero.
    """
    if p2.is_empty:
        return p1
    if p1.is_empty:
        return p2
    shift = max(p1.max_logit, p2.max_logit)
    w1 = math.exp(p1.max_logit - shift)
    w2 = math.exp(p2.max_logit - shift)
    return PartialAttention(
        acc=p1.acc * p1.acc.dtype.type(w1) + p2.acc * p2.acc.dtype.type(w2),
        log_denom=float(
            np.logaddexp(
                p1.log_denom + p1.max_logit - shift,
                p2.log_denom + p2.max_logit - shift,
            ),
        ),
        max_logit=shift,
        token_count=p1.token_count + p2.token_count,
    )


def merge_all(partials: Iterable[PartialAttention]) -> PartialAttention:
    """Left fold of `merge` in the given order."""
    iterator = iter(partials)
    try:
        result = next(iterator)
    except StopIteration:
        raise EmptyPartialError("no partials to merge") from None
    for partial in iterator:
        result = merge(result, partial)
    return result


def merge_tree(partials: Sequence[PartialAttention]) -> PartialAttention:
    """Pairwise merge, as partial results would arrive from a reduction tree."""
    if not partials:
        raise EmptyPartialError("no partials to merge")
    level = list(partials)
    while len(level) > 1:
        level = [
            merge(level[i], level[i + 1]) if i + 1 < len(level) else level[i]
            for i in range(0, len(level), 2)
        ]
    return level[0]


def finalize(p: PartialAttention) -> FloatArray:
    if p.is_empty:
        raise EmptyPartialError("cannot finalize a partial over no tokens")
    return p.acc / p.acc.dtype.type(math.exp(p.log_denom))


def split_prev_new(
    inst: AttnInstance,
    boundary: int,
) -> tuple[PartialAttention, PartialAttention]:
    """Partials over tokens before `boundary` and from `boundary` on."""
    if not 0 <= boundary <= inst.length:
        raise PreconditionError(
            f"boundary must be within [0, {inst.length}], got {boundary}",
        )
    return (
        partial_attention(inst, np.arange(boundary)),
        partial_attention(inst, np.arange(boundary, inst.length)),
    )


def head_partition(num_kv_heads: int, num_devices: int) -> dict[int, int]:
    """Contiguous, equal-size ranges of KV heads per device (head -> device)."""
    if num_kv_heads < 1 or num_devices < 1:
        raise PreconditionError("head and device counts must be >= 1")
    if num_kv_heads % num_devices:
        raise HeadDivisibilityError(
            f"{num_kv_heads} KV heads cannot be split evenly over "
            f"{num_devices} devices",
        )
    per_device = num_kv_heads // num_devices
    return {head: head // per_device for head in range(num_kv_heads)}


@dataclasses.dataclass(frozen=True)
class RequestAssignment:
    """Request placement for request-level partitioning.

    Attributes:
        devices: device of each request, in input order.
        loads: summed KV size per device.
        imbalance: max load over mean load, 1.0 when nothing is assigned.
    """

    devices: tuple[int, ...]
    loads: tuple[int, ...]
    imbalance: float


def request_partition(kv_sizes: Sequence[int], num_devices: int) -> RequestAssignment:
    """Longest request first onto the least loaded device, lowest index on ties."""
    if num_devices < 1:
        raise PreconditionError(f"num_devices must be >= 1, got {num_devices}")
    order = sorted(range(len(kv_sizes)), key=lambda i: (-kv_sizes[i], i))
    heap = [(0, device) for device in range(num_devices)]
    devices = [0] * len(kv_sizes)
    loads = [0] * num_devices
    for request in order:
        load, device = heapq.heappop(heap)
        devices[request] = device
        loads[device] = load + kv_sizes[request]
        heapq.heappush(heap, (loads[device], device))
    mean = sum(loads) / num_devices
    return RequestAssignment(
        devices=tuple(devices),
        loads=tuple(loads),
        imbalance=max(loads) / mean if mean else 1.0,
    )


def multihead_attention(
    q_heads: FloatArray,
    keys: FloatArray,
    values: FloatArray,
    gqa_group: int,
) -> FloatArray:
    """Grouped-query attention, one query head at a time.

    q_heads has shape (heads, d_head), keys and values (kv_heads, length,
    d_head); query head h reads KV head h // gqa_group.
    """
    if gqa_group < 1 or q_heads.shape[0] != keys.shape[0] * gqa_group:
        raise PreconditionError(
            f"{q_heads.shape[0]} query heads do not match {keys.shape[0]} KV heads "
            f"with group size {gqa_group}",
        )
    return np.stack(
        [
            exact_attention(
                AttnInstance(
                    q_heads[h],
                    keys[h // gqa_group],
                    values[h // gqa_group],
                ),
            )
            for h in range(q_heads.shape[0])
        ],
    )


def partitioned_multihead_attention(
    q_heads: FloatArray,
    keys: FloatArray,
    values: FloatArray,
    gqa_group: int,
    num_devices: int,
) -> FloatArray:
    """Head-level partitioning: each device runs its KV heads and their queries."""
    assignment = head_partition(keys.shape[0], num_devices)
    outputs = []
    for device in range(num_devices):
        kv_heads = [h for h, d in assignment.items() if d == device]
        first, last = kv_heads[0], kv_heads[-1] + 1
        outputs.append(
            multihead_attention(
                q_heads[first * gqa_group : last * gqa_group],
                keys[first:last],
                values[first:last],
                gqa_group,
            ),
        )
    return np.concatenate(outputs)


def max_relative_error(actual: FloatArray, expected: FloatArray) -> float:
    """Largest absolute difference relative to the largest expected magnitude."""
    scale = float(np.max(np.abs(expected)))
    diff = float(np.max(np.abs(np.asarray(actual) - np.asarray(expected))))
    return diff / scale if scale else diff


def random_instance(
    rng: np.random.Generator,
    d_head: int,
    length: int,
    logit_bound: float = 80.0,
    dtype: type[np.floating[Any]] = np.float64,
) -> AttnInstance:
    """Gaussian query and keys scaled so the largest |logit| equals `logit_bound`.

    Values are uniform in [0, 1].
    """
    q = rng.standard_normal(d_head)
    keys = rng.standard_normal((length, d_head))
    scale = 1.0 / math.sqrt(d_head)
    if peak := float(np.max(np.abs(keys @ q))) * scale:
        keys *= logit_bound / peak
    return AttnInstance(
        q=q.astype(dtype),
        keys=keys.astype(dtype),
        values=rng.uniform(0.0, 1.0, (length, d_head)).astype(dtype),
        scale=scale,
    )


def random_split(
    rng: np.random.Generator,
    length: int,
    parts: int,
) -> list[npt.NDArray[np.intp]]:
    """Disjoint random token subsets covering 0..length-1, some possibly empty."""
    return [
        np.sort(chunk) for chunk in np.array_split(rng.permutation(length), parts)
    ]


def check_attention(
    d_head: int,
    heads: int,
    length: int,
    splits: int,
    seed: int,
    trials: int = 100,
    devices: int = 1,
    gqa_group: int = 1,
    dtype: str = "float64",
) -> dict[str, Any]:
    """Randomized agreement of split-and-merge attention with exact attention."""
    for name, value in {
        "d_head": d_head,
        "heads": heads,
        "length": length,
        "splits": splits,
        "trials": trials,
    }.items():
        if value < 1:
            raise PreconditionError(f"{name} must be >= 1, got {value}")
    float_type = DTYPES[dtype]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        inst = random_instance(rng, d_head, length, dtype=float_type)
        partials = [
            partial_attention(inst, s) for s in random_split(rng, length, splits)
        ]
        merged = finalize(merge_tree(partials))
        error = max_relative_error(merged, exact_attention(inst))
        worst = max(worst, error)
    kv_heads = heads // gqa_group
    if not kv_heads or heads % gqa_group:
        raise PreconditionError(f"heads {heads} not divisible by group {gqa_group}")
    q_heads = rng.standard_normal((heads, d_head)).astype(float_type)
    keys = rng.standard_normal((kv_heads, length, d_head)).astype(float_type)
    values = rng.uniform(0.0, 1.0, (kv_heads, length, d_head)).astype(float_type)
    whole = multihead_attention(q_heads, keys, values, gqa_group)
    parted = partitioned_multihead_attention(q_heads, keys, values, gqa_group, devices)
    logger.info("Worst relative error over %s trials: %.3g.", trials, worst)
    return {
        "d_head": d_head,
        "heads": heads,
        "length": length,
        "splits": splits,
        "seed": seed,
        "trials": trials,
        "dtype": dtype,
        "max_relative_error": worst,
        "head_partition_devices": devices,
        "head_partition_exact": bool(np.array_equal(whole, parted)),
    }
