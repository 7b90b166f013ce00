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

"""Discrete-event simulation of decoding a request trace.

Time advances in integer microsecond ticks. Each decode iteration walks the
layers of the model: a model slice on a compute replica, the Q/K/V transfer
to the memory pool, attention there and the output transfer back. Requests
join at iteration boundaries when their final KV footprint fits.
"""

import collections
import dataclasses
import enum
import heapq
import logging
from collections.abc import Sequence

from disagg_planner.constants import (
    DEFAULT_ALLREDUCE_LATENCY,
    DEFAULT_HOST_TIME_PER_REQUEST,
    DEFAULT_KV_HEADROOM,
    MICROSECONDS_PER_SECOND,
)
from disagg_planner.errors import (
    CapacityError,
    EmptyTraceError,
    PreconditionError,
    SpecValidationError,
)
from disagg_planner.perf_model import (
    EfficiencyProfile,
    batch_attn_cost,
    kv_bytes_per_token,
    kv_projection_share,
    layer_messages,
    network_links,
    nonattn_cost,
    roofline_time,
    tp_layer_time,
)
from disagg_planner.pipeline import replica_for
from disagg_planner.sim.ledger import KvLedger
from disagg_planner.sim.metrics import SimMetrics, TbtStats
from disagg_planner.sim.network import NetPreset, xfer_time
from disagg_planner.specs import ClusterConfig, DevicePool, LlmSpec, TraceRecord

logger = logging.getLogger(__name__)


def to_ticks(seconds: float) -> int:
    return round(seconds * MICROSECONDS_PER_SECOND)


class EventKind(enum.StrEnum):
    arrival = "arrival"
    host_done = "host_done"
    slice_done = "slice_done"
    xfer_done = "xfer_done"
    attn_done = "attn_done"
    iter_boundary = "iter_boundary"


class Phase(enum.StrEnum):
    """Which transfer or attention part an event completes."""

    full = "full"
    send = "send"
    ret = "return"
    q = "q"
    kv = "kv"
    prev = "prev"
    new = "new"


@dataclasses.dataclass(frozen=True, order=True)
class SimEvent:
    """Ordered by (time, seq), seq being the insertion order."""

    time: int
    seq: int
    kind: EventKind = dataclasses.field(compare=False)
    target: int = dataclasses.field(default=-1, compare=False)
    phase: Phase = dataclasses.field(default=Phase.full, compare=False)


@dataclasses.dataclass(frozen=True)
class SimOptions:
    """Knobs of one simulation run.

    Attributes:
        overlap: send Q early and overlap previous-token attention with the
            rest of the slice and the KV transfer.
        n_batches: sub-batches pipelined over n_batches - 1 replicas.
        seed: recorded with the metrics.
        horizon_s: stop at this simulated time, None to run the trace out.
        check_ledger: check the KV ledger after every event.
        eff: achievable fractions of peak.
        headroom: share of attention-pool memory kept free of KV caches.
        host_time_per_request: host seconds spent per request before each
            iteration reaches the devices. The host work of one sub-batch
            runs while the replicas serve the others.
        tp_collectives: charge tensor-parallel all-reduces on model slices
            running over more than one device.
        allreduce_latency: fixed seconds per all-reduce.
    """

    overlap: bool = False
    n_batches: int = 1
    seed: int = 0
    horizon_s: float | None = None
    check_ledger: bool = True
    eff: EfficiencyProfile = dataclasses.field(default_factory=EfficiencyProfile)
    headroom: float = DEFAULT_KV_HEADROOM
    host_time_per_request: float = DEFAULT_HOST_TIME_PER_REQUEST
    tp_collectives: bool = True
    allreduce_latency: float = DEFAULT_ALLREDUCE_LATENCY

    def __post_init__(self) -> None:
        if self.n_batches < 1:
            raise SpecValidationError("n_batches", "must be >= 1")
        if not 0 <= self.headroom < 1:
            raise SpecValidationError("headroom", "must be within [0, 1)")
        for field in ("host_time_per_request", "allreduce_latency"):
            if not getattr(self, field) >= 0:
                raise SpecValidationError(field, "must be >= 0")
        if self.horizon_s is not None and not self.horizon_s > 0:
            raise SpecValidationError("horizon_s", "must be > 0")


@dataclasses.dataclass
class _Request:
    record: TraceRecord
    generated: int = 0
    last_token: int = 0

    @property
    def context(self) -> int:
        """Tokens attended to by the next decode step."""
        return self.record.prompt_tokens + self.generated + 1


@dataclasses.dataclass(frozen=True)
class _IterationTiming:
    slice_ticks: int
    attn_ticks: int
    prev_ticks: int
    new_ticks: int
    send_ticks: int
    q_ticks: int
    kv_ticks: int
    return_ticks: int
    q_offset_ticks: int
    host_ticks: int


@dataclasses.dataclass
class _SubBatch:
    index: int
    running: list[_Request] = dataclasses.field(default_factory=list)
    pending: list[_Request] = dataclasses.field(default_factory=list)
    busy: bool = False
    layer: int = 0
    slices_run: int = 0
    iter_start: int = 0
    join: int = 0
    timing: _IterationTiming | None = None

    @property
    def size(self) -> int:
        return len(self.running) + len(self.pending)


class Simulator:
    """One run over one trace; not reusable."""

    def __init__(
        self,
        model: LlmSpec,
        cluster: ClusterConfig,
        trace: Sequence[TraceRecord],
        options: SimOptions,
        preset: NetPreset | None = None,
    ) -> None:
        self.model = model
        self.cluster = cluster
        self.trace = sorted(trace, key=lambda r: (r.arrival_s, r.request_id))
        self.options = options
        self.disaggregated = cluster.mode == "disaggregated"
        self.overlap = options.overlap and self.disaggregated
        n = options.n_batches
        if not self.disaggregated and n > 1:
            raise SpecValidationError(
                "n_batches",
                "pipelining needs a disaggregated cluster",
            )
        replicas = n - 1 if n > 1 else 1
        if cluster.a % replicas:
            raise PreconditionError(
                f"{cluster.a} compute devices cannot form {replicas} equal replicas",
            )
        device = cluster.compute_pool.device
        self.replica_pool = DevicePool(device, cluster.a // replicas)
        self.replicas = [f"replica-{i + 1}" for i in range(replicas)]
        if self.replica_pool.mem_bytes < model.weight_bytes:
            raise CapacityError(
                f"{model.name} weights ({model.weight_bytes / 1e9:.1f} GB) exceed the "
                f"{self.replica_pool.mem_bytes / 1e9:.1f} GB of "
                f"{self.replica_pool.count}x{device.name}",
            )
        bpt = kv_bytes_per_token(model)
        if self.disaggregated:
            self.attention_pool = cluster.attention_pool
            capacity = self.attention_pool.mem_bytes * (1 - options.headroom)
            self.memory = "memory"
            if preset is None:
                raise PreconditionError("a disaggregated run needs a network preset")
            self.link, self.links = network_links(
                dataclasses.replace(
                    cluster,
                    compute_devices=(self.replica_pool,),
                ),
                preset,
            )
        else:
            self.attention_pool = cluster.compute_pool
            capacity = (
                self.attention_pool.mem_bytes * (1 - options.headroom)
                - model.weight_bytes
            )
            self.memory = self.replicas[0]
            self.link, self.links = preset, 1
        if capacity <= 0:
            raise CapacityError(f"no memory left for KV caches on {cluster.label}")
        self.ledger = KvLedger(capacity=capacity, bytes_per_token=bpt)
        self.kv_share = kv_projection_share(model)
        self.horizon = (
            to_ticks(options.horizon_s) if options.horizon_s is not None else None
        )

        self.events: list[SimEvent] = []
        self.seq = 0
        self.queue: collections.deque[_Request] = collections.deque()
        self.batches = [_SubBatch(i) for i in range(n)]
        self.free_at: dict[str, int] = dict.fromkeys([*self.replicas, self.memory], 0)
        self.busy: dict[str, int] = dict.fromkeys(self.free_at, 0)
        self.tbt_samples: list[int] = []
        self.tokens = 0
        self.completed = 0
        self.rejected = 0
        self.last_token = 0
        self.batch_area = 0
        self.max_batch = 0
        self.iterations = 0
        self.sums = dict.fromkeys(
            ("model", "attention", "network", "host", "iteration"), 0
        )

    def push(
        self,
        time: int,
        kind: EventKind,
        target: int = -1,
        phase: Phase = Phase.full,
    ) -> None:
        heapq.heappush(self.events, SimEvent(time, self.seq, kind, target, phase))
        self.seq += 1

    def occupy(self, resource: str, ready: int, duration: int) -> int:
        """Run a task FIFO on `resource`, returning its end tick."""
        start = max(ready, self.free_at[resource])
        end = start + duration
        self.free_at[resource] = end
        self.busy[resource] += duration
        return end

    def xfer_ticks(self, num_bytes: int) -> int:
        if self.link is None:
            return 0
        return to_ticks(xfer_time(num_bytes, self.link, self.links))

    def iteration_timing(self, batch: _SubBatch) -> _IterationTiming:
        contexts = [r.context for r in batch.running]
        size = len(contexts)
        layers = self.model.layers
        options = self.options
        eff = options.eff
        t_model = roofline_time(
            nonattn_cost(self.model, size), self.replica_pool, eff, "gemm"
        ).seconds
        t_attn = roofline_time(
            batch_attn_cost(self.model, contexts), self.attention_pool, eff, "attention"
        ).seconds
        t_collective = (
            tp_layer_time(
                self.model, size, self.replica_pool, options.allreduce_latency
            )
            if options.tp_collectives
            else 0.0
        )
        slice_ticks = to_ticks(t_model / layers + t_collective)
        attn_ticks = to_ticks(t_attn / layers)
        new_ticks = round(attn_ticks * size / sum(contexts))
        messages = layer_messages(self.model, size)
        return _IterationTiming(
            slice_ticks=slice_ticks,
            attn_ticks=attn_ticks,
            prev_ticks=attn_ticks - new_ticks,
            new_ticks=new_ticks,
            send_ticks=self.xfer_ticks(messages.send_bytes),
            q_ticks=self.xfer_ticks(messages.q_bytes),
            kv_ticks=self.xfer_ticks(messages.kv_bytes),
            return_ticks=self.xfer_ticks(messages.out_bytes),
            q_offset_ticks=round(slice_ticks * (1 - self.kv_share)),
            host_ticks=to_ticks(size * options.host_time_per_request),
        )

    def run(self) -> SimMetrics:
        for index, record in enumerate(self.trace):
            self.push(to_ticks(record.arrival_s), EventKind.arrival, index)
        while self.events:
            event = heapq.heappop(self.events)
            if self.horizon is not None and event.time > self.horizon:
                logger.info("Reached the horizon at %s ticks.", self.horizon)
                break
            self.handle(event)
            if self.options.check_ledger:
                self.ledger.check()
        return self.metrics()

    def handle(self, event: SimEvent) -> None:
        now = event.time
        if event.kind == EventKind.arrival:
            self.queue.append(_Request(self.trace[event.target]))
            self.try_admit(now)
            return
        batch = self.batches[event.target]
        timing = batch.timing
        assert timing is not None  # noqa: S101
        match event.kind, event.phase:
            case EventKind.host_done, _:
                self.start_layer(batch, now)
            case EventKind.slice_done, _:
                if not self.disaggregated:
                    end = self.occupy(self.memory, now, timing.attn_ticks)
                    self.push(end, EventKind.attn_done, batch.index, Phase.full)
                elif self.overlap:
                    self.push(
                        now + timing.kv_ticks,
                        EventKind.xfer_done,
                        batch.index,
                        Phase.kv,
                    )
                else:
                    self.push(
                        now + timing.send_ticks,
                        EventKind.xfer_done,
                        batch.index,
                        Phase.send,
                    )
            case EventKind.xfer_done, Phase.send:
                end = self.occupy(self.memory, now, timing.attn_ticks)
                self.push(end, EventKind.attn_done, batch.index, Phase.full)
            case EventKind.xfer_done, Phase.q:
                end = self.occupy(self.memory, now, timing.prev_ticks)
                self.push(end, EventKind.attn_done, batch.index, Phase.prev)
            case EventKind.xfer_done, Phase.kv:
                self.join(batch, now)
            case EventKind.attn_done, Phase.prev:
                self.join(batch, now)
            case EventKind.attn_done, _ if not self.disaggregated:
                self.next_layer(batch, now)
            case EventKind.attn_done, _:
                self.push(
                    now + timing.return_ticks,
                    EventKind.xfer_done,
                    batch.index,
                    Phase.ret,
                )
            case EventKind.xfer_done, Phase.ret:
                self.next_layer(batch, now)
            case EventKind.iter_boundary, _:
                self.finish_iteration(batch, now)

    def join(self, batch: _SubBatch, now: int) -> None:
        """New-token attention waits for both the KV transfer and prev attention."""
        batch.join -= 1
        if not batch.join:
            assert batch.timing is not None  # noqa: S101
            end = self.occupy(self.memory, now, batch.timing.new_ticks)
            self.push(end, EventKind.attn_done, batch.index, Phase.new)

    def start_layer(self, batch: _SubBatch, now: int) -> None:
        timing = batch.timing
        assert timing is not None  # noqa: S101
        n = self.options.n_batches
        replica = (
            self.replicas[replica_for(batch.index, batch.slices_run, n) - 1]
            if n > 1
            else self.replicas[0]
        )
        batch.slices_run += 1
        end = self.occupy(replica, now, timing.slice_ticks)
        self.push(end, EventKind.slice_done, batch.index)
        if self.overlap:
            batch.join = 2
            q_sent = end - timing.slice_ticks + timing.q_offset_ticks
            self.push(
                q_sent + timing.q_ticks, EventKind.xfer_done, batch.index, Phase.q
            )

    def next_layer(self, batch: _SubBatch, now: int) -> None:
        batch.layer += 1
        if batch.layer < self.model.layers:
            self.start_layer(batch, now)
        else:
            self.push(now, EventKind.iter_boundary, batch.index)

    def start_iteration(self, batch: _SubBatch, now: int) -> None:
        for request in batch.pending:
            request.last_token = now
        batch.running.extend(batch.pending)
        batch.pending.clear()
        if not batch.running:
            batch.busy = False
            return
        batch.busy = True
        for request in batch.running:
            self.ledger.grow(request.record.request_id)
        batch.timing = self.iteration_timing(batch)
        batch.layer = 0
        batch.iter_start = now
        self.max_batch = max(self.max_batch, sum(len(b.running) for b in self.batches))
        logger.debug(
            "t=%s sub-batch %s starts an iteration with %s requests.",
            now,
            batch.index,
            len(batch.running),
        )
        if batch.timing.host_ticks:
            # The replicas stay free for other sub-batches meanwhile.
            self.push(now + batch.timing.host_ticks, EventKind.host_done, batch.index)
        else:
            self.start_layer(batch, now)

    def finish_iteration(self, batch: _SubBatch, now: int) -> None:
        timing = batch.timing
        assert timing is not None  # noqa: S101
        layers = self.model.layers
        duration = now - batch.iter_start
        self.iterations += 1
        self.batch_area += len(batch.running) * duration
        self.sums["model"] += timing.slice_ticks * layers
        self.sums["attention"] += timing.attn_ticks * layers
        network = (
            timing.q_ticks + timing.kv_ticks if self.overlap else timing.send_ticks
        )
        self.sums["network"] += (network + timing.return_ticks) * layers
        self.sums["host"] += timing.host_ticks
        self.sums["iteration"] += duration
        still_running = []
        for request in batch.running:
            request.generated += 1
            self.tbt_samples.append(now - request.last_token)
            request.last_token = now
            if request.generated == request.record.output_tokens:
                self.ledger.release(request.record.request_id)
                self.completed += 1
            else:
                still_running.append(request)
        self.tokens += len(batch.running)
        self.last_token = now
        batch.running = still_running
        batch.busy = True
        self.try_admit(now)
        self.start_iteration(batch, now)

    def try_admit(self, now: int) -> None:
        """Admit from the head of the queue while the final footprint fits."""
        while self.queue:
            request = self.queue[0]
            final = request.record.final_tokens
            if not self.ledger.can_ever_fit(final):
                self.queue.popleft()
                self.rejected += 1
                logger.warning(
                    "Request %s needs %s KV tokens, more than the pool holds; "
                    "rejected.",
                    request.record.request_id,
                    final,
                )
                continue
            if not self.ledger.fits(final):
                return
            self.queue.popleft()
            self.ledger.reserve(
                request.record.request_id,
                final,
                request.record.prompt_tokens,
            )
            batch = min(self.batches, key=lambda b: (b.size, b.index))
            batch.pending.append(request)
            if not batch.busy:
                self.start_iteration(batch, now)

    def metrics(self) -> SimMetrics:
        first_arrival = to_ticks(self.trace[0].arrival_s) if self.trace else 0
        span = self.last_token - first_arrival if self.tokens else 0
        wall_time = span / MICROSECONDS_PER_SECOND
        cost = self.cluster.cost_per_hour
        throughput, tokens_per_dollar = SimMetrics.rates(self.tokens, wall_time, cost)
        util = {}
        if span:
            replica_busy = sum(self.busy[r] for r in self.replicas)
            util["compute"] = replica_busy / (span * len(self.replicas))
            if self.disaggregated:
                util["memory"] = self.busy[self.memory] / span
        iterations = self.iterations or 1
        breakdown = {
            name: total / iterations / MICROSECONDS_PER_SECOND
            for name, total in self.sums.items()
        }
        metrics = SimMetrics(
            mode=self.cluster.mode,
            label=self.cluster.label,
            tokens_generated=self.tokens,
            wall_time=wall_time,
            throughput=throughput,
            tbt=TbtStats.from_ticks(self.tbt_samples),
            avg_batch=self.batch_area / span if span else 0.0,
            max_batch=self.max_batch,
            util=util,
            cost_per_hour=cost,
            tokens_per_dollar=tokens_per_dollar,
            breakdown=breakdown,
            kv_capacity_bytes=self.ledger.capacity,
            kv_peak_bytes=self.ledger.peak_bytes,
            completed=self.completed,
            unfinished=len(self.trace) - self.completed - self.rejected,
            rejected=self.rejected,
            seed=self.options.seed,
            overlap=self.overlap,
            overlap_approximate=self.overlap,
            n_batches=self.options.n_batches,
        )
        logger.info(
            "%s: %s tokens in %.3fs, %.1f tok/s, avg batch %.1f, TBT p50 %.2f ms.",
            metrics.label,
            metrics.tokens_generated,
            metrics.wall_time,
            metrics.throughput,
            metrics.avg_batch,
            metrics.tbt.p50 * 1e3,
        )
        return metrics


def run_disaggregated(
    model: LlmSpec,
    cluster: ClusterConfig,
    trace: Sequence[TraceRecord],
    options: SimOptions,
    preset: NetPreset,
) -> SimMetrics:
    if cluster.mode != "disaggregated":
        raise PreconditionError(f"{cluster.label} is not a disaggregated cluster")
    if not trace:
        raise EmptyTraceError("the trace has no requests")
    return Simulator(model, cluster, trace, options, preset).run()


def run_homogeneous(
    model: LlmSpec,
    cluster: ClusterConfig,
    trace: Sequence[TraceRecord],
    options: SimOptions,
) -> SimMetrics:
    """Both operator classes on one tensor-parallel pool, no network."""
    if cluster.mode != "homogeneous-TP":
        raise PreconditionError(f"{cluster.label} is not a homogeneous cluster")
    if not trace:
        raise EmptyTraceError("the trace has no requests")
    return Simulator(model, cluster, trace, options).run()


def simulate(
    model: LlmSpec,
    cluster: ClusterConfig,
    trace: Sequence[TraceRecord],
    options: SimOptions,
    preset: NetPreset,
) -> SimMetrics:
    if cluster.mode == "disaggregated":
        return run_disaggregated(model, cluster, trace, options, preset)
    return run_homogeneous(model, cluster, trace, options)

