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

"""Cut an operator graph into model slices around its attention operators.

Each attention operator is removed and the cheapest set of edges separating
its inputs from its outputs becomes the context carried to the next slice.
"""

import dataclasses
import enum
import heapq
import logging
from collections.abc import Collection
from typing import Any

import networkx as nx
from networkx.algorithms.flow import edmonds_karp

from disagg_planner.errors import (
    InseparableCutError,
    PreconditionError,
    UnsupportedGraphError,
)
from disagg_planner.graph.ir import CompGraph, GraphEdge, NodeKind

logger = logging.getLogger(__name__)

SOURCE = "__source__"
SINK = "__sink__"


class SendMarker(enum.StrEnum):
    send_q = "send Q"
    send_kv = "send KV"


@dataclasses.dataclass(frozen=True)
class CutResult:
    """Minimum cut separating an attention operator's inputs from its outputs.

    `s_side` and `t_side` hold every node except the attention operator; no
    graph edge runs from `t_side` to `s_side`.
    """

    attention: str
    cut_edges: tuple[GraphEdge, ...]
    cut_weight: int
    s_side: frozenset[str]
    t_side: frozenset[str]

    def to_document(self) -> dict[str, Any]:
        return {
            "attention": self.attention,
            "cut_weight": self.cut_weight,
            "cut_edges": [e.to_document() for e in self.cut_edges],
        }


@dataclasses.dataclass(frozen=True)
class ModelSlice:
    """Operators run between two attention operators.

    Attributes:
        index: position of the slice in the model.
        ops: operators in scheduled order.
        context_in: cut edges whose tensors come from earlier slices.
        context_out: cut edges whose tensors later slices need.
        attention: attention operator following the slice, None for the last.
        send_points: (number of ops before the marker, marker).
    """

    index: int
    ops: tuple[str, ...]
    context_in: tuple[GraphEdge, ...] = ()
    context_out: tuple[GraphEdge, ...] = ()
    attention: str | None = None
    send_points: tuple[tuple[int, SendMarker], ...] = ()

    def steps(self) -> tuple[str | SendMarker, ...]:
        """Ops with the send markers in place."""
        markers = dict(self.send_points)
        steps: list[str | SendMarker] = []
        for position, op in enumerate(self.ops):
            steps.append(op)
            if (marker := markers.get(position + 1)) is not None:
                steps.append(marker)
        if (marker := markers.get(0)) is not None and not self.ops:
            steps.append(marker)
        return tuple(steps)

    @property
    def context_weight(self) -> int:
        return sum(e.weight for e in self.context_out)

    def to_document(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "ops": list(self.ops),
            "attention": self.attention,
            "schedule": [str(step) for step in self.steps()],
            "context_in": [e.to_document() for e in self.context_in],
            "context_out": [e.to_document() for e in self.context_out],
        }


def _cut(
    graph: CompGraph,
    attention: str,
    forced_source: Collection[str] = (),
) -> CutResult:
    digraph = graph.digraph
    if attention not in digraph or graph.kind(attention) != NodeKind.attention:
        raise PreconditionError(f"'{attention}' is not an attention operator")
    unbounded = graph.total_weight + 1
    flow = nx.DiGraph()
    flow.add_nodes_from([SOURCE, SINK])
    flow.add_nodes_from(n for n in digraph if n != attention)
    for src, dst, weight in digraph.edges(data="weight"):
        if attention in (src, dst):
            continue
        flow.add_edge(src, dst, capacity=weight)
        # Keeps every descendant of a t-side node on the t-side.
        flow.add_edge(dst, src, capacity=unbounded)
    for node in (*digraph.predecessors(attention), *forced_source):
        flow.add_edge(SOURCE, node, capacity=unbounded)
    for node in digraph.successors(attention):
        flow.add_edge(node, SINK, capacity=unbounded)
    residual = edmonds_karp(flow, SOURCE, SINK)
    if residual.graph["flow_value"] >= unbounded:
        raise InseparableCutError(
            f"inputs and outputs of '{attention}' cannot be separated",
        )
    # Nodes reachable through unsaturated arcs form the smallest source side.
    open_arcs = nx.subgraph_view(
        residual,
        filter_edge=lambda u, v: residual[u][v]["flow"] < residual[u][v]["capacity"],
    )
    s_side = frozenset(nx.descendants(open_arcs, SOURCE))
    t_side = frozenset(flow) - s_side - {SOURCE, SINK}
    cut_edges = tuple(
        graph.edge(src, dst)
        for src, dst in sorted(digraph.edges)
        if src in s_side and dst in t_side
    )
    result = CutResult(
        attention=attention,
        cut_edges=cut_edges,
        cut_weight=sum(e.weight for e in cut_edges),
        s_side=s_side,
        t_side=t_side,
    )
    logger.debug(
        "Cut at '%s': weight %s, edges %s.",
        attention,
        result.cut_weight,
        [(e.src, e.dst) for e in cut_edges],
    )
    return result


def min_cut_at(graph: CompGraph, attention: str) -> CutResult:
    """Minimum weighted cut in the graph without `attention`.

    Predecessors of `attention` stay on the source side and successors on the
    sink side. Among equally cheap cuts the one with the smallest source side
    is returned.
    """
    return _cut(graph, attention)


def schedule_slice(
    graph: CompGraph,
    model_slice: ModelSlice,
) -> tuple[str | SendMarker, ...]:
    """Topological order that runs the Q projection and its inputs first.

    A "send Q" marker follows every Q projection and a "send KV" marker ends
    slices followed by attention. Remaining ties are broken by node id.
    """
    members = set(model_slice.ops)
    sub = graph.digraph.subgraph(members)
    early: set[str] = set()
    for node in members:
        if graph.kind(node) == NodeKind.q_proj:
            early |= nx.ancestors(sub, node) | {node}
    pending = {node: sub.in_degree(node) for node in members}
    ready = [(node not in early, node) for node, deg in pending.items() if not deg]
    heapq.heapify(ready)
    steps: list[str | SendMarker] = []
    while ready:
        _, node = heapq.heappop(ready)
        steps.append(node)
        if graph.kind(node) == NodeKind.q_proj:
            steps.append(SendMarker.send_q)
        for successor in sub.successors(node):
            pending[successor] -= 1
            if not pending[successor]:
                heapq.heappush(ready, (successor not in early, successor))
    if model_slice.attention is not None:
        steps.append(SendMarker.send_kv)
    return tuple(steps)


def _scheduled(graph: CompGraph, model_slice: ModelSlice) -> ModelSlice:
    ops: list[str] = []
    send_points: list[tuple[int, SendMarker]] = []
    for step in schedule_slice(graph, model_slice):
        if isinstance(step, SendMarker):
            send_points.append((len(ops), step))
        else:
            ops.append(step)
    return dataclasses.replace(
        model_slice, ops=tuple(ops), send_points=tuple(send_points)
    )


def slice_model(graph: CompGraph) -> tuple[ModelSlice, ...]:
    """n attention operators give n + 1 slices.

    Cuts are nested: everything placed before an attention operator stays
    before the following ones.
    """
    attention_nodes = graph.attention_nodes()
    digraph = graph.digraph
    for earlier, later in zip(attention_nodes, attention_nodes[1:], strict=False):
        if not nx.has_path(digraph, earlier, later):
            raise UnsupportedGraphError(
                f"attention operators '{earlier}' and '{later}' are not ordered",
            )
    cuts: list[CutResult] = []
    placed: set[str] = set()
    for attention in attention_nodes:
        cut = _cut(graph, attention, forced_source=sorted(placed))
        cuts.append(cut)
        placed = set(cut.s_side) | {attention}
    order = graph.topological_order()
    attention_set = set(attention_nodes)
    seen: set[str] = set()
    slices = []
    for index in range(len(attention_nodes) + 1):
        boundary = cuts[index].s_side if index < len(cuts) else set(order)
        members = [n for n in order if n in boundary and n not in seen | attention_set]
        seen.update(members)
        slices.append(
            _scheduled(
                graph,
                ModelSlice(
                    index=index,
                    ops=tuple(members),
                    context_in=cuts[index - 1].cut_edges if index else (),
                    context_out=cuts[index].cut_edges if index < len(cuts) else (),
                    attention=attention_nodes[index] if index < len(cuts) else None,
                ),
            ),
        )
    logger.info(
        "Sliced '%s' into %s slices, context bytes per cut %s.",
        graph.name,
        len(slices),
        [c.cut_weight for c in cuts],
    )
    return tuple(slices)


def slices_document(graph: CompGraph, batch: int) -> dict[str, Any]:
    """Slices of `graph` with per-token weights scaled by `batch`."""
    scaled = graph.scaled(batch)
    slices = slice_model(scaled)
    return {
        "graph": graph.name,
        "batch": batch,
        "slices": [s.to_document() for s in slices],
        "cuts": [
            _cut_summary(s) for s in slices if s.attention is not None
        ],
        "total_context_bytes": sum(s.context_weight for s in slices),
    }


def _cut_summary(model_slice: ModelSlice) -> dict[str, Any]:
    return {
        "attention": model_slice.attention,
        "cut_weight": model_slice.context_weight,
        "cut_edges": [e.to_document() for e in model_slice.context_out],
    }
