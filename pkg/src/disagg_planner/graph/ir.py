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

"""Weighted operator graph read from JSON."""

import dataclasses
import enum
import functools
import importlib.resources
import json
import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import networkx as nx

from disagg_planner.errors import CycleError, GraphError, SchemaError
from disagg_planner.specs import as_count, as_text, check_fields, read_json_document

logger = logging.getLogger(__name__)

GRAPHS_RESOURCE = "disagg_planner.data.graphs"


class NodeKind(enum.StrEnum):
    input = "input"
    output = "output"
    matmul = "matmul"
    attention = "attention"
    elementwise = "elementwise"
    activation = "activation"
    q_proj = "q_proj"
    k_proj = "k_proj"
    v_proj = "v_proj"
    other = "other"


@dataclasses.dataclass(frozen=True)
class GraphNode:
    id: str
    kind: NodeKind
    label: str = ""


@dataclasses.dataclass(frozen=True)
class GraphEdge:
    """Tensor passed from `src` to `dst`.

    Attributes:
        weight: size in bytes, per token when `per_token` is set.
        per_token: the size scales with the batch.
    """

    src: str
    dst: str
    weight: int
    per_token: bool = False

    def to_document(self) -> dict[str, Any]:
        document: dict[str, Any] = {
            "src": self.src,
            "dst": self.dst,
            "bytes": self.weight,
        }
        if self.per_token:
            document["per_token"] = True
        return document


@dataclasses.dataclass(frozen=True)
class CompGraph:
    """An acyclic operator graph with a single input and a single output."""

    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    name: str = ""

    def __post_init__(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GraphError("duplicate node ids")
        known = set(ids)
        pairs: set[tuple[str, str]] = set()
        for edge in self.edges:
            if edge.src not in known or edge.dst not in known:
                raise GraphError(
                    f"edge {edge.src} -> {edge.dst} has a missing endpoint",
                )
            if edge.weight <= 0:
                raise GraphError(f"edge {edge.src} -> {edge.dst} weight must be > 0")
            if (edge.src, edge.dst) in pairs:
                raise GraphError(f"duplicate edge {edge.src} -> {edge.dst}")
            pairs.add((edge.src, edge.dst))
        digraph = self.digraph
        if not nx.is_directed_acyclic_graph(digraph):
            cycle = nx.find_cycle(digraph)
            raise CycleError(f"graph has a cycle through {cycle[0][0]}")
        sources = [n for n, degree in digraph.in_degree() if degree == 0]
        sinks = [n for n, degree in digraph.out_degree() if degree == 0]
        if len(sources) != 1 or len(sinks) != 1:
            raise GraphError(
                f"expected one input and one output frontier, got inputs {sources} "
                f"and outputs {sinks}",
            )

    @functools.cached_property
    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph(name=self.name)
        for node in self.nodes:
            graph.add_node(node.id, kind=node.kind)
        for edge in self.edges:
            graph.add_edge(edge.src, edge.dst, weight=edge.weight)
        return graph

    @functools.cached_property
    def _edges(self) -> dict[tuple[str, str], GraphEdge]:
        return {(e.src, e.dst): e for e in self.edges}

    def edge(self, src: str, dst: str) -> GraphEdge:
        return self._edges[(src, dst)]

    def kind(self, node_id: str) -> NodeKind:
        return self.digraph.nodes[node_id]["kind"]

    def topological_order(self) -> list[str]:
        """Ties broken by node id."""
        return list(nx.lexicographical_topological_sort(self.digraph))

    def attention_nodes(self) -> list[str]:
        return [
            n for n in self.topological_order() if self.kind(n) == NodeKind.attention
        ]

    @property
    def total_weight(self) -> int:
        return sum(e.weight for e in self.edges)

    def scaled(self, batch: int) -> "CompGraph":
        """Per-token edge weights multiplied by `batch`."""
        if batch < 1:
            raise GraphError(f"batch must be >= 1, got {batch}")
        return dataclasses.replace(
            self,
            edges=tuple(
                dataclasses.replace(e, weight=e.weight * batch, per_token=False)
                if e.per_token
                else e
                for e in self.edges
            ),
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "nodes": [
                {"id": n.id, "kind": str(n.kind), "label": n.label} for n in self.nodes
            ],
            "edges": [e.to_document() for e in self.edges],
        }


def load_graph(document: Mapping[str, Any]) -> CompGraph:
    check_fields(document, "CompGraph", required=("nodes", "edges"), optional=("name",))
    nodes = []
    for entry in document["nodes"]:
        check_fields(entry, "node", required=("id", "kind"), optional=("label",))
        try:
            kind = NodeKind(entry["kind"])
        except ValueError:
            raise SchemaError(
                f"node {entry['id']}: unknown kind {entry['kind']!r}",
            ) from None
        nodes.append(
            GraphNode(
                id=as_text(entry["id"], "id"),
                kind=kind,
                label=str(entry.get("label", "")),
            ),
        )
    edges = []
    for entry in document["edges"]:
        check_fields(
            entry,
            "edge",
            required=("src", "dst", "bytes"),
            optional=("per_token",),
        )
        edges.append(
            GraphEdge(
                src=as_text(entry["src"], "src"),
                dst=as_text(entry["dst"], "dst"),
                weight=as_count(entry["bytes"], "bytes"),
                per_token=bool(entry.get("per_token", False)),
            ),
        )
    graph = CompGraph(
        nodes=tuple(nodes),
        edges=tuple(edges),
        name=str(document.get("name", "")),
    )
    logger.info(
        "Loaded graph '%s': %s nodes, %s edges, %s attention operators.",
        graph.name,
        len(graph.nodes),
        len(graph.edges),
        len(graph.attention_nodes()),
    )
    return graph


def read_graph(path: Path) -> CompGraph:
    return load_graph(read_json_document(path))


def bundled_graph(name: str) -> CompGraph:
    """A graph shipped with the package, by file stem."""
    resource = importlib.resources.files(GRAPHS_RESOURCE) / f"{name}.json"
    if not resource.is_file():
        raise GraphError(f"no bundled graph named '{name}'")
    return load_graph(json.loads(resource.read_text(encoding="utf-8")))
