import itertools
import random
from typing import Any

import pytest

from disagg_planner.errors import (
    CycleError,
    GraphError,
    PreconditionError,
    SchemaError,
    UnsupportedGraphError,
)
from disagg_planner.graph.ir import CompGraph, bundled_graph, load_graph
from disagg_planner.graph.slicer import (
    ModelSlice,
    SendMarker,
    min_cut_at,
    schedule_slice,
    slice_model,
    slices_document,
)


def graph_document(
    nodes: dict[str, str],
    edges: list[tuple[str, str, int]],
) -> dict[str, Any]:
    return {
        "nodes": [{"id": node, "kind": kind} for node, kind in nodes.items()],
        "edges": [{"src": s, "dst": d, "bytes": w} for s, d, w in edges],
    }


def random_dag(rng: random.Random) -> tuple[CompGraph, str]:
    """A chain with extra forward edges, so one input and one output."""
    size = rng.randint(4, 9)
    names = [f"n{i}" for i in range(size)]
    attention = rng.randint(1, size - 2)
    kinds = {name: "matmul" for name in names}
    kinds[names[0]] = "input"
    kinds[names[-1]] = "output"
    kinds[names[attention]] = "attention"
    edges = [(names[i], names[i + 1], rng.randint(1, 20)) for i in range(size - 1)]
    edges += [
        (names[i], names[j], rng.randint(1, 20))
        for i, j in itertools.combinations(range(size), 2)
        if j > i + 1 and rng.random() < 0.35  # noqa: PLR2004
    ]
    return load_graph(graph_document(kinds, edges)), names[attention]


def brute_force_cuts(
    graph: CompGraph,
    attention: str,
) -> tuple[int, list[frozenset[str]]]:
    """Cheapest weight and every source side reaching it."""
    digraph = graph.digraph
    others = [n for n in digraph if n != attention]
    preds = set(digraph.predecessors(attention))
    succs = set(digraph.successors(attention))
    edges = [
        (s, d, w)
        for s, d, w in digraph.edges(data="weight")
        if attention not in (s, d)
    ]
    best = None
    sides: list[frozenset[str]] = []
    for size in range(len(others) + 1):
        for chosen in itertools.combinations(others, size):
            s_side = frozenset(chosen)
            if not preds <= s_side or succs & s_side:
                continue
            if any(s not in s_side and d in s_side for s, d, _ in edges):
                continue
            weight = sum(w for s, d, w in edges if s in s_side and d not in s_side)
            if best is None or weight < best:
                best, sides = weight, [s_side]
            elif weight == best:
                sides.append(s_side)
    assert best is not None
    return best, sides


def test_min_cut_matches_brute_force_on_random_graphs() -> None:
    rng = random.Random(20240501)
    for _ in range(200):
        graph, attention = random_dag(rng)
        cut = min_cut_at(graph, attention)
        best, sides = brute_force_cuts(graph, attention)
        assert cut.cut_weight == best
        assert cut.s_side in sides
        # The smallest optimal source side is contained in every other one.
        assert all(cut.s_side <= side for side in sides)
        assert cut.s_side | cut.t_side | {attention} == set(graph.digraph)
        assert not any(
            e.src in cut.t_side and e.dst in cut.s_side for e in graph.edges
        )


def test_llama_block_cut() -> None:
    cut = min_cut_at(bundled_graph("llama-block"), "attn")
    assert [(e.src, e.dst) for e in cut.cut_edges] == [("x", "add1")]
    assert cut.cut_weight == 16384
    assert cut.s_side == {"x", "q_proj", "k_proj", "v_proj"}


def test_cut_needs_an_attention_operator() -> None:
    with pytest.raises(PreconditionError):
        min_cut_at(bundled_graph("llama-block"), "x")


class TestDiamond:
    @staticmethod
    def graph(x_to_m: int, m_to_o: int) -> CompGraph:
        return load_graph(
            graph_document(
                {
                    "x": "input",
                    "q": "q_proj",
                    "m": "matmul",
                    "att": "attention",
                    "o": "matmul",
                    "y": "output",
                },
                [
                    ("x", "q", 8),
                    ("x", "m", x_to_m),
                    ("q", "att", 8),
                    ("att", "o", 8),
                    ("m", "o", m_to_o),
                    ("o", "y", 8),
                ],
            ),
        )

    def test_cheaper_branch_is_cut(self) -> None:
        cut = min_cut_at(self.graph(10, 5), "att")
        assert [(e.src, e.dst) for e in cut.cut_edges] == [("m", "o")]
        assert "m" in cut.s_side

    def test_tie_keeps_the_source_side_small(self) -> None:
        cut = min_cut_at(self.graph(5, 5), "att")
        assert [(e.src, e.dst) for e in cut.cut_edges] == [("x", "m")]
        assert "m" in cut.t_side

    def test_parallel_residual_edges_are_both_cut(self) -> None:
        graph = load_graph(
            graph_document(
                {
                    "x": "input",
                    "q": "q_proj",
                    "att": "attention",
                    "o": "matmul",
                    "r1": "elementwise",
                    "r2": "elementwise",
                    "y": "output",
                },
                [
                    ("x", "q", 10),
                    ("q", "att", 10),
                    ("att", "o", 10),
                    ("o", "r1", 10),
                    ("x", "r1", 3),
                    ("x", "r2", 5),
                    ("r1", "r2", 10),
                    ("r2", "y", 10),
                ],
            ),
        )
        cut = min_cut_at(graph, "att")
        assert cut.cut_weight == 8
        assert [(e.src, e.dst) for e in cut.cut_edges] == [("x", "r1"), ("x", "r2")]
        assert cut.s_side == {"x", "q"}
        assert brute_force_cuts(graph, "att")[0] == 8


class TestScheduleSlice:
    @staticmethod
    def graph() -> CompGraph:
        # Ids sort the Q projection after K and V.
        return load_graph(
            graph_document(
                {
                    "x": "input",
                    "a_k": "k_proj",
                    "b_v": "v_proj",
                    "p": "matmul",
                    "z_q": "q_proj",
                    "att": "attention",
                    "y": "output",
                },
                [
                    ("x", "a_k", 4),
                    ("x", "b_v", 4),
                    ("x", "p", 4),
                    ("p", "z_q", 4),
                    ("z_q", "att", 4),
                    ("a_k", "att", 4),
                    ("b_v", "att", 4),
                    ("att", "y", 4),
                ],
            ),
        )

    def test_q_projection_and_its_inputs_go_first(self) -> None:
        model_slice = ModelSlice(0, ("x", "a_k", "b_v", "p", "z_q"), attention="att")
        assert schedule_slice(self.graph(), model_slice) == (
            "x",
            "p",
            "z_q",
            SendMarker.send_q,
            "a_k",
            "b_v",
            SendMarker.send_kv,
        )

    def test_without_q_projection(self) -> None:
        model_slice = ModelSlice(0, ("x", "a_k", "b_v"), attention="att")
        steps = schedule_slice(self.graph(), model_slice)
        assert steps == ("x", "a_k", "b_v", SendMarker.send_kv)
        assert SendMarker.send_q not in steps

    def test_repeatable(self) -> None:
        graph = bundled_graph("llama-2layer")
        first = [schedule_slice(graph, s) for s in slice_model(graph)]
        again = [schedule_slice(graph, s) for s in slice_model(graph)]
        assert first == again


def test_llama_block_slices() -> None:
    first, last = slice_model(bundled_graph("llama-block"))
    assert first.attention == "attn"
    assert first.steps() == (
        "x",
        "q_proj",
        SendMarker.send_q,
        "k_proj",
        "v_proj",
        SendMarker.send_kv,
    )
    assert last.attention is None
    assert last.ops == ("o_proj", "add1", "ffn_up", "act", "ffn_down", "add2", "y")
    assert last.context_in == first.context_out
    assert SendMarker.send_kv not in last.steps()


def test_two_layer_slices_are_nested() -> None:
    graph = bundled_graph("llama-2layer")
    slices = slice_model(graph)
    assert [s.attention for s in slices] == ["l0.attn", "l1.attn", None]
    assert [[(e.src, e.dst) for e in s.context_out] for s in slices] == [
        [("x", "l0.add1")],
        [("l0.add2", "l1.add1")],
        [],
    ]
    position = {op: s.index for s in slices for op in s.ops}
    for s in slices:
        if s.attention is not None:
            position[s.attention] = s.index
    assert set(position) == {n.id for n in graph.nodes}
    # Every edge runs forward, from a slice to itself or a later one.
    assert all(position[e.src] <= position[e.dst] for e in graph.edges)
    for earlier, later in itertools.pairwise(slices):
        assert later.context_in == earlier.context_out


@pytest.mark.parametrize("name", ["llama-block", "llama-2layer"])
def test_slice_context_matches_independent_cuts(name: str) -> None:
    graph = bundled_graph(name)
    slices = slice_model(graph)
    for model_slice in slices[:-1]:
        assert model_slice.attention is not None
        cut = min_cut_at(graph, model_slice.attention)
        assert model_slice.context_weight == cut.cut_weight
        assert model_slice.context_out == cut.cut_edges
    assert slices[-1].context_weight == 0


def test_slices_document_scales_by_batch() -> None:
    document = slices_document(bundled_graph("llama-block"), batch=64)
    assert document["batch"] == 64
    assert document["total_context_bytes"] == 16384 * 64
    assert document["cuts"] == [
        {
            "attention": "attn",
            "cut_weight": 16384 * 64,
            "cut_edges": [{"src": "x", "dst": "add1", "bytes": 16384 * 64}],
        },
    ]
    assert document["slices"][0]["schedule"][2] == "send Q"


def test_graph_without_attention_is_one_slice() -> None:
    graph = load_graph(
        graph_document(
            {"x": "input", "m": "matmul", "y": "output"},
            [("x", "m", 4), ("m", "y", 4)],
        ),
    )
    (only,) = slice_model(graph)
    assert only.ops == ("x", "m", "y")
    assert only.steps() == ("x", "m", "y")


def test_unordered_attention_is_unsupported() -> None:
    graph = load_graph(
        graph_document(
            {
                "x": "input",
                "q1": "q_proj",
                "a1": "attention",
                "q2": "q_proj",
                "a2": "attention",
                "y": "output",
            },
            [
                ("x", "q1", 1),
                ("x", "q2", 1),
                ("q1", "a1", 1),
                ("q2", "a2", 1),
                ("a1", "y", 1),
                ("a2", "y", 1),
            ],
        ),
    )
    with pytest.raises(UnsupportedGraphError):
        slice_model(graph)


def test_cycle_is_rejected() -> None:
    with pytest.raises(CycleError):
        load_graph(
            graph_document(
                {"x": "input", "a": "matmul", "b": "matmul", "y": "output"},
                [("x", "a", 1), ("a", "b", 1), ("b", "a", 1), ("b", "y", 1)],
            ),
        )


@pytest.mark.parametrize(
    ("nodes", "edges"),
    [
        ({"x": "input", "z": "input", "y": "output"}, [("x", "y", 1), ("z", "y", 1)]),
        ({"x": "input", "y": "output"}, [("x", "y", 0)]),
        ({"x": "input", "y": "output"}, [("x", "y", 1), ("x", "y", 2)]),
        ({"x": "input", "y": "output"}, [("x", "w", 1)]),
    ],
)
def test_malformed_graphs(
    nodes: dict[str, str],
    edges: list[tuple[str, str, int]],
) -> None:
    with pytest.raises(GraphError):
        load_graph(graph_document(nodes, edges))


def test_unknown_node_kind() -> None:
    with pytest.raises(SchemaError):
        load_graph(graph_document({"x": "conv"}, []))


def test_unknown_bundled_graph() -> None:
    with pytest.raises(GraphError):
        bundled_graph("llama-70layer")
