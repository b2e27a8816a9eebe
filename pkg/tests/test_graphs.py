"""Layout graphs: validation, features, adjacency, extraction, JSON IO."""

import json
import math

import numpy as np
import pytest

from floorgen.errors import InvalidGraph, ParseError
from floorgen.graphs import (
    RULE_EMPTY,
    RULE_NON_ROOM,
    RULE_SELF_LOOP,
    GraphNode,
    LayoutGraph,
    encode_node_features,
    graph_from_json,
    graph_from_plan,
    graph_to_json,
    normalized_adjacency,
    parse_graph_json,
    permute_graph,
    validate_graph,
)
from floorgen.palette import default_palette

PAL = default_palette()


def simple_graph(n, edges=(), categories=None):
    cats = categories or [PAL.room_ids[i % len(PAL.room_ids)] for i in range(n)]
    return LayoutGraph.build([GraphNode(i, cats[i]) for i in range(n)], edges)


# ---------------------------------------------------------------------------
# validate_graph
# ---------------------------------------------------------------------------


def test_empty_graph_violation():
    v = validate_graph(LayoutGraph.build([], []), PAL)
    assert [x.rule for x in v] == [RULE_EMPTY]


def test_self_loop_violation():
    g = simple_graph(3, edges=[(2, 2)])
    rules = [x.rule for x in validate_graph(g, PAL)]
    assert rules == [RULE_SELF_LOOP]
    assert "edge (2,2)" in str(validate_graph(g, PAL)[0])


def test_non_room_category_violation():
    g = LayoutGraph.build([GraphNode(0, PAL.background_id)], [])
    v = validate_graph(g, PAL)
    assert [x.rule for x in v] == [RULE_NON_ROOM]
    assert "node 0" in v[0].subject


def test_valid_graph_no_violations():
    g = simple_graph(3, edges=[(0, 1), (1, 2)])
    assert validate_graph(g, PAL) == []


def test_noncontiguous_and_unknown_endpoint():
    g = LayoutGraph.build([GraphNode(0, 2), GraphNode(2, 3)], [(0, 5)])
    rules = {x.rule for x in validate_graph(g, PAL)}
    assert "node ids must be contiguous from 0" in rules
    assert "edge endpoint not a node id" in rules


# ---------------------------------------------------------------------------
# encode_node_features
# ---------------------------------------------------------------------------


def test_single_node_one_hot():
    # category = third room class (index 2) of the six room classes
    cat = PAL.room_ids[2]
    g = LayoutGraph.build([GraphNode(0, cat)], [])
    f = encode_node_features(g, PAL)
    expected = np.zeros((1, len(PAL.room_ids) + 1))
    expected[0, 2] = 1.0
    assert np.array_equal(f, expected)


def test_degree_feature_half_for_connected_pair():
    g = simple_graph(2, edges=[(0, 1)])
    f = encode_node_features(g, PAL)
    assert f[0, -1] == 0.5
    assert f[1, -1] == 0.5
    assert (f[:, :-1].sum(axis=1) == 1.0).all()


def test_feature_rows_permute_with_ids():
    g = simple_graph(4, edges=[(0, 1), (1, 2), (2, 3)])
    perm = [2, 0, 3, 1]
    f = encode_node_features(g, PAL)
    fp = encode_node_features(permute_graph(g, perm), PAL)
    for old, new in enumerate(perm):
        assert np.array_equal(fp[new], f[old])


def test_encode_invalid_graph_raises():
    with pytest.raises(InvalidGraph):
        encode_node_features(LayoutGraph.build([], []), PAL)


# ---------------------------------------------------------------------------
# normalized_adjacency
# ---------------------------------------------------------------------------


def test_adjacency_single_node():
    assert np.array_equal(normalized_adjacency(simple_graph(1)), np.array([[1.0]]))


def test_adjacency_connected_pair():
    a = normalized_adjacency(simple_graph(2, edges=[(0, 1)]))
    assert np.allclose(a, 0.5 * np.ones((2, 2)), atol=0, rtol=0)


def test_adjacency_path_graph_closed_form():
    a = normalized_adjacency(simple_graph(3, edges=[(0, 1), (1, 2)]))
    assert a[0, 1] == pytest.approx(1.0 / math.sqrt(2 * 3), abs=1e-12)
    assert a[0, 0] == pytest.approx(1.0 / 2.0, abs=1e-12)
    assert a[1, 1] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_adjacency_symmetry_and_diagonal_random():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(1, 9))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        take = [p for p in pairs if rng.random() < 0.4]
        g = simple_graph(n, edges=take)
        a = normalized_adjacency(g)
        assert np.abs(a - a.T).max() <= 1e-12
        deg = g.degrees()
        for i in range(n):
            assert a[i, i] == pytest.approx(1.0 / (deg[i] + 1), abs=1e-12)
        assert (a >= 0).all()


def test_adjacency_permutation_equivariance():
    g = simple_graph(5, edges=[(0, 1), (1, 2), (3, 4), (0, 4)])
    perm = [3, 0, 4, 1, 2]
    a = normalized_adjacency(g)
    ap = normalized_adjacency(permute_graph(g, perm))
    p = np.zeros((5, 5))
    for old, new in enumerate(perm):
        p[new, old] = 1.0
    assert np.array_equal(ap, p @ a @ p.T)


# ---------------------------------------------------------------------------
# graph_from_plan
# ---------------------------------------------------------------------------


def test_single_room_plan():
    labels = np.full((6, 6), PAL.room_ids[0], dtype=np.int32)
    g = graph_from_plan(labels, PAL)
    assert g.num_nodes == 1
    assert g.edges == frozenset()
    assert g.nodes[0].centroid == (0.5, 0.5)


def test_two_rooms_one_wall_column_apart():
    # 6x6: rooms in columns 0-1 and 3-5, wall in column 2
    labels = np.full((6, 6), PAL.background_id, dtype=np.int32)
    labels[:, 0:2] = 2
    labels[:, 2] = PAL.structure_id
    labels[:, 3:6] = 3
    g = graph_from_plan(labels, PAL)
    assert g.num_nodes == 2
    assert g.sorted_edges() == [(0, 1)]


def test_two_rooms_two_wall_columns_apart_no_edge():
    labels = np.full((6, 8), PAL.background_id, dtype=np.int32)
    labels[:, 0:2] = 2
    labels[:, 2:4] = PAL.structure_id
    labels[:, 4:6] = 3
    g = graph_from_plan(labels, PAL)
    assert g.num_nodes == 2
    assert g.sorted_edges() == []


def test_same_class_separate_components_are_distinct_nodes():
    labels = np.full((6, 8), PAL.background_id, dtype=np.int32)
    labels[:, 0:2] = 2
    labels[:, 2:5] = PAL.structure_id
    labels[:, 5:8] = 2
    g = graph_from_plan(labels, PAL)
    assert g.num_nodes == 2
    assert [n.category for n in g.nodes] == [2, 2]


def test_no_rooms_gives_empty_graph():
    labels = np.full((6, 6), PAL.background_id, dtype=np.int32)
    g = graph_from_plan(labels, PAL)
    assert g.num_nodes == 0


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------


def test_json_round_trip():
    g = LayoutGraph.build(
        [GraphNode(0, 2, (0.25, 0.75)), GraphNode(1, 3), GraphNode(2, 7, (0.5, 0.5))],
        [(0, 1), (1, 2)],
    )
    text = graph_to_json(g, PAL)
    g2 = graph_from_json(text, PAL)
    assert g2 == g


def test_json_missing_nodes_key():
    with pytest.raises(ParseError, match="nodes"):
        graph_from_json('{"edges": []}', PAL)


def test_json_duplicate_edge_warns_and_dedupes():
    text = json.dumps(
        {
            "nodes": [{"id": 0, "category": "living"}, {"id": 1, "category": "bedroom"}],
            "edges": [[0, 1], [1, 0]],
        }
    )
    parsed = parse_graph_json(text, PAL)
    assert parsed.graph.sorted_edges() == [(0, 1)]
    assert len(parsed.warnings) == 1
    assert "duplicate edge" in parsed.warnings[0]


def test_json_category_by_id_or_name():
    text = json.dumps({"nodes": [{"id": 0, "category": 4}], "edges": []})
    assert graph_from_json(text, PAL).nodes[0].category == 4
    text = json.dumps({"nodes": [{"id": 0, "category": "kitchen"}], "edges": []})
    assert graph_from_json(text, PAL).nodes[0].category == 4


def test_json_bad_category_diagnostics():
    text = json.dumps({"nodes": [{"id": 0, "category": "ballroom"}], "edges": []})
    with pytest.raises(ParseError, match=r"nodes\[0\].category"):
        graph_from_json(text, PAL)


def test_json_syntax_error_has_line_info():
    with pytest.raises(ParseError, match="line 1"):
        graph_from_json("{nope", PAL)
