"""Bubble-diagram layout graphs: validation, encoding, extraction, JSON IO."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidGraph, ParseError
from .palette import ClassPalette

# Validation rule strings are shared verbatim with every client (see
# shared/validation_rules.json); change them only together with that file.
RULE_EMPTY = "graph must have ≥1 node"
RULE_DUPLICATE_NODE = "duplicate node id"
RULE_NONCONTIGUOUS = "node ids must be contiguous from 0"
RULE_SELF_LOOP = "self-loop"
RULE_DUPLICATE_EDGE = "duplicate edge"
RULE_UNKNOWN_ENDPOINT = "edge endpoint not a node id"
RULE_NON_ROOM = "non-room category"
RULE_CENTROID_RANGE = "centroid out of range"

VALIDATION_RULES = (
    RULE_EMPTY,
    RULE_DUPLICATE_NODE,
    RULE_NONCONTIGUOUS,
    RULE_SELF_LOOP,
    RULE_DUPLICATE_EDGE,
    RULE_UNKNOWN_ENDPOINT,
    RULE_NON_ROOM,
    RULE_CENTROID_RANGE,
)


@dataclass(frozen=True)
class GraphNode:
    node_id: int
    category: int
    centroid: Optional[tuple[float, float]] = None  # normalized (x, y) hint


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.subject}"


@dataclass(frozen=True)
class LayoutGraph:
    """Room nodes plus undirected connection edges.

    Construction is permissive so that invalid graphs can be represented and
    reported by validate_graph; edges are stored as sorted id pairs.
    """

    nodes: tuple[GraphNode, ...]
    edges: frozenset[tuple[int, int]]

    @classmethod
    def build(
        cls,
        nodes: Sequence[GraphNode],
        edges: Sequence[tuple[int, int]],
    ) -> "LayoutGraph":
        norm = frozenset((min(a, b), max(a, b)) for a, b in edges)
        return cls(tuple(nodes), norm)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def degrees(self) -> dict[int, int]:
        deg = {n.node_id: 0 for n in self.nodes}
        for a, b in self.edges:
            if a in deg:
                deg[a] += 1
            if b in deg and a != b:
                deg[b] += 1
        return deg

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def validate_graph(g: LayoutGraph, palette: ClassPalette) -> list[Violation]:
    """All invariant violations, as data; empty list means the graph is valid."""
    out: list[Violation] = []
    if g.num_nodes == 0:
        out.append(Violation(RULE_EMPTY, "graph"))
        return out
    ids = [n.node_id for n in g.nodes]
    seen = set()
    for i in ids:
        if i in seen:
            out.append(Violation(RULE_DUPLICATE_NODE, f"node {i}"))
        seen.add(i)
    if sorted(seen) != list(range(g.num_nodes)):
        out.append(Violation(RULE_NONCONTIGUOUS, f"ids {sorted(seen)}"))
    room_ids = set(palette.room_ids)
    for n in g.nodes:
        if n.category not in room_ids:
            out.append(Violation(RULE_NON_ROOM, f"node {n.node_id}"))
        if n.centroid is not None:
            x, y = n.centroid
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                out.append(Violation(RULE_CENTROID_RANGE, f"node {n.node_id}"))
    for a, b in g.sorted_edges():
        if a == b:
            out.append(Violation(RULE_SELF_LOOP, f"edge ({a},{b})"))
            continue
        if a not in seen or b not in seen:
            out.append(Violation(RULE_UNKNOWN_ENDPOINT, f"edge ({a},{b})"))
    return out


def require_valid(g: LayoutGraph, palette: ClassPalette) -> None:
    violations = validate_graph(g, palette)
    if violations:
        raise InvalidGraph("; ".join(str(v) for v in violations))


def encode_node_features(g: LayoutGraph, palette: ClassPalette) -> np.ndarray:
    """N x F matrix: one-hot room category plus degree/N, in node-id order."""
    require_valid(g, palette)
    room_ids = list(palette.room_ids)
    n = g.num_nodes
    feats = np.zeros((n, len(room_ids) + 1), dtype=np.float64)
    deg = g.degrees()
    for node in g.nodes:
        row = node.node_id
        feats[row, room_ids.index(node.category)] = 1.0
        feats[row, -1] = deg[node.node_id] / n
    return feats


def num_node_features(num_classes: int) -> int:
    """Feature width for a palette with the given class count."""
    return (num_classes - 2) + 1


def normalized_adjacency(g: LayoutGraph) -> np.ndarray:
    """Symmetric normalization with self-loops: D^-1/2 (A + I) D^-1/2."""
    n = g.num_nodes
    if n < 1:
        raise InvalidGraph("graph must have ≥1 node")
    a = np.eye(n, dtype=np.float64)
    for i, j in g.edges:
        if i != j and 0 <= i < n and 0 <= j < n:
            a[i, j] = 1.0
            a[j, i] = 1.0
    d = a.sum(axis=1)
    # dividing by sqrt(d_i * d_j) keeps the matrix exactly symmetric and the
    # diagonal exactly 1/(degree+1) for integer degrees
    return a / np.sqrt(np.outer(d, d))


def permute_graph(g: LayoutGraph, perm: Sequence[int]) -> LayoutGraph:
    """Relabel node ids by perm (old id -> new id); used by invariance tests."""
    nodes = tuple(
        sorted(
            (GraphNode(perm[n.node_id], n.category, n.centroid) for n in g.nodes),
            key=lambda n: n.node_id,
        )
    )
    edges = [(perm[a], perm[b]) for a, b in g.edges]
    return LayoutGraph.build(nodes, edges)


# ---------------------------------------------------------------------------
# Extraction from label grids
# ---------------------------------------------------------------------------

ADJACENCY_CHEBYSHEV = 2  # rooms separated by at most one wall pixel connect


def _room_components(labels: np.ndarray, palette: ClassPalette) -> tuple[np.ndarray, list[int]]:
    """Label 4-connected same-class room components in row-major discovery
    order. Returns the component map (0 = none) and each component's class."""
    from .geometry import flood_fill

    h, w = labels.shape
    comp = np.zeros((h, w), dtype=np.int32)
    classes: list[int] = []
    room_mask = np.isin(labels, palette.room_ids)
    todo = room_mask.copy()
    while todo.any():
        ys, xs = np.nonzero(todo)
        y, x = int(ys[0]), int(xs[0])
        cls = int(labels[y, x])
        seeds = np.zeros_like(todo)
        seeds[y, x] = True
        region = flood_fill(labels == cls, seeds)
        classes.append(cls)
        comp[region] = len(classes)
        todo &= ~region
    return comp, classes


def graph_from_plan(labels: np.ndarray, palette: ClassPalette) -> LayoutGraph:
    """Extract the bubble diagram from a label grid.

    One node per connected room component; an edge wherever two components
    come within Chebyshev distance 2 (i.e. share an opening or are split by
    a single wall pixel). Returns an empty graph for a room-less plan.
    """
    labels = np.asarray(labels, dtype=np.int32)
    comp, classes = _room_components(labels, palette)
    h, w = labels.shape
    edges: set[tuple[int, int]] = set()
    r = ADJACENCY_CHEBYSHEV
    for dy in range(0, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx <= 0:
                continue  # half the offsets; edges are undirected
            y0, y1 = max(0, -dy), h - max(0, dy)
            x0, x1 = max(0, -dx), w - max(0, dx)
            a = comp[y0:y1, x0:x1]
            b = comp[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
            both = (a > 0) & (b > 0) & (a != b)
            if both.any():
                pairs = np.stack([a[both], b[both]], axis=1)
                for p, q in np.unique(pairs, axis=0):
                    p, q = int(p), int(q)
                    edges.add((min(p, q) - 1, max(p, q) - 1))
    nodes = []
    for k, cls in enumerate(classes, start=1):
        ys, xs = np.nonzero(comp == k)
        cx = float((xs.mean() + 0.5) / w)
        cy = float((ys.mean() + 0.5) / h)
        nodes.append(GraphNode(k - 1, cls, (cx, cy)))
    return LayoutGraph.build(nodes, sorted(edges))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParsedGraph:
    graph: LayoutGraph
    warnings: tuple[str, ...]


def graph_to_json(g: LayoutGraph, palette: ClassPalette) -> str:
    nodes = []
    for n in sorted(g.nodes, key=lambda n: n.node_id):
        d: dict = {"id": n.node_id, "category": palette.entry(n.category).name}
        if n.centroid is not None:
            d["centroid"] = [n.centroid[0], n.centroid[1]]
        nodes.append(d)
    return json.dumps({"nodes": nodes, "edges": [list(e) for e in g.sorted_edges()]}, indent=2)


def parse_graph_json(text: str, palette: ClassPalette) -> ParsedGraph:
    """Parse the graph schema; duplicate edges are deduplicated with a warning."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object")
    for key in ("nodes", "edges"):
        if key not in doc:
            raise ParseError(f"missing {key!r} key")
        if not isinstance(doc[key], list):
            raise ParseError(f"{key!r} must be a list")
    nodes = []
    for i, nd in enumerate(doc["nodes"]):
        if not isinstance(nd, dict):
            raise ParseError(f"nodes[{i}] must be an object")
        if "id" not in nd or "category" not in nd:
            raise ParseError(f"nodes[{i}]: missing 'id' or 'category'")
        if not isinstance(nd["id"], int) or isinstance(nd["id"], bool):
            raise ParseError(f"nodes[{i}].id must be an integer")
        try:
            category = palette.resolve(nd["category"])
        except Exception as exc:
            raise ParseError(f"nodes[{i}].category: {exc}") from exc
        centroid = None
        if nd.get("centroid") is not None:
            c = nd["centroid"]
            if not (isinstance(c, list) and len(c) == 2):
                raise ParseError(f"nodes[{i}].centroid must be [x, y]")
            try:
                centroid = (float(c[0]), float(c[1]))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"nodes[{i}].centroid must be numeric") from exc
            if not all(math.isfinite(v) for v in centroid):
                raise ParseError(f"nodes[{i}].centroid must be finite")
        unknown = set(nd) - {"id", "category", "centroid"}
        if unknown:
            raise ParseError(f"nodes[{i}]: unknown fields {sorted(unknown)}")
        nodes.append(GraphNode(nd["id"], category, centroid))
    warnings: list[str] = []
    edges: list[tuple[int, int]] = []
    seen = set()
    for i, ed in enumerate(doc["edges"]):
        if not (isinstance(ed, list) and len(ed) == 2) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in ed
        ):
            raise ParseError(f"edges[{i}] must be [id, id]")
        key = (min(ed), max(ed))
        if key in seen:
            warnings.append(f"edges[{i}]: duplicate edge {key} dropped")
            continue
        seen.add(key)
        edges.append(key)
    return ParsedGraph(LayoutGraph.build(nodes, edges), tuple(warnings))


def graph_from_json(text: str, palette: ClassPalette) -> LayoutGraph:
    return parse_graph_json(text, palette).graph
