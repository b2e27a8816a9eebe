"""Shared tiny-model fixtures for the gradient-check tests."""

import numpy as np

from floorgen.data import BatchTensors
from floorgen.geometry import RawBoundary, boundary_image_from_raw
from floorgen.graphs import GraphNode, LayoutGraph, encode_node_features, normalized_adjacency
from floorgen.nn.model import ModelConfig
from floorgen.palette import ClassPalette, PaletteEntry

TINY_PAL = ClassPalette(
    entries=(
        PaletteEntry(0, "background", (255, 255, 255)),
        PaletteEntry(1, "structure", (0, 0, 0)),
        PaletteEntry(2, "room_a", (255, 0, 0)),
        PaletteEntry(3, "room_b", (0, 255, 0)),
        PaletteEntry(4, "room_c", (0, 0, 255)),
    ),
    background_id=0,
    structure_id=1,
)

TINY_CFG = ModelConfig(
    classes=5, stages=1, base_width=2, gcn_layers=3, gcn_hidden=4, graph_channels=2
)


def ring_boundary(n=8):
    g = np.zeros((n, n), dtype=np.float32)
    g[2 : n - 2, 2 : n - 2] = 1.0
    g[3 : n - 3, 3 : n - 3] = 0.0
    return boundary_image_from_raw(RawBoundary(g))


def tiny_batch():
    """One 8x8 sample with a 2-node, 1-edge layout graph."""
    boundary = ring_boundary(8)
    graph = LayoutGraph.build(
        [GraphNode(0, 2, (0.4, 0.4)), GraphNode(1, 3, (0.6, 0.6))], [(0, 1)]
    )
    return BatchTensors(
        boundaries=boundary.channels[None],
        graphs=[(encode_node_features(graph, TINY_PAL), normalized_adjacency(graph))],
        targets=np.random.default_rng(0).integers(0, 5, size=(1, 8, 8)).astype(np.int32),
        has_target=np.ones(1, dtype=bool),
    )
