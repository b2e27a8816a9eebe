"""Synthetic floor-plan generator: recursive rectilinear splitting.

A rectangular building shell is recursively partitioned by alternating
horizontal/vertical cuts; each cut reserves a wall strip, and every cut wall
gets a doorway so the declared room graph is connected. The ground-truth
graph is recovered from the rendered labels with graph_from_plan, so the
generator and the extractor cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .geometry import RawBoundary, BoundaryImage, boundary_image_from_raw
from .graphs import LayoutGraph, graph_from_plan
from .palette import ClassPalette

MIN_ROOM_SIDE = 5  # interior pixels per axis; keeps doorway placement feasible
_MAX_ATTEMPTS = 32


@dataclass(frozen=True)
class SynthConfig:
    grid: int = 64
    min_rooms: int = 3
    max_rooms: int = 6
    wall_px: int = 2

    def validate(self, num_room_classes: int) -> None:
        if self.grid < 4 * (MIN_ROOM_SIDE + self.wall_px):
            raise ConfigError(f"grid {self.grid} too small for wall_px {self.wall_px}")
        if not (1 <= self.min_rooms <= self.max_rooms):
            raise ConfigError(
                f"need 1 <= min_rooms <= max_rooms, got {self.min_rooms}..{self.max_rooms}"
            )
        if self.max_rooms > num_room_classes * 3:
            raise ConfigError(
                f"max_rooms {self.max_rooms} exceeds 3x room classes ({num_room_classes})"
            )
        if self.wall_px < 1:
            raise ConfigError("wall_px must be >= 1")


@dataclass(frozen=True)
class SynthSample:
    """Generator output; `target` is the label grid, `graph` its bubble diagram."""

    id: str
    boundary: BoundaryImage
    raw: RawBoundary
    graph: LayoutGraph
    target: np.ndarray


@dataclass
class _Leaf:
    y: int
    x: int
    h: int
    w: int
    depth: int


@dataclass
class _Cut:
    vertical: bool  # True: wall is a column span, cut position on x
    pos: int  # first wall row/col
    lo: int  # perpendicular extent start
    hi: int  # perpendicular extent end (exclusive)


class _Retry(Exception):
    pass


def _split_leaves(rng, region: _Leaf, k: int, wall: int) -> tuple[list[_Leaf], list[_Cut]]:
    leaves = [region]
    cuts: list[_Cut] = []
    while len(leaves) < k:
        candidates = []
        for i, lf in enumerate(leaves):
            prefer_vertical = lf.depth % 2 == 0
            for vertical in (prefer_vertical, not prefer_vertical):
                size = lf.w if vertical else lf.h
                if size >= 2 * MIN_ROOM_SIDE + wall:
                    candidates.append((lf.h * lf.w, i, vertical))
                    break
        if not candidates:
            break  # nothing splittable; accept fewer rooms
        _, idx, vertical = max(candidates, key=lambda c: (c[0], -c[1]))
        lf = leaves.pop(idx)
        if vertical:
            c = int(rng.integers(lf.x + MIN_ROOM_SIDE, lf.x + lf.w - MIN_ROOM_SIDE - wall + 1))
            a = _Leaf(lf.y, lf.x, lf.h, c - lf.x, lf.depth + 1)
            b = _Leaf(lf.y, c + wall, lf.h, lf.x + lf.w - c - wall, lf.depth + 1)
            cuts.append(_Cut(True, c, lf.y, lf.y + lf.h))
        else:
            c = int(rng.integers(lf.y + MIN_ROOM_SIDE, lf.y + lf.h - MIN_ROOM_SIDE - wall + 1))
            a = _Leaf(lf.y, lf.x, c - lf.y, lf.w, lf.depth + 1)
            b = _Leaf(c + wall, lf.x, lf.y + lf.h - c - wall, lf.w, lf.depth + 1)
            cuts.append(_Cut(False, c, lf.x, lf.x + lf.w))
        leaves.extend([a, b])
    return leaves, cuts


def _carve_doorways(rng, labels: np.ndarray, cuts: list[_Cut], wall: int, structure_id: int) -> None:
    for cut in cuts:
        candidates = []
        for t in range(cut.lo, cut.hi - 1):
            if cut.vertical:
                sides = labels[t : t + 2, cut.pos - 1], labels[t : t + 2, cut.pos + wall]
            else:
                sides = labels[cut.pos - 1, t : t + 2], labels[cut.pos + wall, t : t + 2]
            if all((s != structure_id).all() for s in sides):
                candidates.append(t)
        if not candidates:
            raise _Retry
        t = int(rng.choice(candidates))
        if cut.vertical:
            labels[t : t + 2, cut.pos : cut.pos + wall] = labels[t, cut.pos - 1]
        else:
            labels[cut.pos : cut.pos + wall, t : t + 2] = labels[cut.pos - 1, t]


def _generate_once(rng, cfg: SynthConfig, palette: ClassPalette, sample_id: str) -> SynthSample:
    g = cfg.grid
    wall = cfg.wall_px
    # shell extents: 60-90% of the grid per axis, at least one exterior pixel
    bh = int(rng.integers(int(np.ceil(0.6 * g)), int(0.9 * g) + 1))
    bw = int(rng.integers(int(np.ceil(0.6 * g)), int(0.9 * g) + 1))
    y0 = int(rng.integers(1, g - bh))
    x0 = int(rng.integers(1, g - bw))

    interior = _Leaf(y0 + wall, x0 + wall, bh - 2 * wall, bw - 2 * wall, depth=0)
    if interior.h < MIN_ROOM_SIDE or interior.w < MIN_ROOM_SIDE:
        raise _Retry
    k = int(rng.integers(cfg.min_rooms, cfg.max_rooms + 1))
    leaves, cuts = _split_leaves(rng, interior, k, wall)
    if len(leaves) < cfg.min_rooms:
        raise _Retry

    labels = np.full((g, g), palette.background_id, dtype=np.int32)
    labels[y0 : y0 + bh, x0 : x0 + bw] = palette.structure_id
    room_ids = np.array(palette.room_ids)
    for lf in leaves:
        labels[lf.y : lf.y + lf.h, lf.x : lf.x + lf.w] = int(rng.choice(room_ids))
    _carve_doorways(rng, labels, cuts, wall, palette.structure_id)

    raw = RawBoundary((labels == palette.structure_id).astype(np.float32))
    boundary = boundary_image_from_raw(raw)
    graph = graph_from_plan(labels, palette)
    return SynthSample(sample_id, boundary, raw, graph, labels)


def generate_synthetic(
    seed: int,
    cfg: SynthConfig,
    palette: ClassPalette,
    sample_id: Optional[str] = None,
) -> SynthSample:
    """Deterministic-in-seed synthetic sample.

    Carving a doorway can be infeasible for unlucky cut layouts; generation
    then retries with a seed-derived substream, so the result is still a pure
    function of (seed, cfg).
    """
    cfg.validate(len(palette.room_ids))
    sid = sample_id if sample_id is not None else f"synth-{seed:08d}"
    for attempt in range(_MAX_ATTEMPTS):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, attempt)))
        try:
            return _generate_once(rng, cfg, palette, sid)
        except _Retry:
            continue
    raise ConfigError(f"could not generate a plan for seed {seed} with {cfg}")
