"""Raster geometry: boundary encodings, masks, polygon rasterization, rendering.

The three-channel boundary encoding packs, per pixel:
  channel 0 ("in-wall-out"): 1 interior, 0.5 wall, 0 exterior
  channel 1 ("in-out"):      1 interior or wall, 0 exterior
  channel 2 ("raw"):         the thresholded wall raster itself
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    AllWallError,
    DimensionMismatch,
    InvalidPolygon,
    NoInteriorError,
    UnknownClassId,
)
from .palette import ClassPalette

MIN_SIDE = 8  # smallest supported boundary raster side

# LabelGrid: int32 H x W array of class ids (no wrapper type).


@dataclass(frozen=True)
class RawBoundary:
    """Scalar wall field in [0, 1]; 1 marks structure, 0 open space."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float32)
        if g.ndim != 2:
            raise DimensionMismatch(f"raw boundary must be 2D, got shape {g.shape}")
        if g.shape[0] < MIN_SIDE or g.shape[1] < MIN_SIDE:
            raise DimensionMismatch(f"raw boundary must be at least {MIN_SIDE}x{MIN_SIDE}, got {g.shape}")
        if g.min() < 0.0 or g.max() > 1.0:
            raise ValueError("raw boundary values must lie in [0, 1]")
        object.__setattr__(self, "grid", g)

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @classmethod
    def from_image(cls, array: np.ndarray, threshold: float = 0.5) -> "RawBoundary":
        """Binarize a grayscale image (values in [0,1] or [0,255]) at `threshold`."""
        a = np.asarray(array, dtype=np.float32)
        if a.size and a.max() > 1.0:
            a = a / 255.0
        return cls((a >= threshold).astype(np.float32))

    def is_binary(self) -> bool:
        return bool(np.isin(self.grid, (0.0, 1.0)).all())


@dataclass(frozen=True)
class BinaryMask:
    grid: np.ndarray
    semantics: str  # "interior" | "exterior"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.uint8)
        if g.ndim != 2:
            raise DimensionMismatch(f"mask must be 2D, got shape {g.shape}")
        if not np.isin(g, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        if self.semantics not in ("interior", "exterior"):
            raise ValueError(f"bad mask semantics {self.semantics!r}")
        object.__setattr__(self, "grid", g)


@dataclass(frozen=True)
class BoundaryImage:
    """3 x H x W float encoding described in the module docstring."""

    channels: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.channels, dtype=np.float32)
        if c.ndim != 3 or c.shape[0] != 3:
            raise DimensionMismatch(f"boundary image must be 3xHxW, got {c.shape}")
        object.__setattr__(self, "channels", c)

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]

    def validate(self) -> None:
        """Exhaustive value-set check; raises ValueError on any violation."""
        ch0, ch1, ch2 = self.channels
        if not np.isin(ch0, (0.0, 0.5, 1.0)).all():
            raise ValueError("channel 0 values must be in {0, 0.5, 1}")
        if not np.isin(ch1, (0.0, 1.0)).all():
            raise ValueError("channel 1 values must be in {0, 1}")
        if not np.isin(ch2, (0.0, 1.0)).all():
            raise ValueError("channel 2 values must be in {0, 1}")
        if not ((ch0 == 0.5) == (ch2 == 1.0)).all():
            raise ValueError("channel 0 must be 0.5 exactly on wall pixels")
        if ((ch0 == 1.0) & (ch1 != 1.0)).any():
            raise ValueError("interior pixels must be inside in channel 1")


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with vertices in normalized [0,1]^2 coordinates."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise InvalidPolygon(f"polygon needs >=3 vertices, got {len(verts)}")
        if abs(_shoelace(verts)) < 1e-12:
            raise InvalidPolygon("polygon has zero area")
        if _self_intersects(verts):
            raise InvalidPolygon("polygon is self-intersecting")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "Polygon":
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


def _shoelace(verts) -> float:
    a = 0.0
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        a += x0 * y1 - x1 * y0
    return 0.5 * a


def _segments_cross(p, q, r, s) -> bool:
    """True when open segments pq and rs properly intersect."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)

    o1, o2 = orient(p, q, r), orient(p, q, s)
    o3, o4 = orient(r, s, p), orient(r, s, q)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _self_intersects(verts) -> bool:
    n = len(verts)
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


# ---------------------------------------------------------------------------
# Flood fill and exterior extraction
# ---------------------------------------------------------------------------


def flood_fill(open_mask: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """4-connected reachable set inside `open_mask`, starting from `seeds`.

    Frontier propagation with whole-array shifts; iteration count is bounded
    by the region diameter.
    """
    open_mask = np.asarray(open_mask, dtype=bool)
    reach = np.asarray(seeds, dtype=bool) & open_mask
    frontier = reach.copy()
    while frontier.any():
        grow = np.zeros_like(reach)
        grow[1:, :] |= frontier[:-1, :]
        grow[:-1, :] |= frontier[1:, :]
        grow[:, 1:] |= frontier[:, :-1]
        grow[:, :-1] |= frontier[:, 1:]
        grow &= open_mask & ~reach
        reach |= grow
        frontier = grow
    return reach


def border_flood_exterior(open_mask: np.ndarray) -> np.ndarray:
    """Default exterior backend: open pixels 4-connected to the image border."""
    seeds = np.zeros_like(open_mask, dtype=bool)
    seeds[0, :] = seeds[-1, :] = True
    seeds[:, 0] = seeds[:, -1] = True
    return flood_fill(open_mask, seeds)


ExteriorBackend = Callable[[np.ndarray], np.ndarray]


def extract_exterior_mask(raw: RawBoundary, backend: Optional[ExteriorBackend] = None) -> BinaryMask:
    """Exterior = union of open regions touching the border.

    The backend is pluggable so a learned segmenter can replace the flood
    fill; it receives the boolean open mask and returns the exterior mask.

    Raises AllWallError when there is no open pixel, and NoInteriorError
    when walls exist but enclose nothing.
    """
    if not raw.is_binary():
        raise ValueError("raw boundary must be thresholded to {0,1} first")
    open_mask = raw.grid == 0.0
    if not open_mask.any():
        raise AllWallError("boundary raster has no open pixel")
    exterior = (backend or border_flood_exterior)(open_mask)
    walls = ~open_mask
    interior = open_mask & ~exterior
    if walls.any() and not interior.any():
        raise NoInteriorError("boundary does not enclose any interior region")
    return BinaryMask(exterior.astype(np.uint8), "exterior")


def interior_mask(raw: RawBoundary, exterior: BinaryMask) -> BinaryMask:
    inter = (raw.grid == 0.0) & (exterior.grid == 0)
    return BinaryMask(inter.astype(np.uint8), "interior")


def build_boundary_channels(raw: RawBoundary, exterior: BinaryMask) -> BoundaryImage:
    """Assemble the 3-channel encoding from a wall raster and its exterior mask.

    Wall pixels win over the mask: ch0 is 0.5 wherever raw==1 regardless of
    what the backend marked there. Raises NoInteriorError when nothing is
    left inside (this is the step that demands an interior).
    """
    if raw.grid.shape != exterior.grid.shape:
        raise DimensionMismatch(
            f"raw {raw.grid.shape} vs exterior mask {exterior.grid.shape}"
        )
    wall = raw.grid == 1.0
    ext = (exterior.grid == 1) & ~wall
    inter = ~wall & ~ext
    if not inter.any():
        raise NoInteriorError("no interior pixel; boundary is open or blank")
    ch0 = np.where(wall, 0.5, np.where(inter, 1.0, 0.0)).astype(np.float32)
    ch1 = np.where(wall | inter, 1.0, 0.0).astype(np.float32)
    ch2 = raw.grid.astype(np.float32)
    return BoundaryImage(np.stack([ch0, ch1, ch2]))


def boundary_image_from_raw(raw: RawBoundary, backend: Optional[ExteriorBackend] = None) -> BoundaryImage:
    """Full preprocessing pipeline: exterior extraction + channel assembly."""
    return build_boundary_channels(raw, extract_exterior_mask(raw, backend))


# ---------------------------------------------------------------------------
# Nearest-neighbor resizing
# ---------------------------------------------------------------------------


def nearest_index_map(src: int, dst: int) -> np.ndarray:
    """Source index for each destination index: floor(i * src / dst)."""
    return (np.arange(dst) * src) // dst


def nearest_resize2d(grid: np.ndarray, h: int, w: int) -> np.ndarray:
    """Nearest-neighbor resample of the trailing two axes."""
    if h < 1 or w < 1:
        raise DimensionMismatch(f"target dims must be >=1, got {(h, w)}")
    rows = nearest_index_map(grid.shape[-2], h)
    cols = nearest_index_map(grid.shape[-1], w)
    return np.ascontiguousarray(grid[..., rows[:, None], cols[None, :]])


def resize_boundary(b: BoundaryImage, h: int, w: int) -> BoundaryImage:
    """Resample all three channels; never interpolates, so value sets survive."""
    if (h, w) == (b.height, b.width):
        return BoundaryImage(b.channels.copy())
    return BoundaryImage(nearest_resize2d(b.channels, h, w))


# ---------------------------------------------------------------------------
# Polygon rasterization and rendering
# ---------------------------------------------------------------------------

_EDGE_EPS = 1e-9


def _points_in_polygon(px: np.ndarray, py: np.ndarray, poly: Polygon) -> np.ndarray:
    """Even-odd point-in-polygon over flat point arrays; edges count as inside."""
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        if crosses.any():
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (px < xint)
        # distance from point to the closed segment
        ex, ey = x1 - x0, y1 - y0
        denom = ex * ex + ey * ey
        if denom == 0:
            continue  # zero-length edge contributes nothing
        t = np.clip(((px - x0) * ex + (py - y0) * ey) / denom, 0.0, 1.0)
        d2 = (px - (x0 + t * ex)) ** 2 + (py - (y0 + t * ey)) ** 2
        on_edge |= d2 <= _EDGE_EPS**2
    return inside | on_edge


def rasterize_polygons(
    rooms: Sequence[tuple[Polygon, int]],
    palette: ClassPalette,
    h: int,
    w: int,
) -> np.ndarray:
    """Paint rooms onto a label grid by pixel-center membership.

    Later rooms overwrite earlier ones; untouched pixels stay background.
    """
    for _, cid in rooms:
        palette.entry(cid)  # raises UnknownClassId
    labels = np.full((h, w), palette.background_id, dtype=np.int32)
    ys, xs = np.mgrid[0:h, 0:w]
    px = ((xs + 0.5) / w).ravel()
    py = ((ys + 0.5) / h).ravel()
    for poly, cid in rooms:
        hit = _points_in_polygon(px, py, poly).reshape(h, w)
        labels[hit] = cid
    return labels


def render_plan(labels: np.ndarray, palette: ClassPalette) -> np.ndarray:
    """Per-pixel palette lookup to an H x W x 3 uint8 image."""
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size and (uniq.min() < 0 or uniq.max() >= palette.num_classes):
        bad = [int(v) for v in uniq if v < 0 or v >= palette.num_classes]
        raise UnknownClassId(f"label values {bad} not in palette")
    lut = np.zeros((palette.num_classes, 3), dtype=np.uint8)
    for e in palette.entries:
        lut[e.class_id] = e.rgb
    return lut[labels]


def labels_from_render(image: np.ndarray, palette: ClassPalette) -> np.ndarray:
    """Inverse of render_plan; requires distinct palette colors."""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionMismatch(f"expected HxWx3 image, got {image.shape}")
    colors = {}
    for e in palette.entries:
        if e.rgb in colors:
            raise UnknownClassId(f"palette colors not distinct: {e.rgb} reused")
        colors[e.rgb] = e.class_id
    packed = (
        image[..., 0].astype(np.int32) << 16
        | image[..., 1].astype(np.int32) << 8
        | image[..., 2].astype(np.int32)
    )
    labels = np.full(packed.shape, -1, dtype=np.int32)
    for (r, g, b), cid in colors.items():
        labels[packed == (r << 16 | g << 8 | b)] = cid
    if (labels < 0).any():
        ys, xs = np.nonzero(labels < 0)
        r, g, b = image[ys[0], xs[0]]
        raise UnknownClassId(f"color ({r},{g},{b}) at pixel ({ys[0]},{xs[0]}) not in palette")
    return labels


def pad_to_multiple(channels: np.ndarray, multiple: int) -> tuple[np.ndarray, tuple[int, int]]:
    """Symmetric-pad the trailing two axes up to the next multiple; returns
    the padded array and the original (h, w) for cropping predictions back."""
    h, w = channels.shape[-2], channels.shape[-1]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return channels, (h, w)
    pad = [(0, 0)] * (channels.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(channels, pad, mode="symmetric"), (h, w)
