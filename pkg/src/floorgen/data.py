"""Dataset plumbing: manifests, sample loading, synthetic sets, batching.

Synthetic datasets are written in the same struct/graph/full triple layout
the external data uses, so one loader serves both. Manifest paths are
relative to the manifest file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from .errors import ConfigError, DimensionMismatch, ParseError, UnknownClassId
from .geometry import (
    BoundaryImage,
    RawBoundary,
    boundary_image_from_raw,
    labels_from_render,
    nearest_resize2d,
)
from .graphs import LayoutGraph, encode_node_features, graph_from_json, graph_to_json, normalized_adjacency, require_valid
from .palette import ClassPalette
from .synth import SynthConfig, SynthSample, generate_synthetic


@dataclass(frozen=True)
class Sample:
    id: str
    boundary: BoundaryImage
    graph: LayoutGraph
    target: Optional[np.ndarray] = None  # label grid, same dims as boundary

    def __post_init__(self):
        if self.target is not None:
            t = np.asarray(self.target, dtype=np.int32)
            if t.shape != (self.boundary.height, self.boundary.width):
                raise DimensionMismatch(
                    f"sample {self.id}: target {t.shape} vs boundary "
                    f"{(self.boundary.height, self.boundary.width)}"
                )
            object.__setattr__(self, "target", t)


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    struct_path: str
    graph_path: str
    full_path: Optional[str] = None


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...]
    base_dir: Path
    palette: ClassPalette
    split: str = "train"

    def __len__(self) -> int:
        return len(self.records)


def write_manifest(records: Sequence[ManifestRecord], path: Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            rec = {"id": r.id, "struct_path": r.struct_path, "graph_path": r.graph_path}
            if r.full_path is not None:
                rec["full_path"] = r.full_path
            fh.write(json.dumps(rec) + "\n")


def read_manifest(path: Path, palette: ClassPalette, split: str = "train") -> DatasetManifest:
    path = Path(path)
    base = path.parent
    records = []
    seen = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc.msg}") from exc
            try:
                rec = ManifestRecord(
                    str(doc["id"]),
                    str(doc["struct_path"]),
                    str(doc["graph_path"]),
                    str(doc["full_path"]) if doc.get("full_path") is not None else None,
                )
            except KeyError as exc:
                raise ParseError(f"{path}:{lineno}: missing field {exc}") from exc
            if rec.id in seen:
                raise ParseError(f"{path}:{lineno}: duplicate sample id {rec.id!r}")
            seen.add(rec.id)
            for p in (rec.struct_path, rec.graph_path, rec.full_path):
                if p is not None and not (base / p).exists():
                    raise ParseError(f"{path}:{lineno}: referenced file missing: {p}")
            records.append(rec)
    return DatasetManifest(tuple(records), base, palette, split)


# ---------------------------------------------------------------------------
# Sample IO
# ---------------------------------------------------------------------------


def _load_struct(path: Path, threshold: float) -> RawBoundary:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float32)
    return RawBoundary.from_image(arr, threshold=threshold)


def _load_full(path: Path, palette: ClassPalette) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode in ("P", "L"):
            labels = np.asarray(im.convert("P") if im.mode == "P" else im, dtype=np.int32)
        else:
            labels = labels_from_render(np.asarray(im.convert("RGB")), palette)
    bad = np.unique(labels[(labels < 0) | (labels >= palette.num_classes)])
    if bad.size:
        raise UnknownClassId(f"{path}: label values {bad.tolist()} not in palette")
    return labels


def load_sample(
    record: ManifestRecord,
    palette: ClassPalette,
    base_dir: Path,
    threshold: float = 0.5,
) -> Sample:
    """Load one struct/graph/full triple; errors name the offending file."""
    base = Path(base_dir)
    struct_path = base / record.struct_path
    try:
        raw = _load_struct(struct_path, threshold)
        boundary = boundary_image_from_raw(raw)
    except Exception as exc:
        raise type(exc)(f"{record.id} ({struct_path}): {exc}") from exc
    graph_path = base / record.graph_path
    try:
        graph = graph_from_json(graph_path.read_text(encoding="utf-8"), palette)
        require_valid(graph, palette)
    except Exception as exc:
        raise type(exc)(f"{record.id} ({graph_path}): {exc}") from exc
    target = None
    if record.full_path is not None:
        full_path = base / record.full_path
        try:
            target = _load_full(full_path, palette)
        except Exception as exc:
            raise type(exc)(f"{record.id} ({full_path}): {exc}") from exc
    return Sample(record.id, boundary, graph, target)


def load_manifest_samples(manifest: DatasetManifest, threshold: float = 0.5) -> list[Sample]:
    return [load_sample(r, manifest.palette, manifest.base_dir, threshold) for r in manifest.records]


def write_sample(sample: SynthSample, palette: ClassPalette, out_dir: Path) -> ManifestRecord:
    """Write the struct/graph/full triple for a generated sample."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    struct_name = f"{sample.id}_struct.png"
    graph_name = f"{sample.id}_graph.json"
    full_name = f"{sample.id}_full.png"
    Image.fromarray((sample.raw.grid * 255).astype(np.uint8), mode="L").save(out / struct_name)
    (out / graph_name).write_text(graph_to_json(sample.graph, palette), encoding="utf-8")
    full = Image.fromarray(sample.target.astype(np.uint8), mode="P")
    flat = []
    for e in sorted(palette.entries, key=lambda e: e.class_id):
        flat.extend(e.rgb)
    full.putpalette(flat)
    full.save(out / full_name)
    return ManifestRecord(sample.id, struct_name, graph_name, full_name)


def write_synthetic_dataset(
    out_dir: Path,
    count: int,
    seed: int,
    cfg: SynthConfig,
    palette: ClassPalette,
) -> Path:
    """Generate `count` samples (sub-seeds seed..seed+count-1) plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(count):
        sample = generate_synthetic(seed + i, cfg, palette, sample_id=f"synth-{seed + i:08d}")
        records.append(write_sample(sample, palette, out))
    manifest_path = out / "manifest.jsonl"
    write_manifest(records, manifest_path)
    return manifest_path


def synth_to_sample(s: SynthSample) -> Sample:
    return Sample(s.id, s.boundary, s.graph, s.target)


# ---------------------------------------------------------------------------
# Splitting and batching
# ---------------------------------------------------------------------------


def split_dataset(
    manifest: DatasetManifest,
    ratios: tuple[float, float],
    seed: int,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Seed-deterministic disjoint, exhaustive partition into (train, val)."""
    tr, va = ratios
    if tr <= 0 or va <= 0:
        raise ConfigError(f"split ratios must be positive, got {ratios}")
    if abs(tr + va - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    n = len(manifest.records)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(tr * n))
    train = tuple(manifest.records[i] for i in perm[:n_train])
    val = tuple(manifest.records[i] for i in perm[n_train:])
    return (
        replace(manifest, records=train, split="train"),
        replace(manifest, records=val, split="val"),
    )


@dataclass
class BatchTensors:
    boundaries: np.ndarray  # B x 3 x H x W float32
    graphs: list[tuple[np.ndarray, np.ndarray]]  # (node features, normalized adjacency)
    targets: np.ndarray  # B x H x W int32 (zeros when absent)
    has_target: np.ndarray  # B bool

    @property
    def size(self) -> int:
        return self.boundaries.shape[0]


def pack_batch(samples: Sequence[Sample], target_hw: tuple[int, int], palette: ClassPalette) -> BatchTensors:
    """Resize everything to a common grid and encode graphs for the model."""
    h, w = target_hw
    if h < 1 or w < 1:
        raise DimensionMismatch(f"bad batch dims {target_hw}")
    if not samples:
        raise DimensionMismatch("empty batch")
    boundaries = np.stack(
        [nearest_resize2d(s.boundary.channels, h, w) for s in samples]
    ).astype(np.float32)
    targets = np.zeros((len(samples), h, w), dtype=np.int32)
    has_target = np.zeros(len(samples), dtype=bool)
    for i, s in enumerate(samples):
        if s.target is not None:
            targets[i] = nearest_resize2d(s.target, h, w)
            has_target[i] = True
    graphs = [
        (encode_node_features(s.graph, palette), normalized_adjacency(s.graph))
        for s in samples
    ]
    return BatchTensors(boundaries, graphs, targets, has_target)
