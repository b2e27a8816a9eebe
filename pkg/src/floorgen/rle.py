"""Row-major run-length encoding for label grids (the wire format)."""

from __future__ import annotations

import numpy as np

from .errors import ParseError


def rle_encode(labels: np.ndarray) -> dict:
    """{"shape": [h, w], "runs": [[value, length], ...]} in row-major order."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"labels must be 2D, got shape {labels.shape}")
    flat = labels.ravel()
    runs: list[list[int]] = []
    if flat.size:
        change = np.nonzero(np.diff(flat))[0]
        starts = np.concatenate([[0], change + 1])
        ends = np.concatenate([change + 1, [flat.size]])
        runs = [[int(flat[s]), int(e - s)] for s, e in zip(starts, ends)]
    return {"shape": [int(labels.shape[0]), int(labels.shape[1])], "runs": runs}


def rle_decode(doc: dict) -> np.ndarray:
    try:
        h, w = (int(v) for v in doc["shape"])
        runs = doc["runs"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad RLE document: {exc}") from exc
    total = sum(int(r[1]) for r in runs)
    if total != h * w:
        raise ParseError(f"RLE runs cover {total} pixels, expected {h * w}")
    flat = np.empty(h * w, dtype=np.int32)
    pos = 0
    for value, length in runs:
        length = int(length)
        if length <= 0:
            raise ParseError("RLE run lengths must be positive")
        flat[pos : pos + length] = int(value)
        pos += length
    return flat.reshape(h, w)
