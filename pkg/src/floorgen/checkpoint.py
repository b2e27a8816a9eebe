"""Versioned binary checkpoint container.

Layout: magic, u16 format version, u64 header length, canonical JSON header,
then the raw tensor payload as little-endian float32. The header records the
model configuration, training seed, RNG state, optimizer moments, and a CRC32
of the payload; headers are serialized canonically so save/load/save is
byte-identical.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path
import numpy as np

from .errors import CorruptCheckpointError, ShapeMismatchError
from .nn.model import ModelConfig, ModelParams, param_spec

MAGIC = b"FGCK"
FORMAT_VERSION = 1


def _tensor_entries(tensors: dict[str, np.ndarray]) -> tuple[list[dict], bytes]:
    entries = []
    chunks = []
    offset = 0
    for name, arr in tensors.items():
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(blob)})
        chunks.append(blob)
        offset += len(blob)
    return entries, b"".join(chunks)


def write_container(
    path: Path,
    tensors: dict[str, np.ndarray],
    meta: dict,
) -> None:
    """Atomic write (temp file + rename)."""
    entries, payload = _tensor_entries(tensors)
    header = dict(meta)
    header["format"] = FORMAT_VERSION
    header["tensors"] = entries
    header["payload_nbytes"] = len(payload)
    header["payload_crc32"] = zlib.crc32(payload)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HQ", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(payload)
    os.replace(tmp, path)


def read_container(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 14 or raw[:4] != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<HQ", raw[4:14])
    if version != FORMAT_VERSION:
        raise CorruptCheckpointError(f"{path}: unknown format version {version}")
    if len(raw) < 14 + hlen:
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[14 : 14 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: bad header: {exc}") from exc
    payload = raw[14 + hlen :]
    if len(payload) != header.get("payload_nbytes"):
        raise CorruptCheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says {header.get('payload_nbytes')}"
        )
    if zlib.crc32(payload) != header.get("payload_crc32"):
        raise CorruptCheckpointError(f"{path}: payload checksum mismatch")
    tensors = {}
    for e in header["tensors"]:
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=e["offset"])
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(np.float32)
    return header, tensors


def split_model_tensors(
    header: dict, tensors: dict[str, np.ndarray]
) -> tuple[ModelParams, dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Separate parameter tensors from optimizer moments and shape-check them."""
    cfg = ModelConfig.from_dict(header["model_config"])
    params = {}
    m = {}
    v = {}
    for name, arr in tensors.items():
        if name.startswith("adam_m."):
            m[name[len("adam_m.") :]] = arr
        elif name.startswith("adam_v."):
            v[name[len("adam_v.") :]] = arr
        else:
            params[name] = arr
    expected = {name: shape for name, shape, _ in param_spec(cfg)}
    got = {name: tuple(t.shape) for name, t in params.items()}
    if got != expected:
        missing = sorted(set(expected) - set(got))
        extra = sorted(set(got) - set(expected))
        wrong = sorted(k for k in set(got) & set(expected) if got[k] != expected[k])
        raise ShapeMismatchError(
            f"checkpoint does not match model config (missing={missing}, extra={extra}, wrong={wrong})"
        )
    ordered = {name: params[name] for name, _, _ in param_spec(cfg)}
    return ModelParams(cfg, ordered, header.get("model_version", 1)), m, v


def load_params(path: Path) -> ModelParams:
    header, tensors = read_container(path)
    params, _, _ = split_model_tensors(header, tensors)
    return params


def model_digest(path: Path) -> str:
    """Short content digest used as the served model version."""
    import hashlib

    return hashlib.sha1(Path(path).read_bytes()).hexdigest()[:12]
