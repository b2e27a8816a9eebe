"""Golden fixtures shared with the browser client stay in lockstep."""

import json
from pathlib import Path

import numpy as np

from floorgen.graphs import VALIDATION_RULES
from floorgen.rle import rle_decode, rle_encode

SHARED = Path(__file__).resolve().parent.parent / "shared"


def test_validation_rules_match_fixture():
    doc = json.loads((SHARED / "validation_rules.json").read_text(encoding="utf-8"))
    assert doc["rules"] == list(VALIDATION_RULES)


def test_rle_vectors_match_encoder():
    doc = json.loads((SHARED / "rle_vectors.json").read_text(encoding="utf-8"))
    assert doc["vectors"], "fixture must not be empty"
    for vec in doc["vectors"]:
        h, w = vec["rle"]["shape"]
        labels = np.array(vec["labels"], dtype=np.int32).reshape(h, w)
        assert rle_encode(labels) == vec["rle"], vec["name"]
        assert np.array_equal(rle_decode(vec["rle"]), labels), vec["name"]


def test_rle_round_trip_random():
    rng = np.random.default_rng(1)
    for _ in range(20):
        h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        grid = rng.integers(0, 6, size=(h, w)).astype(np.int32)
        enc = rle_encode(grid)
        assert sum(r[1] for r in enc["runs"]) == h * w
        assert np.array_equal(rle_decode(enc), grid)
