"""Dataset IO: round trips, splits, batch packing."""

import numpy as np
import pytest

from floorgen.data import (
    load_manifest_samples,
    load_sample,
    pack_batch,
    read_manifest,
    split_dataset,
    synth_to_sample,
    write_manifest,
    write_sample,
    write_synthetic_dataset,
)
from floorgen.errors import ConfigError, NoInteriorError, ParseError, UnknownClassId
from floorgen.palette import default_palette
from floorgen.synth import SynthConfig, generate_synthetic

PAL = default_palette()
CFG = SynthConfig(grid=32, min_rooms=2, max_rooms=3, wall_px=2)


@pytest.fixture()
def small_set(tmp_path):
    manifest_path = write_synthetic_dataset(tmp_path, count=6, seed=100, cfg=CFG, palette=PAL)
    return read_manifest(manifest_path, PAL)


def test_write_load_round_trip_bit_exact(tmp_path):
    sample = generate_synthetic(7, CFG, PAL)
    record = write_sample(sample, PAL, tmp_path)
    loaded = load_sample(record, PAL, tmp_path)
    assert loaded.id == sample.id
    assert np.array_equal(loaded.target, sample.target)
    assert np.array_equal(loaded.boundary.channels, sample.boundary.channels)
    assert loaded.graph == sample.graph


def test_manifest_round_trip(small_set, tmp_path):
    assert len(small_set) == 6
    out = tmp_path / "copy.jsonl"
    write_manifest(small_set.records, out)
    again = read_manifest(out, PAL)
    assert again.records == small_set.records


def test_manifest_missing_file(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text('{"id": "x", "struct_path": "nope.png", "graph_path": "nope.json"}\n')
    with pytest.raises(ParseError, match="missing"):
        read_manifest(p, PAL)


def test_manifest_duplicate_id(tmp_path, small_set):
    recs = list(small_set.records)
    out = tmp_path / "dup.jsonl"
    write_manifest([recs[0], recs[0]], out)
    with pytest.raises(ParseError, match="duplicate"):
        read_manifest(out, PAL)


def test_loader_surfaces_no_interior_with_sample_id(tmp_path):
    from PIL import Image

    Image.fromarray(np.zeros((16, 16), dtype=np.uint8), mode="L").save(tmp_path / "s.png")
    (tmp_path / "g.json").write_text('{"nodes": [{"id": 0, "category": "living"}], "edges": []}')
    from floorgen.data import ManifestRecord

    rec = ManifestRecord("blank-sample", "s.png", "g.json")
    with pytest.raises(NoInteriorError, match="blank-sample"):
        load_sample(rec, PAL, tmp_path)


def test_loader_rejects_unknown_full_color(tmp_path):
    from PIL import Image

    sample = generate_synthetic(3, CFG, PAL)
    record = write_sample(sample, PAL, tmp_path)
    rgb = np.zeros((32, 32, 3), dtype=np.uint8)
    rgb[:] = (1, 2, 3)  # not a palette color
    Image.fromarray(rgb, mode="RGB").save(tmp_path / f"{sample.id}_full.png")
    with pytest.raises(UnknownClassId, match=sample.id):
        load_sample(record, PAL, tmp_path)


def test_split_sizes_and_partition(small_set):
    train, val = split_dataset(small_set, (0.8, 0.2), seed=7)
    assert len(train) == 5 and len(val) == 1
    ids = {r.id for r in train.records} | {r.id for r in val.records}
    assert ids == {r.id for r in small_set.records}
    assert not ({r.id for r in train.records} & {r.id for r in val.records})


def test_split_deterministic(small_set):
    a = split_dataset(small_set, (0.5, 0.5), seed=3)
    b = split_dataset(small_set, (0.5, 0.5), seed=3)
    assert a[0].records == b[0].records and a[1].records == b[1].records


def test_split_partition_property_random():
    rng = np.random.default_rng(0)
    from floorgen.data import DatasetManifest, ManifestRecord

    for trial in range(20):
        n = int(rng.integers(2, 40))
        records = tuple(ManifestRecord(f"s{i}", "a", "b") for i in range(n))
        manifest = DatasetManifest(records, base_dir=".", palette=PAL)
        r = float(rng.uniform(0.05, 0.95))
        train, val = split_dataset(manifest, (r, 1.0 - r), seed=int(rng.integers(1 << 16)))
        assert len(train) + len(val) == n
        assert {x.id for x in train.records}.isdisjoint({x.id for x in val.records})
        assert {x.id for x in train.records} | {x.id for x in val.records} == {x.id for x in records}


def test_split_bad_ratios(small_set):
    with pytest.raises(ConfigError):
        split_dataset(small_set, (0.9, 0.2), seed=0)
    with pytest.raises(ConfigError):
        split_dataset(small_set, (1.0, 0.0), seed=0)


def test_pack_single_native_batch():
    s = synth_to_sample(generate_synthetic(11, CFG, PAL))
    batch = pack_batch([s], (32, 32), PAL)
    assert np.array_equal(batch.boundaries[0], s.boundary.channels)
    assert np.array_equal(batch.targets[0], s.target)
    assert batch.has_target[0]


def test_pack_mixed_sizes():
    a = synth_to_sample(generate_synthetic(1, CFG, PAL))
    b = synth_to_sample(generate_synthetic(2, SynthConfig(grid=48, min_rooms=2, max_rooms=3), PAL))
    batch = pack_batch([a, b], (32, 32), PAL)
    assert batch.boundaries.shape == (2, 3, 32, 32)
    assert batch.targets.shape == (2, 32, 32)


def test_pack_label_values_never_grow():
    s = synth_to_sample(generate_synthetic(9, CFG, PAL))
    batch = pack_batch([s], (16, 16), PAL)
    assert set(np.unique(batch.targets[0])) <= set(np.unique(s.target))


def test_loaded_samples_validate(small_set):
    for s in load_manifest_samples(small_set):
        s.boundary.validate()
        assert s.target is not None
