"""HTTP service: endpoints, validation mapping, determinism."""

import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient

from floorgen.nn.model import ModelConfig, init_model
from floorgen.palette import default_palette
from floorgen.rle import rle_decode
from floorgen.service import create_app

PAL = default_palette()
MODEL_CFG = ModelConfig(classes=8, stages=3, base_width=4, gcn_hidden=8, graph_channels=4)


@pytest.fixture(scope="module")
def client():
    app = create_app(params=init_model(MODEL_CFG, 0), palette=PAL)
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def bare_client():
    with TestClient(create_app(palette=PAL)) as c:
        yield c


def square_request(**options):
    return {
        "boundary": {
            "polygons": [[[0.1, 0.1], [0.9, 0.1], [0.9, 0.9], [0.1, 0.9]]],
            "wall_px": 2,
        },
        "graph": {
            "nodes": [
                {"id": 0, "category": "living", "centroid": [0.3, 0.5]},
                {"id": 1, "category": "bedroom", "centroid": [0.7, 0.5]},
            ],
            "edges": [[0, 1]],
        },
        "options": {"resolution": 64, **options},
    }


def test_health_without_model(bare_client):
    r = bare_client.get("/v1/health")
    assert r.status_code == 503
    assert r.json()["code"] == "no_model"


def test_generate_without_model(bare_client):
    r = bare_client.post("/v1/generate", json=square_request())
    assert r.status_code == 503


def test_health_with_model(client):
    r = client.get("/v1/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_classes_round_trip(client):
    r = client.get("/v1/classes")
    assert r.status_code == 200
    from floorgen.palette import ClassPalette

    parsed = ClassPalette.from_dict(r.json()["palette"])
    assert parsed == PAL
    assert r.json()["version"] == PAL.version()


def test_openapi_spec_served(client):
    r = client.get("/v1/spec")
    assert r.status_code == 200
    doc = r.json()
    assert "/v1/generate" in doc["paths"]


def test_generate_square_boundary(client):
    r = client.post("/v1/generate", json=square_request())
    assert r.status_code == 200, r.text
    body = r.json()
    labels = rle_decode(body["labels"]["rle"])
    assert labels.shape == (64, 64)
    assert body["labels"]["palette_version"] == PAL.version()
    assert body["model_version"].startswith("mem-")
    assert body["timing_ms"] > 0
    assert body["png"] is None


def test_generate_deterministic(client):
    a = client.post("/v1/generate", json=square_request()).json()["labels"]
    b = client.post("/v1/generate", json=square_request()).json()["labels"]
    assert a == b


def test_generate_with_png(client):
    from PIL import Image

    r = client.post("/v1/generate", json=square_request(return_png=True))
    body = r.json()
    blob = base64.b64decode(body["png"])
    with Image.open(io.BytesIO(blob)) as im:
        assert im.size == (64, 64)
    from floorgen.geometry import labels_from_render

    rendered = np.asarray(Image.open(io.BytesIO(blob)).convert("RGB"))
    assert np.array_equal(labels_from_render(rendered, PAL), rle_decode(body["labels"]["rle"]))


def test_open_boundary_polygon_422(client):
    req = square_request()
    # a line-ish outline with a huge gap: three collinear-ish points enclosing nothing
    req["boundary"]["polygons"] = [[[0.1, 0.1], [0.9, 0.1], [0.9, 0.11]]]
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 422
    assert r.json()["code"] == "no_interior"


def test_invalid_graph_maps_to_422_with_rule_strings(client):
    req = square_request()
    req["graph"]["edges"] = [[0, 0]]
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 422
    body = r.json()
    assert body["code"] == "invalid_graph"
    assert any(v.startswith("self-loop") for v in body["violations"])


def test_non_room_category_rejected_like_validate_graph(client):
    req = square_request()
    req["graph"]["nodes"][0]["category"] = "structure"
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 422
    assert any(v.startswith("non-room category") for v in r.json()["violations"])


def test_schema_violation_400_both_boundary_forms(client):
    req = square_request()
    req["boundary"]["image_b64"] = "aGk="
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 400
    body = r.json()
    assert body["code"] == "schema_violation"
    assert body["errors"]


def test_schema_violation_400_missing_graph(client):
    req = square_request()
    del req["graph"]
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 400


def test_resolution_range_and_divisibility(client):
    req = square_request()
    req["options"]["resolution"] = 2048
    assert client.post("/v1/generate", json=req).status_code == 400
    req["options"]["resolution"] = 36  # in range but not divisible by 8
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 400
    assert "divisible" in r.json()["errors"][0]["msg"]


def test_unknown_category_name_is_schema_error(client):
    req = square_request()
    req["graph"]["nodes"][0]["category"] = "ballroom"
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 400
    assert r.json()["code"] == "schema_violation"


def test_image_b64_boundary_form(client):
    from PIL import Image

    from floorgen.synth import SynthConfig, generate_synthetic

    s = generate_synthetic(9, SynthConfig(grid=64, min_rooms=2, max_rooms=3), PAL)
    buf = io.BytesIO()
    Image.fromarray((s.raw.grid * 255).astype(np.uint8), mode="L").save(buf, format="PNG")
    req = {
        "boundary": {"image_b64": base64.b64encode(buf.getvalue()).decode("ascii")},
        "graph": {
            "nodes": [{"id": 0, "category": "living"}, {"id": 1, "category": "kitchen"}],
            "edges": [[0, 1]],
        },
        "options": {"resolution": 64},
    }
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 200, r.text
    assert rle_decode(r.json()["labels"]["rle"]).shape == (64, 64)


def test_bad_base64_schema_error(client):
    req = square_request()
    del req["boundary"]["polygons"]
    req["boundary"]["image_b64"] = "!!!notb64!!!"
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 400


def test_concurrent_identical_requests_identical_labels(client):
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=4) as pool:
        bodies = list(pool.map(lambda _: client.post("/v1/generate", json=square_request()).json(), range(4)))
    assert all(b["labels"] == bodies[0]["labels"] for b in bodies)


def test_tiny_base64_image_is_schema_error(client):
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(buf, format="PNG")
    req = square_request()
    del req["boundary"]["polygons"]
    req["boundary"]["image_b64"] = base64.b64encode(buf.getvalue()).decode("ascii")
    r = client.post("/v1/generate", json=req)
    assert r.status_code == 400
    assert r.json()["code"] == "schema_violation"
