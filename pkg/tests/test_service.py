import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

import clipvid.data as D
from clipvid.imgio import frame_from_base64, frame_to_base64
from clipvid.layouts import layout_to_json
from clipvid.pipeline import Pipeline, request_from_record
from clipvid.service import create_app


@pytest.fixture(scope="module")
def client(tiny_config):
    app = create_app(tiny_config, pipeline=Pipeline(tiny_config))
    return TestClient(app, raise_server_exceptions=False)


@pytest.fixture(scope="module")
def sample_record(small_dataset):
    return D.load_split(small_dataset, "test")[0]


def layouts_payload(record):
    from clipvid.layouts import BoundingBox, Layout

    out = []
    for n, kb in enumerate(record.layouts):
        layout = Layout(tuple(BoundingBox(b.class_id, b.x, b.y, b.w, b.h, object_id=b.object_id) for b in kb))
        out.append(layout_to_json(layout, n))
    return out


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_classes_table(client):
    r = client.get("/api/classes")
    assert r.status_code == 200
    body = r.json()
    assert len(body["classes"]) == 12
    assert len(body["variants"]) == 6
    assert len(body["palette"]) == 24
    assert body["canvas_size"] == 32
    assert body["keyframe_indices"] == [0, 8, 16, 24, 32]


def test_sample_layouts_deterministic(client, sample_record):
    payload = {
        "reference_layout": layouts_payload(sample_record)[0],
        "label_sets": sample_record.label_sets[1:],
        "seed": 7,
    }
    a = client.post("/api/layouts/sample", json=payload)
    b = client.post("/api/layouts/sample", json=payload)
    assert a.status_code == 200
    assert a.content == b.content
    body = a.json()
    assert len(body["layouts"]) == 4
    assert "request_id" in body
    for n, (layout, labels) in enumerate(zip(body["layouts"], sample_record.label_sets[1:]), start=1):
        assert layout["timestep"] == n
        assert sorted(b_["class"] for b_ in layout["boxes"]) == labels


def test_sample_layouts_pinned_box_unchanged(client, sample_record):
    labels = sample_record.label_sets[1:]
    pin = {"timestep": 1, "boxes": [{"class": labels[0][0], "x": 0.3, "y": 0.4, "w": 0.2, "h": 0.2}]}
    payload = {
        "reference_layout": layouts_payload(sample_record)[0],
        "label_sets": labels,
        "seed": 3,
        "pinned": [pin],
    }
    r = client.post("/api/layouts/sample", json=payload)
    assert r.status_code == 200
    boxes = r.json()["layouts"][0]["boxes"]
    assert {"class": labels[0][0], "x": 0.3, "y": 0.4, "w": 0.2, "h": 0.2} in [
        {k: b[k] for k in ("class", "x", "y", "w", "h")} for b in boxes
    ]


def test_validation_errors_carry_field_paths(client, sample_record):
    r = client.post("/api/layouts/sample", json={"label_sets": [[1]] * 4, "seed": 1})
    assert r.status_code == 400
    assert "reference_layout" in r.json()["error"]

    bad_box = layouts_payload(sample_record)[0]
    bad_box = {**bad_box, "boxes": [{**bad_box["boxes"][0], "x": 4.0}] + bad_box["boxes"][1:]}
    r = client.post(
        "/api/layouts/sample",
        json={"reference_layout": bad_box, "label_sets": sample_record.label_sets[1:], "seed": 1},
    )
    assert r.status_code == 400
    assert "boxes[0]" in r.json()["error"]

    r = client.post("/api/video", json={"reference_frame": "not base64!!", "layouts": [], "seed": 0})
    assert r.status_code == 400
    assert "reference_frame" in r.json()["error"]


def test_keyframes_endpoint(client, sample_record):
    payload = {
        "reference_frame": frame_to_base64(sample_record.frames[0]),
        "layouts": layouts_payload(sample_record),
        "seed": 5,
    }
    r = client.post("/api/keyframes", json=payload)
    assert r.status_code == 200
    body = r.json()
    assert len(body["keyframes"]) == 4
    assert set(body["tokens"]) == {"1", "2", "3", "4"}
    frame = frame_from_base64(body["keyframes"][0])
    assert frame.shape == (32, 32, 3)


def test_video_endpoint_with_layouts(client, sample_record):
    payload = {
        "reference_frame": frame_to_base64(sample_record.frames[0]),
        "layouts": layouts_payload(sample_record),
        "seed": 5,
    }
    r = client.post("/api/video", json=payload)
    assert r.status_code == 200
    body = r.json()
    assert len(body["frames"]) == 33
    assert body["keyframe_indices"] == [0, 8, 16, 24, 32]
    first = frame_from_base64(body["frames"][0])
    assert np.array_equal(first, sample_record.frames[0])  # lossless tokenizer round trip


def test_video_endpoint_with_keyframes(client, sample_record):
    payload = {
        "reference_frame": frame_to_base64(sample_record.frames[0]),
        "keyframes": [frame_to_base64(f) for f in sample_record.keyframes()[1:]],
        "seed": 2,
    }
    r = client.post("/api/video", json=payload)
    assert r.status_code == 200
    frames = [frame_from_base64(f) for f in r.json()["frames"]]
    for n, idx in enumerate([8, 16, 24, 32]):
        assert np.array_equal(frames[idx], sample_record.keyframes()[n + 1])


def test_video_requires_guidance(client, sample_record):
    r = client.post(
        "/api/video",
        json={"reference_frame": frame_to_base64(sample_record.frames[0]), "seed": 0},
    )
    assert r.status_code == 400
    assert "layouts or keyframes" in r.json()["error"]


def test_internal_errors_are_opaque(client, sample_record, monkeypatch):
    import clipvid.service as service

    def boom(*a, **k):
        raise RuntimeError("secret detail")

    monkeypatch.setattr(service, "frame_from_base64", boom)
    payload = {
        "reference_frame": frame_to_base64(sample_record.frames[0]),
        "layouts": layouts_payload(sample_record),
        "seed": 5,
    }
    r = client.post("/api/video", json=payload)
    assert r.status_code == 500
    body = r.json()
    assert body["error"] == "internal error"
    assert "secret" not in str(body)
    assert len(body["id"]) == 12
