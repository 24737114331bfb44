"""Synchronous HTTP service over the generation pipeline.

Endpoints: GET /healthz, GET /api/classes, POST /api/layouts/sample,
POST /api/keyframes, POST /api/video. Responses carry a deterministic
request id; validation failures return 400 with a field path, internal
faults return 500 with an opaque id and a logged detail.
"""

from __future__ import annotations

import hashlib
import json
import logging
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import data as D
from .config import PipelineConfig
from .errors import ContractError, ParseError
from .imgio import frame_from_base64, frame_to_base64
from .layouts import Layout, layout_to_json, validate_layout_json
from .pipeline import GenerationRequest, Pipeline

logger = logging.getLogger("clipvid.service")


def _body_request_id(endpoint: str, body: dict) -> str:
    blob = json.dumps({"endpoint": endpoint, "body": body}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _require(body: dict, field: str, kind, path: str):
    if field not in body:
        raise ContractError(f"{path}.{field}: missing required field")
    value = body[field]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ContractError(f"{path}.{field}: expected an integer")
    if kind is list and not isinstance(value, list):
        raise ContractError(f"{path}.{field}: expected a list")
    if kind is str and not isinstance(value, str):
        raise ContractError(f"{path}.{field}: expected a string")
    return value


def _parse_label_sets(body: dict, num_keyframes: int, num_classes: int, path: str = "body"):
    raw = _require(body, "label_sets", list, path)
    if len(raw) != num_keyframes:
        raise ContractError(f"{path}.label_sets: expected {num_keyframes} sets, got {len(raw)}")
    out = []
    for n, labels in enumerate(raw):
        if not isinstance(labels, list):
            raise ContractError(f"{path}.label_sets[{n}]: expected a list")
        parsed = []
        for i, c in enumerate(labels):
            if isinstance(c, bool) or not isinstance(c, int) or not 0 <= c < num_classes:
                raise ContractError(f"{path}.label_sets[{n}][{i}]: expected a class id in 0..{num_classes - 1}")
            parsed.append(c)
        out.append(sorted(parsed))
    return out


def _parse_layout_list(raw, num_classes: int, path: str):
    """Validate a list of layout objects -> {timestep: Layout}."""
    if not isinstance(raw, list):
        raise ContractError(f"{path}: expected a list of layout objects")
    by_step = {}
    for i, obj in enumerate(raw):
        timestep, boxes = validate_layout_json(obj, num_classes, path=f"{path}[{i}]")
        if timestep in by_step:
            raise ContractError(f"{path}[{i}].timestep: duplicate timestep {timestep}")
        by_step[timestep] = Layout(tuple(boxes))
    return by_step


def create_app(config: PipelineConfig, pipeline: Pipeline | None = None, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="clipvid", version="0.1.0")
    pipe = pipeline if pipeline is not None else Pipeline(config)
    pipe.preload(["layout", "keyframe", "interp"])
    n = config.num_keyframes

    @app.exception_handler(ContractError)
    async def contract_error_handler(_req: Request, exc: ContractError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(ParseError)
    async def parse_error_handler(_req: Request, exc: ParseError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def internal_error_handler(_req: Request, exc: Exception):
        fault_id = uuid.uuid4().hex[:12]
        logger.exception("internal fault %s", fault_id)
        return JSONResponse(status_code=500, content={"error": "internal error", "id": fault_id})

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.get("/api/classes")
    async def classes():
        return {
            "classes": [
                {"id": i, "name": name, "color": D.CLASS_COLORS[i].tolist()}
                for i, name in enumerate(D.CLASS_NAMES)
            ],
            "variants": [
                {"id": i, "name": name, "color": D.VARIANT_COLORS[i].tolist()}
                for i, name in enumerate(D.VARIANT_NAMES)
            ],
            "backgrounds": D.BACKGROUND_COLORS.tolist(),
            "palette": D.PALETTE.tolist(),
            "canvas_size": config.canvas_size,
            "patch_size": config.patch_size,
            "num_keyframes": config.num_keyframes,
            "clip_len": config.clip_len,
            "max_objects": config.max_objects,
            "coord_bins": config.coord_bins,
            "keyframe_indices": list(range(0, config.frames_per_sequence, config.clip_len)),
        }

    @app.post("/api/layouts/sample")
    async def sample_layouts(request: Request):
        body = await request.json()
        if not isinstance(body, dict):
            raise ContractError("body: expected a JSON object")
        seed = _require(body, "seed", int, "body")
        if "reference_layout" not in body:
            raise ContractError("body.reference_layout: missing required field")
        _, ref_boxes = validate_layout_json(
            body["reference_layout"], config.num_classes, path="body.reference_layout"
        )
        ref_layout = Layout(tuple(ref_boxes))
        label_sets = _parse_label_sets(body, n, config.num_classes)
        pinned = {}
        if "pinned" in body and body["pinned"]:
            by_step = _parse_layout_list(body["pinned"], config.num_classes, "body.pinned")
            for step, layout in by_step.items():
                if not 1 <= step <= n:
                    raise ContractError(f"body.pinned: timestep {step} outside 1..{n}")
                labels = label_sets[step - 1]
                pin_classes = layout.label_multiset()
                for cls in set(pin_classes):
                    if pin_classes.count(cls) > labels.count(cls):
                        raise ContractError(
                            f"body.pinned[{step}]: pinned class {cls} exceeds the timestep's label set"
                        )
                pinned[step] = layout
        from .nn import DecodeSchedule

        schedule = DecodeSchedule(config.decode_steps, config.decode_temperature, seed)
        layouts = pipe.model("layout").sample(ref_layout, label_sets, schedule, pinned=pinned)
        return {
            "request_id": _body_request_id("layouts/sample", body),
            "layouts": [layout_to_json(l, i + 1) for i, l in enumerate(layouts)],
        }

    def _parse_video_body(body: dict):
        if not isinstance(body, dict):
            raise ContractError("body: expected a JSON object")
        seed = _require(body, "seed", int, "body")
        frame = frame_from_base64(_require(body, "reference_frame", str, "body"), config.canvas_size)
        ref_layout = None
        layouts = None
        keyframes = None
        if "layouts" in body and body["layouts"] is not None:
            by_step = _parse_layout_list(body["layouts"], config.num_classes, "body.layouts")
            expected = set(range(0, n + 1))
            if set(by_step) != expected:
                raise ContractError(
                    f"body.layouts: expected timesteps {sorted(expected)}, got {sorted(by_step)}"
                )
            ref_layout = by_step[0]
            layouts = [by_step[t] for t in range(1, n + 1)]
        if "keyframes" in body and body["keyframes"] is not None:
            raw = body["keyframes"]
            if not isinstance(raw, list) or len(raw) != n:
                raise ContractError(f"body.keyframes: expected {n} base64 PNG frames")
            keyframes = np.stack([frame_from_base64(k, config.canvas_size) for k in raw])
        if layouts is None and keyframes is None:
            raise ContractError("body: provide layouts or keyframes")
        return seed, frame, ref_layout, layouts, keyframes

    @app.post("/api/keyframes")
    async def keyframes(request: Request):
        body = await request.json()
        seed, frame, ref_layout, layouts, explicit = _parse_video_body(body)
        if layouts is None:
            raise ContractError("body.layouts: keyframe generation requires layouts")
        gen_request = GenerationRequest(
            reference_frame=frame, mode="pipeline", seed=seed,
            reference_layout=ref_layout, layouts=layouts, keyframes=explicit,
        )
        result = pipe.generate(gen_request)
        return {
            "request_id": _body_request_id("keyframes", body),
            "keyframes": [frame_to_base64(k) for k in result.keyframes],
            "tokens": {str(i + 1): t.tolist() for i, t in enumerate(result.keyframe_tokens)},
        }

    @app.post("/api/video")
    async def video(request: Request):
        body = await request.json()
        seed, frame, ref_layout, layouts, explicit = _parse_video_body(body)
        gen_request = GenerationRequest(
            reference_frame=frame, mode="pipeline", seed=seed,
            reference_layout=ref_layout, layouts=layouts, keyframes=explicit,
        )
        result = pipe.generate(gen_request)
        return {
            "request_id": _body_request_id("video", body),
            "frames": [frame_to_base64(f) for f in result.video],
            "keyframe_indices": result.keyframe_indices,
        }

    front = Path(frontend_dir) if frontend_dir else None
    if front and front.is_dir():
        app.mount("/", StaticFiles(directory=front, html=True), name="frontend")
    return app
