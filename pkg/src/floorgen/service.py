"""Inference HTTP API: boundary + layout graph in, generated plan out.

The app holds one immutable parameter set loaded at startup; request
handlers are read-only, so identical requests produce identical labels. A
semaphore bounds how many forwards run at once.
"""

from __future__ import annotations

import asyncio
import base64
import binascii
import io
import json
import time
from pathlib import Path
from typing import Any, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator
from starlette.concurrency import run_in_threadpool

from .checkpoint import load_params, model_digest
from .data import Sample
from .errors import AllWallError, DimensionMismatch, InvalidPolygon, NoInteriorError, ParseError
from .geometry import (
    BoundaryImage,
    Polygon,
    RawBoundary,
    boundary_image_from_raw,
    nearest_resize2d,
    render_plan,
)
from .graphs import graph_from_json, validate_graph
from .nn.model import ModelParams
from .palette import ClassPalette, default_palette
from .rle import rle_encode

MIN_RESOLUTION = 32
MAX_RESOLUTION = 1024


class BoundarySpec(BaseModel):
    polygons: Optional[list[list[tuple[float, float]]]] = None
    wall_px: int = Field(default=2, ge=1, le=16)
    image_b64: Optional[str] = None

    @model_validator(mode="after")
    def exactly_one_form(self):
        if (self.polygons is None) == (self.image_b64 is None):
            raise ValueError("provide exactly one of 'polygons' or 'image_b64'")
        if self.polygons is not None and len(self.polygons) == 0:
            raise ValueError("'polygons' must not be empty")
        return self


class GenerateOptions(BaseModel):
    return_png: bool = False
    resolution: int = Field(default=128, ge=MIN_RESOLUTION, le=MAX_RESOLUTION)


class GenerateRequest(BaseModel):
    boundary: BoundarySpec
    graph: dict[str, Any]
    options: GenerateOptions = Field(default_factory=GenerateOptions)


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message, **extra})


def rasterize_boundary_walls(
    polygons: list[list[tuple[float, float]]], wall_px: int, resolution: int
) -> RawBoundary:
    """Stroke polygon outlines (normalized coords) onto a wall raster."""
    grid = np.zeros((resolution, resolution), dtype=np.float32)
    ys, xs = np.mgrid[0:resolution, 0:resolution]
    px = xs + 0.5
    py = ys + 0.5
    radius = wall_px / 2.0
    for verts in polygons:
        Polygon(tuple((float(x), float(y)) for x, y in verts))  # validity check
        pts = [(x * resolution, y * resolution) for x, y in verts]
        n = len(pts)
        for i in range(n):
            x0, y0 = pts[i]
            x1, y1 = pts[(i + 1) % n]
            ex, ey = x1 - x0, y1 - y0
            denom = ex * ex + ey * ey
            if denom == 0:
                continue
            t = np.clip(((px - x0) * ex + (py - y0) * ey) / denom, 0.0, 1.0)
            d2 = (px - (x0 + t * ex)) ** 2 + (py - (y0 + t * ey)) ** 2
            grid[d2 <= radius * radius] = 1.0
    return RawBoundary(grid)


def _boundary_from_request(spec: BoundarySpec, resolution: int) -> BoundaryImage:
    if spec.polygons is not None:
        raw = rasterize_boundary_walls(spec.polygons, spec.wall_px, resolution)
    else:
        try:
            blob = base64.b64decode(spec.image_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ParseError(f"boundary.image_b64 is not valid base64: {exc}") from exc
        from PIL import Image

        try:
            with Image.open(io.BytesIO(blob)) as im:
                arr = np.asarray(im.convert("L"), dtype=np.float32)
        except Exception as exc:
            raise ParseError(f"boundary.image_b64 is not a decodable image: {exc}") from exc
        raw = RawBoundary.from_image(arr)
        if raw.grid.shape != (resolution, resolution):
            raw = RawBoundary(nearest_resize2d(raw.grid, resolution, resolution))
    return boundary_image_from_raw(raw)


def create_app(
    checkpoint_path: Optional[Path] = None,
    palette: Optional[ClassPalette] = None,
    params: Optional[ModelParams] = None,
    max_concurrent: int = 2,
    cors_origins: tuple[str, ...] = ("*",),
) -> FastAPI:
    app = FastAPI(title="floorgen inference service", version="1.0.0", openapi_url="/v1/spec")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    pal = palette or default_palette()
    if params is None and checkpoint_path is not None:
        params = load_params(checkpoint_path)
        version = model_digest(checkpoint_path)
    elif params is not None:
        version = f"mem-{params.version}"
    else:
        version = "none"
    app.state.params = params
    app.state.palette = pal
    app.state.model_version = version
    app.state.semaphore = asyncio.Semaphore(max_concurrent)

    @app.exception_handler(RequestValidationError)
    async def schema_violation(request: Request, exc: RequestValidationError):
        errors = [
            {"loc": [str(p) for p in e["loc"]], "msg": e["msg"]} for e in exc.errors()
        ]
        return _error(400, "schema_violation", "request does not match the schema", errors=errors)

    @app.get("/v1/health")
    async def health():
        if app.state.params is None:
            return _error(503, "no_model", "model is not loaded")
        return {"status": "ok", "model_version": app.state.model_version}

    @app.get("/v1/classes")
    async def classes():
        return {"palette": app.state.palette.to_dict(), "version": app.state.palette.version()}

    @app.post("/v1/generate")
    async def generate(req: GenerateRequest):
        if app.state.params is None:
            return _error(503, "no_model", "model is not loaded")
        model: ModelParams = app.state.params
        t0 = time.perf_counter()
        resolution = req.options.resolution
        div = 1 << model.config.stages
        if resolution % div:
            return _error(
                400,
                "schema_violation",
                "bad resolution",
                errors=[
                    {
                        "loc": ["body", "options", "resolution"],
                        "msg": f"must be divisible by {div} for the loaded model",
                    }
                ],
            )
        try:
            graph = graph_from_json(json.dumps(req.graph), app.state.palette)
        except ParseError as exc:
            return _error(
                400,
                "schema_violation",
                "bad graph",
                errors=[{"loc": ["body", "graph"], "msg": str(exc)}],
            )
        violations = validate_graph(graph, app.state.palette)
        if violations:
            return _error(
                422, "invalid_graph", "layout graph is invalid", violations=[str(v) for v in violations]
            )
        try:
            boundary = _boundary_from_request(req.boundary, resolution)
        except (ParseError, DimensionMismatch) as exc:
            return _error(
                400,
                "schema_violation",
                "bad boundary",
                errors=[{"loc": ["body", "boundary"], "msg": str(exc)}],
            )
        except InvalidPolygon as exc:
            return _error(
                400,
                "schema_violation",
                "bad boundary polygon",
                errors=[{"loc": ["body", "boundary", "polygons"], "msg": str(exc)}],
            )
        except (NoInteriorError, AllWallError) as exc:
            return _error(422, "no_interior", str(exc))

        sample = Sample("request", boundary, graph)

        def run_inference() -> np.ndarray:
            from .evaluation import make_predictor

            return make_predictor(model, app.state.palette)(sample)

        async with app.state.semaphore:
            labels = await run_in_threadpool(run_inference)

        png_b64 = None
        if req.options.return_png:
            from PIL import Image

            buf = io.BytesIO()
            Image.fromarray(render_plan(labels, app.state.palette)).save(buf, format="PNG")
            png_b64 = base64.b64encode(buf.getvalue()).decode("ascii")
        return {
            "labels": {"rle": rle_encode(labels), "palette_version": app.state.palette.version()},
            "png": png_b64,
            "timing_ms": (time.perf_counter() - t0) * 1000.0,
            "model_version": app.state.model_version,
        }

    return app
