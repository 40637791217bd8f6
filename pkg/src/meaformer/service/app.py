"""HTTP measurement service.

Stateless JSON API over a pair of checkpoints loaded once at startup:

    POST /measure   image + click + spacing -> measurement payload
    POST /assess    baseline/followup long diameters -> response class
    GET  /health    status + checkpoint digests
    GET  /demo      bundled demo phantom listing (when started with a dataset)
    GET  /demo/{i}  one demo phantom, image as base64 float32

Image planes travel as base64-encoded little-endian float32, row-major, to
avoid lossy re-encoding.
"""

import base64
import binascii
import time

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from ..data import load_dataset
from ..errors import ContractViolation
from ..model import checkpoint_digest, load_checkpoint
from ..pipeline import (classify_response, contour_of, measure,
                        percent_change)


class ImagePayload(BaseModel):
    b64: str | None = None
    width: int | None = None
    height: int | None = None
    dataset_index: int | None = None


class MeasureRequest(BaseModel):
    image: ImagePayload
    click: tuple[float, float]
    spacing_mm_per_px: float = Field(default=0.8, gt=0)


class AssessRequest(BaseModel):
    baseline_long_mm: float
    followup_long_mm: float


def _decode_image(payload: ImagePayload, demo):
    if payload.dataset_index is not None:
        if demo is None:
            raise HTTPException(400, "service started without demo data")
        if not (0 <= payload.dataset_index < len(demo)):
            raise HTTPException(400, f"demo index {payload.dataset_index} out of range")
        return demo[payload.dataset_index].image
    if not payload.b64 or not payload.width or not payload.height:
        raise HTTPException(400, "image needs b64+width+height or dataset_index")
    try:
        raw = base64.b64decode(payload.b64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(400, "image b64 payload is not valid base64")
    expect = 4 * payload.width * payload.height
    if len(raw) != expect:
        raise HTTPException(400, f"image payload holds {len(raw)} bytes, expected {expect}")
    return np.frombuffer(raw, dtype="<f4").reshape(payload.height, payload.width)


def _measurement_json(m):
    ep = m.endpoints
    return {
        "long": {"a": list(ep.long_a), "b": list(ep.long_b),
                 "px": m.long_px, "mm": m.long_mm},
        "short": {"a": list(ep.short_a), "b": list(ep.short_b),
                  "px": m.short_px, "mm": m.short_mm},
        "source": m.source,
        "flags": m.flags,
    }


def encode_plane(image) -> dict:
    arr = np.ascontiguousarray(image, dtype="<f4")
    return {"b64": base64.b64encode(arr.tobytes()).decode(),
            "width": arr.shape[1], "height": arr.shape[0]}


def create_app(step1_path, step2_path, demo_data_path=None) -> FastAPI:
    step1, _ = load_checkpoint(step1_path)
    step2, _ = load_checkpoint(step2_path)
    digests = {"step1": checkpoint_digest(step1_path),
               "step2": checkpoint_digest(step2_path)}
    demo = load_dataset(demo_data_path) if demo_data_path else None

    app = FastAPI(title="lesion measurement service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.get("/health")
    def health():
        return {"status": "ok", "checkpoints": digests,
                "demo_count": len(demo) if demo else 0}

    @app.get("/demo")
    def demo_list():
        if demo is None:
            raise HTTPException(404, "no demo data loaded")
        return {"count": len(demo),
                "items": [{"index": i,
                           "spacing_mm_per_px": p.spacing_mm_per_px,
                           "suggested_click": list(p.box.center)}
                          for i, p in enumerate(demo)]}

    @app.get("/demo/{index}")
    def demo_item(index: int):
        if demo is None:
            raise HTTPException(404, "no demo data loaded")
        if not (0 <= index < len(demo)):
            raise HTTPException(404, f"demo index {index} out of range")
        p = demo[index]
        return {"index": index, "image": encode_plane(p.image),
                "spacing_mm_per_px": p.spacing_mm_per_px,
                "suggested_click": list(p.box.center)}

    @app.post("/measure")
    def measure_endpoint(req: MeasureRequest):
        t0 = time.perf_counter()
        img = _decode_image(req.image, demo)
        h, w = img.shape
        x, y = req.click
        if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
            raise HTTPException(400, f"click {req.click} outside a {w}x{h} image")
        try:
            rep = measure(img, req.click, req.spacing_mm_per_px, step1, step2)
        except ContractViolation as exc:
            raise HTTPException(400, str(exc))
        if rep.failed:
            raise HTTPException(422, f"measurement failed: {rep.flags}")
        return {
            "box": {"x0": rep.box.x0, "y0": rep.box.y0,
                    "x1": rep.box.x1, "y1": rep.box.y1},
            "loi": {"x0": rep.loi.x0, "y0": rep.loi.y0,
                    "x1": rep.loi.x1, "y1": rep.loi.y1},
            "contour": [list(p) for p in contour_of(rep)],
            "sources": {name: _measurement_json(m)
                        for name, m in rep.measurements.items()},
            "fused": _measurement_json(rep.fused),
            "flags": rep.flags,
            "latency_ms": 1000.0 * (time.perf_counter() - t0),
        }

    @app.post("/assess")
    def assess_endpoint(req: AssessRequest):
        try:
            cls = classify_response(req.baseline_long_mm, req.followup_long_mm)
            change = percent_change(req.baseline_long_mm, req.followup_long_mm)
        except ContractViolation as exc:
            raise HTTPException(400, str(exc))
        return {"response_class": cls.value,
                "percent_change": change,
                "baseline_long_mm": req.baseline_long_mm,
                "followup_long_mm": req.followup_long_mm}

    return app
