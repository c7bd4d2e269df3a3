"""HTTP facade for interactive relighting.

Catalogs of decomposed scenes (*.shc) and lights (*.hdr/*.pfm/*.txt) load
once at startup and stay immutable; uploads append to the environment
store under generated ids. Every relight request is a pure function of its
body, so identical requests return identical PNG bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import formats, sh
from .envlight import LightCoeffs, load_hdr, normalize_env, project_env, reference_radiance, rotate_env
from .relight import DecomposedScene, load_decomposed, residual_image, shade, tonemap

MAX_UPLOAD_BYTES = 32 * 1024 * 1024
NORMALIZE_TARGET = 0.8


@dataclass
class EnvEntry:
    name: str
    light: LightCoeffs
    reference: float


@dataclass
class ServiceState:
    scenes: dict[str, DecomposedScene] = field(default_factory=dict)
    scene_names: dict[str, str] = field(default_factory=dict)
    envs: dict[str, EnvEntry] = field(default_factory=dict)
    upload_lock: Lock = field(default_factory=Lock)
    upload_count: int = 0


def _load_assets(state: ServiceState, assets: Path) -> None:
    for p in sorted(assets.glob("*.shc")):
        state.scenes[p.stem] = load_decomposed(p)
        state.scene_names[p.stem] = p.stem
    for p in sorted(assets.glob("*")):
        if p.suffix.lower() not in (".hdr", ".pfm", ".txt"):
            continue
        try:
            if p.suffix.lower() == ".txt":
                light = LightCoeffs.from_text(p.read_text())
            else:
                from .envlight import load_env

                light = project_env(load_env(p), 4)
            light = normalize_env(light, NORMALIZE_TARGET)
        except Exception:
            continue  # not a light file; skip
        state.envs[p.stem] = EnvEntry(p.stem, light, reference_radiance(light))


class Rotation(BaseModel):
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0


class TermToggles(BaseModel):
    albedo: bool = True
    shading: bool = True
    residual: bool = True


class RelightRequest(BaseModel):
    scene_id: str
    env_id: str
    rotation: Rotation = Field(default_factory=Rotation)
    exposure: float = 0.0
    terms: TermToggles = Field(default_factory=TermToggles)
    residual_scale: float = 10.0


def create_app(assets: Path | None = None) -> FastAPI:
    app = FastAPI(title="prtlight relighting service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    state = ServiceState()
    app.state.engine = state
    if assets is not None:
        _load_assets(state, Path(assets))

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "scenes": len(state.scenes), "envs": len(state.envs)}

    @app.get("/api/scenes")
    def list_scenes():
        out = []
        for sid in sorted(state.scenes):
            ds = state.scenes[sid]
            h, w = ds.shape
            out.append({
                "id": sid, "name": state.scene_names.get(sid, sid),
                "width": w, "height": h, "degree": ds.degree,
            })
        return out

    @app.get("/api/envs")
    def list_envs():
        return [
            {"id": eid, "name": state.envs[eid].name,
             "reference_radiance": state.envs[eid].reference}
            for eid in sorted(state.envs)
        ]

    @app.post("/api/envs")
    async def upload_env(file: UploadFile, request: Request):
        length = request.headers.get("content-length")
        if length is not None and int(length) > MAX_UPLOAD_BYTES:
            raise HTTPException(413, "upload too large")
        data = await file.read()
        if len(data) > MAX_UPLOAD_BYTES:
            raise HTTPException(413, "upload too large")
        try:
            light = normalize_env(project_env(load_hdr(data), 4), NORMALIZE_TARGET)
        except Exception as exc:
            raise HTTPException(400, f"could not decode environment: {exc}")
        with state.upload_lock:
            state.upload_count += 1
            eid = f"upload-{state.upload_count:04d}"
            name = file.filename or eid
            state.envs[eid] = EnvEntry(name, light, reference_radiance(light))
        return {"id": eid}

    def _get_scene(sid: str) -> DecomposedScene:
        if sid not in state.scenes:
            raise HTTPException(404, f"unknown scene {sid!r}")
        return state.scenes[sid]

    def _get_env(eid: str) -> EnvEntry:
        if eid not in state.envs:
            raise HTTPException(404, f"unknown environment {eid!r}")
        return state.envs[eid]

    def _rotation_matrix(rot: Rotation) -> np.ndarray:
        vals = (rot.yaw, rot.pitch, rot.roll)
        if not all(math.isfinite(v) for v in vals):
            raise HTTPException(422, "rotation angles must be finite")
        return sh.euler_rotation(*vals)

    @app.post("/api/relight")
    def relight_endpoint(req: RelightRequest):
        ds = _get_scene(req.scene_id)
        entry = _get_env(req.env_id)
        if not math.isfinite(req.exposure) or abs(req.exposure) > 16:
            raise HTTPException(422, "exposure must be finite and within +-16 stops")
        if not (math.isfinite(req.residual_scale) and req.residual_scale > 0):
            raise HTTPException(422, "residual_scale must be positive")
        light = rotate_env(entry.light, _rotation_matrix(req.rotation))

        t = req.terms
        if t.shading and t.albedo:
            img = ds.albedo * shade(ds.transport, light)
            if t.residual:
                img = img + residual_image(ds.residual, light)
            img = img * ds.mask[..., None]
            display = tonemap(img, req.exposure)
        elif t.shading:
            display = tonemap(shade(ds.transport, light) * ds.mask[..., None], req.exposure)
        elif t.albedo:
            display = tonemap(ds.albedo * ds.mask[..., None], req.exposure)
        elif t.residual:
            img = np.abs(residual_image(ds.residual, light)) * req.residual_scale
            display = tonemap(img * ds.mask[..., None], req.exposure)
        else:
            display = np.zeros(ds.shape + (3,))

        rgba = np.empty(ds.shape + (4,), dtype=np.uint8)
        rgba[..., :3] = np.round(display * 255.0).astype(np.uint8)
        rgba[..., 3] = np.round(np.clip(ds.mask, 0.0, 1.0) * 255.0).astype(np.uint8)
        return Response(content=formats.encode_png(rgba), media_type="image/png")

    @app.get("/api/coeffs")
    def coeffs(env_id: str, yaw: float = 0.0, pitch: float = 0.0, roll: float = 0.0):
        entry = _get_env(env_id)
        rot = _rotation_matrix(Rotation(yaw=yaw, pitch=pitch, roll=roll))
        light = rotate_env(entry.light, rot)
        return {"env_id": env_id, "degree": light.degree,
                "coeffs": light.coeffs.tolist()}

    return app
