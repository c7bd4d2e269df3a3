"""Scene configuration: a YAML manifest describing geometry, camera,
environment, and render settings. The schema is documented in the README;
every referenced file must exist when the config loads."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .brdf import Material
from .geometry import Camera, TriScene, build_bvh
from .pathtrace import PtConfig
from .scenes import capsule, capsule_person, ground_plane, load_obj, merge_scenes, uv_sphere
from .transport import TransportMode

ALLOWED_DEGREES = (2, 4)


def _material(node: dict | None) -> Material:
    node = node or {}
    return Material(
        albedo=tuple(node.get("albedo", (1.0, 1.0, 1.0))),
        roughness=float(node.get("roughness", 0.5)),
        metallic=float(node.get("metallic", 0.0)),
        transparency=float(node.get("transparency", 0.0)),
    )


def _load_albedo_map(path: Path) -> np.ndarray:
    from . import formats

    raw = path.read_bytes()
    if path.suffix.lower() == ".pfm":
        img = formats.read_pfm(raw)
        return img if img.ndim == 3 else np.repeat(img[..., None], 3, axis=-1)
    img = formats.decode_png(raw)
    # display PNGs are sRGB-ish; bring them to linear
    return (img[..., :3].astype(np.float64) / 255.0) ** 2.2


@dataclass
class SceneConfig:
    path: Path
    raw: dict
    seed: int
    degree: int
    environment: Path | None
    transport_mode: TransportMode
    transport_samples: int
    pt: PtConfig

    @classmethod
    def load(cls, path) -> "SceneConfig":
        path = Path(path)
        raw = yaml.safe_load(path.read_text())
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a mapping")
        degree = int(raw.get("degree", 4))
        if degree not in ALLOWED_DEGREES:
            raise ValueError(f"{path}: degree must be one of {ALLOWED_DEGREES}")
        env = raw.get("environment")
        env_path = None
        if env is not None:
            env_path = (path.parent / env).resolve()
            if not env_path.exists():
                raise FileNotFoundError(f"{path}: environment {env_path} does not exist")
        for obj in raw.get("objects", []):
            if obj.get("type") == "obj":
                mesh = (path.parent / obj["path"]).resolve()
                if not mesh.exists():
                    raise FileNotFoundError(f"{path}: mesh {mesh} does not exist")
            mat = obj.get("material") or {}
            if "albedo_map" in mat:
                tex = (path.parent / mat["albedo_map"]).resolve()
                if not tex.exists():
                    raise FileNotFoundError(f"{path}: texture {tex} does not exist")
        tcfg = raw.get("transport", {})
        pcfg = raw.get("pt", {})
        return cls(
            path=path,
            raw=raw,
            seed=int(raw.get("seed", 0)),
            degree=degree,
            environment=env_path,
            transport_mode=TransportMode.parse(tcfg.get("mode", "full")),
            transport_samples=int(tcfg.get("samples", 1024)),
            pt=PtConfig(
                spp=int(pcfg.get("spp", 256)),
                seed=int(raw.get("seed", 0)),
                max_bounces=int(pcfg.get("bounces", 0)),
                sampling=pcfg.get("sampling", "cosine"),
            ),
        )

    def build_scene(self) -> TriScene:
        parts = []
        for obj in self.raw.get("objects", []):
            kind = obj.get("type")
            mat = _material(obj.get("material"))
            if kind == "sphere":
                part = uv_sphere(
                    center=obj.get("center", (0, 0, 1)),
                    radius=float(obj.get("radius", 1.0)),
                    material=mat,
                    rings=int(obj.get("rings", 24)),
                    segments=int(obj.get("segments", 48)),
                )
            elif kind == "plane":
                part = ground_plane(
                    z=float(obj.get("z", 0.0)),
                    half_size=float(obj.get("half_size", 10.0)),
                    material=mat,
                    occluder_only=bool(obj.get("occluder_only", False)),
                )
            elif kind == "capsule":
                part = capsule(
                    p0=obj.get("p0", (0, 0, 0)),
                    p1=obj.get("p1", (0, 0, 1)),
                    radius=float(obj.get("radius", 0.3)),
                    material=mat,
                )
            elif kind == "person":
                part = capsule_person(
                    base=obj.get("base", (0, 0, 0)), height=float(obj.get("height", 1.8))
                )
            elif kind == "obj":
                part = load_obj((self.path.parent / obj["path"]).read_text(), material=mat)
            else:
                raise ValueError(f"unknown object type {kind!r}")
            mnode = obj.get("material") or {}
            if "albedo_map" in mnode:
                tex = _load_albedo_map((self.path.parent / mnode["albedo_map"]).resolve())
                for sm in part.materials:
                    sm.albedo_map = tex
            parts.append(part)
        if not parts:
            raise ValueError(f"{self.path}: config defines no objects")
        return build_bvh(merge_scenes(parts))

    def build_camera(self) -> Camera:
        c = self.raw.get("camera", {})
        return Camera.look_at(
            origin=c.get("origin", (0, -4, 1.5)),
            target=c.get("target", (0, 0, 1.0)),
            up=c.get("up", (0, 0, 1)),
            vfov_deg=float(c.get("vfov", 40.0)),
            width=int(c.get("width", 128)),
            height=int(c.get("height", 128)),
        )
