"""Per-pixel transport vectors: SH projection of f_r * V * cos.

Three fidelity tiers: cosine only, cosine+visibility, and the full
white-material reflectance with the camera direction baked per pixel.
The Monte Carlo estimate per coefficient is

    T_i = (4pi / M) * sum_k f(w_k) V(w_k) max(w_k . n, 0) Y_i(w_k)

over uniform-density sphere samples (jitter-stratified; still pdf 1/4pi,
so the estimator stays unbiased for every coefficient of either sign).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import sh
from .brdf import Material, material_eval
from .geometry import Camera, PrimaryHits, SurfacePoint, TriScene, occluded, primary_hits
from .parallel import run_rows
from .sampling import pixel_rng, stratified_sphere


class TransportMode(enum.Enum):
    COSINE_ONLY = "cos"
    COSINE_VISIBILITY = "cosvis"
    FULL_REFLECTANCE = "full"

    @classmethod
    def parse(cls, name: str) -> "TransportMode":
        for mode in cls:
            if mode.value == name:
                return mode
        raise ValueError(f"unknown transport mode {name!r}; use cos|cosvis|full")


@dataclass
class TransportMap:
    """White-material transport coefficients per pixel; zeros at misses."""

    data: np.ndarray  # (H, W, (N+1)^2) float32
    mask: np.ndarray  # (H, W) bool

    @property
    def degree(self) -> int:
        return sh.degree_for_count(self.data.shape[2])

    @property
    def shape(self):
        return self.mask.shape


def _point_transport(scene, position, normal, wo, material, mode, degree, samples, rng, eps):
    dirs = stratified_sphere(rng, samples)
    cosw = dirs @ normal
    sel = cosw > 0.0
    if not sel.any():
        return np.zeros(sh.num_coeffs(degree))
    d = dirs[sel]
    w = cosw[sel]
    if mode is not TransportMode.COSINE_ONLY:
        orig = np.broadcast_to(position + eps * normal, d.shape)
        w = w * ~occluded(scene, orig, d, 0.0)
    if mode is TransportMode.FULL_REFLECTANCE:
        w = w * material_eval(material, d, wo, normal)
    basis = sh.eval_basis(d, degree)
    return (4.0 * math.pi / samples) * (w @ basis)


def compute_transport_point(
    scene: TriScene,
    p: SurfacePoint,
    wo,
    mode: TransportMode = TransportMode.FULL_REFLECTANCE,
    degree: int = 4,
    samples: int = 1024,
    seed: int = 0,
) -> np.ndarray:
    """Transport coefficients at one surface point."""
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    return _point_transport(
        scene, p.position, p.normal, np.asarray(wo, dtype=np.float64),
        p.material, mode, degree, samples, rng, scene.shadow_eps(),
    )


def compute_transport_map(
    scene: TriScene,
    cam: Camera,
    mode: TransportMode = TransportMode.FULL_REFLECTANCE,
    degree: int = 4,
    samples: int = 1024,
    seed: int = 0,
    parallelism: int | None = None,
    hits: PrimaryHits | None = None,
) -> TransportMap:
    """Transport at every primary hit; bitwise identical for any worker count."""
    if samples < 1:
        raise ValueError("need at least one sample")
    if hits is None:
        hits = primary_hits(scene, cam)
    h, w = hits.shape
    nc = sh.num_coeffs(degree)
    data = np.zeros((h, w, nc), dtype=np.float64)
    eps = scene.shadow_eps()

    def do_row(y):
        for x in range(w):
            if not hits.hit[y, x]:
                continue
            mat = Material(
                albedo=(1.0, 1.0, 1.0),
                roughness=float(hits.roughness[y, x]),
                metallic=float(hits.metallic[y, x]),
                transparency=float(hits.transparency[y, x]),
            )
            data[y, x] = _point_transport(
                scene, hits.position[y, x], hits.normal[y, x], hits.wo[y, x],
                mat, mode, degree, samples, pixel_rng(seed, y, x), eps,
            )

    run_rows(do_row, h, parallelism)
    return TransportMap(data=data.astype(np.float32), mask=hits.hit.copy())
