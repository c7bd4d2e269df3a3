"""Image reconstruction from a decomposed scene: R = albedo * (T.L) + (E.L).

The shading dot product and the residual correction are both linear in the
light, so relighting swaps the illumination coefficients and re-runs two
einsums. No clamping happens before display: the residual is signed and
must be able to cancel energy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import formats, sh
from .envlight import LightCoeffs, rotate_env
from .transport import TransportMap


@dataclass
class DecomposedScene:
    """The relightable asset: per-pixel buffer stack of Fig-style planes."""

    albedo: np.ndarray       # (H, W, 3) in [0, 1]
    transport: TransportMap  # white-material coefficients
    residual: np.ndarray     # (H, W, 3, (N+1)^2), signed
    mask: np.ndarray         # (H, W) in [0, 1]
    normals: np.ndarray      # (H, W, 3), (n+1)/2 encoded
    material: np.ndarray     # (H, W, 3): R=roughness, G=transparency, B=metallic
    residual_missing: bool = False

    def __post_init__(self):
        h, w = self.mask.shape
        nc = self.transport.data.shape[2]
        expect = {
            "albedo": (h, w, 3),
            "residual": (h, w, 3, nc),
            "normals": (h, w, 3),
            "material": (h, w, 3),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} buffer is {arr.shape}, expected {shape}")
        if self.transport.data.shape[:2] != (h, w):
            raise ValueError("transport dimensions disagree with mask")
        if not np.isfinite(self.residual).all():
            raise ValueError("residual buffer must be finite")

    @property
    def degree(self) -> int:
        return self.transport.degree

    @property
    def shape(self):
        return self.mask.shape


def empty_residual(height: int, width: int, degree: int) -> np.ndarray:
    return np.zeros((height, width, 3, sh.num_coeffs(degree)), dtype=np.float32)


def shade(t: TransportMap, light: LightCoeffs) -> np.ndarray:
    """Shading S = T^T L per pixel and channel; zero where masked out."""
    if t.degree != light.degree:
        raise ValueError(f"degree mismatch: transport {t.degree}, light {light.degree}")
    img = np.einsum("hwn,cn->hwc", t.data.astype(np.float64), light.coeffs)
    return img * t.mask[..., None]


def residual_image(residual: np.ndarray, light: LightCoeffs) -> np.ndarray:
    """Residual correction E^T L; signed by design."""
    if residual.shape[3] != light.coeffs.shape[1]:
        raise ValueError("degree mismatch between residual buffer and light")
    return np.einsum("hwcn,cn->hwc", residual.astype(np.float64), light.coeffs)


def reconstruct(scene: DecomposedScene, light: LightCoeffs) -> np.ndarray:
    """Linear radiance R = albedo * shading + residual, masked, unclamped."""
    img = scene.albedo * shade(scene.transport, light) + residual_image(scene.residual, light)
    return img * scene.mask[..., None]


def tonemap(linear: np.ndarray, exposure: float = 0.0, gamma: float = 2.2) -> np.ndarray:
    """Linear -> display: 2^exposure scale, clamp to [0,1], gamma encode."""
    img = np.clip(linear * (2.0 ** exposure), 0.0, 1.0)
    if gamma != 1.0:
        img = img ** (1.0 / gamma)
    return img


def relight(
    scene: DecomposedScene,
    light: LightCoeffs,
    rotation: np.ndarray | None = None,
    exposure: float = 0.0,
    gamma: float = 2.2,
) -> np.ndarray:
    """8-bit RGBA display image under a new illumination."""
    if rotation is not None:
        light = rotate_env(light, rotation)
    display = tonemap(reconstruct(scene, light), exposure, gamma)
    rgba = np.empty(scene.shape + (4,), dtype=np.uint8)
    rgba[..., :3] = np.round(display * 255.0).astype(np.uint8)
    rgba[..., 3] = np.round(np.clip(scene.mask, 0.0, 1.0) * 255.0).astype(np.uint8)
    return rgba


# ---------------------------------------------------------------------------
# Persistence (SHC container layout)
# ---------------------------------------------------------------------------

_RGB = ("r", "g", "b")
_NRM = ("x", "y", "z")
_MAT = ("rough", "transp", "metal")


def save_decomposed(scene: DecomposedScene, path) -> None:
    """Plane layout: albedo.{r,g,b}, mask, normal.{x,y,z},
    material.{rough,transp,metal}, transport.00.., residual.{r,g,b}.00.. ."""
    h, w = scene.shape
    nc = scene.transport.data.shape[2]
    channels: dict[str, np.ndarray] = {}
    for i, c in enumerate(_RGB):
        channels[f"albedo.{c}"] = scene.albedo[..., i]
    channels["mask"] = scene.mask
    for i, c in enumerate(_NRM):
        channels[f"normal.{c}"] = scene.normals[..., i]
    for i, c in enumerate(_MAT):
        channels[f"material.{c}"] = scene.material[..., i]
    for n in range(nc):
        channels[f"transport.{n:02d}"] = scene.transport.data[..., n]
    if not scene.residual_missing:
        for i, c in enumerate(_RGB):
            for n in range(nc):
                channels[f"residual.{c}.{n:02d}"] = scene.residual[:, :, i, n]
    with open(path, "wb") as fh:
        fh.write(formats.write_shc(w, h, channels))


def load_decomposed(path) -> DecomposedScene:
    with open(path, "rb") as fh:
        width, height, channels = formats.read_shc(fh.read())

    def plane(name):
        if name not in channels:
            raise ValueError(f"container is missing plane {name!r}")
        return channels[name]

    # degree inference from the transport plane count; {9, 25} accepted
    nc = sum(1 for k in channels if k.startswith("transport."))
    if nc not in (9, 25):
        raise ValueError(f"unsupported transport plane count {nc}; expected 9 or 25")
    degree = sh.degree_for_count(nc)

    albedo = np.stack([plane(f"albedo.{c}") for c in _RGB], axis=-1)
    mask = plane("mask")
    normals = np.stack([plane(f"normal.{c}") for c in _NRM], axis=-1)
    material = np.stack([plane(f"material.{c}") for c in _MAT], axis=-1)
    tdata = np.stack([plane(f"transport.{n:02d}") for n in range(nc)], axis=-1)

    residual_missing = f"residual.r.{0:02d}" not in channels
    if residual_missing:
        warnings.warn("container has no residual planes; loading with E = 0", stacklevel=2)
        residual = empty_residual(height, width, degree)
    else:
        residual = np.stack(
            [
                np.stack([plane(f"residual.{c}.{n:02d}") for n in range(nc)], axis=-1)
                for c in _RGB
            ],
            axis=2,
        )

    return DecomposedScene(
        albedo=albedo,
        transport=TransportMap(data=tdata, mask=mask > 0.5),
        residual=residual,
        mask=mask,
        normals=normals,
        material=material,
        residual_missing=residual_missing,
    )
