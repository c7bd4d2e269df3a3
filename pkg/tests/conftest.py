"""Shared fixtures: procedural scenes, synthetic HDR environments, and an
independent RGBE encoder used as the oracle for the .hdr decoder."""

from __future__ import annotations

import numpy as np
import pytest

from prtlight.brdf import Material
from prtlight.envlight import EnvironmentMap
from prtlight.geometry import Camera, build_bvh, primary_hits
from prtlight.scenes import ground_plane, merge_scenes, uv_sphere

# ---------------------------------------------------------------------------
# Independent RGBE writer (the package only decodes .hdr)
# ---------------------------------------------------------------------------


def encode_rgbe(rgb: np.ndarray) -> np.ndarray:
    """Canonical float -> RGBE bytes, (H, W, 3) -> (H, W, 4) uint8."""
    rgb = np.asarray(rgb, dtype=np.float64)
    v = rgb.max(axis=-1)
    out = np.zeros(rgb.shape[:-1] + (4,), dtype=np.uint8)
    nz = v >= 1e-32
    m, e = np.frexp(v[nz])
    scale = m * 256.0 / v[nz]
    out[nz, :3] = np.floor(rgb[nz] * scale[:, None]).astype(np.uint8)
    out[nz, 3] = (e + 128).astype(np.uint8)
    return out


def _rle_component(vals: bytes) -> bytes:
    out = bytearray()
    i, n = 0, len(vals)
    while i < n:
        j = i
        while j < n - 1 and vals[j + 1] == vals[i] and j - i < 126:
            j += 1
        run = j - i + 1
        if run >= 3:
            out.append(128 + run)
            out.append(vals[i])
            i = j + 1
        else:
            lit = bytearray()
            k = i
            while k < n and len(lit) < 128:
                if k + 2 < n and vals[k + 1] == vals[k] and vals[k + 2] == vals[k]:
                    break
                lit.append(vals[k])
                k += 1
            out.append(len(lit))
            out.extend(lit)
            i = k
    return bytes(out)


def write_hdr(rgb: np.ndarray, rle: bool = False) -> bytes:
    """Minimal Radiance .hdr writer: flat scanlines or new-style RLE."""
    rgbe = encode_rgbe(rgb)
    h, w = rgbe.shape[:2]
    head = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n" + f"-Y {h} +X {w}\n".encode()
    if not rle:
        return head + rgbe.tobytes()
    body = bytearray()
    for row in range(h):
        body += bytes([2, 2, (w >> 8) & 0xFF, w & 0xFF])
        for comp in range(4):
            body += _rle_component(bytes(rgbe[row, :, comp]))
    return head + bytes(body)


def decode_rgbe(rgbe: np.ndarray) -> np.ndarray:
    """Reference RGBE -> float, written independently of the package."""
    rgbe = np.asarray(rgbe, dtype=np.float64)
    exp = rgbe[..., 3]
    scale = np.where(exp == 0, 0.0, 2.0 ** (exp - 136.0))
    return rgbe[..., :3] * scale[..., None]


# ---------------------------------------------------------------------------
# Procedural environments
# ---------------------------------------------------------------------------


def blob_sky(width=128, height=64, blob_dir=(0.3, -0.7, 0.65), sharpness=0.02,
             strength=60.0) -> EnvironmentMap:
    """Sky gradient plus one small bright source; plenty of high bands."""
    v = (np.arange(height) + 0.5) / height
    u = (np.arange(width) + 0.5) / width
    theta = np.pi * v
    phi = 2 * np.pi * u
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    d = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], -1)
    s = np.asarray(blob_dir, dtype=np.float64)
    s /= np.linalg.norm(s)
    blob = np.exp((d @ s - 1.0) / sharpness) * strength
    sky = 0.25 + 0.3 * np.clip(d[..., 2], 0, 1)
    px = np.stack(
        [blob * 1.0 + sky * 0.9, blob * 0.9 + sky * 1.0, blob * 0.7 + sky * 1.1], -1
    )
    return EnvironmentMap(px)


def constant_env(value=1.0, width=32, height=16) -> EnvironmentMap:
    return EnvironmentMap(np.full((height, width, 3), value, dtype=np.float64))


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------


def lambertian_sphere_on_plane(albedo=(1.0, 1.0, 1.0)):
    mat = Material(albedo=albedo, roughness=0.0, metallic=0.0)
    scene = merge_scenes([
        uv_sphere(center=(0, 0, 1.0), radius=1.0, material=mat),
        ground_plane(z=0.0, half_size=8.0, material=mat),
    ])
    return build_bvh(scene)


def glossy_sphere_on_plane(roughness=0.2, albedo=(0.75, 0.55, 0.45)):
    scene = merge_scenes([
        uv_sphere(center=(0, 0, 1.0), radius=1.0,
                  material=Material(albedo=albedo, roughness=roughness, metallic=0.0)),
        ground_plane(z=0.0, half_size=8.0,
                     material=Material(albedo=(0.6, 0.6, 0.6), roughness=0.7)),
    ])
    return build_bvh(scene)


def sphere_camera(width=32, height=32, vfov=30.0):
    return Camera.look_at(origin=(0, -4.5, 1.6), target=(0, 0, 1.0),
                          vfov_deg=vfov, width=width, height=height)


@pytest.fixture(scope="session")
def lambert_scene():
    scene = lambertian_sphere_on_plane()
    cam = sphere_camera(32, 32)
    return scene, cam, primary_hits(scene, cam)


@pytest.fixture(scope="session")
def glossy_scene():
    scene = glossy_sphere_on_plane()
    cam = sphere_camera(32, 32)
    return scene, cam, primary_hits(scene, cam)


@pytest.fixture(scope="session")
def sky_env():
    return blob_sky()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
