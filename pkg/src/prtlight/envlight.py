"""Environment light: HDR maps, SH projection, normalization, rotation.

Maps are lat-long (u = phi/2pi, v = theta/pi, theta from +z). Lighting is
distant: radiance depends on direction only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import formats, sh
from .sampling import fibonacci_sphere

REFERENCE_NORMAL_COUNT = 512


@dataclass
class EnvironmentMap:
    pixels: np.ndarray  # (H, W, 3) linear radiance

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError("environment map must be (H, W, 3)")
        if not np.isfinite(self.pixels).all() or (self.pixels < 0).any():
            raise ValueError("environment radiance must be finite and non-negative")
        if self.width != 2 * self.height:
            warnings.warn(
                f"lat-long map is {self.width}x{self.height}; 2:1 aspect recommended",
                stacklevel=2,
            )

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def sample(self, dirs: np.ndarray) -> np.ndarray:
        """Nearest-texel radiance for unit direction(s) (..., 3)."""
        d = np.asarray(dirs, dtype=np.float64)
        theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
        phi = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2.0 * math.pi)
        x = np.minimum((phi / (2.0 * math.pi) * self.width).astype(np.int64), self.width - 1)
        y = np.minimum((theta / math.pi * self.height).astype(np.int64), self.height - 1)
        return self.pixels[y, x]


def texel_directions(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions at texel centers and their solid angles sin(t)*dt*dp."""
    v = (np.arange(height) + 0.5) / height
    u = (np.arange(width) + 0.5) / width
    theta = math.pi * v
    phi = 2.0 * math.pi * u
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    st = np.sin(tt)
    dirs = np.stack([st * np.cos(pp), st * np.sin(pp), np.cos(tt)], axis=-1)
    omega = st * (math.pi / height) * (2.0 * math.pi / width)
    return dirs, omega


def load_hdr(data: bytes) -> EnvironmentMap:
    """Radiance .hdr bytes to an environment map."""
    return EnvironmentMap(formats.read_hdr(data))


def load_env(path) -> EnvironmentMap:
    """Load .hdr or .pfm by extension."""
    from pathlib import Path

    p = Path(path)
    raw = p.read_bytes()
    if p.suffix.lower() == ".hdr":
        return EnvironmentMap(formats.read_hdr(raw))
    if p.suffix.lower() == ".pfm":
        img = formats.read_pfm(raw)
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=-1)
        return EnvironmentMap(img)
    raise ValueError(f"unsupported environment format: {p.suffix}")


@dataclass
class LightCoeffs:
    """RGB illumination coefficients, shape (3, (N+1)^2)."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] != 3:
            raise ValueError("light coefficients must be (3, coeff_count)")
        sh.degree_for_count(self.coeffs.shape[1])
        if not np.isfinite(self.coeffs).all():
            raise ValueError("light coefficients must be finite")

    @property
    def degree(self) -> int:
        return sh.degree_for_count(self.coeffs.shape[1])

    def scaled(self, s: float) -> "LightCoeffs":
        return LightCoeffs(self.coeffs * s)

    def eval(self, dirs: np.ndarray) -> np.ndarray:
        """Band-limited radiance Sum_i L_i Y_i(w), shape (..., 3)."""
        basis = sh.eval_basis(dirs, self.degree)
        return basis @ self.coeffs.T

    def to_text(self) -> str:
        return formats.write_sh_text([self.coeffs[0], self.coeffs[1], self.coeffs[2]])

    @classmethod
    def from_text(cls, text: str) -> "LightCoeffs":
        blocks = formats.read_sh_text(text)
        if len(blocks) != 3:
            raise ValueError(f"light file needs 3 channel blocks, found {len(blocks)}")
        if len({b.size for b in blocks}) != 1:
            raise ValueError("channel blocks disagree on degree")
        return cls(np.stack(blocks))


def project_env(env: EnvironmentMap, degree: int = 4) -> LightCoeffs:
    """Stratified lat-long quadrature of the map against the SH basis."""
    nc = sh.num_coeffs(degree)
    dirs, omega = texel_directions(env.width, env.height)
    out = np.zeros((3, nc))
    # chunk rows to bound the basis matrix size on large maps
    rows_per_chunk = max(1, 2_000_000 // max(env.width, 1))
    for y0 in range(0, env.height, rows_per_chunk):
        y1 = min(env.height, y0 + rows_per_chunk)
        basis = sh.eval_basis(dirs[y0:y1].reshape(-1, 3), degree)
        w = omega[y0:y1].ravel()
        px = env.pixels[y0:y1].reshape(-1, 3)
        out += np.einsum("mc,m,mk->ck", px, w, basis, optimize=True)
    return LightCoeffs(out)


def lambertian_transport_coeffs(normals: np.ndarray, degree: int) -> np.ndarray:
    """Degree-N projection of max(w.n, 0)/pi for each normal, (..., nc)."""
    normals = np.asarray(normals, dtype=np.float64)
    basis = sh.eval_basis(normals, degree)
    out = np.empty_like(basis)
    for l in range(degree + 1):
        scale = math.sqrt(4.0 * math.pi / (2 * l + 1)) * sh.CLAMPED_COSINE_ZONAL[l] / math.pi
        i0 = l * l
        out[..., i0 : i0 + 2 * l + 1] = scale * basis[..., i0 : i0 + 2 * l + 1]
    return out


def reference_radiance(light: LightCoeffs) -> float:
    """Mean diffuse shading of a white sphere under the light.

    Averages T_cos(n)^T L over 512 Fibonacci-distributed normals and the
    three channels; the normalization quantity for dataset illuminations.
    """
    normals = fibonacci_sphere(REFERENCE_NORMAL_COUNT)
    t = lambertian_transport_coeffs(normals, light.degree)  # (M, nc)
    shading = t @ light.coeffs.T  # (M, 3)
    return float(shading.mean())


def normalize_env(light: LightCoeffs, target: float = 0.8) -> LightCoeffs:
    """Scale so reference_radiance equals `target` exactly."""
    ref = reference_radiance(light)
    if not math.isfinite(ref) or ref <= 0.0:
        raise ValueError(f"cannot normalize light with reference radiance {ref}")
    return light.scaled(target / ref)


def rotate_env(light: LightCoeffs, rotation: np.ndarray) -> LightCoeffs:
    """Rotate the illumination; per-channel SH rotation, bands never mix."""
    mat = sh.rotation_matrix(rotation, light.degree)
    return LightCoeffs(light.coeffs @ mat.T)
