"""Direction sampling on the sphere and hemisphere.

All samplers return unit vectors in the engine's world convention:
theta measured from +z, phi from +x toward +y.
"""

from __future__ import annotations

import math

import numpy as np


def spherical_to_dir(cos_theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Map (cos(theta), phi) pairs to unit vectors, shape (..., 3)."""
    ct = np.asarray(cos_theta, dtype=np.float64)
    st = np.sqrt(np.clip(1.0 - ct * ct, 0.0, None))
    return np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)


def uniform_sphere(rng: np.random.Generator, count: int) -> np.ndarray:
    """Independent uniform samples over the full sphere (pdf 1/4pi)."""
    u = rng.random((count, 2))
    return spherical_to_dir(1.0 - 2.0 * u[:, 0], 2.0 * math.pi * u[:, 1])


def stratified_sphere(rng: np.random.Generator, count: int) -> np.ndarray:
    """Jittered equal-area stratification over the sphere.

    Uses an a x b grid in (cos(theta), phi) covering as many samples as
    possible; any remainder is drawn unstratified. Every sample has uniform
    density 1/4pi so (4pi/count) * sum f(w_k) stays an unbiased estimate.
    """
    a = max(1, int(math.sqrt(count)))
    b = count // a
    n_grid = a * b
    ii, jj = np.meshgrid(np.arange(a), np.arange(b), indexing="ij")
    jit = rng.random((a, b, 2))
    u0 = (ii + jit[..., 0]).ravel() / a
    u1 = (jj + jit[..., 1]).ravel() / b
    dirs = spherical_to_dir(1.0 - 2.0 * u0, 2.0 * math.pi * u1)
    rest = count - n_grid
    if rest > 0:
        dirs = np.concatenate([dirs, uniform_sphere(rng, rest)], axis=0)
    return dirs


def make_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent/bitangent for unit normal(s) n, shape (..., 3)."""
    n = np.asarray(n, dtype=np.float64)
    # branchless Duff et al. frame construction
    s = np.where(n[..., 2] >= 0.0, 1.0, -1.0)
    a = -1.0 / (s + n[..., 2])
    b = n[..., 0] * n[..., 1] * a
    t = np.stack(
        [1.0 + s * n[..., 0] ** 2 * a, s * b, -s * n[..., 0]], axis=-1
    )
    bt = np.stack([b, s + n[..., 1] ** 2 * a, -n[..., 1]], axis=-1)
    return t, bt


def cosine_hemisphere(
    rng: np.random.Generator, count: int, normal: np.ndarray, stratified: bool = True
) -> np.ndarray:
    """Cosine-weighted directions about `normal` (pdf = cos(theta)/pi)."""
    if stratified:
        a = max(1, int(math.sqrt(count)))
        b = count // a
        ii, jj = np.meshgrid(np.arange(a), np.arange(b), indexing="ij")
        jit = rng.random((a, b, 2))
        u0 = (ii + jit[..., 0]).ravel() / a
        u1 = (jj + jit[..., 1]).ravel() / b
        rest = count - a * b
        if rest > 0:
            ur = rng.random((rest, 2))
            u0 = np.concatenate([u0, ur[:, 0]])
            u1 = np.concatenate([u1, ur[:, 1]])
    else:
        u = rng.random((count, 2))
        u0, u1 = u[:, 0], u[:, 1]
    ct = np.sqrt(np.clip(1.0 - u0, 0.0, 1.0))
    st = np.sqrt(np.clip(u0, 0.0, 1.0))
    phi = 2.0 * math.pi * u1
    local = np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)
    t, bt = make_frame(normal)
    return (
        local[:, 0:1] * t[None, :]
        + local[:, 1:2] * bt[None, :]
        + local[:, 2:3] * np.asarray(normal, dtype=np.float64)[None, :]
    )


def fibonacci_sphere(count: int) -> np.ndarray:
    """Deterministic low-discrepancy covering of the sphere."""
    i = np.arange(count, dtype=np.float64)
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / count
    phi = 2.0 * math.pi * np.mod(i / golden, 1.0)
    return spherical_to_dir(z, phi)


def pixel_rng(seed: int, y: int, x: int) -> np.random.Generator:
    """Per-pixel generator; identical for a pixel no matter the scheduling."""
    return np.random.default_rng(np.random.SeedSequence((seed, y, x)))
