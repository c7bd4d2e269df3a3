"""Brute-force ground truth: Monte Carlo direct lighting under environment
illumination, plus the dataset buffer renders (albedo/normals/mask/material).

Two light estimators are available and must agree within noise: stratified
cosine-hemisphere sampling (default; low variance for the smooth integrands
the acceptance checks compare against) and stratified uniform-sphere
sampling. A luminance-CDF texel sampler handles small bright sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .brdf import ggx, oren_nayar
from .envlight import EnvironmentMap, LightCoeffs, project_env, texel_directions
from .geometry import Camera, PrimaryHits, TriScene, occluded, primary_hits, raycast
from .parallel import run_rows
from .sampling import cosine_hemisphere, pixel_rng, stratified_sphere


@dataclass
class PtConfig:
    spp: int = 256
    seed: int = 0
    max_bounces: int = 0  # 0 = direct only, 1 = one indirect bounce
    band_limit_light: int | None = None
    sampling: str = "cosine"  # cosine | uniform | env

    def __post_init__(self):
        if self.spp < 1:
            raise ValueError("spp must be >= 1")
        if self.max_bounces not in (0, 1):
            raise ValueError("max_bounces must be 0 or 1")
        if self.sampling not in ("cosine", "uniform", "env"):
            raise ValueError(f"unknown sampling strategy {self.sampling!r}")


class _EnvTexelSampler:
    """Discrete luminance-weighted texel distribution over a lat-long map."""

    def __init__(self, env: EnvironmentMap):
        dirs, omega = texel_directions(env.width, env.height)
        lum = env.pixels @ np.array([0.2126, 0.7152, 0.0722])
        weight = (lum * omega).ravel()
        total = weight.sum()
        if total <= 0.0:
            raise ValueError("environment has no energy to importance-sample")
        self.env = env
        self.prob = weight / total
        self.cdf = np.cumsum(self.prob)
        self.omega = omega.ravel()
        self.width = env.width
        self.height = env.height

    def sample(self, rng, count):
        u = rng.random(count)
        texel = np.searchsorted(self.cdf, u, side="right")
        texel = np.minimum(texel, self.prob.size - 1)
        ty, tx = np.divmod(texel, self.width)
        ju, jv = rng.random(count), rng.random(count)
        phi = 2.0 * math.pi * (tx + ju) / self.width
        theta = math.pi * (ty + jv) / self.height
        st = np.sin(theta)
        dirs = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)
        pdf = self.prob[texel] / np.maximum(self.omega[texel], 1e-16)
        return dirs, pdf


def _radiance_fn(env, cfg: PtConfig):
    if isinstance(env, LightCoeffs):
        return env.eval
    if cfg.band_limit_light is not None:
        return project_env(env, cfg.band_limit_light).eval
    return env.sample


def _direct_light(scene, radiance, env_sampler, position, normal, wo, albedo,
                  rough, metal, rng, spp, sampling, eps):
    """One-pixel direct-lighting estimate, (3,) linear RGB."""
    if sampling == "cosine":
        dirs = cosine_hemisphere(rng, spp, normal)
        cosw = np.clip(dirs @ normal, 0.0, None)
        inv_pdf = np.where(cosw > 0.0, math.pi / np.maximum(cosw, 1e-12), 0.0)
    elif sampling == "uniform":
        dirs = stratified_sphere(rng, spp)
        cosw = np.clip(dirs @ normal, 0.0, None)
        inv_pdf = np.full(spp, 4.0 * math.pi)
    else:
        dirs, pdf = env_sampler.sample(rng, spp)
        cosw = np.clip(dirs @ normal, 0.0, None)
        inv_pdf = 1.0 / np.maximum(pdf, 1e-16)

    sel = cosw > 0.0
    out = np.zeros(3)
    if not sel.any():
        return out
    d = dirs[sel]
    w = cosw[sel] * inv_pdf[sel]
    vis = ~occluded(scene, np.broadcast_to(position + eps * normal, d.shape), d, 0.0)
    if not vis.any():
        return out
    d = d[vis]
    w = w[vis]
    li = radiance(d)  # (M, 3)
    diffuse = (1.0 - metal) * oren_nayar(rough, d, wo, normal)
    gg = ggx(rough, metal, d, wo, normal)
    for c in range(3):
        out[c] = np.sum(li[:, c] * w * (albedo[c] * diffuse + gg)) / spp
    return out


def render_pt(scene: TriScene, env, cam: Camera, cfg: PtConfig,
              parallelism: int | None = None,
              hits: PrimaryHits | None = None) -> np.ndarray:
    """Path-traced linear RGB image (H, W, 3); seeded-deterministic."""
    radiance = _radiance_fn(env, cfg)
    env_sampler = None
    if cfg.sampling == "env":
        if not isinstance(env, EnvironmentMap) or cfg.band_limit_light is not None:
            raise ValueError("env-importance sampling needs a raw environment map")
        env_sampler = _EnvTexelSampler(env)
    if hits is None:
        hits = primary_hits(scene, cam)
    h, w = hits.shape
    out = np.zeros((h, w, 3))
    eps = scene.shadow_eps()
    bounce_spp = max(8, cfg.spp // 8)

    def shade_point(position, normal, wo, albedo, rough, metal, rng, spp):
        return _direct_light(scene, radiance, env_sampler, position, normal, wo,
                             albedo, rough, metal, rng, spp, cfg.sampling, eps)

    def do_row(y):
        for x in range(w):
            if not hits.hit[y, x]:
                continue
            rng = pixel_rng(cfg.seed, y, x)
            p = hits.position[y, x]
            n = hits.normal[y, x]
            wo = hits.wo[y, x]
            alb = hits.albedo[y, x]
            rough = float(hits.roughness[y, x])
            metal = float(hits.metallic[y, x])
            val = shade_point(p, n, wo, alb, rough, metal, rng, cfg.spp)
            if cfg.max_bounces == 1:
                val = val + _one_bounce(
                    scene, shade_point, p, n, wo, alb, rough, metal, rng, bounce_spp, eps
                )
            out[y, x] = val

    run_rows(do_row, h, parallelism)
    return out


def _one_bounce(scene, shade_point, position, normal, wo, albedo, rough, metal,
                rng, spp, eps):
    """Single indirect bounce, cosine-sampled; a coarse estimate by design."""
    dirs = cosine_hemisphere(rng, spp, normal)
    t, prim, bu, bv = raycast(scene, np.broadcast_to(position + eps * normal, dirs.shape),
                              dirs, tmin=0.0)
    hit = prim >= 0
    acc = np.zeros(3)
    if not hit.any():
        return acc
    on = oren_nayar(rough, dirs, wo, normal)
    gg = ggx(rough, metal, dirs, wo, normal)
    tris = scene.triangles
    for k in hit.nonzero()[0]:
        tri = tris[prim[k]]
        w0 = 1.0 - bu[k] - bv[k]
        p2 = position + t[k] * dirs[k]
        n2 = (w0 * scene.normals[tri[0]] + bu[k] * scene.normals[tri[1]]
              + bv[k] * scene.normals[tri[2]])
        n2 = n2 / max(np.linalg.norm(n2), 1e-12)
        if n2 @ dirs[k] > 0.0:
            n2 = -n2
        uv2 = (w0 * scene.uvs[tri[0]] + bu[k] * scene.uvs[tri[1]]
               + bv[k] * scene.uvs[tri[2]])
        mat = scene.materials[scene.tri_material[prim[k]]]
        alb2 = mat.albedo_at(uv2[None, :])[0]
        li = shade_point(p2, n2, -dirs[k], alb2, mat.base.roughness, mat.base.metallic,
                         rng, max(8, spp // 4))
        # cosine pdf cancels the cosine: weight = pi * f
        f_c = albedo * (1.0 - metal) * on[k] + gg[k]
        acc += math.pi * f_c * li
    return acc / spp


def render_buffers(scene: TriScene, cam: Camera,
                   hits: PrimaryHits | None = None) -> dict[str, np.ndarray]:
    """Dataset buffers at primary hits.

    normals are encoded (n+1)/2 into RGB; mask is coverage times
    (1 - transparency); material packs R=roughness, G=transparency,
    B=metallic.
    """
    if hits is None:
        hits = primary_hits(scene, cam)
    mask = hits.hit.astype(np.float64) * (1.0 - hits.transparency)
    normal_enc = np.where(hits.hit[..., None], (hits.normal + 1.0) * 0.5, 0.0)
    material = np.stack([hits.roughness, hits.transparency, hits.metallic], axis=-1)
    return {
        "albedo": hits.albedo.copy(),
        "normal": normal_enc,
        "mask": mask,
        "material": material,
    }
