"""Reflectance model: Oren-Nayar diffuse plus GGX specular with Smith shadowing.

Both lobes are evaluated for a white material; color enters later when the
albedo buffer multiplies the shading. Lobes are blended as
(1 - metallic) * oren_nayar + ggx. Transparency never enters the BRDF; it
is handled as alpha coverage in the mask pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INV_PI = 1.0 / np.pi

# Roughness below this is treated as an ideal mirror. The specular lobe is
# then a delta distribution that evaluation-based estimators cannot sample,
# so ggx() returns 0 for it.
MIRROR_ROUGHNESS = 0.01


def _clamp01(x):
    return float(min(1.0, max(0.0, x)))


@dataclass(frozen=True)
class Material:
    """Per-surface reflectance parameters, all clamped to [0, 1]."""

    albedo: tuple[float, float, float] = (1.0, 1.0, 1.0)
    roughness: float = 0.5
    metallic: float = 0.0
    transparency: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "albedo", tuple(_clamp01(c) for c in self.albedo))
        object.__setattr__(self, "roughness", _clamp01(self.roughness))
        object.__setattr__(self, "metallic", _clamp01(self.metallic))
        object.__setattr__(self, "transparency", _clamp01(self.transparency))


def oren_nayar(roughness: float, wi: np.ndarray, wo, n) -> np.ndarray:
    """White-albedo Oren-Nayar value (A/B approximation), 0 below horizon.

    `wi` may be a batch (..., 3); `wo` and `n` are single unit vectors.
    Sigma is roughness * pi/2 radians, so roughness sweeps the model's
    intended range; roughness 0 reduces exactly to 1/pi.
    """
    wi = np.asarray(wi, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    ci = wi @ n
    co = float(wo @ n)
    if co <= 0.0:
        return np.zeros(wi.shape[:-1])

    sigma = roughness * np.pi / 2.0
    s2 = sigma * sigma
    a = 1.0 - s2 / (2.0 * (s2 + 0.33))
    b = 0.45 * s2 / (s2 + 0.09)

    si = np.sqrt(np.clip(1.0 - ci * ci, 0.0, None))
    so = np.sqrt(max(0.0, 1.0 - co * co))
    # azimuth difference from the tangent-plane projections
    wit = wi - ci[..., None] * n
    wot = wo - co * n
    denom = si * np.linalg.norm(wot)
    cos_dphi = np.zeros_like(ci)
    ok = denom > 1e-12
    np.divide(wit @ wot, denom, out=cos_dphi, where=ok)
    cos_dphi = np.clip(cos_dphi, -1.0, 1.0)

    sin_alpha = np.maximum(si, so)
    tan_beta = np.minimum(si, so) / np.maximum(np.maximum(ci, co), 1e-12)
    val = INV_PI * (a + b * np.maximum(cos_dphi, 0.0) * sin_alpha * tan_beta)
    return np.where(ci > 0.0, val, 0.0)


def ggx(roughness: float, metallic: float, wi: np.ndarray, wo, n) -> np.ndarray:
    """GGX specular lobe D*G*F / (4 (n.wi)(n.wo)).

    alpha = roughness^2, Smith height-correlated masking-shadowing,
    Schlick Fresnel with F0 = 0.04 + 0.96*metallic. Returns 0 below the
    horizon and for mirror-roughness materials (delta lobe).
    """
    wi = np.asarray(wi, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if roughness < MIRROR_ROUGHNESS:
        return np.zeros(wi.shape[:-1])
    ci = wi @ n
    co = float(wo @ n)
    if co <= 0.0:
        return np.zeros(wi.shape[:-1])

    alpha = roughness * roughness
    a2 = alpha * alpha
    h = wi + wo
    hn = np.linalg.norm(h, axis=-1)
    good = (ci > 0.0) & (hn > 1e-12)
    h = h / np.maximum(hn, 1e-12)[..., None]
    ndh = np.clip(h @ n, 0.0, 1.0)
    hdo = np.clip(np.abs(h @ wo), 0.0, 1.0)

    d = a2 / (np.pi * (ndh * ndh * (a2 - 1.0) + 1.0) ** 2)
    ci_c = np.clip(ci, 1e-9, 1.0)

    def lam(c):
        c2 = c * c
        return 0.5 * (-1.0 + np.sqrt(1.0 + a2 * (1.0 - c2) / c2))

    g = 1.0 / (1.0 + lam(ci_c) + lam(co))
    f0 = 0.04 + 0.96 * metallic
    f = f0 + (1.0 - f0) * (1.0 - hdo) ** 5
    val = d * g * f / (4.0 * ci_c * co)
    return np.where(good, val, 0.0)


def material_eval(m: Material, wi: np.ndarray, wo, n) -> np.ndarray:
    """White-material BRDF value: (1-metallic)*oren_nayar + ggx."""
    return (1.0 - m.metallic) * oren_nayar(m.roughness, wi, wo, n) + ggx(
        m.roughness, m.metallic, wi, wo, n
    )
