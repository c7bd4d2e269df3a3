"""Ridge least-squares fit of the residual coefficients E.

For every pixel and channel c the fit solves

    min_e  sum_k (e . L_kc - r_kc)^2 + lambda ||e||^2,
    r_kc = PT_kc - albedo_c * (T . L_kc),

via the normal equations (G + lambda I) e = A^T r with G = sum_k L_k L_k^T.
G is shared by every pixel of a channel, so it is factored once and the
millions of per-pixel systems reduce to triangular solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envlight import LightCoeffs
from .relight import DecomposedScene, shade


@dataclass
class ResidualFitConfig:
    lam: float = 1e-4
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("ridge lambda must be >= 0")


@dataclass
class ResidualFitReport:
    lam: float
    light_count: int
    error_before: list[float]  # per training image, mean squared error
    error_after: list[float]

    def to_dict(self):
        return {
            "lambda": self.lam,
            "light_count": self.light_count,
            "error_before": self.error_before,
            "error_after": self.error_after,
        }


def fit_residual(
    scene: DecomposedScene,
    pt_images: np.ndarray,
    lights: list[LightCoeffs],
    cfg: ResidualFitConfig | None = None,
) -> tuple[np.ndarray, ResidualFitReport]:
    """Fit E against path-traced ground truth rendered under `lights`.

    Args:
        scene: decomposition without a meaningful residual (E ignored).
        pt_images: (K, H, W, 3) ground truth, rendered under exactly lights[k].
        lights: K illumination coefficient sets.
        cfg: ridge strength and solver tolerance.

    Returns:
        (residual buffer (H, W, 3, nc) float32, fit report).
    """
    cfg = cfg or ResidualFitConfig()
    k = len(lights)
    if k < 1:
        raise ValueError("need at least one training light")
    pt_images = np.asarray(pt_images, dtype=np.float64)
    h, w = scene.shape
    if pt_images.shape != (k, h, w, 3):
        raise ValueError(f"pt_images is {pt_images.shape}, expected {(k, h, w, 3)}")
    nc = scene.transport.data.shape[2]
    for li in lights:
        if li.coeffs.shape[1] != nc:
            raise ValueError("light degree disagrees with the transport buffer")

    # r_k = PT_k - albedo * S_k over the mask
    targets = np.empty((k, h, w, 3))
    for i, li in enumerate(lights):
        targets[i] = pt_images[i] - scene.albedo * shade(scene.transport, li)
    inside = scene.mask > 0.5

    residual = np.zeros((h, w, 3, nc))
    err_before = [float(np.mean(targets[i][inside] ** 2)) for i in range(k)]

    lmat = np.stack([li.coeffs for li in lights])  # (K, 3, nc)
    for c in range(3):
        a = lmat[:, c, :]  # (K, nc)
        g = a.T @ a + cfg.lam * np.eye(nc)
        if cfg.lam == 0.0:
            cond_bad = k < nc or np.linalg.matrix_rank(a) < nc
            if cond_bad:
                raise np.linalg.LinAlgError(
                    f"normal matrix is singular with lambda=0 and K={k} lights; "
                    "set lambda > 0"
                )
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                "normal matrix not positive definite; set lambda > 0"
            ) from exc
        rhs = np.einsum("kn,khw->nhw", a, targets[:, :, :, c]).reshape(nc, -1)
        sol = _cho_solve(chol, rhs)  # (nc, H*W)
        res = g @ sol - rhs
        worst = float(np.abs(res).max())
        if worst > max(cfg.tolerance, 1e-6 * (1.0 + float(np.abs(rhs).max()))):
            raise np.linalg.LinAlgError(f"normal-equation residual {worst} above tolerance")
        residual[:, :, c, :] = sol.T.reshape(h, w, nc)

    residual[~inside] = 0.0

    err_after = []
    for i, li in enumerate(lights):
        corr = np.einsum("hwcn,cn->hwc", residual, li.coeffs)
        err_after.append(float(np.mean((targets[i][inside] - corr[inside]) ** 2)))

    report = ResidualFitReport(cfg.lam, k, err_before, err_after)
    return residual.astype(np.float32), report


def _cho_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, y)
