"""Evaluation metrics: L1/L2 (x100), PSNR, log loss, and the render-loss
enumeration over predicted/ground-truth buffer combinations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .envlight import LightCoeffs
from .relight import shade
from .transport import TransportMap

PSNR_CAP = 99.0


@dataclass
class MetricReport:
    l1_x100: float
    l2_x100: float
    psnr: float
    pixel_count: int
    masked: bool

    def to_dict(self):
        return {
            "l1_x100": self.l1_x100,
            "l2_x100": self.l2_x100,
            "psnr": self.psnr,
            "pixel_count": self.pixel_count,
            "masked": self.masked,
        }


def image_metrics(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> MetricReport:
    """L1 = mean|a-b|*100, L2 = mean (a-b)^2 *100, PSNR with peak 1.0.

    With a mask, statistics cover mask>0.5 pixels only.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if mask is not None:
        if mask.shape != a.shape[:2]:
            raise ValueError(f"mask shape {mask.shape} does not match image {a.shape[:2]}")
        sel = mask > 0.5
        a = a[sel]
        b = b[sel]
        count = int(sel.sum())
    else:
        count = int(np.prod(a.shape[:2]))
    diff = a - b
    l1 = float(np.mean(np.abs(diff))) * 100.0
    mse = float(np.mean(diff * diff))
    psnr = PSNR_CAP if mse == 0.0 else min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))
    return MetricReport(l1, mse * 100.0, psnr, count, mask is not None)


def log_loss(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Mean squared difference of log(|.|+1); compresses unbounded coeffs."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shapes differ: {x.shape} vs {x_hat.shape}")
    d = np.log(np.abs(x) + 1.0) - np.log(np.abs(x_hat) + 1.0)
    return float(np.mean(d * d))


def render_loss_suite(
    pred: dict,
    gt: dict,
    e_pred: np.ndarray | None = None,
    mask: np.ndarray | None = None,
) -> list[tuple[str, float]]:
    """Masked L1 for every way of assembling shading and relit images.

    `pred` and `gt` each hold {"albedo": (H,W,3), "transport": TransportMap,
    "light": LightCoeffs}. Shadings enumerate pred/gt transport x light;
    relit images additionally enumerate pred/gt albedo. The residual has no
    ground truth and is added (when given) to every relit combination.
    """
    for d in (pred, gt):
        for key in ("albedo", "transport", "light"):
            if key not in d:
                raise ValueError(f"buffer dict is missing {key!r}")

    def masked_l1(a, b):
        if mask is not None:
            sel = mask > 0.5
            a, b = a[sel], b[sel]
        return float(np.mean(np.abs(a - b)))

    choices = {"pred": pred, "gt": gt}
    shadings = {
        (tk, lk): shade(choices[tk]["transport"], choices[lk]["light"])
        for tk in choices
        for lk in choices
    }
    gt_shading = shadings[("gt", "gt")]
    gt_image = gt["albedo"] * gt_shading

    out = []
    for (tk, lk), s in shadings.items():
        out.append((f"shading:T={tk},L={lk}", masked_l1(s, gt_shading)))
    for ak in choices:
        for (tk, lk), s in shadings.items():
            img = choices[ak]["albedo"] * s
            if e_pred is not None:
                img = img + np.einsum("hwcn,cn->hwc", e_pred.astype(np.float64),
                                      choices[lk]["light"].coeffs)
            out.append((f"image:rho={ak},T={tk},L={lk}", masked_l1(img, gt_image)))
    return out
