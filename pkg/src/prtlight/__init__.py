"""prtlight: precomputed radiance transfer relighting engine.

Spherical-harmonics illumination and transport with Oren-Nayar + GGX
reflectance, a ridge-fit residual correction, a path-traced oracle,
dataset buffers, evaluation metrics, a CLI, and an HTTP relighting
service.
"""

__version__ = "0.1.0"

from .brdf import Material, ggx, material_eval, oren_nayar
from .envlight import (
    EnvironmentMap,
    LightCoeffs,
    load_env,
    load_hdr,
    normalize_env,
    project_env,
    reference_radiance,
    rotate_env,
)
from .geometry import Camera, TriScene, build_bvh, primary_hits, visibility
from .metrics import MetricReport, image_metrics, log_loss, render_loss_suite
from .pathtrace import PtConfig, render_buffers, render_pt
from .relight import (
    DecomposedScene,
    load_decomposed,
    reconstruct,
    relight,
    residual_image,
    save_decomposed,
    shade,
)
from .residual import ResidualFitConfig, fit_residual
from .transport import TransportMap, TransportMode, compute_transport_map, compute_transport_point

__all__ = [
    "Material", "oren_nayar", "ggx", "material_eval",
    "EnvironmentMap", "LightCoeffs", "load_hdr", "load_env",
    "project_env", "reference_radiance", "normalize_env", "rotate_env",
    "Camera", "TriScene", "build_bvh", "primary_hits", "visibility",
    "TransportMode", "TransportMap", "compute_transport_point", "compute_transport_map",
    "DecomposedScene", "shade", "residual_image", "reconstruct", "relight",
    "save_decomposed", "load_decomposed",
    "ResidualFitConfig", "fit_residual",
    "PtConfig", "render_pt", "render_buffers",
    "MetricReport", "image_metrics", "log_loss", "render_loss_suite",
]
