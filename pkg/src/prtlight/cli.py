"""Command-line pipeline: project-env, transport, fit-residual, relight,
dataset-gen, eval, serve.

Every run drops a manifest (inputs, seeds, version) beside its outputs so
results can be reproduced bit-for-bit. Exit codes: 0 success, 1 internal
error, 2 usage or file error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, formats, sh
from .config import SceneConfig
from .envlight import LightCoeffs, load_env, normalize_env, project_env, reference_radiance, rotate_env
from .metrics import image_metrics
from .pathtrace import PtConfig, render_buffers, render_pt
from .relight import (
    DecomposedScene,
    empty_residual,
    load_decomposed,
    reconstruct,
    relight,
    save_decomposed,
    tonemap,
)
from .residual import ResidualFitConfig, fit_residual
from .transport import TransportMode, compute_transport_map


class UsageError(Exception):
    """File/argument problems that exit with code 2."""


def _write_manifest(out_path: Path, command: str, params: dict) -> None:
    manifest = {"tool": "prtlight", "version": __version__, "command": command, "params": params}
    path = out_path.parent / (out_path.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse_rotation(text: str) -> np.ndarray:
    try:
        yaw, pitch, roll = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--rotation expects 'yaw,pitch,roll' degrees, got {text!r}") from exc
    return sh.euler_rotation(yaw, pitch, roll)


def _load_light(env_arg: str | None, light_arg: str | None, degree: int,
                normalize: float | None) -> LightCoeffs:
    if (env_arg is None) == (light_arg is None):
        raise UsageError("provide exactly one of --env or --light")
    if light_arg is not None:
        p = Path(light_arg)
        if not p.exists():
            raise UsageError(f"light file not found: {p}")
        light = LightCoeffs.from_text(p.read_text())
        if light.degree != degree:
            raise UsageError(f"light degree {light.degree} != requested degree {degree}")
    else:
        p = Path(env_arg)
        if not p.exists():
            raise UsageError(f"environment not found: {p}")
        light = project_env(load_env(p), degree)
    if normalize is not None:
        light = normalize_env(light, normalize)
    return light


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_project_env(args) -> int:
    light = _load_light(args.env, None, args.degree, args.normalize)
    out = Path(args.out)
    out.write_text(light.to_text())
    _write_manifest(out, "project-env", {
        "env": args.env, "degree": args.degree, "normalize": args.normalize,
        "reference_radiance": reference_radiance(light),
    })
    return 0


def _decompose(cfg: SceneConfig, mode, samples, seed, degree, parallelism=None):
    scene = cfg.build_scene()
    cam = cfg.build_camera()
    from .geometry import primary_hits

    hits = primary_hits(scene, cam)
    bufs = render_buffers(scene, cam, hits=hits)
    tmap = compute_transport_map(scene, cam, mode, degree, samples, seed,
                                 parallelism=parallelism, hits=hits)
    ds = DecomposedScene(
        albedo=bufs["albedo"],
        transport=tmap,
        residual=empty_residual(cam.height, cam.width, degree),
        mask=bufs["mask"],
        normals=bufs["normal"],
        material=bufs["material"],
        residual_missing=True,
    )
    return scene, cam, hits, ds


def cmd_transport(args) -> int:
    cfg = SceneConfig.load(args.scene)
    mode = TransportMode.parse(args.mode) if args.mode else cfg.transport_mode
    samples = args.samples or cfg.transport_samples
    seed = cfg.seed if args.seed is None else args.seed
    degree = args.degree or cfg.degree
    _, _, _, ds = _decompose(cfg, mode, samples, seed, degree)
    out = Path(args.out)
    save_decomposed(ds, out)
    _write_manifest(out, "transport", {
        "scene": str(args.scene), "mode": mode.value, "samples": samples,
        "seed": seed, "degree": degree,
    })
    return 0


def cmd_fit_residual(args) -> int:
    cfg = SceneConfig.load(args.scene)
    if cfg.environment is None:
        raise UsageError(f"{args.scene}: fit-residual needs an environment in the config")
    ds = load_decomposed(Path(args.decomposed))
    scene = cfg.build_scene()
    cam = cfg.build_camera()
    env = load_env(cfg.environment)
    base = project_env(env, ds.degree)
    ref = reference_radiance(base)
    if ref <= 0:
        raise UsageError("environment is black; nothing to fit against")
    scale = 0.8 / ref
    k = args.train_lights
    lights, pts = [], []
    from .envlight import EnvironmentMap

    for i in range(k):
        # yaw rotations by texel shift are exact on a lat-long grid
        shift = int(round(i * env.width / k))
        rolled = EnvironmentMap(np.roll(env.pixels * scale, shift, axis=1))
        lights.append(project_env(rolled, ds.degree))
        pts.append(render_pt(scene, rolled, cam,
                             PtConfig(spp=args.spp, seed=cfg.seed + 101 + i,
                                      sampling=args.sampling)))
    residual, report = fit_residual(ds, np.stack(pts), lights,
                                    ResidualFitConfig(lam=args.ridge))
    ds.residual = residual
    ds.residual_missing = False
    out = Path(args.out)
    save_decomposed(ds, out)
    report_path = out.parent / (out.stem + ".fit-report.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    _write_manifest(out, "fit-residual", {
        "scene": str(args.scene), "decomposed": str(args.decomposed),
        "train_lights": k, "lambda": args.ridge, "spp": args.spp, "seed": cfg.seed,
    })
    return 0


def cmd_relight(args) -> int:
    scene_path = Path(args.scene)
    if not scene_path.exists():
        raise UsageError(f"scene file not found: {scene_path}")
    ds = load_decomposed(scene_path)
    light = _load_light(args.env, args.light, ds.degree, args.normalize)
    rot = _parse_rotation(args.rotation)
    rgba = relight(ds, light, rot, exposure=args.exposure, gamma=args.gamma)
    out = Path(args.out)
    out.write_bytes(formats.encode_png(rgba))
    _write_manifest(out, "relight", {
        "scene": str(scene_path), "env": args.env, "light": args.light,
        "rotation": args.rotation, "exposure": args.exposure, "gamma": args.gamma,
    })
    return 0


def cmd_dataset_gen(args) -> int:
    manifest_path = Path(args.config)
    if not manifest_path.exists():
        raise UsageError(f"dataset config not found: {manifest_path}")
    import yaml

    grid = yaml.safe_load(manifest_path.read_text())
    scenes = grid.get("scenes", [])
    envs = grid.get("envs", [])
    if not scenes or not envs:
        raise UsageError("dataset config needs non-empty 'scenes' and 'envs' lists")
    seed = int(grid.get("seed", 0))
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    failures = []
    for si, scene_rel in enumerate(scenes):
        cfg = SceneConfig.load(manifest_path.parent / scene_rel)
        for ei, env_rel in enumerate(envs):
            # target radiance drawn per cell from [0.7, 0.9], seeded
            target = float(rng.uniform(0.7, 0.9))
            cell = out_root / f"s{si:02d}_e{ei:02d}"
            try:
                _generate_cell(cfg, manifest_path.parent / env_rel, cell, target, seed)
            except Exception as exc:  # keep the rest of the grid going
                failures.append(f"{cell.name}: {exc}")
                print(f"[dataset-gen] {cell.name} FAILED: {exc}", file=sys.stderr)
    _write_manifest(out_root / "dataset", "dataset-gen", {
        "config": str(manifest_path), "seed": seed,
        "scenes": scenes, "envs": envs,
    })
    if failures:
        print(f"[dataset-gen] {len(failures)} cell(s) failed", file=sys.stderr)
        return 1
    return 0


def _generate_cell(cfg: SceneConfig, env_path: Path, cell: Path, target: float, seed: int):
    cell.mkdir(parents=True, exist_ok=True)
    scene = cfg.build_scene()
    cam = cfg.build_camera()
    from .geometry import primary_hits

    hits = primary_hits(scene, cam)
    env = load_env(env_path)
    light = project_env(env, cfg.degree)
    scale = target / reference_radiance(light)
    light = light.scaled(scale)
    env_scaled = type(env)(env.pixels * scale)

    bufs = render_buffers(scene, cam, hits=hits)
    tmap = compute_transport_map(scene, cam, cfg.transport_mode, cfg.degree,
                                 cfg.transport_samples, seed, hits=hits)
    ds = DecomposedScene(
        albedo=bufs["albedo"], transport=tmap,
        residual=empty_residual(cam.height, cam.width, cfg.degree),
        mask=bufs["mask"], normals=bufs["normal"], material=bufs["material"],
        residual_missing=True,
    )
    save_decomposed(ds, cell / "decomposed.shc")
    (cell / "light.txt").write_text(light.to_text())

    prt = reconstruct(ds, light)
    pt = render_pt(scene, env_scaled, cam, cfg.pt, hits=hits)
    (cell / "prt.pfm").write_bytes(formats.write_pfm(prt))
    (cell / "pt.pfm").write_bytes(formats.write_pfm(pt))
    for name, img in (("prt", prt), ("pt", pt)):
        disp = (tonemap(img) * 255.0).round().astype(np.uint8)
        (cell / f"{name}.png").write_bytes(formats.encode_png(disp))
    (cell / "cell.json").write_text(json.dumps(
        {"target_radiance": target, "scale": scale, "seed": seed}, indent=2) + "\n")


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise UsageError(f"not a directory: {d}")

    def collect(d):
        return {p.relative_to(d).as_posix(): p
                for p in sorted(d.rglob("*")) if p.suffix.lower() in (".pfm", ".png")}

    pred, gt = collect(pred_dir), collect(gt_dir)
    unpaired = sorted(set(pred) ^ set(gt))
    rows = {}
    for name in sorted(set(pred) & set(gt)):
        a, b = _load_image(pred[name]), _load_image(gt[name])
        mask = None
        if args.mask:
            mpath = gt[name].parent / "mask.pfm"
            if mpath.exists():
                mask = formats.read_pfm(mpath.read_bytes())
        rows[name] = image_metrics(np.clip(a, 0, 1), np.clip(b, 0, 1), mask).to_dict()
    report = {
        "pairs": rows,
        "unpaired": unpaired,
        "aggregate": {
            key: float(np.mean([r[key] for r in rows.values()])) if rows else None
            for key in ("l1_x100", "l2_x100", "psnr")
        },
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 1 if unpaired else 0


def _load_image(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if path.suffix.lower() == ".pfm":
        img = formats.read_pfm(raw)
        return img if img.ndim == 3 else np.repeat(img[..., None], 3, axis=-1)
    img = formats.decode_png(raw)
    return img[..., :3].astype(np.float64) / 255.0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.assets) if args.assets else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prtlight", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("project-env", help="project an HDR map to SH light coefficients")
    pe.add_argument("--env", required=True)
    pe.add_argument("--degree", type=int, default=4, choices=(2, 4))
    pe.add_argument("--normalize", type=float, default=None,
                    help="scale to this reference radiance")
    pe.add_argument("--out", required=True)
    pe.set_defaults(fn=cmd_project_env)

    tr = sub.add_parser("transport", help="precompute the decomposed scene buffers")
    tr.add_argument("--scene", required=True, help="scene YAML config")
    tr.add_argument("--mode", choices=[m.value for m in TransportMode], default=None)
    tr.add_argument("--samples", type=int, default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--degree", type=int, default=None, choices=(2, 4))
    tr.add_argument("--out", required=True)
    tr.set_defaults(fn=cmd_transport)

    fr = sub.add_parser("fit-residual", help="ridge-fit the residual against path tracing")
    fr.add_argument("--scene", required=True, help="scene YAML config (with environment)")
    fr.add_argument("--decomposed", required=True, help="input .shc from `transport`")
    fr.add_argument("--train-lights", type=int, default=40)
    fr.add_argument("--lambda", dest="ridge", type=float, default=1e-4)
    fr.add_argument("--spp", type=int, default=128)
    fr.add_argument("--sampling", choices=("cosine", "uniform", "env"), default="cosine")
    fr.add_argument("--out", required=True)
    fr.set_defaults(fn=cmd_fit_residual)

    rl = sub.add_parser("relight", help="render a decomposed scene under a new light")
    rl.add_argument("--scene", required=True, help="decomposed .shc")
    rl.add_argument("--env", default=None, help=".hdr/.pfm environment")
    rl.add_argument("--light", default=None, help="light .txt coefficients")
    rl.add_argument("--normalize", type=float, default=None)
    rl.add_argument("--rotation", default="0,0,0", help="yaw,pitch,roll degrees")
    rl.add_argument("--exposure", type=float, default=0.0)
    rl.add_argument("--gamma", type=float, default=2.2)
    rl.add_argument("--out", required=True)
    rl.set_defaults(fn=cmd_relight)

    dg = sub.add_parser("dataset-gen", help="generate a scene x illumination grid")
    dg.add_argument("--config", required=True)
    dg.add_argument("--out", required=True)
    dg.set_defaults(fn=cmd_dataset_gen)

    ev = sub.add_parser("eval", help="image metrics between two directories")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    mask = ev.add_mutually_exclusive_group()
    mask.add_argument("--mask", dest="mask", action="store_true", default=True)
    mask.add_argument("--no-mask", dest="mask", action="store_false")
    ev.add_argument("--out", default=None)
    ev.set_defaults(fn=cmd_eval)

    sv = sub.add_parser("serve", help="run the relighting HTTP service")
    sv.add_argument("--port", type=int, default=8050)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--assets", default=None)
    sv.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
