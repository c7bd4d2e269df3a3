"""Procedural meshes and a Wavefront OBJ subset loader.

Built-ins (sphere, plane, capsule, capsule person) let every test and demo
run without purchased assets while exercising the same transport math.
"""

from __future__ import annotations

import math

import numpy as np

from .brdf import Material
from .geometry import SceneMaterial, TriScene


def _grid_faces(rows: int, cols: int, wrap: bool) -> np.ndarray:
    """Quad-grid triangulation over a (rows+1) x cols' vertex lattice."""
    ncol = cols if wrap else cols + 1
    faces = []
    for r in range(rows):
        for c in range(cols):
            c1 = (c + 1) % ncol if wrap else c + 1
            a = r * ncol + c
            b = r * ncol + c1
            d = (r + 1) * ncol + c
            e = (r + 1) * ncol + c1
            faces.append((a, e, b))
            faces.append((a, d, e))
    return np.asarray(faces, dtype=np.int32)


def uv_sphere(center=(0.0, 0.0, 0.0), radius=1.0, material: Material | None = None,
              rings=24, segments=48) -> TriScene:
    """Smooth-shaded lat-long sphere; poles at +z/-z."""
    center = np.asarray(center, dtype=np.float64)
    vs, ns, uvs = [], [], []
    for r in range(rings + 1):
        theta = math.pi * r / rings
        for s in range(segments + 1):
            phi = 2.0 * math.pi * s / segments
            n = np.array(
                [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
            )
            vs.append(center + radius * n)
            ns.append(n)
            uvs.append((phi / (2 * math.pi), 1.0 - theta / math.pi))
    faces = _grid_faces(rings, segments, wrap=False)
    return TriScene(
        positions=np.asarray(vs),
        triangles=faces,
        normals=np.asarray(ns),
        uvs=np.asarray(uvs),
        tri_material=np.zeros(len(faces), dtype=np.int32),
        materials=[SceneMaterial(material or Material())],
    )


def ground_plane(z=0.0, half_size=10.0, material: Material | None = None,
                 occluder_only=False) -> TriScene:
    """Horizontal plane at height z; occluder_only planes shadow but never
    appear in camera rays."""
    s = half_size
    pos = np.array([[-s, -s, z], [s, -s, z], [s, s, z], [-s, s, z]], dtype=np.float64)
    tris = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    nrm = np.tile([0.0, 0.0, 1.0], (4, 1))
    uv = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.float64)
    return TriScene(
        positions=pos,
        triangles=tris,
        normals=nrm,
        uvs=uv,
        tri_material=np.zeros(2, dtype=np.int32),
        materials=[SceneMaterial(material or Material(albedo=(0.8, 0.8, 0.8)))],
        camera_visible=np.full(2, not occluder_only),
    )


def capsule(p0=(0.0, 0.0, 0.0), p1=(0.0, 0.0, 1.0), radius=0.3,
            material: Material | None = None, rings=16, segments=32) -> TriScene:
    """Cylinder with hemispherical caps along the p0->p1 axis."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    axis = p1 - p0
    length = float(np.linalg.norm(axis))
    if length < 1e-12:
        return uv_sphere(p0, radius, material, rings, segments)
    w = axis / length
    # frame perpendicular to the axis
    helper = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(w, helper)
    u /= np.linalg.norm(u)
    v = np.cross(w, u)

    vs, ns, uvs = [], [], []
    half = rings // 2
    # bottom hemisphere (theta pi..pi/2), cylinder wall, top hemisphere
    for r in range(half + 1):
        theta = math.pi - (math.pi / 2) * r / half
        for s in range(segments + 1):
            phi = 2 * math.pi * s / segments
            n = (
                math.sin(theta) * math.cos(phi) * u
                + math.sin(theta) * math.sin(phi) * v
                + math.cos(theta) * w
            )
            vs.append(p0 + radius * n)
            ns.append(n)
            uvs.append((s / segments, 0.25 * r / half))
    for r in range(2):
        h = r * length
        for s in range(segments + 1):
            phi = 2 * math.pi * s / segments
            n = math.cos(phi) * u + math.sin(phi) * v
            vs.append(p0 + h * w + radius * n)
            ns.append(n)
            uvs.append((s / segments, 0.25 + 0.5 * r))
    for r in range(half + 1):
        theta = (math.pi / 2) * (1.0 - r / half)
        for s in range(segments + 1):
            phi = 2 * math.pi * s / segments
            n = (
                math.sin(theta) * math.cos(phi) * u
                + math.sin(theta) * math.sin(phi) * v
                + math.cos(theta) * w
            )
            vs.append(p1 + radius * n)
            ns.append(n)
            uvs.append((s / segments, 0.75 + 0.25 * r / half))
    rows = (half + 1) * 2 + 2 - 1
    faces = _grid_faces(rows, segments, wrap=False)
    return TriScene(
        positions=np.asarray(vs),
        triangles=faces,
        normals=np.asarray(ns),
        uvs=np.asarray(uvs),
        tri_material=np.zeros(len(faces), dtype=np.int32),
        materials=[SceneMaterial(material or Material())],
    )


def capsule_person(base=(0.0, 0.0, 0.0), height=1.8,
                   body_material: Material | None = None,
                   head_material: Material | None = None) -> TriScene:
    """Stylized standing figure: capsule torso + legs, sphere head."""
    base = np.asarray(base, dtype=np.float64)
    up = np.array([0.0, 0.0, 1.0])
    leg_r = 0.055 * height
    torso_r = 0.16 * height
    head_r = 0.12 * height
    body = body_material or Material(albedo=(0.55, 0.42, 0.35), roughness=0.6)
    head = head_material or Material(albedo=(0.8, 0.62, 0.52), roughness=0.5)
    parts = [
        capsule(base + np.array([-0.08 * height, 0, leg_r]),
                base + np.array([-0.08 * height, 0, 0.48 * height]), leg_r, body),
        capsule(base + np.array([0.08 * height, 0, leg_r]),
                base + np.array([0.08 * height, 0, 0.48 * height]), leg_r, body),
        capsule(base + 0.45 * height * up, base + 0.72 * height * up, torso_r, body),
        uv_sphere(base + (0.88 * height) * up, head_r, head),
    ]
    return merge_scenes(parts)


def merge_scenes(parts: list[TriScene]) -> TriScene:
    """Concatenate meshes; material lists are appended and reindexed."""
    if not parts:
        raise ValueError("nothing to merge")
    pos, tri, nrm, uv, mat_idx, vis = [], [], [], [], [], []
    materials: list[SceneMaterial] = []
    v_off = 0
    for p in parts:
        pos.append(p.positions)
        tri.append(p.triangles + v_off)
        nrm.append(p.normals)
        uv.append(p.uvs)
        mat_idx.append(p.tri_material + len(materials))
        vis.append(p.camera_visible)
        materials.extend(p.materials)
        v_off += len(p.positions)
    return TriScene(
        positions=np.concatenate(pos),
        triangles=np.concatenate(tri).astype(np.int32),
        normals=np.concatenate(nrm),
        uvs=np.concatenate(uv),
        tri_material=np.concatenate(mat_idx).astype(np.int32),
        materials=materials,
        camera_visible=np.concatenate(vis),
    )


def load_obj(text: str, material: Material | None = None) -> TriScene:
    """Parse the v/vn/vt/f OBJ subset. Faces are fan-triangulated; shading
    normals are area-weighted averages when the file has no vn records."""
    positions, normals, uvs = [], [], []
    faces = []  # list of (vi, ti, ni) triples
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            positions.append([float(x) for x in parts[1:4]])
        elif tag == "vn":
            normals.append([float(x) for x in parts[1:4]])
        elif tag == "vt":
            uvs.append([float(x) for x in parts[1:3]])
        elif tag == "f":
            corners = []
            for spec in parts[1:]:
                bits = spec.split("/")
                vi = int(bits[0])
                ti = int(bits[1]) if len(bits) > 1 and bits[1] else 0
                ni = int(bits[2]) if len(bits) > 2 and bits[2] else 0
                corners.append((vi, ti, ni))
            if len(corners) < 3:
                raise ValueError(f"face with fewer than 3 vertices at line {lineno}")
            for k in range(1, len(corners) - 1):
                faces.append((corners[0], corners[k], corners[k + 1]))
        # other tags (o, g, s, usemtl, mtllib) are ignored

    if not positions or not faces:
        raise ValueError("OBJ contains no geometry")
    positions = np.asarray(positions, dtype=np.float64)

    def resolve(idx, n):
        return idx - 1 if idx > 0 else n + idx

    key_to_vertex: dict[tuple[int, int, int], int] = {}
    out_pos, out_nrm, out_uv, out_tri = [], [], [], []
    for tri in faces:
        ids = []
        for vi, ti, ni in tri:
            key = (vi, ti, ni)
            if key not in key_to_vertex:
                key_to_vertex[key] = len(out_pos)
                out_pos.append(positions[resolve(vi, len(positions))])
                out_uv.append(uvs[resolve(ti, len(uvs))] if ti else (0.0, 0.0))
                out_nrm.append(normals[resolve(ni, len(normals))] if ni else None)
            ids.append(key_to_vertex[key])
        out_tri.append(ids)

    out_pos = np.asarray(out_pos)
    out_tri = np.asarray(out_tri, dtype=np.int32)
    if any(n is None for n in out_nrm):
        nrm = np.zeros_like(out_pos)
        v0 = out_pos[out_tri[:, 0]]
        fn = np.cross(out_pos[out_tri[:, 1]] - v0, out_pos[out_tri[:, 2]] - v0)
        for c in range(3):
            np.add.at(nrm, out_tri[:, c], fn)
        nrm /= np.maximum(np.linalg.norm(nrm, axis=-1, keepdims=True), 1e-12)
    else:
        nrm = np.asarray([np.asarray(n, dtype=np.float64) for n in out_nrm])
        nrm /= np.maximum(np.linalg.norm(nrm, axis=-1, keepdims=True), 1e-12)

    return TriScene(
        positions=out_pos,
        triangles=out_tri,
        normals=nrm,
        uvs=np.asarray(out_uv, dtype=np.float64),
        tri_material=np.zeros(len(out_tri), dtype=np.int32),
        materials=[SceneMaterial(material or Material())],
    )
