"""Triangle scenes, BVH ray casting, visibility, and primary-hit buffers.

Scenes are z-up. Hot loops (BVH traversal, Moller-Trumbore) are numba
kernels over flat arrays; everything above them is plain numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .brdf import Material

LEAF_SIZE = 4
SHADOW_EPS_SCALE = 1e-4  # of the scene bounding-box diagonal


@dataclass
class SceneMaterial:
    """Material with an optional albedo texture sampled by uv."""

    base: Material = field(default_factory=Material)
    albedo_map: np.ndarray | None = None  # (H, W, 3) linear float

    def albedo_at(self, uv: np.ndarray) -> np.ndarray:
        """Albedo for uv array (..., 2); nearest-texel lookup, repeat wrap."""
        if self.albedo_map is None:
            return np.broadcast_to(
                np.asarray(self.base.albedo, dtype=np.float64), uv.shape[:-1] + (3,)
            ).copy()
        h, w = self.albedo_map.shape[:2]
        u = np.mod(uv[..., 0], 1.0)
        v = np.mod(uv[..., 1], 1.0)
        xi = np.minimum((u * w).astype(np.int64), w - 1)
        yi = np.minimum(((1.0 - v) * h).astype(np.int64), h - 1)
        return self.albedo_map[yi, xi].astype(np.float64)


@dataclass
class Bvh:
    bounds: np.ndarray      # (N, 6) node AABBs
    left_first: np.ndarray  # (N,) child index or first sorted-tri index
    count: np.ndarray       # (N,) 0 for internal nodes, leaf tri count otherwise
    v0: np.ndarray          # (T, 3) sorted triangle data
    e1: np.ndarray
    e2: np.ndarray
    prim: np.ndarray        # (T,) sorted index -> original triangle index
    cam_visible: np.ndarray  # (T,) uint8, in sorted order


@dataclass
class TriScene:
    positions: np.ndarray              # (V, 3)
    triangles: np.ndarray              # (T, 3) int32
    normals: np.ndarray                # (V, 3) unit shading normals
    uvs: np.ndarray                    # (V, 2)
    tri_material: np.ndarray           # (T,) int32 into materials
    materials: list[SceneMaterial]
    camera_visible: np.ndarray | None = None  # (T,) bool; occluder-only tris False
    bvh: Bvh | None = None

    def __post_init__(self):
        t = self.triangles
        if t.size and (t.min() < 0 or t.max() >= len(self.positions)):
            raise ValueError("triangle indices out of range")
        if self.camera_visible is None:
            self.camera_visible = np.ones(len(self.triangles), dtype=bool)

    @property
    def tri_count(self) -> int:
        return len(self.triangles)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.positions.min(axis=0), self.positions.max(axis=0)

    def shadow_eps(self) -> float:
        lo, hi = self.bbox()
        return SHADOW_EPS_SCALE * float(np.linalg.norm(hi - lo))


@dataclass
class SurfacePoint:
    position: np.ndarray
    normal: np.ndarray
    uv: np.ndarray
    material: Material


@dataclass
class Camera:
    """Pinhole camera with orthonormal frame; image rows scan top to bottom."""

    origin: np.ndarray
    right: np.ndarray
    up: np.ndarray
    forward: np.ndarray
    vfov_deg: float
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.vfov_deg < 180.0):
            raise ValueError("vertical FOV must be in (0, 180) degrees")
        if self.width < 1 or self.height < 1:
            raise ValueError("image must be at least 1x1")

    @classmethod
    def look_at(cls, origin, target, up=(0.0, 0.0, 1.0), vfov_deg=45.0, width=128, height=128):
        origin = np.asarray(origin, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - origin
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=np.float64))
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        return cls(origin, right, true_up, fwd, vfov_deg, width, height)

    def ray_dirs(self) -> np.ndarray:
        """Unit directions through all pixel centers, shape (H, W, 3)."""
        tan_v = math.tan(math.radians(self.vfov_deg) / 2.0)
        aspect = self.width / self.height
        sx = (np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0
        sy = 1.0 - (np.arange(self.height) + 0.5) / self.height * 2.0
        xx, yy = np.meshgrid(sx * tan_v * aspect, sy * tan_v)
        d = (
            self.forward[None, None, :]
            + xx[..., None] * self.right[None, None, :]
            + yy[..., None] * self.up[None, None, :]
        )
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# BVH construction
# ---------------------------------------------------------------------------


def build_bvh(scene: TriScene) -> TriScene:
    """Attach a median-split BVH; queries then match brute force exactly."""
    if scene.tri_count < 1:
        raise ValueError("cannot build a BVH over an empty scene")
    tris = scene.triangles
    p = scene.positions
    v0 = p[tris[:, 0]]
    v1 = p[tris[:, 1]]
    v2 = p[tris[:, 2]]
    tmin = np.minimum(np.minimum(v0, v1), v2)
    tmax = np.maximum(np.maximum(v0, v1), v2)
    centroid = (tmin + tmax) * 0.5

    order = np.arange(scene.tri_count)
    bounds_list: list[np.ndarray] = []
    left_first: list[int] = []
    count: list[int] = []

    def add_node(lo, hi):
        node = len(bounds_list)
        idx = order[lo:hi]
        bounds_list.append(np.concatenate([tmin[idx].min(axis=0), tmax[idx].max(axis=0)]))
        left_first.append(0)
        count.append(0)
        if hi - lo <= LEAF_SIZE:
            left_first[node] = lo
            count[node] = hi - lo
            return node
        c = centroid[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        if np.ptp(c[:, axis]) < 1e-12:
            left_first[node] = lo
            count[node] = hi - lo
            return node
        mid = (hi - lo) // 2
        sel = np.argpartition(c[:, axis], mid)
        order[lo:hi] = idx[sel]
        add_node(lo, lo + mid)  # left child sits at node+1 in depth-first order
        right = add_node(lo + mid, hi)
        left_first[node] = right
        return node

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10000))
    try:
        add_node(0, scene.tri_count)
    finally:
        sys.setrecursionlimit(old)

    # children are (node+1, left_first[node]); store the right child instead
    scene.bvh = Bvh(
        bounds=np.asarray(bounds_list, dtype=np.float64),
        left_first=np.asarray(left_first, dtype=np.int64),
        count=np.asarray(count, dtype=np.int64),
        v0=np.ascontiguousarray(v0[order]),
        e1=np.ascontiguousarray((v1 - v0)[order]),
        e2=np.ascontiguousarray((v2 - v0)[order]),
        prim=order.astype(np.int64),
        cam_visible=scene.camera_visible[order].astype(np.uint8),
    )
    return scene


# ---------------------------------------------------------------------------
# Ray kernels
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True, error_model="numpy")
def _node_near(bounds, node, ox, oy, oz, ix, iy, iz, best):
    t1 = (bounds[node, 0] - ox) * ix
    t2 = (bounds[node, 3] - ox) * ix
    tn = min(t1, t2)
    tf = max(t1, t2)
    t1 = (bounds[node, 1] - oy) * iy
    t2 = (bounds[node, 4] - oy) * iy
    tn = max(tn, min(t1, t2))
    tf = min(tf, max(t1, t2))
    t1 = (bounds[node, 2] - oz) * iz
    t2 = (bounds[node, 5] - oz) * iz
    tn = max(tn, min(t1, t2))
    tf = min(tf, max(t1, t2))
    if tf < tn or tf < 0.0 or tn > best:
        return np.inf
    return tn


@njit(cache=True, nogil=True, error_model="numpy")
def _closest_hit(bounds, left_first, count, v0, e1, e2, cam_visible, camera_ray,
                 orig, dirs, tmin, out_t, out_prim, out_u, out_v):
    stack = np.empty(128, dtype=np.int64)
    for r in range(orig.shape[0]):
        ox, oy, oz = orig[r, 0], orig[r, 1], orig[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        ix = 1.0 / dx
        iy = 1.0 / dy
        iz = 1.0 / dz
        best = np.inf
        best_prim = -1
        best_u = 0.0
        best_v = 0.0
        if _node_near(bounds, 0, ox, oy, oz, ix, iy, iz, best) < np.inf:
            sp = 0
            stack[0] = 0
            sp = 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                if count[node] > 0:
                    first = left_first[node]
                    for k in range(first, first + count[node]):
                        if camera_ray and cam_visible[k] == 0:
                            continue
                        px = dy * e2[k, 2] - dz * e2[k, 1]
                        py = dz * e2[k, 0] - dx * e2[k, 2]
                        pz = dx * e2[k, 1] - dy * e2[k, 0]
                        det = e1[k, 0] * px + e1[k, 1] * py + e1[k, 2] * pz
                        if abs(det) < 1e-14:
                            continue
                        inv = 1.0 / det
                        sx = ox - v0[k, 0]
                        sy = oy - v0[k, 1]
                        sz = oz - v0[k, 2]
                        u = (sx * px + sy * py + sz * pz) * inv
                        if u < 0.0 or u > 1.0:
                            continue
                        qx = sy * e1[k, 2] - sz * e1[k, 1]
                        qy = sz * e1[k, 0] - sx * e1[k, 2]
                        qz = sx * e1[k, 1] - sy * e1[k, 0]
                        v = (dx * qx + dy * qy + dz * qz) * inv
                        if v < 0.0 or u + v > 1.0:
                            continue
                        t = (e2[k, 0] * qx + e2[k, 1] * qy + e2[k, 2] * qz) * inv
                        if tmin < t < best:
                            best = t
                            best_prim = k
                            best_u = u
                            best_v = v
                else:
                    n1 = node + 1
                    n2 = left_first[node]
                    d1 = _node_near(bounds, n1, ox, oy, oz, ix, iy, iz, best)
                    d2 = _node_near(bounds, n2, ox, oy, oz, ix, iy, iz, best)
                    if d1 > d2:
                        n1, n2 = n2, n1
                        d1, d2 = d2, d1
                    if d2 < np.inf:
                        stack[sp] = n2
                        sp += 1
                    if d1 < np.inf:
                        stack[sp] = n1
                        sp += 1
        out_t[r] = best
        out_prim[r] = best_prim
        out_u[r] = best_u
        out_v[r] = best_v


@njit(cache=True, nogil=True, error_model="numpy")
def _any_hit(bounds, left_first, count, v0, e1, e2, orig, dirs, tmin, tmax, out):
    stack = np.empty(128, dtype=np.int64)
    for r in range(orig.shape[0]):
        ox, oy, oz = orig[r, 0], orig[r, 1], orig[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        ix = 1.0 / dx
        iy = 1.0 / dy
        iz = 1.0 / dz
        blocked = False
        if _node_near(bounds, 0, ox, oy, oz, ix, iy, iz, tmax) < np.inf:
            stack[0] = 0
            sp = 1
            while sp > 0 and not blocked:
                sp -= 1
                node = stack[sp]
                if count[node] > 0:
                    first = left_first[node]
                    for k in range(first, first + count[node]):
                        px = dy * e2[k, 2] - dz * e2[k, 1]
                        py = dz * e2[k, 0] - dx * e2[k, 2]
                        pz = dx * e2[k, 1] - dy * e2[k, 0]
                        det = e1[k, 0] * px + e1[k, 1] * py + e1[k, 2] * pz
                        if abs(det) < 1e-14:
                            continue
                        inv = 1.0 / det
                        sx = ox - v0[k, 0]
                        sy = oy - v0[k, 1]
                        sz = oz - v0[k, 2]
                        u = (sx * px + sy * py + sz * pz) * inv
                        if u < 0.0 or u > 1.0:
                            continue
                        qx = sy * e1[k, 2] - sz * e1[k, 1]
                        qy = sz * e1[k, 0] - sx * e1[k, 2]
                        qz = sx * e1[k, 1] - sy * e1[k, 0]
                        v = (dx * qx + dy * qy + dz * qz) * inv
                        if v < 0.0 or u + v > 1.0:
                            continue
                        t = (e2[k, 0] * qx + e2[k, 1] * qy + e2[k, 2] * qz) * inv
                        if tmin < t < tmax:
                            blocked = True
                            break
                else:
                    n1 = node + 1
                    n2 = left_first[node]
                    if _node_near(bounds, n2, ox, oy, oz, ix, iy, iz, tmax) < np.inf:
                        stack[sp] = n2
                        sp += 1
                    if _node_near(bounds, n1, ox, oy, oz, ix, iy, iz, tmax) < np.inf:
                        stack[sp] = n1
                        sp += 1
        out[r] = 1 if blocked else 0


def _require_bvh(scene: TriScene) -> Bvh:
    if scene.bvh is None:
        build_bvh(scene)
    return scene.bvh


def raycast(scene: TriScene, orig: np.ndarray, dirs: np.ndarray, tmin: float = 0.0,
            camera_ray: bool = False):
    """Nearest hit for each ray. Returns (t, prim, u, v); prim -1 on miss."""
    b = _require_bvh(scene)
    orig = np.ascontiguousarray(orig, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = orig.shape[0]
    t = np.empty(n)
    prim = np.empty(n, dtype=np.int64)
    u = np.empty(n)
    v = np.empty(n)
    _closest_hit(b.bounds, b.left_first, b.count, b.v0, b.e1, b.e2, b.cam_visible,
                 camera_ray, orig, dirs, tmin, t, prim, u, v)
    hit = prim >= 0
    prim_orig = np.where(hit, b.prim[np.maximum(prim, 0)], -1)
    return t, prim_orig, u, v


def occluded(scene: TriScene, orig: np.ndarray, dirs: np.ndarray, tmin: float,
             tmax: float = np.inf) -> np.ndarray:
    """Boolean per ray: is anything hit within (tmin, tmax)."""
    b = _require_bvh(scene)
    orig = np.ascontiguousarray(orig, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    out = np.empty(orig.shape[0], dtype=np.uint8)
    _any_hit(b.bounds, b.left_first, b.count, b.v0, b.e1, b.e2, orig, dirs, tmin, tmax, out)
    return out.astype(bool)


def brute_force_raycast(scene: TriScene, orig: np.ndarray, dirs: np.ndarray,
                        tmin: float = 0.0):
    """Reference nearest-hit by looping all triangles (no BVH)."""
    p = scene.positions
    tr = scene.triangles
    v0 = p[tr[:, 0]]
    e1 = p[tr[:, 1]] - v0
    e2 = p[tr[:, 2]] - v0
    orig = np.asarray(orig, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = orig.shape[0]
    best_t = np.full(n, np.inf)
    best_prim = np.full(n, -1, dtype=np.int64)
    for k in range(scene.tri_count):
        pvec = np.cross(dirs, e2[k])
        det = pvec @ e1[k]
        ok = np.abs(det) >= 1e-14
        inv = np.where(ok, 1.0 / np.where(det == 0.0, 1.0, det), 0.0)
        tvec = orig - v0[k]
        uu = np.einsum("ij,ij->i", tvec, pvec) * inv
        qvec = np.cross(tvec, e1[k])
        vv = np.einsum("ij,ij->i", dirs, qvec) * inv
        tt = (qvec @ e2[k]) * inv
        ok &= (uu >= 0) & (uu <= 1) & (vv >= 0) & (uu + vv <= 1) & (tt > tmin) & (tt < best_t)
        best_t = np.where(ok, tt, best_t)
        best_prim = np.where(ok, k, best_prim)
    return best_t, best_prim


# ---------------------------------------------------------------------------
# Surface queries
# ---------------------------------------------------------------------------


def visibility(scene: TriScene, x, wi, n=None) -> int:
    """1 iff nothing occludes the ray (x + eps*n, wi) to infinity."""
    x = np.asarray(x, dtype=np.float64)
    wi = np.asarray(wi, dtype=np.float64)
    eps = scene.shadow_eps()
    if n is not None:
        n = np.asarray(n, dtype=np.float64)
        side = 1.0 if float(n @ wi) >= 0.0 else -1.0
        origin = x + side * eps * n
        t0 = 0.0
    else:
        origin = x
        t0 = eps
    return 0 if occluded(scene, origin[None, :], wi[None, :], t0)[0] else 1


@dataclass
class PrimaryHits:
    """Per-pixel surface data at camera-ray hits; zeros where rays miss."""

    hit: np.ndarray          # (H, W) bool
    t: np.ndarray            # (H, W)
    position: np.ndarray     # (H, W, 3)
    normal: np.ndarray       # (H, W, 3)
    uv: np.ndarray           # (H, W, 2)
    tri: np.ndarray          # (H, W) int
    wo: np.ndarray           # (H, W, 3) toward the camera
    albedo: np.ndarray       # (H, W, 3)
    roughness: np.ndarray    # (H, W)
    metallic: np.ndarray     # (H, W)
    transparency: np.ndarray  # (H, W)

    @property
    def shape(self):
        return self.hit.shape

    def point(self, y: int, x: int) -> SurfacePoint | None:
        if not self.hit[y, x]:
            return None
        return SurfacePoint(
            position=self.position[y, x].copy(),
            normal=self.normal[y, x].copy(),
            uv=self.uv[y, x].copy(),
            material=Material(
                albedo=tuple(self.albedo[y, x]),
                roughness=float(self.roughness[y, x]),
                metallic=float(self.metallic[y, x]),
                transparency=float(self.transparency[y, x]),
            ),
        )


def primary_hits(scene: TriScene, cam: Camera) -> PrimaryHits:
    """Cast one ray per pixel center and gather surface data at the hits."""
    h, w = cam.height, cam.width
    dirs = cam.ray_dirs().reshape(-1, 3)
    orig = np.broadcast_to(cam.origin, dirs.shape)
    t, prim, bu, bv = raycast(scene, orig, dirs, tmin=1e-9, camera_ray=True)
    hit = prim >= 0
    safe = np.maximum(prim, 0)

    tris = scene.triangles[safe]
    w0 = (1.0 - bu - bv)[:, None]
    t_safe = np.where(hit, t, 0.0)
    pos = np.where(hit[:, None], orig + t_safe[:, None] * dirs, 0.0)
    nrm = (
        w0 * scene.normals[tris[:, 0]]
        + bu[:, None] * scene.normals[tris[:, 1]]
        + bv[:, None] * scene.normals[tris[:, 2]]
    )
    nlen = np.linalg.norm(nrm, axis=-1, keepdims=True)
    nrm = nrm / np.maximum(nlen, 1e-12)
    wo = -dirs
    # grazing pixels: keep the shading normal in the camera hemisphere
    flip = (np.einsum("ij,ij->i", nrm, wo) <= 0.0) & hit
    nrm[flip] = -nrm[flip]
    uv = (
        w0 * scene.uvs[tris[:, 0]]
        + bu[:, None] * scene.uvs[tris[:, 1]]
        + bv[:, None] * scene.uvs[tris[:, 2]]
    )

    mat_idx = scene.tri_material[safe]
    albedo = np.zeros((h * w, 3))
    rough = np.zeros(h * w)
    metal = np.zeros(h * w)
    transp = np.zeros(h * w)
    for mi, mat in enumerate(scene.materials):
        sel = hit & (mat_idx == mi)
        if not sel.any():
            continue
        albedo[sel] = mat.albedo_at(uv[sel])
        rough[sel] = mat.base.roughness
        metal[sel] = mat.base.metallic
        transp[sel] = mat.base.transparency

    def g2(a):
        return a.reshape(h, w)

    def g3(a):
        return a.reshape(h, w, -1)

    mask3 = hit[:, None]
    return PrimaryHits(
        hit=g2(hit),
        t=g2(np.where(hit, t, 0.0)),
        position=g3(pos),
        normal=g3(np.where(mask3, nrm, 0.0)),
        uv=g3(np.where(mask3, uv, 0.0)),
        tri=g2(np.where(hit, prim, -1)),
        wo=g3(wo),
        albedo=g3(np.where(mask3, albedo, 0.0)),
        roughness=g2(np.where(hit, rough, 0.0)),
        metallic=g2(np.where(hit, metal, 0.0)),
        transparency=g2(np.where(hit, transp, 0.0)),
    )
