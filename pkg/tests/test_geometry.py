"""Scenes, BVH correctness against brute force, visibility, primary hits."""

import math

import numpy as np
import pytest

from prtlight.brdf import Material
from prtlight.geometry import (
    Camera,
    SceneMaterial,
    TriScene,
    build_bvh,
    brute_force_raycast,
    occluded,
    primary_hits,
    raycast,
    visibility,
)
from prtlight.scenes import capsule, capsule_person, ground_plane, load_obj, merge_scenes, uv_sphere


def tri_soup(rng, count, extent=3.0, size=0.3):
    base = rng.uniform(-extent, extent, (count, 3))
    offs = rng.normal(scale=size, size=(count, 2, 3))
    pos = np.concatenate([base, base + offs[:, 0], base + offs[:, 1]]).reshape(3, count, 3)
    pos = np.transpose(pos, (1, 0, 2)).reshape(-1, 3)
    tris = np.arange(count * 3, dtype=np.int32).reshape(count, 3)
    nrm = np.tile([0.0, 0.0, 1.0], (count * 3, 1))
    return TriScene(
        positions=pos,
        triangles=tris,
        normals=nrm,
        uvs=np.zeros((count * 3, 2)),
        tri_material=np.zeros(count, dtype=np.int32),
        materials=[SceneMaterial(Material())],
    )


class TestBvh:
    def test_empty_scene_rejected(self):
        scene = TriScene(
            positions=np.zeros((0, 3)),
            triangles=np.zeros((0, 3), dtype=np.int32),
            normals=np.zeros((0, 3)),
            uvs=np.zeros((0, 2)),
            tri_material=np.zeros(0, dtype=np.int32),
            materials=[],
        )
        with pytest.raises(ValueError):
            build_bvh(scene)

    def test_single_triangle_centroid_hit(self):
        scene = TriScene(
            positions=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
            triangles=np.array([[0, 1, 2]], dtype=np.int32),
            normals=np.tile([0.0, 0, 1], (3, 1)),
            uvs=np.zeros((3, 2)),
            tri_material=np.zeros(1, dtype=np.int32),
            materials=[SceneMaterial(Material())],
        )
        build_bvh(scene)
        orig = np.array([[1 / 3, 1 / 3, 1.0]])
        dirs = np.array([[0.0, 0.0, -1.0]])
        t, prim, _, _ = raycast(scene, orig, dirs)
        tb, pb = brute_force_raycast(scene, orig, dirs)
        assert prim[0] == pb[0] == 0
        assert t[0] == pytest.approx(tb[0], rel=1e-12)
        assert t[0] == pytest.approx(1.0, rel=1e-12)

    def test_matches_brute_force_on_soup(self, rng):
        scene = build_bvh(tri_soup(rng, 10_000))
        orig = rng.uniform(-4, 4, (1000, 3))
        dirs = rng.normal(size=(1000, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        t, prim, _, _ = raycast(scene, orig, dirs)
        tb, pb = brute_force_raycast(scene, orig, dirs)
        assert (prim == pb).all()
        hit = prim >= 0
        np.testing.assert_allclose(t[hit], tb[hit], rtol=1e-6)

    def test_degenerate_triangle_never_hit(self):
        scene = TriScene(
            positions=np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]]),  # collinear
            triangles=np.array([[0, 1, 2]], dtype=np.int32),
            normals=np.tile([0.0, 0, 1], (3, 1)),
            uvs=np.zeros((3, 2)),
            tri_material=np.zeros(1, dtype=np.int32),
            materials=[SceneMaterial(Material())],
        )
        build_bvh(scene)
        orig = np.array([[1.0, 0.0, 1.0]])
        dirs = np.array([[0.0, 0.0, -1.0]])
        _, prim, _, _ = raycast(scene, orig, dirs)
        assert prim[0] == -1

    def test_out_of_range_indices_rejected(self):
        with pytest.raises(ValueError):
            TriScene(
                positions=np.zeros((3, 3)),
                triangles=np.array([[0, 1, 5]], dtype=np.int32),
                normals=np.zeros((3, 3)),
                uvs=np.zeros((3, 2)),
                tri_material=np.zeros(1, dtype=np.int32),
                materials=[SceneMaterial(Material())],
            )


class TestVisibility:
    def test_sphere_top_sees_sky(self):
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0))
        assert visibility(scene, np.array([0, 0, 1.0]), np.array([0, 0, 1.0]),
                          np.array([0, 0, 1.0])) == 1

    def test_under_plane_blocked(self):
        scene = build_bvh(ground_plane(z=1.0, half_size=5.0))
        assert visibility(scene, np.array([0, 0, 0.0]), np.array([0, 0, 1.0])) == 0

    def test_matches_brute_force_grazing(self, rng):
        scene = build_bvh(merge_scenes([
            uv_sphere(center=(0, 0, 1.0), radius=1.0),
            ground_plane(z=0.0, half_size=6.0),
        ]))
        eps = scene.shadow_eps()
        point = np.array([1.5, 0.0, eps])  # on the ground next to the sphere
        for _ in range(50):
            d = rng.normal(size=3)
            d[2] = abs(d[2]) * 0.05 + 0.01  # grazing upward
            d /= np.linalg.norm(d)
            v = visibility(scene, point, d, np.array([0.0, 0.0, 1.0]))
            tb, pb = brute_force_raycast(scene, (point + eps * np.array([0, 0, 1.0]))[None],
                                         d[None], tmin=0.0)
            assert v == (0 if pb[0] >= 0 else 1)

    def test_convex_mesh_never_self_shadows(self, rng):
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0, rings=32, segments=64))
        for _ in range(100):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            assert visibility(scene, n, n, n) == 1

    def test_occluder_only_plane_shadows_but_hides(self):
        scene = build_bvh(merge_scenes([
            uv_sphere(center=(0, 0, 1.0), radius=0.5),
            ground_plane(z=0.0, half_size=5.0, occluder_only=True),
        ]))
        cam = Camera.look_at(origin=(0, -4, 0.2), target=(0, 0, 0.0), vfov_deg=40,
                             width=16, height=16)
        hits = primary_hits(scene, cam)
        # camera never sees the plane ...
        assert not hits.hit[-1].any()
        # ... but shadow rays still do
        assert occluded(scene, np.array([[0.0, 0.0, -1.0]]), np.array([[0.0, 0.0, 1.0]]),
                        1e-6)[0]


class TestPrimaryHits:
    def test_camera_looking_away_misses(self):
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0))
        cam = Camera.look_at(origin=(0, -5, 0), target=(0, -10, 0), vfov_deg=40,
                             width=8, height=8)
        hits = primary_hits(scene, cam)
        assert not hits.hit.any()
        assert np.all(hits.albedo == 0.0)

    def test_sphere_disk_radius(self):
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0, rings=48, segments=96))
        dist, vfov, res = 5.0, 40.0, 65
        cam = Camera.look_at(origin=(0, -dist, 0), target=(0, 0, 0), vfov_deg=vfov,
                             width=res, height=res)
        hits = primary_hits(scene, cam)
        # projected angular radius vs field of view
        ang = math.asin(1.0 / dist)
        expect_px = math.tan(ang) / math.tan(math.radians(vfov) / 2) * (res / 2)
        rows = hits.hit.any(axis=1).sum()
        assert rows / 2 == pytest.approx(expect_px, abs=1.5)

    def test_silhouette_normals_face_sideways(self):
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0, rings=64, segments=128))
        # aim the center pixel just inside the analytic tangent point so the
        # hit sits at the silhouette rather than a pixel-width inside it
        tangent = np.array([math.sqrt(1 - 1 / 36), -1 / 6, 0.0])
        cam = Camera.look_at(origin=(0, -6, 0), target=0.999 * tangent, vfov_deg=0.5,
                             width=3, height=3)
        hits = primary_hits(scene, cam)
        assert hits.hit[1, 1]
        n = hits.normal[1, 1]
        view = hits.wo[1, 1]
        angle = math.degrees(math.acos(abs(float(n @ view))))
        assert angle > 85.0  # within 5 degrees of perpendicular

    def test_center_pixel_normal_faces_camera(self):
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0, rings=64, segments=128))
        cam = Camera.look_at(origin=(0, -6, 0), target=(0, 0, 0), vfov_deg=30,
                             width=33, height=33)
        hits = primary_hits(scene, cam)
        n = hits.normal[16, 16]
        np.testing.assert_allclose(n, [0, -1, 0], atol=2e-2)

    def test_material_buffers_constant_sphere(self):
        mat = Material(albedo=(0.5, 0.25, 0.125), roughness=0.3, metallic=0.6,
                       transparency=0.1)
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0, material=mat))
        cam = Camera.look_at(origin=(0, -4, 0), target=(0, 0, 0), vfov_deg=30,
                             width=16, height=16)
        hits = primary_hits(scene, cam)
        inside = hits.hit
        assert inside.any()
        np.testing.assert_allclose(hits.albedo[inside],
                                   np.tile([0.5, 0.25, 0.125], (inside.sum(), 1)))
        np.testing.assert_allclose(hits.roughness[inside], 0.3)
        np.testing.assert_allclose(hits.metallic[inside], 0.6)
        np.testing.assert_allclose(hits.transparency[inside], 0.1)

    def test_point_accessor(self):
        scene = build_bvh(uv_sphere(center=(0, 0, 0), radius=1.0))
        cam = Camera.look_at(origin=(0, -4, 0), target=(0, 0, 0), vfov_deg=30,
                             width=9, height=9)
        hits = primary_hits(scene, cam)
        assert hits.point(0, 0) is None
        p = hits.point(4, 4)
        assert p is not None
        assert np.linalg.norm(p.position) == pytest.approx(1.0, abs=1e-6)
        assert abs(np.linalg.norm(p.normal) - 1.0) < 1e-5


class TestCamera:
    def test_invalid_fov(self):
        with pytest.raises(ValueError):
            Camera.look_at(origin=(0, -1, 0), target=(0, 0, 0), vfov_deg=0.0)
        with pytest.raises(ValueError):
            Camera.look_at(origin=(0, -1, 0), target=(0, 0, 0), vfov_deg=180.0)

    def test_invalid_resolution(self):
        with pytest.raises(ValueError):
            Camera.look_at(origin=(0, -1, 0), target=(0, 0, 0), width=0, height=4)

    def test_ray_dirs_unit_and_centered(self):
        cam = Camera.look_at(origin=(0, -5, 1), target=(0, 0, 1), vfov_deg=45,
                             width=17, height=17)
        d = cam.ray_dirs()
        np.testing.assert_allclose(np.linalg.norm(d, axis=-1), 1.0, atol=1e-12)
        np.testing.assert_allclose(d[8, 8], [0, 1, 0], atol=1e-12)


class TestProceduralAndObj:
    def test_capsule_and_person_build(self):
        c = capsule((0, 0, 0), (0, 0, 1), 0.3)
        assert c.tri_count > 100
        assert np.allclose(np.linalg.norm(c.normals, axis=1), 1.0, atol=1e-9)
        person = build_bvh(capsule_person())
        cam = Camera.look_at(origin=(0, -4, 1.0), target=(0, 0, 0.9), vfov_deg=45,
                             width=24, height=24)
        hits = primary_hits(person, cam)
        assert hits.hit.mean() > 0.05
        # head sphere above torso: hits near the top rows too
        assert hits.hit[:8].any()

    def test_obj_subset_roundtrip(self):
        text = """
# tetra-ish fixture
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
vt 0 0
vt 1 0
vt 0 1
vn 0 0 1
f 1/1/1 2/2/1 3/3/1
f 1/1 2/2 4/3
f 1 3 4
"""
        scene = load_obj(text)
        assert scene.tri_count == 3
        assert scene.positions.shape[1] == 3
        assert np.allclose(np.linalg.norm(scene.normals, axis=1), 1.0, atol=1e-9)

    def test_obj_quad_fan(self):
        text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
        scene = load_obj(text)
        assert scene.tri_count == 2

    def test_obj_no_geometry(self):
        with pytest.raises(ValueError):
            load_obj("# empty\n")
