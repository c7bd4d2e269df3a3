"""Spherical harmonics basis, projection, dot product, and rotation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prtlight import sh

# clamped-cosine zonal projection, frozen from an adaptive-quadrature oracle
# of int max(cos t, 0) Y_l0 sin t dt dphi (scipy.integrate.quad, err < 3e-14)
CLAMPED_ORACLE = {
    0: 0.8862269255,
    1: 1.0233267079,
    2: 0.4954159122,
    3: 0.0,
    4: -0.1107783657,
}


def random_dirs(rng, n):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


class TestEval:
    def test_dc_value(self):
        assert sh.eval_sh(0, 0, (0, 0, 1)) == pytest.approx(0.2820948, abs=1e-7)
        assert sh.eval_sh(0, 0, (1, 0, 0)) == pytest.approx(0.2820948, abs=1e-7)

    def test_band1_pole(self):
        assert sh.eval_sh(1, 0, (0, 0, 1)) == pytest.approx(0.4886025, abs=1e-7)
        assert sh.eval_sh(1, 1, (0, 0, 1)) == 0.0

    def test_band1_axes(self):
        # m=+1 tracks x, m=-1 tracks y under this convention
        assert sh.eval_sh(1, 1, (1, 0, 0)) == pytest.approx(0.4886025, abs=1e-7)
        assert sh.eval_sh(1, -1, (0, 1, 0)) == pytest.approx(0.4886025, abs=1e-7)

    def test_out_of_range_band(self):
        with pytest.raises(ValueError):
            sh.eval_sh(11, 0, (0, 0, 1))
        with pytest.raises(ValueError):
            sh.eval_sh(2, 3, (0, 0, 1))

    def test_non_unit_direction_rejected(self):
        with pytest.raises(ValueError):
            sh.eval_sh(1, 0, (0, 0, 2))

    def test_basis_matches_scalar(self, rng):
        dirs = random_dirs(rng, 16)
        basis = sh.eval_basis(dirs, 4)
        for l in range(5):
            for m in range(-l, l + 1):
                for k in range(4):
                    assert basis[k, sh.sh_index(l, m)] == pytest.approx(
                        sh.eval_sh(l, m, dirs[k]), abs=1e-12
                    )


class TestOrthonormality:
    def test_quadrature_gram_matrix(self):
        dirs, w = sh.LatLongQuadratureSampler(512, 256).directions_and_weights()
        basis = sh.eval_basis(dirs, 4)
        gram = (basis * w[:, None]).T @ basis
        assert np.abs(gram - np.eye(25)).max() < 1e-3

    def test_mc_orthonormality_within_standard_error(self):
        n = 100_000
        dirs, w = sh.MonteCarloSphereSampler(n, seed=5).directions_and_weights()
        basis = sh.eval_basis(dirs, 4)
        prods = basis[:, :, None] * basis[:, None, :]  # per-sample Yi*Yj
        est = np.einsum("m,mij->ij", w, prods)
        # 3 sigma of the MC estimator, per entry
        var = np.einsum("m,mij->ij", w**2, prods**2) * n / (n - 1) - est**2 / n
        sigma = np.sqrt(np.maximum(var, 1e-18))
        assert (np.abs(est - np.eye(25)) <= 3.0 * sigma + 1e-6).all()


class TestProjection:
    def test_constant_function(self):
        c = sh.project(lambda d: np.ones(len(d)), 4, sh.MonteCarloSphereSampler(50_000, 1))
        assert c[0] == pytest.approx(2.0 * math.sqrt(math.pi), abs=2e-3)
        assert np.abs(c[1:]).max() < 2e-3

    def test_projects_own_basis_to_unit_vector(self):
        f = lambda d: sh.eval_basis(d, 2)[:, sh.sh_index(2, 1)]
        c = sh.project(f, 2, sh.LatLongQuadratureSampler(512, 256))
        expect = np.zeros(9)
        expect[sh.sh_index(2, 1)] = 1.0
        np.testing.assert_allclose(c, expect, atol=1e-6)

    def test_clamped_cosine_matches_quadrature_oracle(self):
        c = sh.project(
            lambda d: np.maximum(d[:, 2], 0.0), 4, sh.LatLongQuadratureSampler(1024, 512)
        )
        for l, val in CLAMPED_ORACLE.items():
            assert c[sh.sh_index(l, 0)] == pytest.approx(val, abs=1e-4), f"band {l}"
        # non-zonal entries vanish for a zonal function
        zonal = [sh.sh_index(l, 0) for l in range(5)]
        rest = [i for i in range(25) if i not in zonal]
        assert np.abs(c[rest]).max() < 1e-6

    def test_analytic_clamped_cosine_agrees(self):
        c = sh.clamped_cosine_coeffs((0, 0, 1), 4)
        for l, val in CLAMPED_ORACLE.items():
            assert c[sh.sh_index(l, 0)] == pytest.approx(val, abs=1e-9)

    def test_non_finite_sample_reports_direction(self):
        def f(d):
            v = np.ones(len(d))
            v[3] = np.inf
            return v

        with pytest.raises(ArithmeticError, match="direction"):
            sh.project(f, 2, sh.MonteCarloSphereSampler(16, 0))

    def test_sampler_needs_samples(self):
        with pytest.raises(ValueError):
            sh.MonteCarloSphereSampler(0)


class TestDot:
    def test_unit_vectors(self):
        e0 = np.zeros(25)
        e0[0] = 1.0
        assert sh.dot(e0, e0) == 1.0
        assert sh.dot(np.zeros(25), np.ones(25)) == 0.0

    def test_degree_mismatch(self):
        with pytest.raises(ValueError):
            sh.dot(np.zeros(25), np.zeros(9))

    def test_shading_under_constant_light_is_c_pi(self):
        # int c * max(cos,0) dw = c*pi; frozen cross-check of the dot identity
        c = 0.7
        t = sh.clamped_cosine_coeffs((0, 0, 1), 4)
        light = np.zeros(25)
        light[0] = c * 2.0 * math.sqrt(math.pi)
        assert sh.dot(t, light) == pytest.approx(c * math.pi, rel=1e-12)

    @given(
        a=st.floats(-5, 5),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=30, deadline=None)
    def test_bilinearity(self, a, seed):
        r = np.random.default_rng(seed)
        t1, t2, l = r.normal(size=(3, 25))
        lhs = sh.dot(a * t1 + t2, l)
        rhs = a * sh.dot(t1, l) + sh.dot(t2, l)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def _band_block_lstsq(r, l, rng):
    """Independent rotation-block oracle: solve A X = B on sampled dirs."""
    dirs = random_dirs(rng, 8 * l + 9)
    i0, i1 = l * l, (l + 1) ** 2
    a = sh.eval_basis(dirs, l)[:, i0:i1]
    b = sh.eval_basis(dirs @ r, l)[:, i0:i1]  # rows are Y(r^-1 d)
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x


class TestRotation:
    def test_identity(self, rng):
        v = rng.normal(size=25)
        np.testing.assert_allclose(sh.rotate(v, np.eye(3)), v, atol=1e-12)

    def test_z_lobe_rotates_into_y(self):
        v = np.zeros(25)
        v[sh.sh_index(1, 0)] = 1.0
        r = sh.rotation_about_axis([1, 0, 0], 90.0)
        out = sh.rotate(v, r)
        band1 = out[1:4]
        assert abs(abs(band1[0]) - 1.0) < 1e-12  # index 1 = y-aligned basis
        assert np.abs(np.delete(out, 1)).max() < 1e-12
        assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(v), abs=1e-12)

    def test_eval_property_100_random(self, rng):
        for _ in range(100):
            v = rng.normal(size=25)
            r = sh.rotation_about_axis(rng.normal(size=3), rng.uniform(0, 360))
            d = random_dirs(rng, 1)[0]
            lhs = sh.reconstruct(sh.rotate(v, r), d)
            rhs = sh.reconstruct(v, r.T @ d)
            assert lhs == pytest.approx(rhs, abs=1e-5)

    def test_norm_preserved(self, rng):
        for _ in range(20):
            v = rng.normal(size=25)
            r = sh.rotation_about_axis(rng.normal(size=3), rng.uniform(0, 360))
            assert np.linalg.norm(sh.rotate(v, r)) == pytest.approx(
                np.linalg.norm(v), abs=1e-6
            )

    def test_composition(self, rng):
        v = rng.normal(size=25)
        r1 = sh.rotation_about_axis(rng.normal(size=3), 77.0)
        r2 = sh.rotation_about_axis(rng.normal(size=3), -33.0)
        lhs = sh.rotate(sh.rotate(v, r1), r2)
        rhs = sh.rotate(v, r2 @ r1)
        np.testing.assert_allclose(lhs, rhs, atol=1e-5)

    def test_blocks_match_lstsq_oracle(self, rng):
        r = sh.rotation_about_axis([0.3, -1.2, 0.5], 141.0)
        blocks = sh.band_rotation_matrices(r, 4)
        for l in range(1, 5):
            oracle = _band_block_lstsq(r, l, rng)
            np.testing.assert_allclose(blocks[l], oracle, atol=1e-8)

    def test_bands_do_not_mix(self, rng):
        r = sh.rotation_about_axis(rng.normal(size=3), 63.0)
        mat = sh.rotation_matrix(r, 4)
        for l in range(5):
            i0, i1 = l * l, (l + 1) ** 2
            off = mat[i0:i1].copy()
            off[:, i0:i1] = 0.0
            assert np.abs(off).max() < 1e-14

    def test_degree10_supported_not_higher(self, rng):
        v = rng.normal(size=121)
        r = sh.rotation_about_axis([1, 1, 0], 10.0)
        out = sh.rotate(v, r)
        assert out.shape == (121,)
        with pytest.raises(ValueError):
            sh.band_rotation_matrices(r, 11)

    def test_non_rotation_rejected(self):
        bad = np.eye(3) * 1.01
        with pytest.raises(ValueError):
            sh.rotate(np.zeros(25), bad)
        with pytest.raises(ValueError):
            sh.rotate(np.zeros(25), np.diag([1.0, 1.0, -1.0]))  # det -1


class TestEulerConvention:
    def test_yaw_spins_about_z(self):
        r = sh.euler_rotation(yaw=90.0)
        np.testing.assert_allclose(r @ [1, 0, 0], [0, 1, 0], atol=1e-12)
        np.testing.assert_allclose(r @ [0, 0, 1], [0, 0, 1], atol=1e-12)

    def test_application_order(self):
        y, p, ro = 31.0, -12.0, 47.0
        expect = (
            sh.rotation_about_axis([0, 1, 0], ro)
            @ sh.rotation_about_axis([1, 0, 0], p)
            @ sh.rotation_about_axis([0, 0, 1], y)
        )
        np.testing.assert_allclose(sh.euler_rotation(y, p, ro), expect, atol=1e-12)
