"""Real spherical harmonics: evaluation, projection, rotation, dot products.

Convention: orthonormal real SH over the unit sphere, no Condon-Shortley
phase in the real basis. With theta from +z and phi from +x toward +y:

    Y_{l,0}  = K(l,0) P_l^0(cos theta)
    Y_{l,m}  = sqrt(2) K(l,m) cos(m phi)  P_l^m(cos theta)   (m > 0)
    Y_{l,-m} = sqrt(2) K(l,m) sin(m phi)  P_l^m(cos theta)   (m > 0)

where K(l,m) = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!) and P_l^m uses the
phase-free recurrence. Coefficients are stored flat with index
i = l(l+1)+m, so band slices are contiguous.
"""

from __future__ import annotations

import math

import numpy as np

from .sampling import stratified_sphere, uniform_sphere

MAX_DEGREE = 10


def num_coeffs(degree: int) -> int:
    """(N+1)^2 coefficients for a degree-N expansion."""
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}], got {degree}")
    return (degree + 1) ** 2


def sh_index(l: int, m: int) -> int:
    return l * (l + 1) + m


def degree_for_count(count: int) -> int:
    """Inverse of num_coeffs; rejects counts that are not (N+1)^2."""
    n = int(round(math.sqrt(count))) - 1
    if n < 0 or (n + 1) ** 2 != count:
        raise ValueError(f"{count} is not a valid SH coefficient count")
    return n


def eval_basis(dirs: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate all basis functions up to `degree` at unit direction(s).

    Args:
        dirs: array (..., 3) of unit vectors.
        degree: max band N, 0 <= N <= 10.

    Returns:
        array (..., (N+1)^2) of basis values.
    """
    nc = num_coeffs(degree)
    dirs = np.asarray(dirs, dtype=np.float64)
    shape = dirs.shape[:-1]
    d = dirs.reshape(-1, 3)
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    ct = np.clip(z, -1.0, 1.0)
    st = np.sqrt(np.clip(1.0 - ct * ct, 0.0, None))
    phi = np.arctan2(y, x)

    # associated Legendre P_l^m(ct), phase-free, for 0 <= m <= l <= degree
    P = {}
    P[(0, 0)] = np.ones_like(ct)
    for m in range(1, degree + 1):
        P[(m, m)] = P[(m - 1, m - 1)] * (2 * m - 1) * st
    for m in range(0, degree):
        P[(m + 1, m)] = (2 * m + 1) * ct * P[(m, m)]
    for m in range(0, degree + 1):
        for l in range(m + 2, degree + 1):
            P[(l, m)] = ((2 * l - 1) * ct * P[(l - 1, m)] - (l + m - 1) * P[(l - 2, m)]) / (l - m)

    out = np.empty((d.shape[0], nc), dtype=np.float64)
    for l in range(degree + 1):
        k0 = math.sqrt((2 * l + 1) / (4.0 * math.pi))
        out[:, sh_index(l, 0)] = k0 * P[(l, 0)]
        for m in range(1, l + 1):
            k = math.sqrt(
                (2 * l + 1) / (4.0 * math.pi) * math.factorial(l - m) / math.factorial(l + m)
            )
            out[:, sh_index(l, m)] = math.sqrt(2.0) * k * np.cos(m * phi) * P[(l, m)]
            out[:, sh_index(l, -m)] = math.sqrt(2.0) * k * np.sin(m * phi) * P[(l, m)]
    return out.reshape(*shape, nc)


def eval_sh(l: int, m: int, d) -> float:
    """Single basis function Y_{l,m} at a unit direction."""
    if not (0 <= l <= MAX_DEGREE) or abs(m) > l:
        raise ValueError(f"invalid band/order (l={l}, m={m})")
    d = np.asarray(d, dtype=np.float64)
    if abs(float(d @ d) - 1.0) > 1e-5:
        raise ValueError("direction must be unit length")
    return float(eval_basis(d, l)[sh_index(l, m)])


def reconstruct(coeffs: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Sum_i c_i Y_i(d) for each direction."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    degree = degree_for_count(coeffs.shape[-1])
    return eval_basis(dirs, degree) @ coeffs


class MonteCarloSphereSampler:
    """Uniform-sphere sampler (pdf 1/4pi), stratified by default."""

    def __init__(self, count: int, seed: int = 0, stratified: bool = True):
        if count < 1:
            raise ValueError("sampler needs at least one sample")
        self.count = count
        self.seed = seed
        self.stratified = stratified

    def directions_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        draw = stratified_sphere if self.stratified else uniform_sphere
        dirs = draw(rng, self.count)
        w = np.full(self.count, 4.0 * math.pi / self.count)
        return dirs, w


class LatLongQuadratureSampler:
    """Deterministic lat-long grid with solid-angle weights sin(t)*dt*dp."""

    def __init__(self, width: int = 256, height: int = 128):
        if width < 1 or height < 1:
            raise ValueError("grid must be at least 1x1")
        self.width = width
        self.height = height

    def directions_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        h, w = self.height, self.width
        v = (np.arange(h) + 0.5) / h
        u = (np.arange(w) + 0.5) / w
        theta = math.pi * v
        phi = 2.0 * math.pi * u
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        st = np.sin(tt)
        dirs = np.stack([st * np.cos(pp), st * np.sin(pp), np.cos(tt)], axis=-1)
        wgt = st * (math.pi / h) * (2.0 * math.pi / w)
        return dirs.reshape(-1, 3), wgt.ravel()


def project(f, degree: int, sampler) -> np.ndarray:
    """Project a spherical function onto the basis: c_i ~ int f(w) Y_i(w) dw.

    `f` receives an (M, 3) array of unit directions and must return (M,)
    values. Non-finite samples raise, reporting the offending direction.
    """
    dirs, w = sampler.directions_and_weights()
    vals = np.asarray(f(dirs), dtype=np.float64)
    if vals.shape != (dirs.shape[0],):
        raise ValueError(f"callback returned shape {vals.shape}, expected ({dirs.shape[0]},)")
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        raise ArithmeticError(f"non-finite sample {vals[k]} at direction {dirs[k].tolist()}")
    return (vals * w) @ eval_basis(dirs, degree)


def dot(t: np.ndarray, l: np.ndarray) -> float:
    """Coefficient dot product; the PRT reconstruction sum."""
    t = np.asarray(t, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    if t.shape != l.shape:
        raise ValueError(f"degree mismatch: {t.shape} vs {l.shape}")
    return float(np.dot(t, l))


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------


def validate_rotation(r: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError("rotation must be a 3x3 matrix")
    if not np.allclose(r.T @ r, np.eye(3), atol=tol) or abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix is not a proper rotation (orthonormal, det +1)")
    return r


def rotation_about_axis(axis, degrees: float) -> np.ndarray:
    """Rodrigues rotation about an arbitrary axis."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    t = math.radians(degrees)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(t) * k + (1.0 - math.cos(t)) * (k @ k)


def euler_rotation(yaw: float = 0.0, pitch: float = 0.0, roll: float = 0.0) -> np.ndarray:
    """World-axis rotation applied yaw (about +z), then pitch (+x), then roll (+y).

    Angles in degrees. Yaw spins the environment about the zenith axis.
    """
    rz = rotation_about_axis([0, 0, 1], yaw)
    rx = rotation_about_axis([1, 0, 0], pitch)
    ry = rotation_about_axis([0, 1, 0], roll)
    return ry @ rx @ rz


def _band1_matrix(r: np.ndarray) -> np.ndarray:
    # band-1 basis order (m=-1,0,1) spans (y, z, x)
    perm = (1, 2, 0)
    return np.array([[r[perm[a], perm[b]] for b in range(3)] for a in range(3)])


def band_rotation_matrices(r: np.ndarray, degree: int) -> list[np.ndarray]:
    """Per-band rotation blocks via the recursive real-SH recurrence.

    Block l maps band-l coefficients of f to those of the rotated function
    g(d) = f(r^-1 d). Bands never mix.
    """
    r = validate_rotation(r)
    if degree > MAX_DEGREE:
        raise ValueError(f"degree must be <= {MAX_DEGREE}")
    blocks = [np.ones((1, 1))]
    if degree == 0:
        return blocks
    m1 = _band1_matrix(r)
    blocks.append(m1)

    def r1(i, j):
        return m1[i + 1, j + 1]

    for l in range(2, degree + 1):
        prev = blocks[l - 1]  # (2l-1, 2l-1) indexed [mu+l-1, nu+l-1]

        def pfun(i, mu, n):
            if n == l:
                return r1(i, 1) * prev[mu + l - 1, 2 * l - 2] - r1(i, -1) * prev[mu + l - 1, 0]
            if n == -l:
                return r1(i, 1) * prev[mu + l - 1, 0] + r1(i, -1) * prev[mu + l - 1, 2 * l - 2]
            return r1(i, 0) * prev[mu + l - 1, n + l - 1]

        block = np.empty((2 * l + 1, 2 * l + 1))
        for m in range(-l, l + 1):
            for n in range(-l, l + 1):
                denom = (2 * l) * (2 * l - 1) if abs(n) == l else (l + n) * (l - n)
                u = math.sqrt((l + m) * (l - m) / denom)
                if m == 0:
                    v = -0.5 * math.sqrt(2.0 * (l - 1) * l / denom)
                    w = 0.0
                else:
                    am = abs(m)
                    v = 0.5 * math.sqrt((l + am - 1) * (l + am) / denom)
                    w = -0.5 * math.sqrt((l - am - 1) * (l - am) / denom)

                val = 0.0
                if u != 0.0:
                    val += u * pfun(0, m, n)
                if v != 0.0:
                    if m == 0:
                        vv = pfun(1, 1, n) + pfun(-1, -1, n)
                    elif m > 0:
                        vv = pfun(1, m - 1, n) * math.sqrt(1.0 + (1.0 if m == 1 else 0.0))
                        if m != 1:
                            vv -= pfun(-1, -(m - 1), n)
                    else:
                        vv = pfun(-1, -(m + 1), n) * math.sqrt(1.0 + (1.0 if m == -1 else 0.0))
                        if m != -1:
                            vv += pfun(1, m + 1, n)
                    val += v * vv
                if w != 0.0:
                    if m > 0:
                        ww = pfun(1, m + 1, n) + pfun(-1, -(m + 1), n)
                    else:
                        ww = pfun(1, m - 1, n) - pfun(-1, -(m - 1), n)
                    val += w * ww
                block[m + l, n + l] = val
        blocks.append(block)
    return blocks


def rotation_matrix(r: np.ndarray, degree: int) -> np.ndarray:
    """Dense ((N+1)^2)^2 block-diagonal rotation matrix."""
    nc = num_coeffs(degree)
    out = np.zeros((nc, nc))
    for l, block in enumerate(band_rotation_matrices(r, degree)):
        i0 = l * l
        out[i0 : i0 + 2 * l + 1, i0 : i0 + 2 * l + 1] = block
    return out


def rotate(coeffs: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Rotate an SH vector so eval(rotate(c, r), d) == eval(c, r^-1 d)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    degree = degree_for_count(coeffs.shape[-1])
    mat = rotation_matrix(r, degree)
    return coeffs @ mat.T


# Zonal coefficients of the clamped cosine max(cos theta, 0) about +z,
# projected on Y_{l,0}: sqrt(pi)/2, sqrt(pi/3), sqrt(5 pi)/8, 0, -sqrt(pi)/16*...
CLAMPED_COSINE_ZONAL = (
    0.8862269254527579,
    1.0233267079464885,
    0.4954159122007514,
    0.0,
    -0.11077836569938997,
)


def clamped_cosine_coeffs(normal, degree: int) -> np.ndarray:
    """SH projection of max(w . n, 0), analytic via zonal rotation.

    A zonal function aligned to +z re-expands about axis n with
    c_{l,m} = sqrt(4pi/(2l+1)) * z_l * Y_{l,m}(n).
    """
    if degree > len(CLAMPED_COSINE_ZONAL) - 1:
        raise ValueError("analytic clamped cosine available up to degree 4")
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    basis = eval_basis(n, degree)
    out = np.zeros(num_coeffs(degree))
    for l in range(degree + 1):
        scale = math.sqrt(4.0 * math.pi / (2 * l + 1)) * CLAMPED_COSINE_ZONAL[l]
        i0 = l * l
        out[i0 : i0 + 2 * l + 1] = scale * basis[i0 : i0 + 2 * l + 1]
    return out
