"""The numba kernels and the numpy fallbacks must compute the same thing.

Both backends are called directly here (bypassing the TOMO_BACKEND switch),
on identical inputs.  Agreement is numerical, not bitwise: the numba loops
accumulate in a different order than the vectorized numpy code, so exact
byte equality only holds within one backend.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from tomokit import _kernels_numpy as knp

kjit = pytest.importorskip("tomokit._kernels_numba")

RTOL = 1e-10
ATOL = 1e-12


def close(a, b):
    return np.allclose(a, b, rtol=RTOL, atol=ATOL)


def smooth_field(nx=40, ny=36, seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(-1.0, 1.0, nx)
    y = np.linspace(-1.2, 0.8, ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    F = np.exp(-2 * (X - 0.1) ** 2 - 3 * (Y + 0.2) ** 2)
    F += 0.05 * rng.standard_normal((nx, ny))
    return x, y, X, Y, F


def test_bilinear_sample_2d():
    x, y, X, Y, F = smooth_field()
    rng = np.random.default_rng(1)
    xs = rng.uniform(-1.4, 1.4, 300)
    ys = rng.uniform(-1.5, 1.1, 300)
    a = knp.bilinear_sample_2d(F, x[0], y[0], x[1] - x[0], y[1] - y[0], xs, ys)
    b = kjit.bilinear_sample_2d(F, x[0], y[0], x[1] - x[0], y[1] - y[0], xs, ys)
    assert close(a, b)


def test_trilinear_sample_3d():
    rng = np.random.default_rng(2)
    F = rng.standard_normal((9, 8, 7))
    lo = np.array([0.0, -1.0, 2.0])
    h = np.array([0.25, 0.5, 0.125])
    pts = rng.uniform(-0.5, 2.5, size=(200, 3))
    a = knp.trilinear_sample_3d(F, lo, h, pts)
    b = kjit.trilinear_sample_3d(F, lo, h, pts)
    assert close(a, b)


def test_line_integrals_2d():
    x, y, X, Y, F = smooth_field()
    # theta = 0 included on purpose: its chords run parallel to the box
    # edges and quadrature samples land exactly on the support jump, the
    # configuration most sensitive to any backend difference in sample
    # placement
    thetas = np.linspace(0.0, np.pi, 13, endpoint=False)
    d = np.linspace(-1.2, 1.2, 21)
    args = (F, x[0], y[0], x[1] - x[0], y[1] - y[0], d,
            np.cos(thetas), np.sin(thetas), 0.0, -0.2, 1.7, 0.02)
    assert close(knp.line_integrals_2d(*args), kjit.line_integrals_2d(*args))


def test_backproject_2d_and_points():
    rng = np.random.default_rng(3)
    nt, nl = 11, 33
    profiles = rng.standard_normal((nt, nl))
    thetas = np.linspace(0.0, np.pi, nt, endpoint=False)
    w = rng.uniform(0.5, 1.5, nt)
    xs = np.linspace(-1.0, 1.0, 24)
    ys = np.linspace(-1.0, 1.0, 26)
    a = knp.backproject_2d(profiles, -1.5, 3.0 / (nl - 1), np.cos(thetas),
                           np.sin(thetas), w, xs, ys, np.empty((24, 26)))
    b = kjit.backproject_2d(profiles, -1.5, 3.0 / (nl - 1), np.cos(thetas),
                            np.sin(thetas), w, xs, ys, np.empty((24, 26)))
    assert close(a, b)

    px = rng.uniform(-1.2, 1.2, 90)
    py = rng.uniform(-1.2, 1.2, 90)
    ap = knp.backproject_points_2d(profiles, -1.5, 3.0 / (nl - 1),
                                   np.cos(thetas), np.sin(thetas), w, px, py)
    bp = kjit.backproject_points_2d(profiles, -1.5, 3.0 / (nl - 1),
                                    np.cos(thetas), np.sin(thetas), w, px, py)
    assert close(ap, bp)


def levelset_inputs():
    x, y, X, Y, F = smooth_field(50, 44, seed=4)
    G = 0.8 * (X - 0.1) ** 2 + 1.3 * (Y + 0.3) ** 2 + 0.2 * X * Y
    GX = 1.6 * (X - 0.1) + 0.2 * Y
    GY = 2.6 * (Y + 0.3) + 0.2 * X
    hx = x[1] - x[0]
    hy = y[1] - y[0]
    return F, G, GX, GY, hx, hy


def test_levelset_fixed_and_sweep_2d():
    F, G, GX, GY, hx, hy = levelset_inputs()
    for lam in (0.05, 0.3, 0.9, 1.7):
        a = knp.levelset_fixed_2d(F, G, GX, GY, hx, hy, lam)
        b = kjit.levelset_fixed_2d(F, G, GX, GY, hx, hy, lam)
        assert close(a, b)
    a = knp.levelset_sweep_2d(F, G, GX, GY, hx, hy, 0.02, 0.07, 30)
    b = kjit.levelset_sweep_2d(F, G, GX, GY, hx, hy, 0.02, 0.07, 30)
    assert close(a, b)


def test_levelset_bins_2d():
    F, G, GX, GY, hx, hy = levelset_inputs()
    a = knp.levelset_bins_2d(F, G, hx, hy, 0.02, 0.07, 30)
    b = kjit.levelset_bins_2d(F, G, hx, hy, 0.02, 0.07, 30)
    assert close(a, b)
    # with bins covering the full range of G, the cell mass is conserved
    dlam = 0.07
    lam0 = G.min() - 2 * dlam
    nlam = int((G.max() - lam0) / dlam) + 4
    full = knp.levelset_bins_2d(F, G, hx, hy, lam0, dlam, nlam)
    mass = 0.25 * (F[:-1, :-1] + F[1:, :-1] + F[1:, 1:] + F[:-1, 1:]).sum() * hx * hy
    assert abs(full.sum() * dlam - mass) < 1e-10 * abs(mass)


def test_plane_integrals_and_backproject_3d():
    rng = np.random.default_rng(5)
    F = rng.standard_normal((12, 11, 10))
    lo = np.array([-1.0, -1.0, -1.0])
    h = np.array([2.0 / 11, 2.0 / 10, 2.0 / 9])
    dirs = rng.standard_normal((6, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    e1s = np.empty_like(dirs)
    e2s = np.empty_like(dirs)
    for k, n in enumerate(dirs):
        t = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(n, t)
        e1 /= np.linalg.norm(e1)
        e1s[k] = e1
        e2s[k] = np.cross(n, e1)
    # prepend an axis-aligned frame: planes coinciding with box faces probe
    # the support-jump samples
    dirs[0] = [1.0, 0.0, 0.0]
    e1s[0] = [0.0, 1.0, 0.0]
    e2s[0] = [0.0, 0.0, 1.0]
    t = np.linspace(-1.0, 1.0, 9)
    args = (F, lo, h, dirs, e1s, e2s, t, 0.0, 0.0, 0.0, 1.8, 0.1)
    assert close(knp.plane_integrals_3d(*args), kjit.plane_integrals_3d(*args))

    profiles = rng.standard_normal((6, 9))
    w = rng.uniform(0.5, 1.0, 6)
    xs = np.linspace(-1, 1, 8)
    ys = np.linspace(-1, 1, 7)
    zs = np.linspace(-1, 1, 6)
    a = knp.backproject_3d(profiles, -1.0, 0.25, dirs, w, xs, ys, zs,
                           np.empty((8, 7, 6)))
    b = kjit.backproject_3d(profiles, -1.0, 0.25, dirs, w, xs, ys, zs,
                            np.empty((8, 7, 6)))
    assert close(a, b)


def test_phase_sum_2d():
    rng = np.random.default_rng(6)
    n = 37
    coef = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    mux = rng.uniform(-2, 2, n)
    muy = rng.uniform(-2, 2, n)
    qx = rng.uniform(-2, 2, 120)
    qy = rng.uniform(-2, 2, 120)
    args = (coef, mux, muy, 1.1, -0.3, 0.7, 0.2, -0.5, qx, qy)
    assert close(knp.phase_sum_2d(*args), kjit.phase_sum_2d(*args))


def test_backend_env_switch():
    """TOMO_BACKEND picks the fallback and rejects junk values."""
    code = "import tomokit; print(tomokit.BACKEND)"
    env = dict(os.environ, TOMO_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == "numpy"

    env = dict(os.environ, TOMO_BACKEND="gpu")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0
    assert "TOMO_BACKEND" in out.stderr


def test_thread_count_does_not_change_bytes():
    """Parallel kernels give bit-identical output for any TOMO_THREADS."""
    code = (
        "import numpy as np\n"
        "from tomokit._backend import kernels\n"
        "x = np.linspace(-1, 1, 60)\n"
        "X, Y = np.meshgrid(x, x, indexing='ij')\n"
        "F = np.exp(-2*X**2 - 3*Y**2)\n"
        "G = X**2 + 1.3*Y**2\n"
        "out = kernels.levelset_sweep_2d(F, G, 2*X, 2.6*Y, x[1]-x[0], x[1]-x[0],\n"
        "                                0.05, 0.04, 25)\n"
        "import sys; sys.stdout.buffer.write(out.tobytes())\n"
    )
    blobs = []
    for threads in ("1", "2"):
        env = dict(os.environ, TOMO_THREADS=threads)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True)
        assert out.returncode == 0, out.stderr.decode()
        blobs.append(out.stdout)
    assert blobs[0] == blobs[1]
