"""
Performance benchmarks comparing the numba kernels with the pure numpy
fallbacks on production-sized inputs.

Run directly:  python3 benchmarks/bench_backends.py

The installed package picks its backend at import time from TOMO_BACKEND
(auto | numba | numpy); here both kernel modules are imported explicitly
so one process can time them side by side.
"""
import time

import numpy as np

from tomokit import _kernels_numpy as knp

try:
    from tomokit import _kernels_numba as kjit
except ImportError:
    kjit = None


def bench(fn, args, n_runs=5):
    fn(*args)                      # warmup (JIT compile, cache touch)
    times = []
    for _ in range(n_runs):
        start = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - start)
    return np.array(times), out


def print_row(name, t_np, t_jit, agree):
    mean_np = np.mean(t_np) * 1000
    if t_jit is None:
        print(f"{name:22s}: numpy {mean_np:9.2f} ms   numba      n/a")
        return
    mean_jit = np.mean(t_jit) * 1000
    print(f"{name:22s}: numpy {mean_np:9.2f} ms   "
          f"numba {mean_jit:9.2f} ms   x{mean_np / mean_jit:6.1f}   "
          f"max|diff| {agree:.2e}")


def field_2d(n=256):
    x = np.linspace(-1.6, 1.6, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    F = np.exp(-((X - 0.15) ** 2 / 0.08 + (Y + 0.1) ** 2 / 0.18))
    return x, F


def bench_bilinear():
    x, F = field_2d()
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1.6, 1.6, 1_000_000)
    ys = rng.uniform(-1.6, 1.6, 1_000_000)
    h = x[1] - x[0]
    args = (F, x[0], x[0], h, h, xs, ys)
    t_np, a = bench(knp.bilinear_sample_2d, args)
    if kjit is None:
        print_row("bilinear_sample_2d", t_np, None, 0.0)
        return
    t_jit, b = bench(kjit.bilinear_sample_2d, args)
    print_row("bilinear_sample_2d", t_np, t_jit, np.abs(a - b).max())


def bench_line_integrals():
    x, F = field_2d()
    h = x[1] - x[0]
    thetas = np.linspace(0.0, np.pi, 180, endpoint=False)
    d = np.linspace(-2.3, 2.3, 385)
    args = (F, x[0], x[0], h, h, d, np.cos(thetas), np.sin(thetas),
            0.0, 0.0, 2.3, h / 2)
    t_np, a = bench(knp.line_integrals_2d, args)
    if kjit is None:
        print_row("line_integrals_2d", t_np, None, 0.0)
        return
    t_jit, b = bench(kjit.line_integrals_2d, args)
    print_row("line_integrals_2d", t_np, t_jit, np.abs(a - b).max())


def bench_levelset_sweep():
    x, F = field_2d()
    X, Y = np.meshgrid(x, x, indexing="ij")
    h = x[1] - x[0]
    G = 0.8 * (X - 0.1) ** 2 + 1.3 * (Y + 0.3) ** 2 + 0.2 * X * Y
    GX = 1.6 * (X - 0.1) + 0.2 * Y
    GY = 2.6 * (Y + 0.3) + 0.2 * X
    args = (F, G, GX, GY, h, h, 0.02, 0.03, 257)
    t_np, a = bench(knp.levelset_sweep_2d, args)
    if kjit is None:
        print_row("levelset_sweep_2d", t_np, None, 0.0)
        return
    t_jit, b = bench(kjit.levelset_sweep_2d, args)
    print_row("levelset_sweep_2d", t_np, t_jit, np.abs(a - b).max())


def bench_backproject():
    rng = np.random.default_rng(1)
    profiles = rng.standard_normal((180, 385))
    thetas = np.linspace(0.0, np.pi, 180, endpoint=False)
    w = np.full(180, np.pi / 180)
    xs = np.linspace(-1.6, 1.6, 256)
    args = (profiles, -2.3, 4.6 / 384, np.cos(thetas), np.sin(thetas), w,
            xs, xs)
    t_np, a = bench(knp.backproject_2d, args + (np.empty((256, 256)),))
    if kjit is None:
        print_row("backproject_2d", t_np, None, 0.0)
        return
    t_jit, b = bench(kjit.backproject_2d, args + (np.empty((256, 256)),))
    print_row("backproject_2d", t_np, t_jit, np.abs(a - b).max())


def bench_phase_sum():
    rng = np.random.default_rng(2)
    n_mu = 128 * 128
    coef = rng.standard_normal(n_mu) + 1j * rng.standard_normal(n_mu)
    mux = rng.uniform(-5, 5, n_mu)
    muy = rng.uniform(-5, 5, n_mu)
    pts = np.linspace(-1.6, 1.6, 96)
    X, Y = np.meshgrid(pts, pts, indexing="ij")
    args = (coef, mux, muy, 1.0, 0.1, 1.0, 0.0, 0.0,
            np.ascontiguousarray(X.ravel()), np.ascontiguousarray(Y.ravel()))
    t_np, a = bench(knp.phase_sum_2d, args, n_runs=3)
    if kjit is None:
        print_row("phase_sum_2d", t_np, None, 0.0)
        return
    t_jit, b = bench(kjit.phase_sum_2d, args, n_runs=3)
    print_row("phase_sum_2d", t_np, t_jit, np.abs(a - b).max())


def main():
    print("tomokit kernel backends, numpy vs numba")
    print("=" * 78)
    if kjit is None:
        print("numba not importable; timing the numpy fallback only")
    bench_bilinear()
    bench_line_integrals()
    bench_levelset_sweep()
    bench_backproject()
    bench_phase_sum()
    print()
    print("Select a backend for the installed package with TOMO_BACKEND="
          "auto|numba|numpy;")
    print("TOMO_THREADS caps the numba thread count.")


if __name__ == "__main__":
    main()
