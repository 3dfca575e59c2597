"""Numba kernel implementations.

Same signatures and semantics as _kernels_numpy.  Parallel loops run only
over output elements (each output owned by exactly one thread, inner
accumulation sequential), so results do not depend on the thread count.
"""

import numpy as np
from numba import njit, prange

_TINY = 1e-30


@njit(cache=True)
def _n_samples(rad, step):
    # Strict-IEEE helper: under fastmath the division may compile to a
    # reciprocal multiply, and near integer values of 2*rad/step the ceil
    # would then disagree with the numpy backend by one sample.
    return max(2, int(np.ceil(2.0 * rad / step)) + 1)


@njit(cache=True, inline="always")
def _bilin(values, x0, y0, hx, hy, x, y):
    nx, ny = values.shape
    u = (x - x0) / hx
    v = (y - y0) / hy
    if u < 0.0 or u > nx - 1 or v < 0.0 or v > ny - 1:
        return 0.0
    i = int(u)
    j = int(v)
    if i > nx - 2:
        i = nx - 2
    if j > ny - 2:
        j = ny - 2
    fu = u - i
    fv = v - j
    return (values[i, j] * (1 - fu) * (1 - fv)
            + values[i + 1, j] * fu * (1 - fv)
            + values[i, j + 1] * (1 - fu) * fv
            + values[i + 1, j + 1] * fu * fv)


@njit(cache=True, inline="always")
def _trilin(values, lx, ly, lz, hx, hy, hz, x, y, z):
    nx, ny, nz = values.shape
    u = (x - lx) / hx
    v = (y - ly) / hy
    w = (z - lz) / hz
    if (u < 0.0 or u > nx - 1 or v < 0.0 or v > ny - 1
            or w < 0.0 or w > nz - 1):
        return 0.0
    i = min(int(u), nx - 2)
    j = min(int(v), ny - 2)
    k = min(int(w), nz - 2)
    fu = u - i
    fv = v - j
    fw = w - k
    c00 = values[i, j, k] * (1 - fu) + values[i + 1, j, k] * fu
    c10 = values[i, j + 1, k] * (1 - fu) + values[i + 1, j + 1, k] * fu
    c01 = values[i, j, k + 1] * (1 - fu) + values[i + 1, j, k + 1] * fu
    c11 = values[i, j + 1, k + 1] * (1 - fu) + values[i + 1, j + 1, k + 1] * fu
    c0 = c00 * (1 - fv) + c10 * fv
    c1 = c01 * (1 - fv) + c11 * fv
    return c0 * (1 - fw) + c1 * fw


@njit(cache=True, parallel=True)
def bilinear_sample_2d(values, x0, y0, hx, hy, xs, ys):
    out = np.empty(xs.size)
    for m in prange(xs.size):
        out[m] = _bilin(values, x0, y0, hx, hy, xs[m], ys[m])
    return out


@njit(cache=True, parallel=True)
def trilinear_sample_3d(values, lo, h, pts):
    out = np.empty(pts.shape[0])
    for m in prange(pts.shape[0]):
        out[m] = _trilin(values, lo[0], lo[1], lo[2], h[0], h[1], h[2],
                         pts[m, 0], pts[m, 1], pts[m, 2])
    return out


@njit(cache=True, parallel=True)
def line_integrals_2d(values, x0, y0, hx, hy, d, cos_t, sin_t, cx, cy, rad, step):
    # No fastmath here, and sample positions follow the association order of
    # the numpy backend exactly: a line can run along a box edge, where the
    # zero-outside convention makes the integrand jump, and a one-ulp
    # disagreement in a sample position would flip that sample's mass.
    nd = d.size
    nt = cos_t.size
    ns = _n_samples(rad, step)
    ds = 2.0 * rad / (ns - 1)
    out = np.empty((nd, nt))
    for idx in prange(nd * nt):
        i = idx // nt
        j = idx % nt
        c = cos_t[j]
        s = sin_t[j]
        tx = s
        ty = -c
        smid = (cx - d[i] * c) * tx + (cy - d[i] * s) * ty
        acc = 0.0
        for k in range(ns):
            sk = smid + (-rad + ds * k)
            x = d[i] * c + sk * tx
            y = d[i] * s + sk * ty
            w = ds
            if k == 0 or k == ns - 1:
                w = 0.5 * ds
            acc += w * _bilin(values, x0, y0, hx, hy, x, y)
        out[i, j] = acc
    return out


@njit(cache=True, parallel=True, fastmath=True)
def backproject_2d(profiles, t0, dt, cos_t, sin_t, w, xs, ys, out):
    nt = profiles.shape[1]
    tmax = t0 + dt * (nt - 1)
    for i in prange(xs.size):
        for j in range(ys.size):
            acc = profiles[0, 0] * 0.0
            for k in range(cos_t.size):
                a = cos_t[k] * xs[i] + sin_t[k] * ys[j]
                if a < t0 or a > tmax:
                    continue
                p = (a - t0) / dt
                m = int(p)
                if m > nt - 2:
                    m = nt - 2
                fr = p - m
                acc += w[k] * (profiles[k, m] * (1 - fr) + profiles[k, m + 1] * fr)
            out[i, j] = acc
    return out


@njit(cache=True, parallel=True, fastmath=True)
def backproject_points_2d(profiles, t0, dt, cos_t, sin_t, w, px, py):
    nt = profiles.shape[1]
    tmax = t0 + dt * (nt - 1)
    out = np.zeros(px.size, dtype=profiles.dtype)
    for m in prange(px.size):
        acc = profiles[0, 0] * 0.0
        for k in range(cos_t.size):
            a = cos_t[k] * px[m] + sin_t[k] * py[m]
            if a < t0 or a > tmax:
                continue
            p = (a - t0) / dt
            i = int(p)
            if i > nt - 2:
                i = nt - 2
            fr = p - i
            acc += w[k] * (profiles[k, i] * (1 - fr) + profiles[k, i + 1] * fr)
        out[m] = acc
    return out


@njit(cache=True, inline="always")
def _edge_pt(e, s00, s10, s11, s01, i, j, hx, hy):
    # edges: 0 bottom 00->10, 1 right 10->11, 2 top 01->11, 3 left 00->01
    if e == 0:
        t = s00 / (s00 - s10)
        return (i + t) * hx, j * hy
    elif e == 1:
        t = s10 / (s10 - s11)
        return (i + 1.0) * hx, (j + t) * hy
    elif e == 2:
        t = s01 / (s01 - s11)
        return (i + t) * hx, (j + 1.0) * hy
    else:
        t = s00 / (s00 - s01)
        return i * hx, (j + t) * hy


@njit(cache=True, inline="always")
def _seg_contrib(e1, e2, s00, s10, s11, s01, i, j, hx, hy,
                 f00, f10, f11, f01,
                 gx00, gx10, gx11, gx01,
                 gy00, gy10, gy11, gy01):
    x1, y1 = _edge_pt(e1, s00, s10, s11, s01, i, j, hx, hy)
    x2, y2 = _edge_pt(e2, s00, s10, s11, s01, i, j, hx, hy)
    L = np.sqrt((x2 - x1) ** 2 + (y2 - y1) ** 2)
    tot = 0.0
    for pick in range(2):
        if pick == 0:
            u = x1 / hx - i
            v = y1 / hy - j
        else:
            u = x2 / hx - i
            v = y2 / hy - j
        f = (f00 * (1 - u) * (1 - v) + f10 * u * (1 - v)
             + f01 * (1 - u) * v + f11 * u * v)
        gx = (gx00 * (1 - u) * (1 - v) + gx10 * u * (1 - v)
              + gx01 * (1 - u) * v + gx11 * u * v)
        gy = (gy00 * (1 - u) * (1 - v) + gy10 * u * (1 - v)
              + gy01 * (1 - u) * v + gy11 * u * v)
        gn = np.sqrt(gx * gx + gy * gy)
        if gn > _TINY:
            tot += f / gn
    return L * 0.5 * tot


@njit(cache=True, inline="always")
def _cell_total(lam, g00, g10, g11, g01, i, j, hx, hy,
                f00, f10, f11, f01,
                gx00, gx10, gx11, gx01,
                gy00, gy10, gy11, gy01):
    s00 = g00 - lam
    s10 = g10 - lam
    s11 = g11 - lam
    s01 = g01 - lam
    code = 0
    if s00 < 0:
        code += 1
    if s10 < 0:
        code += 2
    if s11 < 0:
        code += 4
    if s01 < 0:
        code += 8
    if code == 0 or code == 15:
        return 0.0
    if code == 5 or code == 10:
        gc = 0.25 * (s00 + s10 + s11 + s01)
        diag = gc < 0
        if code == 10:
            diag = not diag
        if diag:
            a1, a2, b1, b2 = 0, 1, 2, 3
        else:
            a1, a2, b1, b2 = 0, 3, 1, 2
        return (_seg_contrib(a1, a2, s00, s10, s11, s01, i, j, hx, hy,
                             f00, f10, f11, f01, gx00, gx10, gx11, gx01,
                             gy00, gy10, gy11, gy01)
                + _seg_contrib(b1, b2, s00, s10, s11, s01, i, j, hx, hy,
                               f00, f10, f11, f01, gx00, gx10, gx11, gx01,
                               gy00, gy10, gy11, gy01))
    if code == 1 or code == 14:
        e1, e2 = 0, 3
    elif code == 2 or code == 13:
        e1, e2 = 0, 1
    elif code == 3 or code == 12:
        e1, e2 = 1, 3
    elif code == 4 or code == 11:
        e1, e2 = 1, 2
    elif code == 6 or code == 9:
        e1, e2 = 0, 2
    else:  # 7 or 8
        e1, e2 = 2, 3
    return _seg_contrib(e1, e2, s00, s10, s11, s01, i, j, hx, hy,
                        f00, f10, f11, f01, gx00, gx10, gx11, gx01,
                        gy00, gy10, gy11, gy01)


@njit(cache=True, parallel=True)
def levelset_sweep_2d(F, G, GX, GY, hx, hy, lam0, dlam, nlam):
    ncx = G.shape[0] - 1
    ncy = G.shape[1] - 1
    strips = np.zeros((ncx, nlam))
    for i in prange(ncx):
        for j in range(ncy):
            g00 = G[i, j]
            g10 = G[i + 1, j]
            g11 = G[i + 1, j + 1]
            g01 = G[i, j + 1]
            gmin = min(min(g00, g10), min(g11, g01))
            gmax = max(max(g00, g10), max(g11, g01))
            k0 = int(np.floor((gmin - lam0) / dlam)) + 1
            k1 = int(np.floor((gmax - lam0) / dlam))
            if k0 < 0:
                k0 = 0
            if k1 > nlam - 1:
                k1 = nlam - 1
            for k in range(k0, k1 + 1):
                lam = lam0 + k * dlam
                strips[i, k] += _cell_total(
                    lam, g00, g10, g11, g01, i, j, hx, hy,
                    F[i, j], F[i + 1, j], F[i + 1, j + 1], F[i, j + 1],
                    GX[i, j], GX[i + 1, j], GX[i + 1, j + 1], GX[i, j + 1],
                    GY[i, j], GY[i + 1, j], GY[i + 1, j + 1], GY[i, j + 1])
    out = np.zeros(nlam)
    for i in range(ncx):
        for k in range(nlam):
            out[k] += strips[i, k]
    return out


@njit(cache=True, parallel=True)
def levelset_fixed_2d(F, G, GX, GY, hx, hy, lam):
    ncx = G.shape[0] - 1
    ncy = G.shape[1] - 1
    strips = np.zeros(ncx)
    for i in prange(ncx):
        acc = 0.0
        for j in range(ncy):
            acc += _cell_total(
                lam, G[i, j], G[i + 1, j], G[i + 1, j + 1], G[i, j + 1],
                i, j, hx, hy,
                F[i, j], F[i + 1, j], F[i + 1, j + 1], F[i, j + 1],
                GX[i, j], GX[i + 1, j], GX[i + 1, j + 1], GX[i, j + 1],
                GY[i, j], GY[i + 1, j], GY[i + 1, j + 1], GY[i, j + 1])
        strips[i] = acc
    total = 0.0
    for i in range(ncx):
        total += strips[i]
    return total


@njit(cache=True, parallel=True)
def levelset_bins_2d(F, G, hx, hy, lam0, dlam, nlam):
    """Slab-averaged tomogram: cell mass f*dA spread over the lam bins its
    G-range overlaps (bins centered at lam0 + k*dlam).  Integrates jumps
    and log singularities at critical values; conserves mass exactly."""
    ncx = G.shape[0] - 1
    ncy = G.shape[1] - 1
    strips = np.zeros((ncx, nlam))
    area = hx * hy
    for i in prange(ncx):
        for j in range(ncy):
            g00 = G[i, j]
            g10 = G[i + 1, j]
            g11 = G[i + 1, j + 1]
            g01 = G[i, j + 1]
            gmin = min(min(g00, g10), min(g11, g01))
            gmax = max(max(g00, g10), max(g11, g01))
            mass = 0.25 * (F[i, j] + F[i + 1, j] + F[i + 1, j + 1] + F[i, j + 1]) * area
            if mass == 0.0:
                continue
            k0 = int(np.floor((gmin - lam0) / dlam + 0.5))
            k1 = int(np.floor((gmax - lam0) / dlam + 0.5))
            if k1 < 0 or k0 > nlam - 1:
                continue
            if k0 == k1:
                strips[i, k0] += mass / dlam
                continue
            if k0 < 0:
                k0 = 0
            if k1 > nlam - 1:
                k1 = nlam - 1
            span = gmax - gmin
            for k in range(k0, k1 + 1):
                elo = lam0 + (k - 0.5) * dlam
                ehi = elo + dlam
                a = gmin if gmin > elo else elo
                b = gmax if gmax < ehi else ehi
                if b > a:
                    strips[i, k] += mass * (b - a) / span / dlam
    out = np.zeros(nlam)
    for i in range(ncx):
        for k in range(nlam):
            out[k] += strips[i, k]
    return out


@njit(cache=True, parallel=True)
def plane_integrals_3d(values, lo, h, dirs, e1s, e2s, t, cx, cy, cz, rad, step):
    # Strict FP with numpy-matched association, for the same edge-sample
    # reason as line_integrals_2d (planes can coincide with box faces).
    ndir = dirs.shape[0]
    ntt = t.size
    nu = _n_samples(rad, step)
    du = 2.0 * rad / (nu - 1)
    out = np.empty((ndir, ntt))
    for idx in prange(ndir * ntt):
        k = idx // ntt
        it = idx % ntt
        nxd, nyd, nzd = dirs[k, 0], dirs[k, 1], dirs[k, 2]
        e1x, e1y, e1z = e1s[k, 0], e1s[k, 1], e1s[k, 2]
        e2x, e2y, e2z = e2s[k, 0], e2s[k, 1], e2s[k, 2]
        bx = t[it] * nxd
        by = t[it] * nyd
        bz = t[it] * nzd
        ox = cx - bx
        oy = cy - by
        oz = cz - bz
        u0 = ox * e1x + oy * e1y + oz * e1z
        v0 = ox * e2x + oy * e2y + oz * e2z
        acc = 0.0
        for iu in range(nu):
            uu = u0 + (-rad + du * iu)
            wu = du if (0 < iu < nu - 1) else 0.5 * du
            for iv in range(nu):
                vv = v0 + (-rad + du * iv)
                wv = du if (0 < iv < nu - 1) else 0.5 * du
                x = (bx + uu * e1x) + vv * e2x
                y = (by + uu * e1y) + vv * e2y
                z = (bz + uu * e1z) + vv * e2z
                acc += wu * wv * _trilin(values, lo[0], lo[1], lo[2],
                                         h[0], h[1], h[2], x, y, z)
        out[k, it] = acc
    return out


@njit(cache=True, parallel=True, fastmath=True)
def backproject_3d(profiles, t0, dt, dirs, w, xs, ys, zs, out):
    nt = profiles.shape[1]
    tmax = t0 + dt * (nt - 1)
    for i in prange(xs.size):
        for j in range(ys.size):
            for l in range(zs.size):
                acc = profiles[0, 0] * 0.0
                for k in range(dirs.shape[0]):
                    a = dirs[k, 0] * xs[i] + dirs[k, 1] * ys[j] + dirs[k, 2] * zs[l]
                    if a < t0 or a > tmax:
                        continue
                    p = (a - t0) / dt
                    m = int(p)
                    if m > nt - 2:
                        m = nt - 2
                    fr = p - m
                    acc += w[k] * (profiles[k, m] * (1 - fr) + profiles[k, m + 1] * fr)
                out[i, j, l] = acc
    return out


@njit(cache=True, parallel=True, fastmath=True)
def phase_sum_2d(coef, mux, muy, bxx, bxy, byy, ax, ay, qx, qy):
    m = qx.size
    out = np.empty(m, dtype=np.complex128)
    for p in prange(m):
        acc = 0.0 + 0.0j
        for k in range(mux.size):
            dx = qx[p] - mux[k]
            dy = qy[p] - muy[k]
            phase = (bxx * dx * dx + 2.0 * bxy * dx * dy + byy * dy * dy
                     + ax * dx + ay * dy)
            acc += coef[k] * (np.cos(phase) - 1j * np.sin(phase))
        out[p] = acc
    return out
