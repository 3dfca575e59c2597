"""Pure-numpy kernel implementations.

Mirror of _kernels_numba with identical signatures and semantics; selected
via TOMO_BACKEND=numpy (or automatically when numba is unavailable).
Marching-squares cell geometry here is the reference the numba kernels are
cross-checked against.
"""

import numpy as np

_TINY = 1e-30


def bilinear_sample_2d(values, x0, y0, hx, hy, xs, ys):
    nx, ny = values.shape
    u = (np.asarray(xs, dtype=float) - x0) / hx
    v = (np.asarray(ys, dtype=float) - y0) / hy
    inside = (u >= 0) & (u <= nx - 1) & (v >= 0) & (v <= ny - 1)
    uc = np.clip(u, 0, nx - 1)
    vc = np.clip(v, 0, ny - 1)
    i = np.minimum(uc.astype(np.int64), nx - 2)
    j = np.minimum(vc.astype(np.int64), ny - 2)
    fu = uc - i
    fv = vc - j
    out = (values[i, j] * (1 - fu) * (1 - fv)
           + values[i + 1, j] * fu * (1 - fv)
           + values[i, j + 1] * (1 - fu) * fv
           + values[i + 1, j + 1] * fu * fv)
    return np.where(inside, out, 0.0)


def trilinear_sample_3d(values, lo, h, pts):
    nx, ny, nz = values.shape
    u = (pts[:, 0] - lo[0]) / h[0]
    v = (pts[:, 1] - lo[1]) / h[1]
    w = (pts[:, 2] - lo[2]) / h[2]
    inside = ((u >= 0) & (u <= nx - 1) & (v >= 0) & (v <= ny - 1)
              & (w >= 0) & (w <= nz - 1))
    uc = np.clip(u, 0, nx - 1)
    vc = np.clip(v, 0, ny - 1)
    wc = np.clip(w, 0, nz - 1)
    i = np.minimum(uc.astype(np.int64), nx - 2)
    j = np.minimum(vc.astype(np.int64), ny - 2)
    k = np.minimum(wc.astype(np.int64), nz - 2)
    fu, fv, fw = uc - i, vc - j, wc - k
    c00 = values[i, j, k] * (1 - fu) + values[i + 1, j, k] * fu
    c10 = values[i, j + 1, k] * (1 - fu) + values[i + 1, j + 1, k] * fu
    c01 = values[i, j, k + 1] * (1 - fu) + values[i + 1, j, k + 1] * fu
    c11 = values[i, j + 1, k + 1] * (1 - fu) + values[i + 1, j + 1, k + 1] * fu
    c0 = c00 * (1 - fv) + c10 * fv
    c1 = c01 * (1 - fv) + c11 * fv
    out = c0 * (1 - fw) + c1 * fw
    return np.where(inside, out, 0.0)


def line_integrals_2d(values, x0, y0, hx, hy, d, cos_t, sin_t, cx, cy, rad, step):
    """Trapezoid line integrals along x(s) = d*n + s*t, t = (sin, -cos)."""
    nd, nt = d.size, cos_t.size
    ns = max(2, int(np.ceil(2.0 * rad / step)) + 1)
    ds = 2.0 * rad / (ns - 1)
    wts = np.full(ns, ds)
    wts[0] = wts[-1] = 0.5 * ds
    out = np.empty((nd, nt))
    s_rel = -rad + ds * np.arange(ns)
    for j in range(nt):
        c, s = cos_t[j], sin_t[j]
        tx, ty = s, -c
        smid = (cx - d * c) * tx + (cy - d * s) * ty
        ss = smid[:, None] + s_rel[None, :]
        xs = d[:, None] * c + ss * tx
        ys = d[:, None] * s + ss * ty
        f = bilinear_sample_2d(values, x0, y0, hx, hy, xs.ravel(), ys.ravel())
        out[:, j] = f.reshape(nd, ns) @ wts
    return out


def backproject_2d(profiles, t0, dt, cos_t, sin_t, w, xs, ys, out):
    """out[i,j] = sum_k w[k] * lininterp(profiles[k], x.n_k); zero outside."""
    nt = profiles.shape[1]
    out[...] = 0
    tmax = t0 + dt * (nt - 1)
    for k in range(cos_t.size):
        a = cos_t[k] * xs[:, None] + sin_t[k] * ys[None, :]
        inside = (a >= t0) & (a <= tmax)
        ac = np.clip(a, t0, tmax)
        idx = np.minimum(((ac - t0) / dt).astype(np.int64), nt - 2)
        fr = (ac - t0) / dt - idx
        p = profiles[k]
        val = p[idx] * (1 - fr) + p[idx + 1] * fr
        out += np.where(inside, w[k] * val, 0.0)
    return out


def backproject_points_2d(profiles, t0, dt, cos_t, sin_t, w, px, py):
    """Scattered-point variant: out[m] = sum_k w[k]*interp(profiles[k], p.n_k)."""
    nt = profiles.shape[1]
    tmax = t0 + dt * (nt - 1)
    out = np.zeros(px.size, dtype=profiles.dtype)
    for k in range(cos_t.size):
        a = cos_t[k] * px + sin_t[k] * py
        inside = (a >= t0) & (a <= tmax)
        ac = np.clip(a, t0, tmax)
        idx = np.minimum(((ac - t0) / dt).astype(np.int64), nt - 2)
        fr = (ac - t0) / dt - idx
        p = profiles[k]
        val = p[idx] * (1 - fr) + p[idx + 1] * fr
        out += np.where(inside, w[k] * val, 0.0)
    return out


def _edge_points(ei, t, i, j, hx, hy):
    # edges: 0 bottom 00->10, 1 right 10->11, 2 top 01->11, 3 left 00->01
    if ei == 0:
        return (i + t) * hx, j * hy
    if ei == 1:
        return (i + 1.0) * hx, (j + t) * hy
    if ei == 2:
        return (i + t) * hx, (j + 1.0) * hy
    return i * hx, (j + t) * hy


_SEGS = {
    1: [(0, 3)], 2: [(0, 1)], 3: [(1, 3)], 4: [(1, 2)],
    6: [(0, 2)], 7: [(2, 3)], 8: [(2, 3)], 9: [(0, 2)],
    11: [(1, 2)], 12: [(1, 3)], 13: [(0, 1)], 14: [(0, 3)],
}


def _cells_for_level(G, lam):
    s = G - lam
    neg = s < 0
    code = (neg[:-1, :-1].astype(np.int8)
            + 2 * neg[1:, :-1]
            + 4 * neg[1:, 1:]
            + 8 * neg[:-1, 1:])
    return s, code


def _edge_t(s, i, j, ei):
    s00 = s[i, j]
    s10 = s[i + 1, j]
    s11 = s[i + 1, j + 1]
    s01 = s[i, j + 1]
    if ei == 0:
        return s00 / (s00 - s10)
    if ei == 1:
        return s10 / (s10 - s11)
    if ei == 2:
        return s01 / (s01 - s11)
    return s00 / (s00 - s01)


def _eval_bilinear_cell(A, i, j, u, v):
    return (A[i, j] * (1 - u) * (1 - v) + A[i + 1, j] * u * (1 - v)
            + A[i, j + 1] * (1 - u) * v + A[i + 1, j + 1] * u * v)


def _segment_contrib(F, GX, GY, s, i, j, e1, e2, hx, hy):
    """Vectorized contribution of one segment family (arrays i, j)."""
    t1 = _edge_t(s, i, j, e1)
    t2 = _edge_t(s, i, j, e2)
    x1, y1 = _edge_points(e1, t1, i, j, hx, hy)
    x2, y2 = _edge_points(e2, t2, i, j, hx, hy)
    L = np.hypot(x2 - x1, y2 - y1)
    total = np.zeros_like(L)
    for (xx, yy) in ((x1, y1), (x2, y2)):
        u = xx / hx - i
        v = yy / hy - j
        f = _eval_bilinear_cell(F, i, j, u, v)
        gx = _eval_bilinear_cell(GX, i, j, u, v)
        gy = _eval_bilinear_cell(GY, i, j, u, v)
        gn = np.hypot(gx, gy)
        total += np.where(gn > _TINY, f / np.maximum(gn, _TINY), 0.0)
    return L * 0.5 * total


def _level_total(F, G, GX, GY, hx, hy, lam):
    s, code = _cells_for_level(G, lam)
    total = 0.0
    for c, segs in _SEGS.items():
        i, j = np.nonzero(code == c)
        if i.size == 0:
            continue
        for (e1, e2) in segs:
            total += float(np.sum(_segment_contrib(F, GX, GY, s, i, j, e1, e2, hx, hy)))
    for c in (5, 10):
        i, j = np.nonzero(code == c)
        if i.size == 0:
            continue
        gc = 0.25 * (s[i, j] + s[i + 1, j] + s[i + 1, j + 1] + s[i, j + 1])
        # center sign decides which diagonal the negative region connects
        diag = gc < 0
        if c == 10:
            diag = ~diag
        for m, pairs in ((diag, ((0, 1), (2, 3))), (~diag, ((0, 3), (1, 2)))):
            if not np.any(m):
                continue
            for (e1, e2) in pairs:
                total += float(np.sum(_segment_contrib(
                    F, GX, GY, s, i[m], j[m], e1, e2, hx, hy)))
    return total


def levelset_fixed_2d(F, G, GX, GY, hx, hy, lam):
    """Integral of F/|grad G| over the level set {G = lam} (marching squares)."""
    return _level_total(F, G, GX, GY, hx, hy, float(lam))


def levelset_sweep_2d(F, G, GX, GY, hx, hy, lam0, dlam, nlam):
    """levelset_fixed_2d for every level lam0 + k*dlam, k < nlam."""
    out = np.empty(nlam)
    for k in range(nlam):
        out[k] = _level_total(F, G, GX, GY, hx, hy, lam0 + k * dlam)
    return out


def levelset_bins_2d(F, G, hx, hy, lam0, dlam, nlam):
    """Slab-averaged tomogram: cell mass f*dA spread over the lam bins its
    G-range overlaps (bins centered at lam0 + k*dlam).  Integrates jumps
    and log singularities at critical values; conserves mass exactly."""
    g00 = G[:-1, :-1].ravel()
    g10 = G[1:, :-1].ravel()
    g11 = G[1:, 1:].ravel()
    g01 = G[:-1, 1:].ravel()
    gmin = np.minimum(np.minimum(g00, g10), np.minimum(g11, g01))
    gmax = np.maximum(np.maximum(g00, g10), np.maximum(g11, g01))
    mass = 0.25 * (F[:-1, :-1] + F[1:, :-1] + F[1:, 1:] + F[:-1, 1:]).ravel() * (hx * hy)
    keep = mass != 0.0
    gmin, gmax, mass = gmin[keep], gmax[keep], mass[keep]
    k0 = np.floor((gmin - lam0) / dlam + 0.5).astype(np.int64)
    k1 = np.floor((gmax - lam0) / dlam + 0.5).astype(np.int64)
    inside = (k1 >= 0) & (k0 <= nlam - 1)
    gmin, gmax, mass, k0, k1 = gmin[inside], gmax[inside], mass[inside], k0[inside], k1[inside]
    out = np.zeros(nlam)
    flat = k0 == k1
    if np.any(flat):
        np.add.at(out, k0[flat], mass[flat] / dlam)
    wide = ~flat
    if np.any(wide):
        gmin, gmax, mass = gmin[wide], gmax[wide], mass[wide]
        k0 = np.clip(k0[wide], 0, nlam - 1)
        k1 = np.clip(k1[wide], 0, nlam - 1)
        span = gmax - gmin
        for w in range(int(np.max(k1 - k0)) + 1):
            k = k0 + w
            sel = k <= k1
            if not np.any(sel):
                break
            elo = lam0 + (k[sel] - 0.5) * dlam
            a = np.maximum(gmin[sel], elo)
            b = np.minimum(gmax[sel], elo + dlam)
            ov = np.maximum(b - a, 0.0)
            np.add.at(out, k[sel], mass[sel] * ov / span[sel] / dlam)
    return out


def plane_integrals_3d(values, lo, h, dirs, e1s, e2s, t, cx, cy, cz, rad, step):
    """Trapezoid integrals over planes x = t*n + u*e1 + v*e2."""
    ndir, nt = dirs.shape[0], t.size
    nu = max(2, int(np.ceil(2.0 * rad / step)) + 1)
    du = 2.0 * rad / (nu - 1)
    wu = np.full(nu, du)
    wu[0] = wu[-1] = 0.5 * du
    w2 = wu[:, None] * wu[None, :]
    ugrid = -rad + du * np.arange(nu)
    c = np.array([cx, cy, cz])
    out = np.empty((ndir, nt))
    for k in range(ndir):
        n, e1, e2 = dirs[k], e1s[k], e2s[k]
        for it in range(nt):
            base = t[it] * n
            off = c - base
            # explicit component order so the numba backend can reproduce
            # the exact sample positions (off @ e1 may round differently)
            u0 = off[0] * e1[0] + off[1] * e1[1] + off[2] * e1[2]
            v0 = off[0] * e2[0] + off[1] * e2[1] + off[2] * e2[2]
            uu = (u0 + ugrid)[:, None]
            vv = (v0 + ugrid)[None, :]
            pts = (base[None, None, :] + uu[..., None] * e1[None, None, :]
                   + vv[..., None] * e2[None, None, :]).reshape(-1, 3)
            f = trilinear_sample_3d(values, lo, h, pts).reshape(nu, nu)
            out[k, it] = float(np.sum(f * w2))
    return out


def backproject_3d(profiles, t0, dt, dirs, w, xs, ys, zs, out):
    nt = profiles.shape[1]
    out[...] = 0
    tmax = t0 + dt * (nt - 1)
    X = xs[:, None, None]
    Y = ys[None, :, None]
    Z = zs[None, None, :]
    for k in range(dirs.shape[0]):
        a = dirs[k, 0] * X + dirs[k, 1] * Y + dirs[k, 2] * Z
        inside = (a >= t0) & (a <= tmax)
        ac = np.clip(a, t0, tmax)
        idx = np.minimum(((ac - t0) / dt).astype(np.int64), nt - 2)
        fr = (ac - t0) / dt - idx
        p = profiles[k]
        val = p[idx] * (1 - fr) + p[idx + 1] * fr
        out += np.where(inside, w[k] * val, 0.0)
    return out


def phase_sum_2d(coef, mux, muy, bxx, bxy, byy, ax, ay, qx, qy):
    """sum_k coef_k exp(-i[(q-mu_k).B(q-mu_k) + a.(q-mu_k)]) per point q."""
    m = qx.size
    out = np.empty(m, dtype=np.complex128)
    chunk = max(1, int(4_000_000 // max(1, mux.size)))
    for s0 in range(0, m, chunk):
        s1 = min(m, s0 + chunk)
        dx = qx[s0:s1, None] - mux[None, :]
        dy = qy[s0:s1, None] - muy[None, :]
        phase = bxx * dx * dx + 2.0 * bxy * dx * dy + byy * dy * dy + ax * dx + ay * dy
        out[s0:s1] = np.exp(-1j * phase) @ coef
    return out
