"""Line and hyperplane transforms with two inversion routes.

Conventions.  A line in the plane is d = x.n(theta) with unit normal
n(theta) = (cos theta, sin theta) and signed offset d, so (d, theta) and
(-d, theta + pi) label the same line.  The affine tomogram is

    F(lam, mu) = Int f(x) delta(lam - mu.x) d^n x,

homogeneous of degree -1: F(s lam, s mu) = F(lam, mu) / |s|.  For unit mu
it coincides with the line (n = 2) or plane (n = 3) integral transform.

Inversion route 1 (invert_radon_hilbert) follows the classical chain: the
average of the sinogram over lines tangent to a circle of radius r about x,

    m_r(x) = (1/2pi) Int_0^2pi F(x.n(theta) + r, theta) dtheta,

recovers f through f(x) = -(1/pi) Int_0^inf dr/r  d m_r(x) / dr.  On a
uniform sinogram the r-derivative, the 1/r weight and the trapezoid r-grid
(aligned with the lambda step, lower cutoff r0 = one step) collapse into a
single per-angle convolution filter applied before backprojection; the
nested form is kept as a test oracle, the filter is exactly the same sum.

Inversion route 2 (invert_affine) starts from the Fourier form

    f(x) = (2pi)^-n Int dlam d^n mu  F(lam, mu) e^{i(lam - mu.x)}

and reduces it by homogeneity with mu = rho n, lam = rho t (rho > 0, unit
n), which gives a ramp-filtered backprojection

    f(x) = (2pi)^-n Int_{S^{n-1}} dn Int_0^inf drho rho^{n-1}
           G_n(rho) e^{-i rho x.n},      G_n(rho) = Int F(t, n) e^{i rho t} dt,

evaluated with explicit trapezoid quadrature in t and rho and a uniform
(n=2) or Gauss-Legendre-by-uniform (n=3) direction set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ._backend import kernels
from .errors import BudgetError, ValidationError
from .field import BoxDomain, ScalarField, TomogramTable

MIN_DIRS = 16
MIN_LAMBDA = 32


@dataclass(frozen=True)
class LineParam:
    """Signed offset and normal angle of a line d = x.n(theta)."""
    d: float
    theta: float


@dataclass(frozen=True)
class AffineParam:
    """Affine hyperplane parameters (lam, mu), mu != 0."""
    lam: float
    mu: tuple

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(self.mu))
        if math.sqrt(sum(m * m for m in mu)) == 0.0:
            raise ValidationError("mu must be nonzero")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class QuadratureSpec:
    """Budget for invert_affine: direction count, lambda samples per
    direction, and the radial frequency grid.  n_rho / rho_max default to
    values matched to the output grid (Nyquist) and the lambda span."""

    n_dirs: int = 360
    n_lambda: int = 513
    n_rho: int | None = None
    rho_max: float | None = None

    def __post_init__(self):
        if self.n_dirs < MIN_DIRS:
            raise BudgetError(
                f"n_dirs={self.n_dirs} below documented minimum {MIN_DIRS}")
        if self.n_lambda < MIN_LAMBDA:
            raise BudgetError(
                f"n_lambda={self.n_lambda} below documented minimum {MIN_LAMBDA}")


def _check_step(f: ScalarField, step):
    hmin = min(f.domain.spacing)
    if step is None:
        return hmin
    step = float(step)
    if step <= 0 or step > hmin + 1e-15:
        raise ValidationError(
            f"integration step {step} must lie in (0, min cell spacing {hmin:g}]")
    return step


def radon_line(f: ScalarField, d: float, theta: float, step=None) -> float:
    """Line integral of f over the line x.n(theta) = d (trapezoid rule,
    bilinear interpolation, zero outside the box)."""
    if f.domain.dim != 2:
        raise ValidationError("radon_line needs a 2-d field")
    step = _check_step(f, step)
    dom = f.domain
    c = dom.center()
    out = kernels.line_integrals_2d(
        f.values, dom.lo[0], dom.lo[1], dom.spacing[0], dom.spacing[1],
        np.array([float(d)]), np.array([math.cos(theta)]),
        np.array([math.sin(theta)]), c[0], c[1],
        dom.half_diagonal() + step, step)
    return float(out[0, 0])


def sinogram_line(f: ScalarField, n_lambda: int, n_theta: int,
                  lam_max=None, span="half", step=None) -> TomogramTable:
    """Sinogram table over (lambda, theta); theta covers [0, pi) for
    span="half" or [0, 2pi) for span="full", lambda symmetric about 0."""
    if f.domain.dim != 2:
        raise ValidationError("sinogram_line needs a 2-d field")
    if n_lambda < 2 or n_theta < 1:
        raise ValidationError("need n_lambda >= 2 and n_theta >= 1")
    step = _check_step(f, step)
    dom = f.domain
    if lam_max is None:
        corners = np.array([(x, y) for x in (dom.lo[0], dom.hi[0])
                            for y in (dom.lo[1], dom.hi[1])])
        lam_max = float(np.max(np.linalg.norm(corners, axis=1))) + max(dom.spacing)
    lam = np.linspace(-lam_max, lam_max, n_lambda)
    full = 2.0 * math.pi if span == "full" else math.pi
    if span not in ("half", "full"):
        raise ValidationError("span must be 'half' or 'full'")
    theta = full * np.arange(n_theta) / n_theta
    c = dom.center()
    vals = kernels.line_integrals_2d(
        f.values, dom.lo[0], dom.lo[1], dom.spacing[0], dom.spacing[1],
        lam, np.cos(theta), np.sin(theta), c[0], c[1],
        dom.half_diagonal() + step, step)
    return TomogramTable(("lambda", "theta"), (lam, theta), vals)


def _sino_axes(sino: TomogramTable):
    if sino.axes != ("lambda", "theta"):
        raise ValidationError(
            f"expected axes ('lambda','theta'), got {sino.axes}")
    lam = sino.axis("lambda")
    theta = sino.axis("theta")
    dl = np.diff(lam)
    if not np.allclose(dl, dl[0], rtol=1e-9, atol=1e-12):
        raise ValidationError("lambda axis must be uniform")
    dth = np.diff(theta)
    if theta.size > 1 and not np.allclose(dth, dth[0], rtol=1e-9, atol=1e-12):
        raise ValidationError("theta axis must be uniform")
    return lam, theta


def _sino_span(theta: np.ndarray) -> str:
    if theta.size < 2:
        return "half"
    step = theta[1] - theta[0]
    total = step * theta.size
    if abs(total - math.pi) < 0.5 * step:
        return "half"
    if abs(total - 2.0 * math.pi) < 0.5 * step:
        return "full"
    raise ValidationError(
        f"theta grid must cover [0,pi) or [0,2pi); covers {total:g}")


def _interp_profile(vals: np.ndarray, lam: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.interp(t, lam, vals, left=0.0, right=0.0)
    return np.where((t < lam[0]) | (t > lam[-1]), 0.0, out)


def tangent_circle_average(sino: TomogramTable, q: float, p: float, r: float) -> float:
    """Average of the sinogram over all lines tangent to the circle of
    radius r about (q, p): (1/2pi) Int_0^2pi F(q cos + p sin + r, theta)."""
    lam, theta = _sino_axes(sino)
    if r < 0:
        raise ValidationError("radius must be nonnegative")
    span = _sino_span(theta)
    t = q * np.cos(theta) + p * np.sin(theta)
    if span == "full":
        offs = t + r
        need = np.max(np.abs(offs))
        if need > lam[-1] + 1e-12:
            raise ValidationError(
                f"offset {need:g} outside sinogram range [{lam[0]:g}, {lam[-1]:g}]")
        acc = sum(_interp_profile(sino.values[:, j], lam, offs[j:j + 1])[0]
                  for j in range(theta.size))
        return float(acc / theta.size)
    # half span: theta + pi contributes F(-(t - r)) by the signed-d symmetry
    need = max(np.max(np.abs(t + r)), np.max(np.abs(t - r)))
    if need > lam[-1] + 1e-12:
        raise ValidationError(
            f"offset {need:g} outside sinogram range [{lam[0]:g}, {lam[-1]:g}]")
    acc = 0.0
    for j in range(theta.size):
        g = sino.values[:, j]
        acc += _interp_profile(g, lam, np.array([t[j] + r]))[0]
        acc += _interp_profile(g, lam, np.array([t[j] - r]))[0]
    return float(acc / (2 * theta.size))


def _fold_full_sinogram(vals, lam, theta):
    """Fold a [0,2pi) sinogram onto [0,pi) using F(d,th+pi) = F(-d,th)."""
    n = theta.size
    if n % 2 != 0:
        raise ValidationError("full-span sinogram needs an even angle count")
    if abs(lam[0] + lam[-1]) > 1e-9 * max(1.0, abs(lam[-1])):
        raise ValidationError("full-span folding needs a symmetric lambda axis")
    half = n // 2
    folded = 0.5 * (vals[:, :half] + vals[::-1, half:])
    return folded, theta[:half]


def hilbert_filter_kernel(n_lambda: int, dlam: float) -> np.ndarray:
    """Correlation stencil equivalent to: central difference in r of the
    tangent-circle average, then -(1/pi)... excluded; this kernel carries
    only Int_{r0}^{rmax} dr/r of (1/2)[g'(d+r) - g'(d-r)] with r on the
    lambda lattice, r0 = dlam, trapezoid weights.  Offsets run to
    n_lambda + 2 so the support of any profile is exhausted."""
    K = n_lambda
    M = K + 2
    kappa = np.zeros(2 * M + 1)
    wr = np.full(K, dlam)
    wr[0] *= 0.5
    wr[-1] *= 0.5
    for k in range(K):
        r = dlam * (k + 1)
        ck = 0.5 * wr[k] / r / (2.0 * dlam)
        kappa[M + k + 2] += ck
        kappa[M + k] -= ck
        kappa[M - k] -= ck
        kappa[M - k - 2] += ck
    return kappa


def invert_radon_hilbert(sino: TomogramTable, out_domain: BoxDomain) -> ScalarField:
    """Reconstruct f on out_domain from a line sinogram via the
    tangent-circle / 1-over-r route (see module docstring)."""
    if out_domain.dim != 2:
        raise ValidationError("out_domain must be 2-d")
    lam, theta = _sino_axes(sino)
    vals = sino.values
    if _sino_span(theta) == "full":
        vals, theta = _fold_full_sinogram(vals, lam, theta)
    if theta.size < 8:
        raise ValidationError(
            f"angular undersampling: {theta.size} angles, need at least 8")
    if lam.size < 4:
        raise ValidationError("lambda axis too short")
    dlam = float(lam[1] - lam[0])
    kappa = hilbert_filter_kernel(lam.size, dlam)
    prof = fftconvolve(vals.T, kappa[None, ::-1], mode="same", axes=1)
    out = np.empty(out_domain.shape)
    kernels.backproject_2d(
        np.ascontiguousarray(prof), float(lam[0]), dlam,
        np.ascontiguousarray(np.cos(theta)), np.ascontiguousarray(np.sin(theta)),
        np.full(theta.size, 1.0 / theta.size),
        out_domain.axis(0), out_domain.axis(1), out)
    return ScalarField(out_domain, -out / math.pi)


def backproject(sino: TomogramTable, out_domain: BoxDomain) -> ScalarField:
    """Dual map: average of F(x.n(theta), theta) over the tabulated angles."""
    if out_domain.dim != 2:
        raise ValidationError("out_domain must be 2-d")
    lam, theta = _sino_axes(sino)
    out = np.empty(out_domain.shape)
    kernels.backproject_2d(
        np.ascontiguousarray(sino.values.T), float(lam[0]), float(lam[1] - lam[0]),
        np.ascontiguousarray(np.cos(theta)), np.ascontiguousarray(np.sin(theta)),
        np.full(theta.size, 1.0 / theta.size),
        out_domain.axis(0), out_domain.axis(1), out)
    return ScalarField(out_domain, out)


def _plane_basis(n: np.ndarray):
    """Deterministic in-plane frame; even under n -> -n up to e2 sign."""
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    e1 = e - (e @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def radon_hyperplane(f: ScalarField, lam: float, mu, step=None) -> float:
    """Int f(x) delta(lam - mu.x) d^n x for n in {2, 3}."""
    mu = np.asarray(mu, dtype=float).ravel()
    n = f.domain.dim
    if mu.size != n:
        raise ValidationError(f"mu must have {n} components")
    norm = float(np.linalg.norm(mu))
    if norm == 0.0:
        raise ValidationError("mu must be nonzero")
    if n == 2:
        return radon_line(f, lam / norm, math.atan2(mu[1], mu[0]), step) / norm
    if n != 3:
        raise ValidationError("radon_hyperplane supports n in {2, 3}")
    step = _check_step(f, step)
    dom = f.domain
    nhat = mu / norm
    e1, e2 = _plane_basis(nhat)
    c = dom.center()
    out = kernels.plane_integrals_3d(
        f.values, np.asarray(dom.lo), np.asarray(dom.spacing),
        nhat[None, :], e1[None, :], e2[None, :],
        np.array([lam / norm]), c[0], c[1], c[2],
        dom.half_diagonal() + step, step)
    return float(out[0, 0]) / norm


def affine_tomogram(f: ScalarField, lam: float, mu, step=None) -> float:
    """Affine tomogram F(lam, mu) = Int f delta(lam - mu.x) d^n x.

    Canonicalized through the unit-normal transform, so homogeneity
    F(s lam, s mu) = F(lam, mu)/|s| holds to rounding."""
    mu = np.asarray(mu, dtype=float).ravel()
    n = f.domain.dim
    if mu.size != n:
        raise ValidationError(f"mu must have {n} components")
    norm = float(np.linalg.norm(mu))
    if norm == 0.0:
        raise ValidationError("mu must be nonzero")
    if n == 1:
        return float(np.interp(lam / mu[0], f.domain.axis(0), f.values,
                               left=0.0, right=0.0)) / norm
    return radon_hyperplane(f, lam, mu, step)


class FieldAffineSampler:
    """Affine tomogram sampler bound to a field; used to drive invert_affine
    in round trips.  batch(lams, mu) evaluates a whole lambda profile."""

    def __init__(self, f: ScalarField, step=None):
        self.f = f
        self.step = _check_step(f, step)
        self.dim = f.domain.dim

    def __call__(self, lam, mu):
        return affine_tomogram(self.f, lam, mu, self.step)

    def batch(self, lams, mu):
        mu = np.asarray(mu, dtype=float).ravel()
        norm = float(np.linalg.norm(mu))
        if norm == 0.0:
            raise ValidationError("mu must be nonzero")
        dom = self.f.domain
        c = dom.center()
        lams = np.ascontiguousarray(np.asarray(lams, dtype=float) / norm)
        if self.dim == 2:
            th = math.atan2(mu[1], mu[0])
            out = kernels.line_integrals_2d(
                self.f.values, dom.lo[0], dom.lo[1], dom.spacing[0], dom.spacing[1],
                lams, np.array([math.cos(th)]), np.array([math.sin(th)]),
                c[0], c[1], dom.half_diagonal() + self.step, self.step)
            return out[:, 0] / norm
        nhat = mu / norm
        e1, e2 = _plane_basis(nhat)
        out = kernels.plane_integrals_3d(
            self.f.values, np.asarray(dom.lo), np.asarray(dom.spacing),
            nhat[None, :], e1[None, :], e2[None, :], lams,
            c[0], c[1], c[2], dom.half_diagonal() + self.step, self.step)
        return out[0, :] / norm


class TableAffineSampler:
    """Affine sampler backed by a (lambda, theta) sinogram table, using the
    signed-offset symmetry to cover the full circle."""

    def __init__(self, sino: TomogramTable):
        self.lam, self.theta = _sino_axes(sino)
        self.vals = sino.values
        self.span = _sino_span(self.theta)
        self.dim = 2

    def _profile(self, theta):
        period = math.pi if self.span == "half" else 2.0 * math.pi
        th = theta % period
        flip = False
        if self.span == "half" and (theta % (2.0 * math.pi)) >= math.pi:
            flip = True
        step = self.theta[1] - self.theta[0] if self.theta.size > 1 else period
        pos = th / step
        j0 = int(math.floor(pos)) % self.theta.size
        j1 = (j0 + 1) % self.theta.size
        fr = pos - math.floor(pos)
        wrap1 = (j1 == 0)
        g0 = self.vals[:, j0]
        g1 = self.vals[:, j1][::-1] if (wrap1 and self.span == "half") else self.vals[:, j1]
        g = (1 - fr) * g0 + fr * g1
        return g[::-1] if flip else g

    def batch(self, lams, mu):
        mu = np.asarray(mu, dtype=float).ravel()
        norm = float(np.linalg.norm(mu))
        if norm == 0.0:
            raise ValidationError("mu must be nonzero")
        g = self._profile(math.atan2(mu[1], mu[0]))
        return _interp_profile(g, self.lam, np.asarray(lams, dtype=float) / norm) / norm

    def __call__(self, lam, mu):
        return float(self.batch(np.array([lam]), mu)[0])


def _direction_set(n: int, quad: QuadratureSpec):
    """Unit directions and weights covering the full sphere/circle."""
    if n == 2:
        th = 2.0 * math.pi * np.arange(quad.n_dirs) / quad.n_dirs
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        w = np.full(quad.n_dirs, 2.0 * math.pi / quad.n_dirs)
        return dirs, w
    n_polar = max(4, int(math.floor(math.sqrt(quad.n_dirs / 2.0))))
    n_azim = 2 * n_polar
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    beta = 2.0 * math.pi * np.arange(n_azim) / n_azim
    sin_a = np.sqrt(np.maximum(0.0, 1.0 - x ** 2))
    dirs = np.empty((n_polar * n_azim, 3))
    w = np.empty(n_polar * n_azim)
    k = 0
    for i in range(n_polar):
        for l in range(n_azim):
            dirs[k] = (sin_a[i] * math.cos(beta[l]),
                       sin_a[i] * math.sin(beta[l]), x[i])
            w[k] = wx[i] * (2.0 * math.pi / n_azim)
            k += 1
    return dirs, w


def _sample_profiles(tomo_sampler, dirs, t):
    batch = getattr(tomo_sampler, "batch", None)
    G = np.empty((dirs.shape[0], t.size))
    for k in range(dirs.shape[0]):
        if batch is not None:
            G[k] = batch(t, dirs[k])
        else:
            G[k] = [tomo_sampler(tv, dirs[k]) for tv in t]
    return G


def _ramp_filter(G, t, rho, n):
    """Per-direction filtered profiles of the Fourier inversion route:
    prof_j(t) = (2pi)^-n Int_0^rhomax drho rho^{n-1} G_j(rho) e^{-i rho t}."""
    dt = t[1] - t[0]
    wt = np.full(t.size, dt)
    wt[0] = wt[-1] = 0.5 * dt
    Ghat = (G * wt) @ np.exp(1j * np.outer(t, rho))     # (ndir, nrho)
    drho = rho[1] - rho[0]
    wr = np.full(rho.size, drho)
    wr[0] = wr[-1] = 0.5 * drho
    ramp = wr * rho ** (n - 1)
    prof = (Ghat * ramp) @ np.exp(-1j * np.outer(rho, t))   # (ndir, nt)
    return np.ascontiguousarray(prof / (2.0 * math.pi) ** n)


def _fourier_profiles(tomo_sampler, out_domain, quad, lam_max=None):
    """Direction set, t-grid and filtered profiles for the Fourier route.

    rho_max is capped at the Nyquist frequency of the profile grid: beyond
    pi/dt the discrete transform of the t-samples only repeats aliased
    copies, which the ramp weight would amplify."""
    n = out_domain.dim
    if lam_max is None:
        corners = np.array(np.meshgrid(*[(out_domain.lo[k], out_domain.hi[k])
                                         for k in range(n)],
                                       indexing="ij")).reshape(n, -1).T
        lam_max = float(np.max(np.linalg.norm(corners, axis=1)))
    T = lam_max + 2 * max(out_domain.spacing)
    t = np.linspace(-T, T, quad.n_lambda)
    rho_max = quad.rho_max or math.pi / min(out_domain.spacing)
    rho_max = min(rho_max, math.pi / (t[1] - t[0]))
    n_rho = quad.n_rho or int(math.ceil(2.0 * rho_max * T / math.pi)) + 1
    rho = np.linspace(0.0, rho_max, n_rho)
    dirs, wdir = _direction_set(n, quad)
    G = _sample_profiles(tomo_sampler, dirs, t)
    return dirs, wdir, t, _ramp_filter(G, t, rho, n)


def invert_affine(tomo_sampler, out_domain: BoxDomain,
                  quad: QuadratureSpec | None = None) -> ScalarField:
    """Fourier-route inversion of the affine tomogram (module docstring).

    tomo_sampler(lam, mu) -> F(lam, mu); an optional .batch(lams, mu)
    avoids per-sample call overhead.  The reconstruction assumes the
    support of f is contained in out_domain."""
    n = out_domain.dim
    if n not in (2, 3):
        raise ValidationError("invert_affine supports 2-d and 3-d domains")
    quad = quad or QuadratureSpec()
    dirs, wdir, t, prof = _fourier_profiles(tomo_sampler, out_domain, quad)
    dt = float(t[1] - t[0])
    out = np.empty(out_domain.shape, dtype=np.complex128)
    if n == 2:
        kernels.backproject_2d(
            prof, float(t[0]), dt,
            np.ascontiguousarray(dirs[:, 0]), np.ascontiguousarray(dirs[:, 1]),
            wdir, out_domain.axis(0), out_domain.axis(1), out)
    else:
        kernels.backproject_3d(
            prof, float(t[0]), dt, np.ascontiguousarray(dirs), wdir,
            out_domain.axis(0), out_domain.axis(1), out_domain.axis(2), out)
    return ScalarField(out_domain, out.real)
