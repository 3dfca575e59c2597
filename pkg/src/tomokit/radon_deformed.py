"""Radon transforms bent by a diffeomorphism, plus quadric families.

Deformed transform: for a diffeomorphism phi of R^n with Jacobian
determinant J(q) = |det d(phi)/dq|,

    F(lam, mu) = Int f(q) delta(lam - mu.phi(q)) d^n q
               = Int f(phi^-1(x)) / J(phi^-1(x))  delta(lam - mu.x) d^n x,

so the deformed tomogram of f is the plain affine tomogram of the pushed
forward density g = (f / J) o phi^-1, and the inverse map is the affine
inverse followed by a pullback: f(q) = g(phi(q)) * J(q).  deformed_invert
evaluates the affine Fourier-route inverse directly at the scattered points
phi(q), which avoids gridding x-space around the image of the singular set.

Forward evaluation marches level sets of G(q) = mu.phi(q) on a refined copy
of the grid (marching squares), accumulating segment length times the mean
of f/|grad G| at the segment endpoints; grad G = (dphi/dq)^T mu is analytic.
Points within singular_eps of the declared singular set are masked to zero.

Quadric families integrate over {q : (q-mu).B(q-mu) + a.(q-mu) = lam} with
det B != 0 (spheres for B = I, hyperbolas for B = diag(1,-1)).  The inverse

    f(q) = |det B| / pi^n  Int d^n mu dlam  F(lam, mu)
           e^{i(lam - (q-mu).B(q-mu) - a.(q-mu))}

is evaluated lam-first: C(mu) = Int F(lam, mu) e^{i lam} dlam on a uniform
lam grid, then a tensor Gauss-Legendre mu sum of C(mu) against the
oscillatory Gaussian phase, optionally damped by e^{-eps |mu|^2}.  The mu
window defaults to the output box padded by 4 sigma_B, sigma_B =
1/sqrt(min |eig B|); a narrower explicit window warns.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._backend import kernels
from .errors import ValidationError
from .field import BoxDomain, ScalarField
from .radon_affine import (QuadratureSpec, affine_tomogram, invert_affine,
                           _fourier_profiles)


@dataclass(frozen=True)
class Diffeomorphism:
    """Forward map, Jacobian data, inverse and singular set of a change of
    variables on R^dim.  jacobian_det returns the absolute determinant (the
    measure weight); jacobian the full matrix d(phi_i)/d(q_j)."""

    dim: int
    name: str
    forward: callable = dc_field(repr=False)
    inverse: callable = dc_field(repr=False)
    jacobian: callable = dc_field(repr=False)
    jacobian_det: callable = dc_field(repr=False)
    singular_distance: callable = dc_field(repr=False)
    is_identity: bool = False

    def singular_mask(self, pts, eps):
        return self.singular_distance(np.asarray(pts, dtype=float)) <= eps


def identity_diffeo(dim: int = 2) -> Diffeomorphism:
    def fwd(p):
        return np.array(p, dtype=float, copy=True)

    def jac(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.eye(dim), p.shape[:-1] + (dim, dim)).copy()

    return Diffeomorphism(
        dim=dim, name="identity", forward=fwd, inverse=fwd, jacobian=jac,
        jacobian_det=lambda p: np.ones(np.asarray(p).shape[:-1]),
        singular_distance=lambda p: np.full(np.asarray(p).shape[:-1], np.inf),
        is_identity=True)


def conformal_inversion() -> Diffeomorphism:
    """phi(q) = q / |q|^2 on the punctured plane; an involution.  Level sets
    of mu.phi are circles through the origin; |det J| = 1/|q|^4."""

    def fwd(p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1, keepdims=True)
        return p / r2

    def jac(p):
        p = np.asarray(p, dtype=float)
        r2 = np.sum(p * p, axis=-1)
        out = np.empty(p.shape[:-1] + (2, 2))
        q, pp = p[..., 0], p[..., 1]
        out[..., 0, 0] = (pp * pp - q * q)
        out[..., 0, 1] = -2 * q * pp
        out[..., 1, 0] = -2 * q * pp
        out[..., 1, 1] = (q * q - pp * pp)
        return out / (r2 * r2)[..., None, None]

    return Diffeomorphism(
        dim=2, name="conformal_inversion", forward=fwd, inverse=fwd,
        jacobian=jac,
        jacobian_det=lambda p: 1.0 / np.sum(np.asarray(p, dtype=float) ** 2, axis=-1) ** 2,
        singular_distance=lambda p: np.linalg.norm(np.asarray(p, dtype=float), axis=-1))


def axis_inversion() -> Diffeomorphism:
    """phi(q, p) = (1/q, p); level sets of mu.phi are hyperbola branches;
    |det J| = 1/q^2.  Singular on the q = 0 axis."""

    def fwd(pt):
        pt = np.asarray(pt, dtype=float)
        out = pt.copy()
        out[..., 0] = 1.0 / pt[..., 0]
        return out

    def jac(pt):
        pt = np.asarray(pt, dtype=float)
        out = np.zeros(pt.shape[:-1] + (2, 2))
        out[..., 0, 0] = -1.0 / pt[..., 0] ** 2
        out[..., 1, 1] = 1.0
        return out

    return Diffeomorphism(
        dim=2, name="axis_inversion", forward=fwd, inverse=fwd, jacobian=jac,
        jacobian_det=lambda pt: 1.0 / np.asarray(pt, dtype=float)[..., 0] ** 2,
        singular_distance=lambda pt: np.abs(np.asarray(pt, dtype=float)[..., 0]))


def bertrand(n: int = 1) -> Diffeomorphism:
    """Bertrand change of variables on 2n phase-space coordinates
    (q_1..q_n, p_1..p_n) -> (q, q*p); |det J| = prod |q_j|."""
    if n < 1:
        raise ValidationError("bertrand needs n >= 1")
    dim = 2 * n

    def fwd(pt):
        pt = np.asarray(pt, dtype=float)
        out = pt.copy()
        out[..., n:] = pt[..., :n] * pt[..., n:]
        return out

    def inv(x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., n:] = x[..., n:] / x[..., :n]
        return out

    def jac(pt):
        pt = np.asarray(pt, dtype=float)
        out = np.zeros(pt.shape[:-1] + (dim, dim))
        for j in range(n):
            out[..., j, j] = 1.0
            out[..., n + j, j] = pt[..., n + j]
            out[..., n + j, n + j] = pt[..., j]
        return out

    return Diffeomorphism(
        dim=dim, name=f"bertrand({n})", forward=fwd, inverse=inv, jacobian=jac,
        jacobian_det=lambda pt: np.prod(
            np.abs(np.asarray(pt, dtype=float)[..., :n]), axis=-1),
        singular_distance=lambda pt: np.min(
            np.abs(np.asarray(pt, dtype=float)[..., :n]), axis=-1))


def builtin_diffeos() -> dict:
    return {
        "identity": identity_diffeo(2),
        "conformal_inversion": conformal_inversion(),
        "axis_inversion": axis_inversion(),
        "bertrand": bertrand(1),
    }


@dataclass(frozen=True)
class CircleParam:
    """Geometry of the level set lam = (mu q + nu p)/(q^2+p^2): a circle
    through the origin, or a line through the origin when lam = 0."""
    center: tuple | None
    radius: float | None
    degenerate: bool


def circle_geometry(lam: float, mu: float, nu: float) -> CircleParam:
    if mu == 0.0 and nu == 0.0:
        raise ValidationError("(mu, nu) must be nonzero")
    if lam == 0.0:
        return CircleParam(center=None, radius=None, degenerate=True)
    return CircleParam(center=(mu / (2.0 * lam), nu / (2.0 * lam)),
                       radius=math.hypot(mu, nu) / (2.0 * abs(lam)),
                       degenerate=False)


# ---------------------------------------------------------------------------
# level-set forward machinery
# ---------------------------------------------------------------------------

def _refined_grid(dom: BoxDomain, refine: int):
    shape = tuple((s - 1) * refine + 1 for s in dom.shape)
    ref = BoxDomain(dom.lo, dom.hi, shape)
    return ref


def _levelset_inputs(f: ScalarField, diffeo: Diffeomorphism, mu, refine, eps):
    """Refined F (bilinear), analytic G = mu.phi and grad G on the nodes."""
    dom = f.domain
    ref = _refined_grid(dom, refine)
    X, Y = ref.grid()
    pts = np.stack([X, Y], axis=-1)
    if refine == 1:
        F = np.array(f.values)
    else:
        F = kernels.bilinear_sample_2d(
            f.values, dom.lo[0], dom.lo[1], dom.spacing[0], dom.spacing[1],
            np.ascontiguousarray(X.ravel()), np.ascontiguousarray(Y.ravel())
        ).reshape(ref.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = diffeo.forward(pts)
        J = diffeo.jacobian(pts)
    G = phi[..., 0] * mu[0] + phi[..., 1] * mu[1]
    GX = J[..., 0, 0] * mu[0] + J[..., 1, 0] * mu[1]
    GY = J[..., 0, 1] * mu[0] + J[..., 1, 1] * mu[1]
    bad = ~np.isfinite(G) | ~np.isfinite(GX) | ~np.isfinite(GY)
    if eps > 0:
        bad |= diffeo.singular_mask(pts, eps)
    if np.any(bad):
        F = np.where(bad, 0.0, F)
        G = np.where(bad, 0.0, G)
        GX = np.where(bad, 0.0, GX)
        GY = np.where(bad, 0.0, GY)
    return ref, F, G, GX, GY


def _default_eps(dom: BoxDomain) -> float:
    return 2.0 * max(dom.spacing)


def deformed_tomogram(f: ScalarField, diffeo: Diffeomorphism, lam: float, mu,
                      refine: int = 2, singular_eps: float | None = None) -> float:
    """Int f delta(lam - mu.phi(q)) d2q by marching the level set of mu.phi."""
    mu = np.asarray(mu, dtype=float).ravel()
    if f.domain.dim != 2 or diffeo.dim != 2:
        raise ValidationError("deformed_tomogram handles planar fields")
    if mu.size != 2 or not np.all(np.isfinite(mu)) or np.linalg.norm(mu) == 0.0:
        raise ValidationError("mu must be a finite nonzero 2-vector")
    if diffeo.is_identity:
        return affine_tomogram(f, lam, mu)
    eps = _default_eps(f.domain) if singular_eps is None else singular_eps
    ref, F, G, GX, GY = _levelset_inputs(f, diffeo, mu, refine, eps)
    return float(kernels.levelset_fixed_2d(
        np.ascontiguousarray(F), np.ascontiguousarray(G),
        np.ascontiguousarray(GX), np.ascontiguousarray(GY),
        ref.spacing[0], ref.spacing[1], float(lam)))


def deformed_sweep(f: ScalarField, diffeo: Diffeomorphism, lams, mu,
                   refine: int = 2, singular_eps: float | None = None) -> np.ndarray:
    """deformed_tomogram over a uniform lam grid in one marching pass."""
    lams = np.asarray(lams, dtype=float)
    dl = np.diff(lams)
    if lams.size < 2 or not np.allclose(dl, dl[0], rtol=1e-9, atol=1e-12):
        raise ValidationError("lams must be a uniform grid")
    mu = np.asarray(mu, dtype=float).ravel()
    if diffeo.is_identity:
        from .radon_affine import FieldAffineSampler
        return FieldAffineSampler(f).batch(lams, mu)
    eps = _default_eps(f.domain) if singular_eps is None else singular_eps
    ref, F, G, GX, GY = _levelset_inputs(f, diffeo, mu, refine, eps)
    return kernels.levelset_sweep_2d(
        np.ascontiguousarray(F), np.ascontiguousarray(G),
        np.ascontiguousarray(GX), np.ascontiguousarray(GY),
        ref.spacing[0], ref.spacing[1],
        float(lams[0]), float(dl[0]), lams.size)


class DeformedFieldSampler:
    """Deformed tomogram sampler bound to a field; batch() runs the level
    set sweep once per direction."""

    def __init__(self, f: ScalarField, diffeo: Diffeomorphism,
                 refine: int = 2, singular_eps: float | None = None):
        self.f = f
        self.diffeo = diffeo
        self.refine = refine
        self.eps = singular_eps

    def __call__(self, lam, mu):
        return deformed_tomogram(self.f, self.diffeo, lam, mu,
                                 self.refine, self.eps)

    def batch(self, lams, mu):
        lams = np.asarray(lams, dtype=float)
        dl = np.diff(lams)
        if lams.size >= 2 and np.allclose(dl, dl[0], rtol=1e-9, atol=1e-12):
            return deformed_sweep(self.f, self.diffeo, lams, mu,
                                  self.refine, self.eps)
        return np.array([self(l, mu) for l in lams])


def _probe_lam_support(sampler, n: int, start: float = 1.0) -> float:
    """Grow a symmetric lam window until the tomogram tail is negligible."""
    dirs = np.stack([np.cos(np.linspace(0, 2 * math.pi, 8, endpoint=False)),
                     np.sin(np.linspace(0, 2 * math.pi, 8, endpoint=False))], axis=1)
    if n == 3:
        dirs = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1],
                         [0.577350269189626, 0.577350269189626, 0.577350269189626]])
    T = start
    peak = 0.0
    batch = getattr(sampler, "batch", None)
    for _ in range(16):
        tail = 0.0
        for d in dirs:
            t = np.linspace(-T, T, 33)
            g = np.abs(batch(t, d) if batch is not None
                       else np.array([sampler(tv, d) for tv in t]))
            peak = max(peak, float(g.max()))
            tail = max(tail, float(g[np.abs(t) > 0.8 * T].max()))
        if peak > 0 and tail < 1e-6 * peak:
            return T
        T *= 2.0
    return T


def deformed_invert(tomo_sampler, diffeo: Diffeomorphism, out_domain: BoxDomain,
                    quad: QuadratureSpec | None = None, lam_max: float | None = None,
                    singular_eps: float | None = None,
                    on_singular: str = "reject") -> ScalarField:
    """Invert a deformed tomogram: affine Fourier inverse in x = phi(q),
    evaluated at the scattered pullback points, times the Jacobian weight.

    lam_max bounds the tomogram support in lam for unit mu; by default it
    is probed by expanding a window until the profiles decay.  The filter
    grid is widened to cover every pullback point so no query falls off the
    profile table.  Output nodes within singular_eps of the singular set of
    phi are rejected by default; on_singular="mask" reconstructs them as
    zero instead."""
    if out_domain.dim != 2 or diffeo.dim != 2:
        raise ValidationError("deformed_invert handles planar domains")
    if on_singular not in ("reject", "mask"):
        raise ValidationError('on_singular must be "reject" or "mask"')
    quad = quad or QuadratureSpec()
    if diffeo.is_identity:
        return invert_affine(tomo_sampler, out_domain, quad)
    eps = _default_eps(out_domain) if singular_eps is None else singular_eps
    X, Y = out_domain.grid()
    pts = np.stack([X, Y], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        xpts = diffeo.forward(pts)
        J = diffeo.jacobian_det(pts)
    mask = diffeo.singular_mask(pts, eps) | ~np.all(np.isfinite(xpts), axis=-1)
    mask |= ~np.isfinite(J)
    if mask.any() and on_singular == "reject":
        raise ValidationError(
            f"out_domain intersects the singular set of {diffeo.name}: "
            f"{int(mask.sum())} of {mask.size} nodes within eps={eps:g}")
    if lam_max is None:
        lam_max = _probe_lam_support(tomo_sampler, 2)
    xflat = np.where(mask[..., None], 0.0, xpts).reshape(-1, 2)
    reach = float(np.linalg.norm(xflat, axis=1).max())
    dirs, wdir, t, prof = _fourier_profiles(tomo_sampler, out_domain, quad,
                                            lam_max=max(lam_max, reach))
    g = kernels.backproject_points_2d(
        prof, float(t[0]), float(t[1] - t[0]),
        np.ascontiguousarray(dirs[:, 0]), np.ascontiguousarray(dirs[:, 1]),
        wdir, np.ascontiguousarray(xflat[:, 0]), np.ascontiguousarray(xflat[:, 1]))
    vals = np.where(mask, 0.0, g.real.reshape(out_domain.shape)) \
        * np.where(mask, 0.0, J)
    return ScalarField(out_domain, vals)


def _support_crosses_axis(f: ScalarField, tol: float = 1e-12) -> bool:
    x = f.domain.axis(0)
    near = np.abs(x) <= 2.0 * f.domain.spacing[0]
    return bool(near.any() and np.abs(f.values[near, :]).max() > tol * max(1.0, np.abs(f.values).max()))


def bertrand_tomogram(f: ScalarField, lam: float, mu,
                      refine: int = 2) -> float:
    """Planar Bertrand transform: integrals over lam = xi*q + nu*q*p.
    Requires nu != 0; warns when the field support crosses q = 0, where the
    curve family degenerates."""
    mu = np.asarray(mu, dtype=float).ravel()
    if mu.size != 2:
        raise ValidationError("mu must be (xi, nu)")
    if mu[1] == 0.0:
        raise ValidationError("nu must be nonzero for the Bertrand family")
    if _support_crosses_axis(f):
        warnings.warn("field support crosses q = 0; Bertrand curves degenerate there",
                      RuntimeWarning, stacklevel=2)
    return deformed_tomogram(f, bertrand(1), lam, mu, refine=refine)


def bertrand_invert(tomo_sampler, out_domain: BoxDomain,
                    quad: QuadratureSpec | None = None,
                    lam_max: float | None = None) -> ScalarField:
    """Inverse of the planar Bertrand transform on a half-plane domain."""
    if out_domain.lo[0] <= 0.0 <= out_domain.hi[0]:
        warnings.warn("out_domain crosses q = 0; reconstruction is masked there",
                      RuntimeWarning, stacklevel=2)
    return deformed_invert(tomo_sampler, bertrand(1), out_domain, quad,
                           lam_max=lam_max, on_singular="mask")


# ---------------------------------------------------------------------------
# quadric families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadricSpec:
    """Level-set family (q-mu).B(q-mu) + a.(q-mu) = lam with det B != 0."""

    B: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        n = B.shape[0]
        if B.shape != (n, n):
            raise ValidationError("B must be square")
        if not np.allclose(B, B.T, atol=1e-12 * max(1.0, float(np.abs(B).max()))):
            raise ValidationError("B must be symmetric")
        if abs(np.linalg.det(B)) < 1e-14:
            raise ValidationError("B must be nondegenerate (det B != 0)")
        a = np.zeros(n) if self.a is None else np.asarray(self.a, dtype=float).ravel()
        if a.size != n:
            raise ValidationError(f"a must have {n} components")
        B = 0.5 * (B + B.T)
        B.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "a", a)

    @property
    def dim(self):
        return self.B.shape[0]


def quadric_spec(B, a=None) -> QuadricSpec:
    return QuadricSpec(np.asarray(B, dtype=float), a)


def _quadric_inputs(f: ScalarField, spec: QuadricSpec, mu, refine):
    dom = f.domain
    ref = _refined_grid(dom, refine)
    X, Y = ref.grid()
    if refine == 1:
        F = np.array(f.values)
    else:
        F = kernels.bilinear_sample_2d(
            f.values, dom.lo[0], dom.lo[1], dom.spacing[0], dom.spacing[1],
            np.ascontiguousarray(X.ravel()), np.ascontiguousarray(Y.ravel())
        ).reshape(ref.shape)
    dx = X - mu[0]
    dy = Y - mu[1]
    B, a = spec.B, spec.a
    G = B[0, 0] * dx * dx + 2 * B[0, 1] * dx * dy + B[1, 1] * dy * dy \
        + a[0] * dx + a[1] * dy
    GX = 2 * (B[0, 0] * dx + B[0, 1] * dy) + a[0]
    GY = 2 * (B[0, 1] * dx + B[1, 1] * dy) + a[1]
    return ref, F, G, GX, GY


def quadric_tomogram(f: ScalarField, spec: QuadricSpec, lam: float, mu,
                     refine: int = 2) -> float:
    """Integral of f over the quadric level set; exactly 0.0 when the level
    set misses the grid."""
    if f.domain.dim != 2 or spec.dim != 2:
        raise ValidationError("quadric_tomogram handles planar fields")
    mu = np.asarray(mu, dtype=float).ravel()
    if mu.size != 2 or not np.all(np.isfinite(mu)):
        raise ValidationError("mu must be a finite 2-vector")
    ref, F, G, GX, GY = _quadric_inputs(f, spec, mu, refine)
    return float(kernels.levelset_fixed_2d(
        np.ascontiguousarray(F), np.ascontiguousarray(G),
        np.ascontiguousarray(GX), np.ascontiguousarray(GY),
        ref.spacing[0], ref.spacing[1], float(lam)))


def _check_uniform_lams(lams):
    lams = np.asarray(lams, dtype=float)
    dl = np.diff(lams)
    if lams.size < 2 or not np.allclose(dl, dl[0], rtol=1e-9, atol=1e-12):
        raise ValidationError("lams must be a uniform grid")
    return lams, float(dl[0])


def quadric_sweep(f: ScalarField, spec: QuadricSpec, lams, mu,
                  refine: int = 2) -> np.ndarray:
    lams, dl = _check_uniform_lams(lams)
    mu = np.asarray(mu, dtype=float).ravel()
    ref, F, G, GX, GY = _quadric_inputs(f, spec, mu, refine)
    return kernels.levelset_sweep_2d(
        np.ascontiguousarray(F), np.ascontiguousarray(G),
        np.ascontiguousarray(GX), np.ascontiguousarray(GY),
        ref.spacing[0], ref.spacing[1], float(lams[0]), float(dl), lams.size)


class QuadricFieldSampler:
    """Samples quadric tomograms of a gridded field.

    ``__call__`` marches the level set at a single lam.  ``batch`` returns
    slab averages over lam bins of the grid step instead: each cell's mass
    is split across the bins its G-range covers.  Near a critical point of
    G the true tomogram has an integrable singularity (a jump where G has
    an extremum, a log blow-up at a saddle); pointwise marching cannot be
    integrated reliably across those values, slab averages can, and they
    conserve mass exactly.
    """

    def __init__(self, f: ScalarField, spec: QuadricSpec, refine: int = 2):
        if f.domain.dim != 2 or spec.dim != 2:
            raise ValidationError("QuadricFieldSampler handles planar fields")
        self.f = f
        self.spec = spec
        self.refine = refine
        ref = _refined_grid(f.domain, refine)
        X, Y = ref.grid()
        if refine == 1:
            F = np.array(f.values)
        else:
            F = kernels.bilinear_sample_2d(
                f.values, f.domain.lo[0], f.domain.lo[1],
                f.domain.spacing[0], f.domain.spacing[1],
                np.ascontiguousarray(X.ravel()), np.ascontiguousarray(Y.ravel())
            ).reshape(ref.shape)
        self._ref = ref
        self._F = np.ascontiguousarray(F)
        self._X = X
        self._Y = Y

    def _phase(self, mu):
        dx = self._X - mu[0]
        dy = self._Y - mu[1]
        B, a = self.spec.B, self.spec.a
        G = B[0, 0] * dx * dx + 2 * B[0, 1] * dx * dy + B[1, 1] * dy * dy \
            + a[0] * dx + a[1] * dy
        return np.ascontiguousarray(G)

    def __call__(self, lam, mu):
        return quadric_tomogram(self.f, self.spec, lam, mu, self.refine)

    def batch(self, lams, mu):
        lams, dl = _check_uniform_lams(lams)
        mu = np.asarray(mu, dtype=float).ravel()
        return kernels.levelset_bins_2d(
            self._F, self._phase(mu), self._ref.spacing[0],
            self._ref.spacing[1], float(lams[0]), dl, lams.size)


@dataclass(frozen=True)
class QuadricQuadrature:
    """Budget for quadric_invert: Gauss-Legendre nodes per mu axis, the lam
    step for the e^{i lam} moment, optional explicit mu window and Gaussian
    damping strength eps in e^{-eps |mu|^2}."""

    n_mu: int = 96
    dlam: float = 0.25
    mu_window: tuple | None = None   # ((lo_x, lo_y), (hi_x, hi_y))
    damping: float = 0.0

    def __post_init__(self):
        if self.n_mu < 8:
            raise ValidationError("n_mu must be at least 8")
        if self.dlam <= 0 or self.dlam > 1.0:
            raise ValidationError("dlam must lie in (0, 1]")


def _quadric_sigma(spec: QuadricSpec) -> float:
    w = np.abs(np.linalg.eigvalsh(spec.B))
    return 1.0 / math.sqrt(float(w.min()))


def _interval_range(spec: QuadricSpec, qlo, qhi, mulo, muhi):
    """Conservative bounds on G over q in [qlo,qhi], mu in [mulo,muhi]."""
    lo = 0.0
    hi = 0.0
    n = spec.dim
    dlo = [qlo[k] - muhi[k] for k in range(n)]
    dhi = [qhi[k] - mulo[k] for k in range(n)]
    for i in range(n):
        for j in range(n):
            cands = [spec.B[i, j] * di * dj for di in (dlo[i], dhi[i])
                     for dj in (dlo[j], dhi[j])]
            lo += min(cands)
            hi += max(cands)
    for i in range(n):
        cands = [spec.a[i] * d for d in (dlo[i], dhi[i])]
        lo += min(cands)
        hi += max(cands)
    return lo, hi


def quadric_invert(tomo_sampler, spec: QuadricSpec, out_domain: BoxDomain,
                   quad: QuadricQuadrature | None = None) -> ScalarField:
    """Oscillatory-Gaussian inversion of the quadric transform (module
    docstring): lam moment first, then a tensor Gauss-Legendre mu sum."""
    if out_domain.dim != 2 or spec.dim != 2:
        raise ValidationError("quadric_invert handles planar domains")
    quad = quad or QuadricQuadrature()
    sigma = _quadric_sigma(spec)
    lo_need = tuple(l - 4.0 * sigma for l in out_domain.lo)
    hi_need = tuple(h + 4.0 * sigma for h in out_domain.hi)
    if quad.mu_window is None:
        mulo, muhi = lo_need, hi_need
    else:
        mulo, muhi = (tuple(map(float, quad.mu_window[0])),
                      tuple(map(float, quad.mu_window[1])))
        if any(a > la or b < lb for a, la, b, lb
               in zip(mulo, lo_need, muhi, hi_need)):
            warnings.warn(
                f"mu window {mulo}..{muhi} narrower than the 4-sigma heuristic "
                f"{lo_need}..{hi_need}; reconstruction may be biased",
                RuntimeWarning, stacklevel=2)

    x, w = np.polynomial.legendre.leggauss(quad.n_mu)
    mu_ax = [0.5 * (muhi[k] + mulo[k]) + 0.5 * (muhi[k] - mulo[k]) * x
             for k in range(2)]
    w_ax = [0.5 * (muhi[k] - mulo[k]) * w for k in range(2)]
    MX, MY = np.meshgrid(mu_ax[0], mu_ax[1], indexing="ij")
    WW = np.outer(w_ax[0], w_ax[1])

    glo, ghi = _interval_range(spec, out_domain.lo, out_domain.hi, mulo, muhi)
    pad = 2.0 * quad.dlam
    nlam = max(8, int(math.ceil((ghi - glo + 2 * pad) / quad.dlam)) + 1)
    lams = np.linspace(glo - pad, ghi + pad, nlam)
    wl = np.full(nlam, lams[1] - lams[0])
    wl[0] = wl[-1] = 0.5 * (lams[1] - lams[0])
    phase_l = wl * np.exp(1j * lams)

    batch = getattr(tomo_sampler, "batch", None)
    mu_flat = np.stack([MX.ravel(), MY.ravel()], axis=1)
    C = np.empty(mu_flat.shape[0], dtype=np.complex128)
    for k in range(mu_flat.shape[0]):
        prof = (batch(lams, mu_flat[k]) if batch is not None
                else np.array([tomo_sampler(l, mu_flat[k]) for l in lams]))
        C[k] = prof @ phase_l
    coef = C * WW.ravel()
    if quad.damping > 0:
        coef = coef * np.exp(-quad.damping * np.sum(mu_flat ** 2, axis=1))

    X, Y = out_domain.grid()
    out = kernels.phase_sum_2d(
        np.ascontiguousarray(coef),
        np.ascontiguousarray(mu_flat[:, 0]), np.ascontiguousarray(mu_flat[:, 1]),
        float(spec.B[0, 0]), float(spec.B[0, 1]), float(spec.B[1, 1]),
        float(spec.a[0]), float(spec.a[1]),
        np.ascontiguousarray(X.ravel()), np.ascontiguousarray(Y.ravel()))
    det = abs(float(np.linalg.det(spec.B)))
    vals = det / math.pi ** 2 * out.real.reshape(out_domain.shape)
    return ScalarField(out_domain, vals)
