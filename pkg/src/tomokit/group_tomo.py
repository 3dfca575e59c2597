"""Tomography on finite-dimensional matrix algebras via unitary representations.

A unitary representation g -> U(g) turns a density matrix rho into its
sampling function F_rho(g) = Tr(rho U(g)), the group analogue of a sinogram.
Picking a direction xi in the Lie algebra singles out the observable
xi_hat = sum_k c_k gen_k, whose outcome distribution in the state omega is
the discrete tomogram W_omega(xi; lambda) = Tr(omega P_lambda) over the
eigenprojectors of xi_hat.  The module computes that distribution two ways,
by direct spectral decomposition and by a windowed Fourier transform of
s -> Tr(omega exp(i s xi_hat)), and supplies the structural checks that make
the sampling function an honest tomographic object: positive-definiteness of
its Gram matrices, conjugation equivariance, and biorthogonal dual bases for
exact state reconstruction.  SU(2) spin-j representations are built in as
the concrete family.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .field import _freeze

_PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128),
)

# [J_a, J_b] = i sum_c EPS[a, b, c] J_c for the spin generators.
_EPS = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS[_a, _b, _c] = 1.0
    _EPS[_b, _a, _c] = -1.0


def _unit_axis(axis) -> np.ndarray:
    n = np.asarray(axis, dtype=float).reshape(-1)
    if n.shape != (3,) or not np.all(np.isfinite(n)):
        raise ValidationError(f"axis must be a finite 3-vector, got {axis!r}")
    norm = float(np.linalg.norm(n))
    if norm < 1e-12:
        raise ValidationError("axis must be nonzero")
    return n / norm


def _expi_hermitian(H: np.ndarray, s: float) -> np.ndarray:
    """exp(i s H) for Hermitian H through the eigendecomposition."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(1j * s * w)) @ V.conj().T


class UnitaryRep:
    """Unitary representation given by Hermitian generators and an evaluator.

    evaluate(g) maps group parameters to the representing unitary and checks
    the result is unitary to 1e-12.  compose/inverse act on the parameters
    themselves so that elements like g^-1 h g can be formed before being
    represented; they are optional for custom representations.
    """

    def __init__(self, dim, group_id, generators, evaluate, *,
                 identity_params=None, compose=None, inverse=None,
                 structure=None):
        dim = int(dim)
        gens = []
        for k, g in enumerate(generators):
            m = np.asarray(g, dtype=np.complex128)
            if m.shape != (dim, dim):
                raise ValidationError(
                    f"generator {k} has shape {m.shape}, expected {(dim, dim)}")
            defect = float(np.abs(m - m.conj().T).max())
            if defect > 1e-12:
                raise ValidationError(
                    f"generator {k} not Hermitian: defect {defect:.3e}")
            gens.append(_freeze(m))
        self.dim = dim
        self.group_id = str(group_id)
        self.generators = tuple(gens)
        self._evaluate = evaluate
        self._compose = compose
        self._inverse = inverse
        self.identity_params = identity_params
        if structure is not None:
            f = np.asarray(structure, dtype=float)
            n = len(gens)
            if f.shape != (n, n, n):
                raise ValidationError(
                    f"structure constants must have shape {(n, n, n)}")
            for i in range(n):
                for j in range(n):
                    comm = gens[i] @ gens[j] - gens[j] @ gens[i]
                    target = 1j * sum(f[i, j, k] * gens[k] for k in range(n))
                    err = float(np.abs(comm - target).max())
                    if err > 1e-10:
                        raise ValidationError(
                            f"[gen_{i}, gen_{j}] violates the structure "
                            f"constants by {err:.3e}")
        if identity_params is not None:
            U0 = self.evaluate(identity_params)
            err = float(np.abs(U0 - np.eye(dim)).max())
            if err > 1e-12:
                raise ValidationError(f"U(e) differs from I by {err:.3e}")

    def evaluate(self, g) -> np.ndarray:
        U = np.asarray(self._evaluate(g), dtype=np.complex128)
        if U.shape != (self.dim, self.dim):
            raise ValidationError(
                f"evaluate returned shape {U.shape}, expected square dim {self.dim}")
        defect = float(np.abs(U @ U.conj().T - np.eye(self.dim)).max())
        if defect > 1e-12:
            raise ValidationError(f"U(g) not unitary: defect {defect:.3e}")
        return U

    def compose(self, g, h):
        if self._compose is None:
            raise ValidationError(
                f"representation {self.group_id!r} has no parameter-level compose")
        return self._compose(g, h)

    def inverse(self, g):
        if self._inverse is None:
            raise ValidationError(
                f"representation {self.group_id!r} has no parameter-level inverse")
        return self._inverse(g)

    def algebra_element(self, coeffs) -> "AlgebraElement":
        return AlgebraElement(coeffs, self.generators)


@dataclass(frozen=True)
class AlgebraElement:
    """Real combination xi_hat = sum_k coeffs_k gen_k of the generators."""

    coeffs: np.ndarray
    generators: tuple

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if len(c) != len(self.generators):
            raise ValidationError(
                f"{len(c)} coefficients for {len(self.generators)} generators")
        if not np.all(np.isfinite(c)):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "coeffs", _freeze(c))
        m = sum(ck * gk for ck, gk in zip(c, self.generators))
        m = np.asarray(m, dtype=np.complex128)
        defect = float(np.abs(m - m.conj().T).max())
        if defect > 1e-12:
            raise ValidationError(f"element not Hermitian: defect {defect:.3e}")
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class DiscreteTomogram:
    """Atomic outcome distribution: eigenvalues lambda_k with weights w_k."""

    lambdas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if lam.shape != w.shape or lam.size == 0:
            raise ValidationError("lambdas and weights must match and be nonempty")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(w))):
            raise ValidationError("atoms must be finite")
        if np.any(np.diff(lam) <= 0):
            raise ValidationError("eigenvalues must be strictly increasing")
        if float(w.min()) < -1e-12:
            raise ValidationError(f"negative weight {w.min():.3e}")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-10:
            raise ValidationError(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "lambdas", _freeze(lam))
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def atoms(self):
        return list(zip(self.lambdas.tolist(), self.weights.tolist()))

    def characteristic(self, s_grid) -> np.ndarray:
        """sum_k w_k exp(i s lambda_k), the inverse Fourier side of the tomogram."""
        s = np.asarray(s_grid, dtype=float)
        return np.exp(1j * np.multiply.outer(s, self.lambdas)) @ self.weights.astype(
            np.complex128)


class TomographicPair:
    """Biorthogonal families with Tr(D_i U_j) = delta_ij under the trace pairing."""

    def __init__(self, U_set, D_set):
        U = [np.asarray(u, dtype=np.complex128) for u in U_set]
        D = [np.asarray(d, dtype=np.complex128) for d in D_set]
        if len(U) != len(D) or not U:
            raise ValidationError("U_set and D_set must match and be nonempty")
        dim = U[0].shape[0]
        for m in U + D:
            if m.shape != (dim, dim):
                raise ValidationError("all elements must share one square shape")
        G = np.array([[np.trace(d @ u) for u in U] for d in D])
        defect = float(np.abs(G - np.eye(len(U))).max())
        if defect > 1e-10:
            raise ValidationError(
                f"pairing Tr(D_i U_j) deviates from delta_ij by {defect:.3e}")
        self.U_set = tuple(_freeze(m) for m in U)
        self.D_set = tuple(_freeze(m) for m in D)
        self.dim = dim

    def reconstruct(self, A) -> np.ndarray:
        """sum_i Tr(A U_i) D_i, the identity map when U_set spans the algebra."""
        A = np.asarray(A, dtype=np.complex128)
        if A.shape != (self.dim, self.dim):
            raise ValidationError(f"operator shape {A.shape} != {(self.dim, self.dim)}")
        out = np.zeros_like(A)
        for u, d in zip(self.U_set, self.D_set):
            out += np.trace(A @ u) * d
        return out


def _su2_fundamental(g) -> np.ndarray:
    axis, angle = g
    n = _unit_axis(axis)
    s = float(angle)
    ns = n[0] * _PAULI[0] + n[1] * _PAULI[1] + n[2] * _PAULI[2]
    return np.cos(s / 2.0) * np.eye(2) + 1j * np.sin(s / 2.0) * ns


def _su2_params(u: np.ndarray):
    """Axis-angle parameters of a 2x2 special unitary, angle in [0, 2 pi]."""
    c = np.clip(float(np.real(np.trace(u))) / 2.0, -1.0, 1.0)
    s = 2.0 * float(np.arccos(c))
    half = np.sin(s / 2.0)
    if half < 1e-12:
        # u = +/- I is central: every axis represents it.
        return (np.array([0.0, 0.0, 1.0]), 0.0 if c > 0 else 2.0 * np.pi)
    v = (u - c * np.eye(2)) / 1j
    n = np.array([float(np.real(np.trace(v @ p))) / 2.0 for p in _PAULI]) / half
    return (n / np.linalg.norm(n), s)


def su2_rep(j) -> UnitaryRep:
    """Spin-j representation with the ladder-built generators J_x, J_y, J_z.

    Group parameters are (axis, angle) pairs and evaluate returns
    exp(i angle axis.J); at half-integer j a 2 pi rotation gives -I.
    Composition and inversion run in the fundamental 2x2 matrices, so
    conjugated elements can be formed exactly and lifted to any j.
    """
    twoj = 2.0 * float(j)
    if abs(twoj - round(twoj)) > 1e-12 or round(twoj) < 1:
        raise ValidationError(f"j must be a positive half-integer, got {j!r}")
    twoj = int(round(twoj))
    jj = twoj / 2.0
    dim = twoj + 1
    m = jj - np.arange(dim)
    Jz = np.diag(m).astype(np.complex128)
    Jp = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(1, dim):
        Jp[k - 1, k] = np.sqrt(jj * (jj + 1.0) - m[k] * (m[k] + 1.0))
    Jm = Jp.conj().T
    Jx = (Jp + Jm) / 2.0
    Jy = (Jp - Jm) / 2.0j
    gens = (Jx, Jy, Jz)

    def ev(g):
        axis, angle = g
        n = _unit_axis(axis)
        H = n[0] * Jx + n[1] * Jy + n[2] * Jz
        return _expi_hermitian(H, float(angle))

    return UnitaryRep(
        dim, "SU2_spin_j", gens, ev,
        identity_params=(np.array([0.0, 0.0, 1.0]), 0.0),
        compose=lambda g, h: _su2_params(_su2_fundamental(g) @ _su2_fundamental(h)),
        inverse=lambda g: (g[0], -float(g[1])),
        structure=_EPS,
    )


def sampling_function(rho, rep: UnitaryRep, g) -> complex:
    """Tr(rho U(g)): the state sampled along the group direction g."""
    entries = np.asarray(rho.entries if hasattr(rho, "entries") else rho,
                         dtype=np.complex128)
    if entries.shape != (rep.dim, rep.dim):
        raise ValidationError(
            f"state dim {entries.shape} does not match rep dim {rep.dim}")
    return complex(np.trace(entries @ rep.evaluate(g)))


def gram_psd_check(rho, rep: UnitaryRep, elements) -> float:
    """Minimal eigenvalue of the Gram matrix F_rho(g_i^-1 g_j).

    Positivity of the sampling function makes this matrix positive
    semidefinite for every density matrix and element set; the entries are
    evaluated as Tr(rho U(g_i)^dagger U(g_j)), which represents g_i^-1 g_j
    without needing parameter-level composition.
    """
    elements = list(elements)
    if not elements:
        raise ValidationError("need at least one group element")
    entries = np.asarray(rho.entries if hasattr(rho, "entries") else rho,
                         dtype=np.complex128)
    if entries.shape != (rep.dim, rep.dim):
        raise ValidationError(
            f"state dim {entries.shape} does not match rep dim {rep.dim}")
    Us = [rep.evaluate(g) for g in elements]
    N = len(Us)
    G = np.empty((N, N), dtype=np.complex128)
    for i in range(N):
        for k in range(i, N):
            G[i, k] = np.trace(entries @ Us[i].conj().T @ Us[k])
            G[k, i] = np.conj(G[i, k])
    return float(np.linalg.eigvalsh(G).min())


def tomogram_spectral(omega, xi: AlgebraElement) -> DiscreteTomogram:
    """W_omega(xi; .) from the eigendecomposition of xi_hat.

    Eigenvalues closer than 1e-9 are merged into one atom whose weight is
    the trace of omega against the combined eigenprojector; atoms the state
    puts no mass on (weight below 1e-14) are dropped, so the returned
    tomogram is supported on the outcomes that can actually occur.
    """
    entries = np.asarray(omega.entries if hasattr(omega, "entries") else omega,
                         dtype=np.complex128)
    if entries.shape != (xi.dim, xi.dim):
        raise ValidationError(
            f"state dim {entries.shape} does not match element dim {xi.dim}")
    w, V = np.linalg.eigh(xi.matrix)
    lams, weights = [], []
    k = 0
    while k < len(w):
        k2 = k + 1
        while k2 < len(w) and w[k2] - w[k2 - 1] <= 1e-9:
            k2 += 1
        block = V[:, k:k2]
        lams.append(float(np.mean(w[k:k2])))
        weights.append(float(np.real(np.einsum("ij,ik,kj->", block.conj(),
                                               entries, block))))
        k = k2
    lams = np.array(lams)
    weights = np.array(weights)
    keep = np.abs(weights) >= 1e-14
    return DiscreteTomogram(lams[keep], weights[keep])


def _hann(s: np.ndarray, smax: float) -> np.ndarray:
    return 0.5 * (1.0 + np.cos(np.pi * s / smax))


def tomogram_fourier(omega, rep: UnitaryRep, xi: AlgebraElement,
                     lambda_grid, s_grid) -> np.ndarray:
    """Sampled W(lambda) = (1/2 pi) int e^{-i s lambda} F(exp(s xi)) hann(s) ds.

    The Hann window controls leakage, so each eigenvalue shows up as a local
    peak whose mass (integrated over +-3 grid bins) equals its spectral
    weight.  The window must span at least 4 periods of the smallest
    eigenvalue gap to keep neighboring peaks separable; shorter windows get
    a warning with the gap the window can actually resolve.
    """
    entries = np.asarray(omega.entries if hasattr(omega, "entries") else omega,
                         dtype=np.complex128)
    if entries.shape != (rep.dim, rep.dim) or xi.dim != rep.dim:
        raise ValidationError("state, representation and element dims must match")
    s = np.asarray(s_grid, dtype=float).reshape(-1)
    lam_grid = np.asarray(lambda_grid, dtype=float).reshape(-1)
    if s.size < 8:
        raise ValidationError("s_grid must have at least 8 samples")
    ds = np.diff(s)
    if np.any(ds <= 0) or float(np.abs(ds - ds[0]).max()) > 1e-9 * abs(ds[0]):
        raise ValidationError("s_grid must be uniform and increasing")
    if float(np.abs(s + s[::-1]).max()) > 1e-9 * float(s[-1] - s[0]):
        raise ValidationError("s_grid must be symmetric about 0")
    smax = float(s[-1])

    ev, V = np.linalg.eigh(xi.matrix)
    merged = [ev[0]]
    for val in ev[1:]:
        if val - merged[-1] > 1e-9:
            merged.append(val)
    if len(merged) > 1:
        gap = float(np.min(np.diff(np.array(merged))))
        if 2.0 * smax < 4.0 * (2.0 * np.pi / gap):
            resolvable = 4.0 * (2.0 * np.pi) / (2.0 * smax)
            warnings.warn(
                f"window length {2.0 * smax:.3g} resolves eigenvalue gaps >= "
                f"{resolvable:.3g}; the spectrum has gap {gap:.3g}",
                RuntimeWarning, stacklevel=2)

    # F(exp(s xi)) = Tr(omega e^{i s xi_hat}) through the same eigenbasis.
    probs = np.real(np.einsum("ij,ik,kj->j", V.conj(), entries, V))
    F = np.exp(1j * np.multiply.outer(s, ev)) @ probs.astype(np.complex128)
    kern = np.exp(-1j * np.multiply.outer(lam_grid, s))
    W = kern @ (F * _hann(s, smax)) * (float(ds[0]) / (2.0 * np.pi))
    return np.real(W)


def peak_mass(lambda_grid, W, center, bins: int = 3) -> float:
    """Rectangle-rule mass of W over the +-bins grid cells nearest center."""
    lam = np.asarray(lambda_grid, dtype=float).reshape(-1)
    vals = np.asarray(W, dtype=float).reshape(-1)
    if lam.shape != vals.shape:
        raise ValidationError("lambda_grid and W must have matching shapes")
    i = int(np.argmin(np.abs(lam - float(center))))
    lo, hi = max(i - bins, 0), min(i + bins + 1, lam.size)
    dlam = float(lam[1] - lam[0])
    return float(vals[lo:hi].sum() * dlam)


def equivariance_check(rep: UnitaryRep, rho, g, h):
    """Residuals of conjugation equivariance.

    Returns (r_hom, r_state): r_hom is max|U(g^-1 h g) - U(g)^dagger U(h) U(g)|
    with the conjugated element formed at the parameter level, and r_state is
    |F_rho(g^-1 h g) - F_sigma(h)| for the transported state
    sigma = U(g) rho U(g)^dagger.
    """
    entries = np.asarray(rho.entries if hasattr(rho, "entries") else rho,
                         dtype=np.complex128)
    if entries.shape != (rep.dim, rep.dim):
        raise ValidationError(
            f"state dim {entries.shape} does not match rep dim {rep.dim}")
    conj = rep.compose(rep.inverse(g), rep.compose(h, g))
    Ug = rep.evaluate(g)
    Uh = rep.evaluate(h)
    Uc = rep.evaluate(conj)
    r_hom = float(np.abs(Uc - Ug.conj().T @ Uh @ Ug).max())
    transported = Ug @ entries @ Ug.conj().T
    r_state = abs(complex(np.trace(entries @ Uc))
                  - complex(np.trace(transported @ Uh)))
    return (r_hom, float(r_state))


def build_biorthogonal_pair(U_set) -> TomographicPair:
    """Dual basis D_set with Tr(D_i U_j) = delta_ij by Gram inversion.

    U_set must contain dim^2 linearly independent matrices; the pairing is
    the bilinear trace form, under which matrix units E_ij get duals E_ji
    and the Pauli-with-identity set is self-dual up to the factor 1/2.
    """
    U = [np.asarray(u, dtype=np.complex128) for u in U_set]
    if not U:
        raise ValidationError("U_set must be nonempty")
    dim = U[0].shape[0]
    for k, m in enumerate(U):
        if m.ndim != 2 or m.shape != (dim, dim):
            raise ValidationError(f"element {k} has shape {m.shape}, expected "
                                  f"{(dim, dim)}")
    if len(U) != dim * dim:
        raise ValidationError(
            f"need dim^2 = {dim * dim} elements to span, got {len(U)}")
    stack = np.stack([m.reshape(-1) for m in U])
    rank = int(np.linalg.matrix_rank(stack, tol=1e-10))
    if rank < dim * dim:
        raise ValidationError(
            f"U_set is rank deficient: rank {rank} of {dim * dim}")
    G = np.array([[np.trace(a @ b) for b in U] for a in U])
    coeffs = np.linalg.solve(G, np.eye(len(U)))
    D = [sum(c * u for c, u in zip(row, U)) for row in coeffs]
    return TomographicPair(U, D)
