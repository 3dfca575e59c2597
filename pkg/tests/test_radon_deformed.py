"""Diffeomorphism-bent and quadric-bent Radon transforms.

Three independent anchors: the mollified-delta oracle (tests/oracles.py),
the change-of-variables identity against the affine transform on the
pushforward field, and closed-form circle geometry.
"""

import numpy as np
import pytest

import oracles
from tomokit import field
from tomokit import radon_affine as ra
from tomokit import radon_deformed as rd
from tomokit.errors import ValidationError


def phantom(center=(1.5, 0.0), sigma2=0.0625, n=145, lo=(-6.0, -6.0),
            hi=(6.0, 6.0), mass=1.0):
    dom = field.BoxDomain(lo, hi, (n, n))
    return field.make_gaussian_phantom(dom, center, sigma2 * np.eye(2), mass=mass)


def test_builtin_diffeos_and_identity_flag():
    d = rd.builtin_diffeos()
    assert set(d) == {"identity", "conformal_inversion", "axis_inversion", "bertrand"}
    assert d["identity"].is_identity
    assert not d["conformal_inversion"].is_identity


def test_diffeo_inverse_and_jacobian_consistency():
    rng = np.random.default_rng(21)
    pts = rng.uniform(0.4, 2.0, size=(50, 2)) * rng.choice([-1.0, 1.0], size=(50, 2))
    h = 1e-6
    for name, dif in rd.builtin_diffeos().items():
        back = dif.inverse(dif.forward(pts))
        assert np.max(np.abs(back - pts)) < 1e-10, name
        J = dif.jacobian(pts)
        det = dif.jacobian_det(pts)
        assert np.max(np.abs(np.abs(np.linalg.det(J)) - det)) < 1e-10, name
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = h
            fd = (dif.forward(pts + dp) - dif.forward(pts - dp)) / (2 * h)
            assert np.max(np.abs(fd - J[:, :, k])) < 1e-5, name


def test_circle_geometry_closed_form():
    rng = np.random.default_rng(22)
    for _ in range(20):
        lam, mu, nu = rng.normal(size=3)
        if abs(lam) < 0.1:
            continue
        par = rd.circle_geometry(lam, mu, nu)
        assert not par.degenerate
        phi = np.linspace(0, 2 * np.pi, 17)
        x = par.center[0] + par.radius * np.cos(phi)
        y = par.center[1] + par.radius * np.sin(phi)
        # every circle point satisfies lam = (mu x + nu y)/(x^2 + y^2),
        # except the origin where the family degenerates
        r2 = x**2 + y**2
        keep = r2 > 1e-12
        assert np.allclose(lam * r2[keep], (mu * x + nu * y)[keep], atol=1e-10)
    par = rd.circle_geometry(0.0, 1.0, 2.0)
    assert par.degenerate and par.center is None and par.radius is None
    with pytest.raises(ValidationError):
        rd.circle_geometry(1.0, 0.0, 0.0)


def test_identity_diffeo_reduces_to_affine():
    ph = phantom(center=(0.3, -0.2), sigma2=0.04, n=97, lo=(-2, -2), hi=(2, 2))
    for lam, mu in [(0.1, (1.0, 0.4)), (-0.2, (0.6, -1.1))]:
        a = rd.deformed_tomogram(ph, rd.identity_diffeo(2), lam, mu)
        b = ra.affine_tomogram(ph, lam, mu)
        assert a == b   # identity short-circuits to the affine path

    # a structurally identical map not flagged as identity exercises the
    # level-set marcher against the line quadrature
    custom = rd.Diffeomorphism(
        dim=2, name="plain", forward=lambda p: np.asarray(p, dtype=float),
        inverse=lambda p: np.asarray(p, dtype=float),
        jacobian=lambda p: np.broadcast_to(
            np.eye(2), np.asarray(p).shape[:-1] + (2, 2)).copy(),
        jacobian_det=lambda p: np.ones(np.asarray(p).shape[:-1]),
        singular_distance=lambda p: np.full(np.asarray(p).shape[:-1], np.inf))
    for lam, mu in [(0.1, (1.0, 0.4)), (-0.2, (0.6, -1.1))]:
        a = rd.deformed_tomogram(ph, custom, lam, mu, refine=3)
        b = ra.affine_tomogram(ph, lam, mu)
        assert abs(a - b) < 2e-3 * max(1.0, abs(b))


def test_forward_tomograms_match_oracle():
    """Spot checks here; the full 25-parameter sweeps run in the
    acceptance suite."""
    ph = phantom()
    cases = [
        (rd.conformal_inversion(), oracles.circle_level, 0.45, (0.9, 0.3)),
        (rd.axis_inversion(), oracles.hyperbola_level, 0.6, (0.8, 0.5)),
    ]
    for dif, level, lam, mu in cases:
        got = rd.deformed_tomogram(ph, dif, lam, mu, refine=3)
        G, gr = level(mu)
        want = oracles.mollified_level_integral(ph, G, gr, lam)
        assert abs(got - want) < 1e-3 * abs(want), dif.name

    B = np.array([[1.0, 0.2], [0.2, 0.7]])
    got = rd.quadric_tomogram(ph, rd.quadric_spec(B), 1.2, (0.8, -0.4), refine=3)
    G, gr = oracles.quadric_level(B, None, (0.8, -0.4))
    want = oracles.mollified_level_integral(ph, G, gr, 1.2)
    assert abs(got - want) < 1e-3 * abs(want)


def test_change_of_variables_identity():
    """The deformed tomogram equals the affine tomogram of the pushforward
    field g(u) = f(phi^-1(u)) |det J_{phi^-1}(u)|."""
    ph = phantom()
    dif = rd.conformal_inversion()
    # phantom support maps into a small neighborhood of (2/3, 0)
    udom = field.BoxDomain((0.35, -0.45), (1.4, 0.45), (241, 241))
    U, V = udom.grid()
    upts = np.stack([U, V], axis=-1).reshape(-1, 2)
    qpts = dif.inverse(upts)
    g = field.sample_field(ph, qpts) * dif.jacobian_det(upts)
    gf = field.ScalarField(udom, g.reshape(udom.shape))
    for lam, mu in [(0.45, (0.9, 0.3)), (0.7, (1.0, -0.2)), (-0.5, (-0.8, 0.4))]:
        a = rd.deformed_tomogram(ph, dif, lam, mu, refine=3)
        b = ra.affine_tomogram(gf, lam, mu)
        assert abs(a - b) < 2e-3 * max(abs(a), 1e-3)


def test_deformed_homogeneity_exact():
    ph = phantom()
    dif = rd.conformal_inversion()
    base = rd.deformed_tomogram(ph, dif, 0.45, (0.9, 0.3))
    for s in (-3.0, 0.5, 2.0):
        scaled = rd.deformed_tomogram(ph, dif, s * 0.45, (s * 0.9, s * 0.3))
        assert abs(scaled - base / abs(s)) < 1e-12 * max(1.0, abs(base))


def test_sweep_matches_pointwise_and_validates():
    ph = phantom()
    dif = rd.axis_inversion()
    lams = np.linspace(0.1, 1.3, 25)
    sw = rd.deformed_sweep(ph, dif, lams, (0.8, 0.5))
    pt = np.array([rd.deformed_tomogram(ph, dif, l, (0.8, 0.5)) for l in lams])
    assert np.max(np.abs(sw - pt)) < 1e-10
    with pytest.raises(ValidationError):
        rd.deformed_sweep(ph, dif, np.array([0.0, 0.1, 0.3]), (0.8, 0.5))

    B = np.array([[1.0, 0.0], [0.0, 0.5]])
    sw = rd.quadric_sweep(ph, rd.quadric_spec(B), lams, (1.0, 0.2))
    pt = np.array([rd.quadric_tomogram(ph, rd.quadric_spec(B), l, (1.0, 0.2))
                   for l in lams])
    assert np.max(np.abs(sw - pt)) < 1e-10


def test_sampler_batches_match_sweeps():
    ph = phantom()
    dif = rd.conformal_inversion()
    lams = np.linspace(-0.8, 0.8, 17)
    s = rd.DeformedFieldSampler(ph, dif, refine=2)
    assert np.allclose(s.batch(lams, (0.9, 0.3)),
                       rd.deformed_sweep(ph, dif, lams, (0.9, 0.3)), atol=1e-12)
    # the quadric sampler returns slab (bin) averages, a different
    # discretization from the pointwise marcher: same continuum limit,
    # finite-grid agreement only
    B = np.array([[1.0, 0.2], [0.2, 0.7]])
    spec = rd.quadric_spec(B)
    qs = rd.QuadricFieldSampler(ph, spec, refine=2)
    lams = np.linspace(0.1, 2.0, 31)
    assert np.max(np.abs(qs.batch(lams, (0.8, -0.4))
                         - rd.quadric_sweep(ph, spec, lams, (0.8, -0.4)))) < 0.01
    # and the bins conserve the phantom mass exactly once the window
    # covers the full range of (q - mu).B(q - mu)
    wide = np.arange(0.0, 160.0, 0.5)
    total = np.sum(qs.batch(wide, (0.8, -0.4))) * 0.5
    assert abs(total - 1.0) < 1e-6


def test_singular_set_masking_and_rejection():
    # phantom overlapping the origin: singular nodes are excised from the
    # forward integral rather than poisoning it
    ph = phantom(center=(0.0, 0.0), sigma2=0.25, n=97)
    v = rd.deformed_tomogram(ph, rd.conformal_inversion(), 0.3, (1.0, 0.0))
    assert np.isfinite(v) and v >= 0.0

    src = phantom()
    sampler = rd.DeformedFieldSampler(src, rd.conformal_inversion())
    bad_out = field.BoxDomain((-0.4, -0.4), (0.4, 0.4), (17, 17))
    with pytest.raises(ValidationError) as err:
        rd.deformed_invert(sampler, rd.conformal_inversion(), bad_out,
                           ra.QuadratureSpec(n_dirs=16, n_lambda=32),
                           lam_max=4.0)
    assert "singular set" in str(err.value)
    rec = rd.deformed_invert(sampler, rd.conformal_inversion(), bad_out,
                             ra.QuadratureSpec(n_dirs=16, n_lambda=32),
                             lam_max=4.0, on_singular="mask")
    c = rec.values[8, 8]   # node at the origin
    assert c == 0.0


def test_bertrand_warnings():
    ph = phantom()   # support reaches q = 0
    with pytest.warns(RuntimeWarning, match="q = 0"):
        rd.bertrand_tomogram(ph, 1.0, (0.6, 0.4))
    with pytest.raises(ValidationError):
        rd.bertrand_tomogram(ph, 1.0, (0.6, 0.0))   # nu = 0
    sampler = rd.DeformedFieldSampler(ph, rd.bertrand(1))
    out = field.BoxDomain((-0.5, -0.5), (0.5, 0.5), (9, 9))
    with pytest.warns(RuntimeWarning, match="q = 0"):
        rd.bertrand_invert(sampler, out, ra.QuadratureSpec(16, 32), lam_max=4.0)
    with pytest.raises(ValidationError):
        rd.bertrand(0)


def test_quadric_validation_and_empty_level_set():
    with pytest.raises(ValidationError):
        rd.quadric_spec([[1.0, 0.5], [0.4, 1.0]])          # not symmetric
    with pytest.raises(ValidationError):
        rd.quadric_spec([[1.0, 1.0], [1.0, 1.0]])          # det = 0
    with pytest.raises(ValidationError):
        rd.quadric_spec(np.eye(2), a=[1.0, 2.0, 3.0])
    with pytest.raises(ValidationError):
        rd.QuadricQuadrature(n_mu=4)
    with pytest.raises(ValidationError):
        rd.QuadricQuadrature(dlam=0.0)

    ph = phantom(center=(0.3, 0.0), sigma2=0.04, n=65, lo=(-2, -2), hi=(2, 2))
    spec = rd.quadric_spec(np.eye(2))
    # (q - mu)^2 ranges over [0, something]; a negative level is empty
    assert rd.quadric_tomogram(ph, spec, -1.0, (0.0, 0.0)) == 0.0


def test_deformed_round_trips_small():
    """Reduced-size round trips for each curved family; production sizes
    run in the acceptance suite."""
    quad = ra.QuadratureSpec(n_dirs=180, n_lambda=257)

    ph = phantom(center=(1.2, 0.4), sigma2=0.03, n=97, lo=(0.25, -1.4),
                 hi=(2.4, 1.4))
    sampler = rd.DeformedFieldSampler(ph, rd.conformal_inversion(), refine=2)
    rec = rd.deformed_invert(sampler, rd.conformal_inversion(), ph.domain, quad)
    assert field.l2_relative_error(ph, rec) < 0.10

    sampler = rd.DeformedFieldSampler(ph, rd.axis_inversion(), refine=2)
    rec = rd.deformed_invert(sampler, rd.axis_inversion(), ph.domain, quad)
    assert field.l2_relative_error(ph, rec) < 0.10

    sampler = rd.DeformedFieldSampler(ph, rd.bertrand(1), refine=2)
    rec = rd.bertrand_invert(sampler, ph.domain, quad)
    assert field.l2_relative_error(ph, rec) < 0.10


def test_quadric_round_trip_default_window():
    """With the default 4-sigma mu window the inversion resolves features
    at the sigma scale of B; a matched phantom round-trips well."""
    dom = field.BoxDomain((-1.6, -1.6), (1.6, 1.6), (97, 97))
    ph = field.make_gaussian_phantom(dom, (0.15, -0.1), 0.05 * np.eye(2))
    spec = rd.quadric_spec(np.eye(2))
    sampler = rd.QuadricFieldSampler(ph, spec, refine=2)
    rec = rd.quadric_invert(sampler, spec, dom,
                            rd.QuadricQuadrature(n_mu=96, dlam=0.25))
    assert field.l2_relative_error(ph, rec) < 0.08
