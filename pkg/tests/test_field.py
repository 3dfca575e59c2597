"""Grid container, phantom, quadrature and TOMOGRD1 round trips."""

import io

import numpy as np
import pytest

from tomokit import field
from tomokit.cstomo import PhaseGrid
from tomokit.errors import GridFormatError, ValidationError


def test_box_domain_lattice():
    dom = field.BoxDomain((-1.0, 0.0), (1.0, 4.0), (5, 9))
    assert dom.dim == 2
    assert dom.spacing == (0.5, 0.5)
    assert np.allclose(dom.axis(0), [-1.0, -0.5, 0.0, 0.5, 1.0])
    assert dom.axis(1)[0] == 0.0 and dom.axis(1)[-1] == 4.0
    assert np.allclose(dom.center(), [0.0, 2.0])
    X, Y = dom.grid()
    assert X.shape == (5, 9)
    assert X[3, 0] == 0.5 and Y[0, 2] == 1.0


def test_box_domain_contains():
    dom = field.BoxDomain((0.0, 0.0), (1.0, 1.0), (3, 3))
    got = dom.contains([[0.5, 0.5], [1.0, 1.0], [1.01, 0.5], [-0.2, 0.3]])
    assert got.tolist() == [True, True, False, False]


def test_box_domain_rejects_bad_input():
    with pytest.raises(ValidationError):
        field.BoxDomain((0.0,), (1.0, 2.0), (4, 4))
    with pytest.raises(ValidationError):
        field.BoxDomain((0.0, 3.0), (1.0, 3.0), (4, 4))   # empty extent
    with pytest.raises(ValidationError):
        field.BoxDomain((0.0, 0.0), (1.0, 1.0), (4, 1))   # single node
    with pytest.raises(ValidationError):
        field.BoxDomain((0.0,) * 4, (1.0,) * 4, (4,) * 4)  # dim 4


def test_scalar_field_validation():
    dom = field.BoxDomain((0.0, 0.0), (1.0, 1.0), (4, 4))
    with pytest.raises(ValidationError):
        field.ScalarField(dom, np.zeros((4, 5)))
    bad = np.zeros((4, 4))
    bad[1, 2] = np.inf
    with pytest.raises(ValidationError):
        field.ScalarField(dom, bad)
    f = field.ScalarField(dom, np.ones((4, 4)))
    assert not f.values.flags.writeable


def test_gaussian_phantom_mass_and_peak():
    dom = field.BoxDomain((-2.0, -2.0), (2.0, 2.0), (161, 161))
    ph = field.make_gaussian_phantom(dom, (0.3, -0.2), 0.05 * np.eye(2), mass=2.5)
    assert abs(field.integrate(ph) - 2.5) < 1e-6
    i, j = np.unravel_index(np.argmax(ph.values), ph.values.shape)
    peak = np.array([dom.axis(0)[i], dom.axis(1)[j]])
    assert np.all(np.abs(peak - [0.3, -0.2]) <= max(dom.spacing))


def test_gaussian_phantom_rejects_bad_cov():
    dom = field.BoxDomain((-1.0, -1.0), (1.0, 1.0), (8, 8))
    with pytest.raises(ValidationError):
        field.make_gaussian_phantom(dom, (0.0, 0.0), [[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValidationError):
        field.make_gaussian_phantom(dom, (0.0, 0.0), [[1.0, 0.0], [0.0, -0.1]])
    with pytest.raises(ValidationError):
        field.make_gaussian_phantom(dom, (0.0, 0.0, 0.0), np.eye(2))


def test_integrate_trapezoid_exact_on_multilinear():
    dom = field.BoxDomain((0.0, 0.0), (2.0, 3.0), (5, 7))
    X, Y = dom.grid()
    f = field.ScalarField(dom, 1.0 + 2.0 * X - Y + 0.5 * X * Y)
    # int over [0,2]x[0,3] of 1 + 2x - y + xy/2 = 6 + 12 - 9 + 4.5
    assert abs(field.integrate(f) - 13.5) < 1e-12


def test_sample_field_reproduces_affine_functions():
    dom = field.BoxDomain((-1.0, 0.0), (1.0, 2.0), (9, 9))
    X, Y = dom.grid()
    f = field.ScalarField(dom, 3.0 - X + 2.0 * Y)
    rng = np.random.default_rng(5)
    pts = rng.uniform([-1.0, 0.0], [1.0, 2.0], size=(40, 2))
    want = 3.0 - pts[:, 0] + 2.0 * pts[:, 1]
    assert np.allclose(field.sample_field(f, pts), want, atol=1e-12)
    outside = field.sample_field(f, [[1.5, 1.0], [0.0, -0.1]])
    assert np.all(outside == 0.0)


def test_sample_field_3d_and_1d():
    dom3 = field.BoxDomain((0.0,) * 3, (1.0,) * 3, (5, 5, 5))
    mesh = dom3.grid()
    f3 = field.ScalarField(dom3, mesh[0] + 2 * mesh[1] - mesh[2])
    pts = np.array([[0.25, 0.5, 0.125], [0.9, 0.1, 0.7]])
    want = pts[:, 0] + 2 * pts[:, 1] - pts[:, 2]
    assert np.allclose(field.sample_field(f3, pts), want, atol=1e-12)

    dom1 = field.BoxDomain((0.0,), (1.0,), (11,))
    f1 = field.ScalarField(dom1, 2.0 * dom1.axis(0))
    assert np.allclose(field.sample_field(f1, [[0.35]]), [0.7])
    assert field.sample_field(f1, [[1.2]])[0] == 0.0


def test_l2_relative_error():
    dom = field.BoxDomain((0.0, 0.0), (1.0, 1.0), (6, 6))
    a = field.ScalarField(dom, np.ones((6, 6)))
    b = field.ScalarField(dom, 1.1 * np.ones((6, 6)))
    assert abs(field.l2_relative_error(a, a)) == 0.0
    assert abs(field.l2_relative_error(a, b) - 0.1) < 1e-12
    other = field.ScalarField(field.BoxDomain((0.0, 0.0), (2.0, 1.0), (6, 6)),
                              np.ones((6, 6)))
    with pytest.raises(ValidationError):
        field.l2_relative_error(a, other)
    zero = field.ScalarField(dom, np.zeros((6, 6)))
    with pytest.raises(ValidationError):
        field.l2_relative_error(zero, a)


def test_grid_roundtrip_scalar_field():
    dom = field.BoxDomain((-1.5, 0.25), (2.0, 1.75), (17, 13))
    ph = field.make_gaussian_phantom(dom, (0.1, 1.0), 0.2 * np.eye(2))
    buf = io.BytesIO()
    field.write_grid(ph, buf)
    buf.seek(0)
    back = field.read_grid(buf)
    assert isinstance(back, field.ScalarField)
    assert back.domain == ph.domain
    assert np.array_equal(back.values, ph.values)


def test_grid_roundtrip_table_and_phase_grid():
    tab = field.TomogramTable(
        ("lambda", "theta"),
        (np.linspace(-1, 1, 9), np.linspace(0.0, 3.0, 4)),
        np.arange(36, dtype=float).reshape(9, 4))
    buf = io.BytesIO()
    field.write_grid(tab, buf)
    buf.seek(0)
    back = field.read_grid(buf)
    assert isinstance(back, field.TomogramTable)
    assert back.axes == ("lambda", "theta")
    assert np.array_equal(back.axis("theta"), tab.axis("theta"))
    assert np.array_equal(back.values, tab.values)

    dom = field.BoxDomain((-2.0, -2.0), (2.0, 2.0), (8, 8))
    pg = PhaseGrid(dom, np.exp(1j * np.arange(64.0)).reshape(8, 8), cutoff=5.5)
    buf = io.BytesIO()
    field.write_grid(pg, buf)
    buf.seek(0)
    back = field.read_grid(buf)
    assert isinstance(back, PhaseGrid)
    assert back.cutoff == 5.5
    assert np.array_equal(back.values, pg.values)


def test_grid_bytes_deterministic():
    dom = field.BoxDomain((0.0, 0.0), (1.0, 1.0), (12, 12))
    ph = field.make_gaussian_phantom(dom, (0.4, 0.6), 0.03 * np.eye(2))
    assert field.grid_bytes(ph) == field.grid_bytes(ph)


def test_grid_format_errors_carry_codes():
    dom = field.BoxDomain((0.0, 0.0), (1.0, 1.0), (4, 4))
    ph = field.ScalarField(dom, np.ones((4, 4)))
    blob = field.grid_bytes(ph)

    with pytest.raises(GridFormatError) as err:
        field.read_grid(io.BytesIO(b"NOTAGRID" + blob[8:]))
    assert err.value.code == "bad-magic"

    with pytest.raises(GridFormatError) as err:
        field.read_grid(io.BytesIO(blob[:20]))
    assert err.value.code in ("truncated", "bad-header")

    with pytest.raises(GridFormatError) as err:
        field.read_grid(io.BytesIO(blob[:-8]))
    assert err.value.code == "payload-size-mismatch"

    bad = bytearray(blob)
    bad[-8:] = np.array([np.nan]).tobytes()
    with pytest.raises(GridFormatError) as err:
        field.read_grid(io.BytesIO(bytes(bad)))
    assert err.value.code == "non-finite-sample"


def test_tomogram_table_validation():
    with pytest.raises(ValidationError):
        field.TomogramTable(("lambda", "lambda"),
                            (np.arange(3.0), np.arange(3.0)), np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        field.TomogramTable(("lambda",), (np.array([0.0, 0.0, 1.0]),),
                            np.zeros(3))
    with pytest.raises(ValidationError):
        field.TomogramTable(("lambda", "theta"),
                            (np.arange(3.0), np.arange(4.0)), np.zeros((4, 3)))
    tab = field.TomogramTable(("lambda",), (np.arange(5.0),), np.ones(5))
    with pytest.raises(ValidationError):
        tab.axis("phi")
