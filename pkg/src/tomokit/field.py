"""Grids, phantoms, quadrature and the TOMOGRD1 container.

A ScalarField lives on an axis-aligned box with an inclusive uniform node
lattice: node i along axis k sits at lo[k] + i*h[k], h[k] = (hi[k]-lo[k]) /
(shape[k]-1).  Fields are taken to be identically zero outside their box;
every transform in the package relies on that compact-support convention.

TOMOGRD1 is the on-disk format for fields and tomogram tables:

    8 bytes   magic "TOMOGRD1"
    4 bytes   little-endian uint32, header length in bytes
    N bytes   UTF-8 JSON header
    payload   raw little-endian float64 (or complex128), row-major

Field headers carry {version, shape, lo, hi, dtype, order}; tables replace
lo/hi with named axes and their sample values.  Round trips are bit-exact.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import GridFormatError, ValidationError

_MAGIC = b"TOMOGRD1"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with an inclusive uniform node lattice."""

    lo: tuple
    hi: tuple
    shape: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        shape = tuple(int(n) for n in self.shape)
        if not (len(lo) == len(hi) == len(shape)):
            raise ValidationError("lo, hi, shape must have equal length")
        if len(lo) not in (1, 2, 3):
            raise ValidationError(f"dimension must be 1, 2 or 3, got {len(lo)}")
        for k, (a, b, n) in enumerate(zip(lo, hi, shape)):
            if not (b > a):
                raise ValidationError(f"axis {k}: hi must exceed lo ({a} >= {b})")
            if n < 2:
                raise ValidationError(f"axis {k}: need at least 2 nodes, got {n}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def spacing(self) -> tuple:
        return tuple((b - a) / (n - 1)
                     for a, b, n in zip(self.lo, self.hi, self.shape))

    def axis(self, k: int) -> np.ndarray:
        return self.lo[k] + self.spacing[k] * np.arange(self.shape[k])

    def axes(self):
        return [self.axis(k) for k in range(self.dim)]

    def grid(self):
        """Node coordinates as dim arrays of shape self.shape (ij indexing)."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def half_diagonal(self) -> float:
        return 0.5 * float(np.linalg.norm(np.asarray(self.hi) - np.asarray(self.lo)))

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        ok = np.ones(pts.shape[0], dtype=bool)
        for k in range(self.dim):
            ok &= (pts[:, k] >= self.lo[k]) & (pts[:, k] <= self.hi[k])
        return ok


@dataclass(frozen=True)
class ScalarField:
    """Real samples on the nodes of a BoxDomain, zero outside the box."""

    domain: BoxDomain
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.domain.shape:
            raise ValidationError(
                f"values shape {vals.shape} does not match domain {self.domain.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("field values must be finite")
        object.__setattr__(self, "values", _freeze(vals))


@dataclass(frozen=True)
class TomogramTable:
    """Tomogram samples on a product of named, strictly increasing axes."""

    axes: tuple            # axis names, e.g. ("lambda", "theta")
    axis_values: tuple     # 1-d float arrays, strictly increasing
    values: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.axes)
        if len(names) != len(set(names)):
            raise ValidationError("axis names must be distinct")
        avals = []
        for name, ax in zip(names, self.axis_values):
            ax = np.asarray(ax, dtype=np.float64).ravel()
            if ax.size < 1 or not np.all(np.diff(ax) > 0):
                raise ValidationError(f"axis {name!r} must be strictly increasing")
            avals.append(_freeze(ax))
        vals = np.asarray(self.values, dtype=np.float64)
        want = tuple(a.size for a in avals)
        if vals.shape != want:
            raise ValidationError(
                f"values shape {vals.shape} does not match axes {want}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("table values must be finite")
        object.__setattr__(self, "axes", names)
        object.__setattr__(self, "axis_values", tuple(avals))
        object.__setattr__(self, "values", _freeze(vals))

    def axis(self, name: str) -> np.ndarray:
        try:
            return self.axis_values[self.axes.index(name)]
        except ValueError:
            raise ValidationError(f"table has no axis {name!r}") from None


def make_gaussian_phantom(domain: BoxDomain, center, cov, mass: float = 1.0) -> ScalarField:
    """Normalized Gaussian bump: mass * N(x; center, cov) sampled on the nodes.

    cov must be symmetric positive definite; rejected otherwise with the
    offending eigenvalue in the message.
    """
    n = domain.dim
    center = np.asarray(center, dtype=float).ravel()
    if center.size != n:
        raise ValidationError(f"center must have {n} components")
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (n, n):
        raise ValidationError(f"cov must be {n}x{n}, got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12 * max(1.0, float(np.abs(cov).max()))):
        raise ValidationError("cov must be symmetric")
    w, _ = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.min() <= 0:
        raise ValidationError(
            f"cov must be positive definite; smallest eigenvalue {w.min():g}")
    prec = np.linalg.inv(cov)
    norm = float(mass) / np.sqrt((2.0 * np.pi) ** n * np.linalg.det(cov))
    mesh = domain.grid()
    d = [g - c for g, c in zip(mesh, center)]
    q = np.zeros(domain.shape)
    for i in range(n):
        for j in range(n):
            q += prec[i, j] * d[i] * d[j]
    return ScalarField(domain, norm * np.exp(-0.5 * q))


def integrate(f: ScalarField) -> float:
    """Composite trapezoid over the full box (exact for multilinear data)."""
    vals = f.values
    for k in reversed(range(f.domain.dim)):
        vals = np.trapezoid(vals, dx=f.domain.spacing[k], axis=k)
    return float(vals)


def l2_relative_error(a: ScalarField, b: ScalarField) -> float:
    """||a - b||_2 / ||a||_2 over grid nodes; domains must match exactly."""
    da, db = a.domain, b.domain
    if (da.lo, da.hi, da.shape) != (db.lo, db.hi, db.shape):
        raise ValidationError(
            f"mismatched domains: {da.lo}..{da.hi}{da.shape} vs {db.lo}..{db.hi}{db.shape}")
    denom = float(np.linalg.norm(a.values))
    if denom == 0.0:
        raise ValidationError("reference field is identically zero")
    return float(np.linalg.norm(a.values - b.values)) / denom


def sample_field(f: ScalarField, pts) -> np.ndarray:
    """Multilinear interpolation at arbitrary points; zero outside the box."""
    from ._backend import kernels

    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if pts.shape[1] != f.domain.dim:
        raise ValidationError(
            f"points must have {f.domain.dim} columns, got {pts.shape[1]}")
    d = f.domain
    if d.dim == 1:
        x = d.axis(0)
        out = np.interp(pts[:, 0], x, f.values, left=0.0, right=0.0)
        # np.interp clamps at the ends; enforce the zero-outside convention
        out = np.where((pts[:, 0] < x[0]) | (pts[:, 0] > x[-1]), 0.0, out)
        return out
    if d.dim == 2:
        return kernels.bilinear_sample_2d(
            f.values, d.lo[0], d.lo[1], d.spacing[0], d.spacing[1],
            np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]))
    return kernels.trilinear_sample_3d(
        f.values, np.asarray(d.lo), np.asarray(d.spacing),
        np.ascontiguousarray(pts))


# ---------------------------------------------------------------------------
# TOMOGRD1 I/O
# ---------------------------------------------------------------------------

_DTYPES = {"f64-le": ("<f8", np.float64), "c128-le": ("<c16", np.complex128)}


def _write_blob(stream, header: dict, payload: np.ndarray):
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    stream.write(_MAGIC)
    stream.write(struct.pack("<I", len(raw)))
    stream.write(raw)
    code = header["dtype"]
    stream.write(np.ascontiguousarray(payload, dtype=_DTYPES[code][0]).tobytes())


def _read_exact(stream, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise GridFormatError(
            "truncated", f"expected {n} bytes of {what}, got {len(data)}")
    return data


def _read_blob(stream):
    magic = stream.read(len(_MAGIC))
    if magic != _MAGIC:
        raise GridFormatError("bad-magic",
                              f"expected {_MAGIC!r}, got {magic!r}")
    (hlen,) = struct.unpack("<I", _read_exact(stream, 4, "header length"))
    try:
        header = json.loads(_read_exact(stream, hlen, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise GridFormatError("bad-header", f"header is not valid JSON: {exc}")
    if not isinstance(header, dict) or header.get("version") != 1:
        raise GridFormatError("bad-header",
                              f"unsupported header/version: {header!r}")
    code = header.get("dtype")
    if code not in _DTYPES:
        raise GridFormatError("bad-header", f"unknown dtype {code!r}")
    if header.get("order") != "row-major":
        raise GridFormatError("bad-header",
                              f"unsupported order {header.get('order')!r}")
    try:
        shape = tuple(int(n) for n in header["shape"])
    except (KeyError, TypeError, ValueError):
        raise GridFormatError("bad-header", "missing or malformed shape")
    npstr, npdtype = _DTYPES[code]
    itemsize = np.dtype(npstr).itemsize
    want = int(np.prod(shape)) * itemsize
    payload = stream.read()
    if len(payload) != want:
        raise GridFormatError(
            "payload-size-mismatch",
            f"header declares {want} payload bytes for shape {shape}, got {len(payload)}")
    values = np.frombuffer(payload, dtype=npstr).astype(npdtype).reshape(shape)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values).ravel())[0])
        raise GridFormatError("non-finite-sample",
                              f"payload sample {bad} is not finite")
    return header, values


def _open(path_or_stream, mode: str):
    if hasattr(path_or_stream, "read") or hasattr(path_or_stream, "write"):
        return path_or_stream, False
    return open(path_or_stream, mode), True


def write_grid(obj, path_or_stream):
    """Serialize a ScalarField, TomogramTable or PhaseGrid as TOMOGRD1."""
    from .cstomo import PhaseGrid
    if isinstance(obj, ScalarField):
        header = {
            "version": 1,
            "shape": list(obj.domain.shape),
            "lo": list(obj.domain.lo),
            "hi": list(obj.domain.hi),
            "dtype": "f64-le",
            "order": "row-major",
        }
    elif isinstance(obj, PhaseGrid):
        header = {
            "version": 1,
            "shape": list(obj.domain.shape),
            "lo": list(obj.domain.lo),
            "hi": list(obj.domain.hi),
            "dtype": "c128-le",
            "order": "row-major",
        }
        if obj.cutoff is not None:
            header["cutoff"] = float(obj.cutoff)
    elif isinstance(obj, TomogramTable):
        header = {
            "version": 1,
            "shape": list(obj.values.shape),
            "axes": list(obj.axes),
            "axis_values": [ax.tolist() for ax in obj.axis_values],
            "dtype": "f64-le",
            "order": "row-major",
        }
    else:
        raise ValidationError(f"cannot serialize {type(obj).__name__} as TOMOGRD1")
    stream, close = _open(path_or_stream, "wb")
    try:
        _write_blob(stream, header, obj.values)
    finally:
        if close:
            stream.close()


def read_grid(path_or_stream):
    """Parse TOMOGRD1 into a ScalarField or TomogramTable."""
    stream, close = _open(path_or_stream, "rb")
    try:
        header, values = _read_blob(stream)
    finally:
        if close:
            stream.close()
    if "axes" in header:
        try:
            axis_values = [np.asarray(a, dtype=float) for a in header["axis_values"]]
        except (KeyError, TypeError):
            raise GridFormatError("bad-header", "table header lacks axis_values")
        return TomogramTable(tuple(header["axes"]), tuple(axis_values),
                             values.real if np.iscomplexobj(values) else values)
    try:
        lo, hi = header["lo"], header["hi"]
    except KeyError:
        raise GridFormatError("bad-header", "field header lacks lo/hi")
    dom = BoxDomain(tuple(lo), tuple(hi), tuple(header["shape"]))
    if header["dtype"] == "c128-le":
        from .cstomo import PhaseGrid
        return PhaseGrid(dom, values, cutoff=header.get("cutoff"))
    return ScalarField(dom, values)


def grid_bytes(obj) -> bytes:
    buf = io.BytesIO()
    write_grid(obj, buf)
    return buf.getvalue()
