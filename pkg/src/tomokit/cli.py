"""Command-line front end: phantoms, forward and inverse transforms for all
geometries, phase-space tomography (qtomo), spin tomography (gtomo), round
trip reports and CSV export for plotting.

Three console scripts share this module: ``tomo`` (classical and deformed
transforms), ``qtomo`` (coherent-state symbols) and ``gtomo`` (group
representations).  Every option can also come from a JSON file via
``--config``; explicit flags override file values, and unknown keys are
rejected by name.  ``-`` stands for stdin/stdout so subcommands pipe.

Exit codes: 0 success, 2 validation error (bad input, bad config, unwritable
path), 3 numerical-budget failure.  Outputs are written atomically (temp
file in the target directory, then rename), so an interrupted run never
leaves a partial artifact at the target path.  A fixed config and seed give
byte-identical artifacts; report files are byte-stable except for their
wall_time_s field.  TOMO_BACKEND selects the numba or numpy kernels and
TOMO_THREADS caps kernel parallelism (both read at import).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, ValidationError
from .field import (BoxDomain, ScalarField, TomogramTable, grid_bytes,
                    integrate, l2_relative_error, make_gaussian_phantom,
                    read_grid)
from .radon_affine import (QuadratureSpec, TableAffineSampler, backproject,
                           invert_affine, invert_radon_hilbert, sinogram_line)
from .radon_deformed import (DeformedFieldSampler, QuadricFieldSampler,
                             QuadricQuadrature, _interval_range,
                             _quadric_sigma, axis_inversion, bertrand,
                             bertrand_invert, circle_geometry,
                             conformal_inversion, deformed_invert,
                             quadric_invert, quadric_spec)
from . import cstomo
from . import group_tomo


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

class _Opt:
    """One config option: value kind, default, required flag.

    Kinds: int, posint, float, posfloat, str, floats (comma list or JSON
    array), flag, in/out (file path or '-'), choice:a|b|c.
    """

    def __init__(self, kind, default=None, required=False, help=""):
        self.kind = kind
        self.default = default
        self.required = required
        self.help = help

    def convert(self, name, v):
        k = self.kind
        try:
            if k == "int":
                return int(v)
            if k == "posint":
                iv = int(v)
                if iv <= 0:
                    raise ValidationError(f"{name} must be positive, got {iv}")
                return iv
            if k == "float":
                return float(v)
            if k == "posfloat":
                fv = float(v)
                if fv <= 0:
                    raise ValidationError(f"{name} must be positive, got {fv}")
                return fv
            if k == "floats":
                if isinstance(v, str):
                    parts = [p for p in v.split(",") if p.strip() != ""]
                    return tuple(float(p) for p in parts)
                return tuple(float(x) for x in v)
            if k == "flag":
                return bool(v)
            if k in ("in", "out", "str"):
                return str(v)
            if k.startswith("choice:"):
                allowed = k.split(":", 1)[1].split("|")
                if str(v) not in allowed:
                    raise ValidationError(
                        f"{name} must be one of {'|'.join(allowed)}, got {v!r}")
                return str(v)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad value for {name}: {v!r}") from exc
        raise ValidationError(f"unknown option kind {k!r}")


def _geom_opts():
    return {
        "geometry": _Opt("choice:line|circle|hyperbola|bertrand|quadric",
                         required=True, help="transform family"),
        "B": _Opt("floats", help="quadric matrix b11,b12,b22 (or 4 row-major)"),
        "a": _Opt("floats", help="quadric linear term a1,a2"),
    }


_SCHEMAS = {
    "phantom": {
        "gaussian": _Opt("flag", default=True, help="gaussian bump phantom"),
        "grid": _Opt("posint", default=128, help="nodes per axis"),
        "extent": _Opt("posfloat", default=1.6, help="half-width of the box"),
        "lo": _Opt("floats", help="box lower corner x,y (overrides extent)"),
        "hi": _Opt("floats", help="box upper corner x,y"),
        "center": _Opt("floats", default=(0.15, -0.1), help="bump center x,y"),
        "cov": _Opt("floats", default=(0.04, 0.0, 0.09),
                    help="covariance c11,c12,c22"),
        "mass": _Opt("posfloat", default=1.0, help="integral of the phantom"),
        "out": _Opt("out", required=True, help="output grid path or -"),
    },
    "forward": {
        **_geom_opts(),
        "in": _Opt("in", required=True, help="phantom grid path or -"),
        "out": _Opt("out", required=True, help="tomogram table path or -"),
        "n_lambda": _Opt("posint", default=257, help="lambda samples"),
        "n_theta": _Opt("posint", default=180, help="direction samples"),
        "span": _Opt("choice:half|full", default="half", help="theta span"),
        "lam_max": _Opt("posfloat", help="lambda half-range (default probed)"),
        "step": _Opt("posfloat", help="line-integral step"),
        "refine": _Opt("posint", default=2, help="level-set grid refinement"),
        "n_mu": _Opt("posint", default=96, help="quadric center nodes per axis"),
        "mu_window": _Opt("floats", help="quadric centers lox,loy,hix,hiy"),
    },
    "invert": {
        **_geom_opts(),
        "in": _Opt("in", required=True, help="tomogram table path or -"),
        "out": _Opt("out", required=True, help="reconstruction grid path or -"),
        "method": _Opt("choice:hilbert|affine", default="hilbert",
                       help="line-geometry inversion route"),
        "grid": _Opt("posint", help="output nodes per axis"),
        "lo": _Opt("floats", help="output box lower corner x,y"),
        "hi": _Opt("floats", help="output box upper corner x,y"),
        "reference": _Opt("in", help="phantom grid for the report"),
        "report": _Opt("out", help="round-trip report JSON path"),
        "tol": _Opt("posfloat", default=0.05, help="L2 tolerance for the report"),
        "n_dirs": _Opt("posint", default=360, help="direction budget"),
        "n_lambda": _Opt("posint", default=513, help="filter profile samples"),
        "lam_max": _Opt("posfloat", help="tomogram support bound"),
        "on_singular": _Opt("choice:reject|mask", default="reject",
                            help="nodes on the singular set"),
        "singular_eps": _Opt("posfloat", help="singular-set margin"),
        "n_mu": _Opt("posint", default=96, help="quadric Gauss-Legendre nodes"),
        "dlam": _Opt("posfloat", default=0.25, help="quadric lambda step"),
        "seed": _Opt("int", default=0, help="seed recorded in the report"),
    },
    "backproject": {
        "in": _Opt("in", required=True, help="sinogram table path or -"),
        "out": _Opt("out", required=True, help="output grid path or -"),
        "grid": _Opt("posint", help="output nodes per axis"),
        "lo": _Opt("floats", help="output box lower corner x,y"),
        "hi": _Opt("floats", help="output box upper corner x,y"),
        "reference": _Opt("in", help="grid supplying the output domain"),
    },
    "report": {
        "recon": _Opt("in", required=True, help="reconstruction grid"),
        "reference": _Opt("in", required=True, help="reference grid"),
        "out": _Opt("out", required=True, help="report JSON path or -"),
        "geometry": _Opt("str", default="unknown", help="geometry tag"),
        "tol": _Opt("posfloat", default=0.05, help="L2 tolerance"),
        "seed": _Opt("int", default=0, help="seed recorded in the report"),
    },
    "export": {
        "kind": _Opt("choice:table|grid|circles|tomogram", required=True,
                     help="artifact type to export"),
        "in": _Opt("in", help="artifact path or - (table/grid/tomogram)"),
        "out": _Opt("out", required=True, help="CSV path or -"),
        "lams": _Opt("floats", help="circle-family lambda values"),
        "mu": _Opt("float", default=1.0, help="circle-family mu"),
        "nu": _Opt("float", default=0.0, help="circle-family nu"),
    },
    "qtomo-husimi": {
        "state": _Opt("in", required=True, help="density JSON path or -"),
        "nmax": _Opt("posint", required=True, help="Fock truncation"),
        "grid": _Opt("posint", default=128, help="phase-grid nodes per axis"),
        "out": _Opt("out", required=True, help="K-symbol grid path or -"),
    },
    "qtomo-phi": {
        "state": _Opt("in", required=True, help="density JSON path or -"),
        "nmax": _Opt("posint", required=True, help="Fock truncation"),
        "cutoff": _Opt("posfloat", help="band limit (default 2 sqrt(nmax)+2)"),
        "grid": _Opt("posint", default=128, help="phase-grid nodes per axis"),
        "out": _Opt("out", required=True, help="phi-symbol grid path or -"),
    },
    "qtomo-quantize": {
        "in": _Opt("in", required=True, help="K-symbol grid path or -"),
        "nmax": _Opt("posint", required=True, help="Fock truncation"),
        "cutoff": _Opt("posfloat", help="band limit (default 2 sqrt(nmax)+2)"),
        "out": _Opt("out", required=True, help="operator JSON path or -"),
    },
    "qtomo-reconstruct": {
        "in": _Opt("in", required=True, help="K-symbol grid path or -"),
        "nmax": _Opt("posint", required=True, help="Fock truncation"),
        "fit_radius": _Opt("posfloat", help="sample radius for the fit"),
        "out": _Opt("out", required=True, help="operator JSON path or -"),
    },
    "qtomo-star": {
        "in1": _Opt("in", required=True, help="left K-symbol grid"),
        "in2": _Opt("in", required=True, help="right K-symbol grid"),
        "nmax": _Opt("posint", required=True, help="Fock truncation"),
        "cutoff": _Opt("posfloat", help="band limit for the product"),
        "out": _Opt("out", required=True, help="product K-symbol grid"),
    },
    "gtomo-spin": {
        "j": _Opt("posfloat", required=True, help="spin (half-integer)"),
        "state": _Opt("in", required=True, help="density JSON path or -"),
        "axis": _Opt("floats", default=(0.0, 0.0, 1.0),
                     help="observable direction n1,n2,n3"),
        "out": _Opt("out", required=True, help="tomogram JSON path or -"),
    },
    "gtomo-fourier": {
        "j": _Opt("posfloat", required=True, help="spin (half-integer)"),
        "state": _Opt("in", required=True, help="density JSON path or -"),
        "axis": _Opt("floats", default=(0.0, 0.0, 1.0),
                     help="observable direction n1,n2,n3"),
        "window_periods": _Opt("posfloat", default=6.0,
                               help="window length in units of 2 pi / gap"),
        "ns": _Opt("posint", default=2049, help="s samples"),
        "pad_bins": _Opt("posint", default=10, help="lambda bins past spectrum"),
        "out": _Opt("out", required=True, help="CSV (lambda, W) path or -"),
    },
    "gtomo-gram": {
        "j": _Opt("posfloat", required=True, help="spin (half-integer)"),
        "state": _Opt("in", help="density JSON (default random per trial)"),
        "trials": _Opt("posint", default=200, help="randomized trials"),
        "elements": _Opt("posint", default=8, help="group elements per trial"),
        "seed": _Opt("int", default=0, help="RNG seed"),
        "out": _Opt("out", required=True, help="report JSON path or -"),
    },
}


@dataclass(frozen=True)
class JobConfig:
    """Validated options for one subcommand.

    Unknown keys are rejected by name, required options must be present,
    budget-like options must be positive, and no output path may collide
    with an input path.
    """

    subcommand: str
    options: dict

    def __post_init__(self):
        if self.subcommand not in _SCHEMAS:
            raise ValidationError(f"unknown subcommand {self.subcommand!r}")
        schema = _SCHEMAS[self.subcommand]
        for key in self.options:
            if key not in schema:
                raise ValidationError(
                    f"unknown config key {key!r} for subcommand "
                    f"{self.subcommand!r}")
        merged = {}
        for name, opt in schema.items():
            v = self.options.get(name)
            if v is None:
                v = opt.default
            if v is None:
                if opt.required:
                    raise ValidationError(
                        f"{self.subcommand}: missing required option {name!r}")
                merged[name] = None
                continue
            merged[name] = opt.convert(name, v)
        ins = {v for n, o in schema.items() if o.kind == "in"
               for v in [merged.get(n)] if v not in (None, "-")}
        outs = [v for n, o in schema.items() if o.kind == "out"
                for v in [merged.get(n)] if v not in (None, "-")]
        if len(outs) != len(set(outs)):
            raise ValidationError("output paths must be distinct")
        clash = ins.intersection(outs)
        if clash:
            raise ValidationError(
                f"paths used for both input and output: {sorted(clash)}")
        object.__setattr__(self, "options", merged)

    def opt(self, name):
        return self.options[name]


def config_from_sources(subcommand: str, cli_options: dict,
                        config_path=None) -> JobConfig:
    """Merge defaults, --config file values and explicit flags (flags win)."""
    merged = {}
    if config_path is not None:
        text = _read_text(config_path)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        merged.update(data)
    merged.update({k: v for k, v in cli_options.items() if v is not None})
    return JobConfig(subcommand, merged)


@dataclass(frozen=True)
class RoundTripReport:
    """Round-trip summary: geometry, shape, L2 error, invariant pass/fail,
    wall time and the seed the run was configured with.  Everything except
    wall_time_s is deterministic for a fixed config and seed."""

    geometry: str
    grid_shape: tuple
    l2_relative_error: float
    invariants: dict
    wall_time_s: float
    seed: int

    def passed(self) -> bool:
        return all(bool(v) for v in self.invariants.values())

    def to_json(self) -> str:
        body = {
            "geometry": self.geometry,
            "grid_shape": list(self.grid_shape),
            "l2_relative_error": self.l2_relative_error,
            "invariants": {k: bool(v) for k, v in self.invariants.items()},
            "wall_time_s": self.wall_time_s,
            "seed": self.seed,
        }
        return json.dumps(body, sort_keys=True, indent=2) + "\n"


def make_report(recon: ScalarField, reference: ScalarField, geometry: str,
                tol: float, wall_time_s: float, seed: int) -> RoundTripReport:
    if recon.domain.shape != reference.domain.shape:
        raise ValidationError(
            f"reconstruction shape {recon.domain.shape} does not match "
            f"reference {reference.domain.shape}")
    err = l2_relative_error(recon, reference)
    mref = integrate(reference)
    mrec = integrate(recon)
    invariants = {
        "values_finite": bool(np.all(np.isfinite(recon.values))),
        "l2_within_tol": bool(err <= tol),
        "mass_within_2pct": bool(abs(mrec - mref) <= 0.02 * max(abs(mref), 1e-300)),
    }
    return RoundTripReport(geometry, recon.domain.shape, float(err),
                           invariants, float(wall_time_s), int(seed))


# ---------------------------------------------------------------------------
# i/o plumbing
# ---------------------------------------------------------------------------

def _read_text(path) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, "r", encoding="utf-8") as h:
            return h.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path!r}: {exc}") from exc


def _read_artifact(path):
    if path == "-":
        return read_grid(sys.stdin.buffer)
    try:
        return read_grid(path)
    except OSError as exc:
        raise ValidationError(f"cannot read {path!r}: {exc}") from exc


def _read_field(path) -> ScalarField:
    obj = _read_artifact(path)
    if not isinstance(obj, ScalarField):
        raise ValidationError(
            f"{path!r} holds a {type(obj).__name__}, expected a scalar field")
    return obj


def _read_table(path, axes=None) -> TomogramTable:
    obj = _read_artifact(path)
    if not isinstance(obj, TomogramTable):
        raise ValidationError(
            f"{path!r} holds a {type(obj).__name__}, expected a tomogram table")
    if axes is not None and obj.axes != tuple(axes):
        raise ValidationError(
            f"{path!r} has axes {obj.axes}, expected {tuple(axes)}")
    return obj


def _read_phase_grid(path) -> cstomo.PhaseGrid:
    obj = _read_artifact(path)
    if not isinstance(obj, cstomo.PhaseGrid):
        raise ValidationError(
            f"{path!r} holds a {type(obj).__name__}, expected a phase grid")
    return obj


def _atomic_bytes(path, data: bytes):
    """Write data atomically: temp file beside the target, then rename."""
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target),
                               prefix="." + os.path.basename(target) + ".",
                               suffix=".part")
    try:
        with os.fdopen(fd, "wb") as h:
            h.write(data)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_grid_atomic(obj, path):
    _atomic_bytes(path, grid_bytes(obj))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def _csv_bytes(header, rows) -> bytes:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(c) for c in row) for row in rows)
    return ("\n".join(lines) + "\n").encode("utf-8")


def _operator_json(entries: np.ndarray) -> str:
    m = np.asarray(entries, dtype=np.complex128)
    body = {"dim": m.shape[0], "re": m.real.tolist(), "im": m.imag.tolist()}
    return json.dumps(body, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# geometry plumbing
# ---------------------------------------------------------------------------

_DIFFEOS = {
    "circle": conformal_inversion,
    "hyperbola": axis_inversion,
    "bertrand": lambda: bertrand(1),
}


def _quadric_from_opts(cfg) -> "quadric_spec":
    B = cfg.opt("B")
    if B is None:
        B = (1.0, 0.0, 1.0)
    if len(B) == 3:
        mat = [[B[0], B[1]], [B[1], B[2]]]
    elif len(B) == 4:
        mat = [[B[0], B[1]], [B[2], B[3]]]
    else:
        raise ValidationError("B needs 3 (b11,b12,b22) or 4 components")
    a = cfg.opt("a")
    if a is not None and len(a) != 2:
        raise ValidationError("a needs 2 components")
    return quadric_spec(mat, a)


def _pair(name, v):
    if v is None:
        return None
    if len(v) != 2:
        raise ValidationError(f"{name} needs 2 components, got {len(v)}")
    return tuple(v)


def _out_domain(cfg, reference=None) -> BoxDomain:
    lo = _pair("lo", cfg.opt("lo"))
    hi = _pair("hi", cfg.opt("hi"))
    n = cfg.opt("grid")
    if lo is not None and hi is not None:
        n = n or 128
        return BoxDomain(lo, hi, (n, n))
    if reference is not None:
        dom = reference.domain
        if n is None or tuple(dom.shape) == (n, n):
            return dom
        return BoxDomain(dom.lo, dom.hi, (n, n))
    raise ValidationError(
        "output domain unspecified: pass --lo/--hi (with --grid) or --reference")


def _support_lam_bound(f: ScalarField, diffeo) -> float:
    """Bound on |mu.phi(q)| over the support of f for unit mu."""
    X, Y = f.domain.grid()
    pts = np.stack([X, Y], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        xp = diffeo.forward(pts)
    r = np.linalg.norm(xp, axis=-1)
    support = np.abs(f.values) > 1e-12 * max(float(np.abs(f.values).max()), 1e-300)
    good = support & np.isfinite(r)
    if not good.any():
        raise ValidationError("field support lies on the singular set")
    return float(r[good].max()) * 1.05 + max(f.domain.spacing)


# ---------------------------------------------------------------------------
# tomo subcommands
# ---------------------------------------------------------------------------

def _cmd_phantom(cfg) -> int:
    o = cfg.options
    lo, hi = _pair("lo", o["lo"]), _pair("hi", o["hi"])
    if (lo is None) != (hi is None):
        raise ValidationError("pass both --lo and --hi, or neither")
    if lo is None:
        e = o["extent"]
        lo, hi = (-e, -e), (e, e)
    dom = BoxDomain(lo, hi, (o["grid"], o["grid"]))
    c = _pair("center", o["center"])
    cv = o["cov"]
    if len(cv) != 3:
        raise ValidationError("cov needs 3 components c11,c12,c22")
    f = make_gaussian_phantom(dom, c, [[cv[0], cv[1]], [cv[1], cv[2]]], o["mass"])
    _write_grid_atomic(f, o["out"])
    return 0


def _forward_deformed(cfg, f: ScalarField) -> TomogramTable:
    o = cfg.options
    diffeo = _DIFFEOS[o["geometry"]]()
    lam_max = o["lam_max"] or _support_lam_bound(f, diffeo)
    lams = np.linspace(-lam_max, lam_max, o["n_lambda"])
    full = 2.0 * math.pi if o["span"] == "full" else math.pi
    theta = full * np.arange(o["n_theta"]) / o["n_theta"]
    sampler = DeformedFieldSampler(f, diffeo, refine=o["refine"])
    vals = np.empty((lams.size, theta.size))
    for j, th in enumerate(theta):
        vals[:, j] = sampler.batch(lams, (math.cos(th), math.sin(th)))
    return TomogramTable(("lambda", "theta"), (lams, theta), vals)


def _forward_quadric(cfg, f: ScalarField) -> TomogramTable:
    """Quadric tomogram table over (lambda, mu_x, mu_y).

    The center axes are Gauss-Legendre nodes over the mu window, the same
    nodes quadric_invert integrates over, so an inversion run with matching
    --n-mu reads the table without interpolation error.  The lambda moment
    C(mu) oscillates at rate ~2 |B| |q - mu|, far too fast for a uniform
    grid of practical size to support interpolation between centers.
    """
    o = cfg.options
    spec = _quadric_from_opts(cfg)
    win = o["mu_window"]
    if win is None:
        pad = 4.0 * _quadric_sigma(spec)
        mulo = (f.domain.lo[0] - pad, f.domain.lo[1] - pad)
        muhi = (f.domain.hi[0] + pad, f.domain.hi[1] + pad)
    else:
        if len(win) != 4:
            raise ValidationError("mu_window needs 4 components lox,loy,hix,hiy")
        mulo, muhi = (win[0], win[1]), (win[2], win[3])
    glo, ghi = _interval_range(spec, f.domain.lo, f.domain.hi, mulo, muhi)
    pad = 2.0 * (ghi - glo) / max(o["n_lambda"] - 1, 1)
    lams = np.linspace(glo - pad, ghi + pad, o["n_lambda"])
    x, _ = np.polynomial.legendre.leggauss(o["n_mu"])
    mux = 0.5 * (muhi[0] + mulo[0]) + 0.5 * (muhi[0] - mulo[0]) * x
    muy = 0.5 * (muhi[1] + mulo[1]) + 0.5 * (muhi[1] - mulo[1]) * x
    sampler = QuadricFieldSampler(f, spec, refine=o["refine"])
    vals = np.empty((lams.size, mux.size, muy.size))
    for i, mx in enumerate(mux):
        for j, my in enumerate(muy):
            vals[:, i, j] = sampler.batch(lams, (mx, my))
    return TomogramTable(("lambda", "mu_x", "mu_y"), (lams, mux, muy), vals)


def _cmd_forward(cfg) -> int:
    o = cfg.options
    f = _read_field(o["in"])
    if o["geometry"] == "line":
        tab = sinogram_line(f, o["n_lambda"], o["n_theta"],
                            lam_max=o["lam_max"], span=o["span"], step=o["step"])
    elif o["geometry"] == "quadric":
        tab = _forward_quadric(cfg, f)
    else:
        tab = _forward_deformed(cfg, f)
    _write_grid_atomic(tab, o["out"])
    return 0


class _QuadricTableSampler:
    """Quadric sampler backed by a (lambda, mu_x, mu_y) table: bilinear in
    the center, linear in lambda, zero beyond the lambda range.

    The center axes are taken to be Gauss-Legendre nodes (as written by
    ``tomo forward``); mu_window is the quadrature window recovered from
    them, so an inversion with the same node count queries the stored
    centers exactly and the bilinear weights collapse to a lookup.
    """

    def __init__(self, table: TomogramTable):
        self.lam = table.axis("lambda")
        self.mx = table.axis("mu_x")
        self.my = table.axis("mu_y")
        if self.mx.size < 2 or self.my.size < 2:
            raise ValidationError("quadric table needs >= 2 center nodes per axis")
        self.vals = table.values
        x, _ = np.polynomial.legendre.leggauss(self.mx.size)
        wx = (self.mx[-1] - self.mx[0]) / (x[-1] - x[0])
        cx = 0.5 * (self.mx[0] + self.mx[-1])
        y, _ = np.polynomial.legendre.leggauss(self.my.size)
        wy = (self.my[-1] - self.my[0]) / (y[-1] - y[0])
        cy = 0.5 * (self.my[0] + self.my[-1])
        self.mu_window = ((float(cx - wx), float(cy - wy)),
                          (float(cx + wx), float(cy + wy)))

    def _profile(self, mu):
        x = min(max(float(mu[0]), self.mx[0]), self.mx[-1])
        y = min(max(float(mu[1]), self.my[0]), self.my[-1])
        i = min(int(np.searchsorted(self.mx, x, "right")) - 1, self.mx.size - 2)
        j = min(int(np.searchsorted(self.my, y, "right")) - 1, self.my.size - 2)
        i = max(i, 0)
        j = max(j, 0)
        fx = (x - self.mx[i]) / (self.mx[i + 1] - self.mx[i])
        fy = (y - self.my[j]) / (self.my[j + 1] - self.my[j])
        return ((1 - fx) * (1 - fy) * self.vals[:, i, j]
                + fx * (1 - fy) * self.vals[:, i + 1, j]
                + (1 - fx) * fy * self.vals[:, i, j + 1]
                + fx * fy * self.vals[:, i + 1, j + 1])

    def batch(self, lams, mu):
        return np.interp(np.asarray(lams, dtype=float), self.lam,
                         self._profile(mu), left=0.0, right=0.0)

    def __call__(self, lam, mu):
        return float(self.batch(np.array([float(lam)]), mu)[0])


def _cmd_invert(cfg) -> int:
    o = cfg.options
    geometry = o["geometry"]
    reference = _read_field(o["reference"]) if o["reference"] else None
    t0 = time.perf_counter()
    if geometry == "quadric":
        tab = _read_table(o["in"], axes=("lambda", "mu_x", "mu_y"))
        dom = _out_domain(cfg, reference)
        sampler = _QuadricTableSampler(tab)
        quad = QuadricQuadrature(n_mu=o["n_mu"], dlam=o["dlam"],
                                 mu_window=sampler.mu_window)
        recon = quadric_invert(sampler, _quadric_from_opts(cfg), dom, quad)
    else:
        tab = _read_table(o["in"], axes=("lambda", "theta"))
        dom = _out_domain(cfg, reference)
        sampler = TableAffineSampler(tab)
        quad = QuadratureSpec(n_dirs=o["n_dirs"], n_lambda=o["n_lambda"])
        if geometry == "line":
            if o["method"] == "hilbert":
                recon = invert_radon_hilbert(tab, dom)
            else:
                recon = invert_affine(sampler, dom, quad)
        elif geometry == "bertrand":
            recon = bertrand_invert(sampler, dom, quad, lam_max=o["lam_max"])
        else:
            recon = deformed_invert(sampler, _DIFFEOS[geometry](), dom, quad,
                                    lam_max=o["lam_max"],
                                    singular_eps=o["singular_eps"],
                                    on_singular=o["on_singular"])
    wall = time.perf_counter() - t0
    _write_grid_atomic(recon, o["out"])
    if o["report"]:
        if reference is None:
            raise ValidationError("--report needs --reference")
        rep = make_report(recon, reference, geometry, o["tol"], wall, o["seed"])
        _atomic_bytes(o["report"], rep.to_json().encode("utf-8"))
    return 0


def _cmd_backproject(cfg) -> int:
    o = cfg.options
    tab = _read_table(o["in"], axes=("lambda", "theta"))
    reference = _read_field(o["reference"]) if o["reference"] else None
    dom = _out_domain(cfg, reference)
    _write_grid_atomic(backproject(tab, dom), o["out"])
    return 0


def _cmd_report(cfg) -> int:
    o = cfg.options
    recon = _read_field(o["recon"])
    reference = _read_field(o["reference"])
    rep = make_report(recon, reference, o["geometry"], o["tol"], 0.0, o["seed"])
    _atomic_bytes(o["out"], rep.to_json().encode("utf-8"))
    return 0


def _cmd_export(cfg) -> int:
    o = cfg.options
    kind = o["kind"]
    if kind == "circles":
        if o["lams"] is None:
            raise ValidationError("circle export needs --lams")
        rows = []
        for lam in o["lams"]:
            c = circle_geometry(lam, o["mu"], o["nu"])
            if c.degenerate:
                rows.append((lam, o["mu"], o["nu"], "", "", ""))
            else:
                rows.append((lam, o["mu"], o["nu"],
                             c.center[0], c.center[1], c.radius))
        data = _csv_bytes(
            ("lambda", "mu", "nu", "center_x", "center_y", "radius"), rows)
    elif kind == "tomogram":
        body = json.loads(_read_text(o["in"]))
        atoms = body.get("atoms")
        if not isinstance(atoms, list):
            raise ValidationError("tomogram JSON must hold an 'atoms' list")
        rows = [(a["lambda"], a["weight"]) for a in atoms]
        data = _csv_bytes(("lambda", "weight"), rows)
    elif kind == "table":
        tab = _read_table(o["in"])
        mesh = np.meshgrid(*tab.axis_values, indexing="ij")
        cols = [m.ravel() for m in mesh] + [tab.values.ravel()]
        data = _csv_bytes(tab.axes + ("value",), zip(*cols))
    else:
        obj = _read_artifact(o["in"])
        if isinstance(obj, ScalarField):
            X, Y = obj.domain.grid()
            data = _csv_bytes(("x", "y", "value"),
                              zip(X.ravel(), Y.ravel(), obj.values.ravel()))
        elif isinstance(obj, cstomo.PhaseGrid):
            U, V = obj.domain.grid()
            data = _csv_bytes(
                ("u", "v", "re", "im"),
                zip(U.ravel(), V.ravel(),
                    obj.values.real.ravel(), obj.values.imag.ravel()))
        else:
            raise ValidationError(
                f"grid export cannot handle {type(obj).__name__}")
    _atomic_bytes(o["out"], data)
    return 0


# ---------------------------------------------------------------------------
# qtomo subcommands
# ---------------------------------------------------------------------------

def _load_density(path) -> cstomo.DensityMatrix:
    return cstomo.density_from_json(_read_text(path))


def _state_grid(nmax: int, nodes: int) -> cstomo.PhaseGrid:
    dom = cstomo.default_phase_domain(nmax, nodes=nodes)
    return cstomo.PhaseGrid(dom, np.zeros(dom.shape, dtype=np.complex128))


def _cmd_qtomo_husimi(cfg) -> int:
    o = cfg.options
    rho = _load_density(o["state"])
    if rho.dim != o["nmax"] + 1:
        raise ValidationError(
            f"state dim {rho.dim} does not match nmax {o['nmax']}")
    K = cstomo.husimi_grid(rho, grid=_state_grid(o["nmax"], o["grid"]))
    _write_grid_atomic(K, o["out"])
    return 0


def _cmd_qtomo_phi(cfg) -> int:
    o = cfg.options
    rho = _load_density(o["state"])
    if rho.dim != o["nmax"] + 1:
        raise ValidationError(
            f"state dim {rho.dim} does not match nmax {o['nmax']}")
    K = cstomo.husimi_grid(rho, grid=_state_grid(o["nmax"], o["grid"]))
    cutoff = o["cutoff"] or cstomo.default_cutoff(o["nmax"])
    _write_grid_atomic(cstomo.phi_from_K(K, cutoff), o["out"])
    return 0


def _cmd_qtomo_quantize(cfg) -> int:
    o = cfg.options
    K = _read_phase_grid(o["in"])
    A = cstomo.quantizer_apply(K, cstomo.FockSpace(o["nmax"]),
                               cutoff=o["cutoff"])
    _atomic_bytes(o["out"], _operator_json(A.entries).encode("utf-8"))
    return 0


def _cmd_qtomo_reconstruct(cfg) -> int:
    o = cfg.options
    K = _read_phase_grid(o["in"])
    A = cstomo.reconstruct_from_K(K, cstomo.FockSpace(o["nmax"]),
                                  fit_radius=o["fit_radius"])
    _atomic_bytes(o["out"], _operator_json(A.entries).encode("utf-8"))
    return 0


def _cmd_qtomo_star(cfg) -> int:
    o = cfg.options
    K1 = _read_phase_grid(o["in1"])
    K2 = _read_phase_grid(o["in2"])
    K = cstomo.star_product(K1, K2, cstomo.FockSpace(o["nmax"]),
                            cutoff=o["cutoff"])
    _write_grid_atomic(K, o["out"])
    return 0


# ---------------------------------------------------------------------------
# gtomo subcommands
# ---------------------------------------------------------------------------

def _spin_inputs(cfg):
    o = cfg.options
    rep = group_tomo.su2_rep(o["j"])
    rho = _load_density(o["state"])
    axis = o["axis"]
    if len(axis) != 3:
        raise ValidationError("axis needs 3 components")
    return rep, rho, rep.algebra_element(axis)


def _cmd_gtomo_spin(cfg) -> int:
    rep, rho, xi = _spin_inputs(cfg)
    tomo = group_tomo.tomogram_spectral(rho, xi)
    body = {"atoms": [{"lambda": l, "weight": w} for l, w in tomo.atoms]}
    _atomic_bytes(cfg.opt("out"),
                  (json.dumps(body, sort_keys=True) + "\n").encode("utf-8"))
    return 0


def _cmd_gtomo_fourier(cfg) -> int:
    o = cfg.options
    rep, rho, xi = _spin_inputs(cfg)
    ev = np.linalg.eigvalsh(xi.matrix)
    merged = [float(ev[0])]
    for v in ev[1:]:
        if v - merged[-1] > 1e-9:
            merged.append(float(v))
    gap = float(np.min(np.diff(merged))) if len(merged) > 1 else 1.0
    L = o["window_periods"] * 2.0 * math.pi / gap
    ns = o["ns"] + (o["ns"] + 1) % 2
    s = np.linspace(-L / 2.0, L / 2.0, ns)
    dlam = 2.0 * math.pi / L
    pad = o["pad_bins"] * dlam
    nlam = int(math.ceil((merged[-1] - merged[0] + 2 * pad) / dlam)) + 1
    lam = merged[0] - pad + dlam * np.arange(nlam)
    W = group_tomo.tomogram_fourier(rho, rep, xi, lam, s)
    _atomic_bytes(o["out"], _csv_bytes(("lambda", "W"), zip(lam, W)))
    return 0


def _cmd_gtomo_gram(cfg) -> int:
    o = cfg.options
    rep = group_tomo.su2_rep(o["j"])
    fixed = _load_density(o["state"]) if o["state"] else None
    if fixed is not None and fixed.dim != rep.dim:
        raise ValidationError(
            f"state dim {fixed.dim} does not match rep dim {rep.dim}")
    rng = np.random.default_rng(o["seed"])
    worst = math.inf
    for _ in range(o["trials"]):
        if fixed is None:
            M = rng.normal(size=(rep.dim, rep.dim)) \
                + 1j * rng.normal(size=(rep.dim, rep.dim))
            R = M @ M.conj().T
            rho = cstomo.DensityMatrix(R / np.trace(R).real)
        else:
            rho = fixed
        els = [(rng.normal(size=3), rng.uniform(0.0, 4.0 * math.pi))
               for _ in range(o["elements"])]
        worst = min(worst, group_tomo.gram_psd_check(rho, rep, els))
    body = {
        "j": o["j"],
        "trials": o["trials"],
        "elements_per_trial": o["elements"],
        "min_eigenvalue": worst,
        "pass": bool(worst >= -1e-10),
        "seed": o["seed"],
    }
    _atomic_bytes(o["out"],
                  (json.dumps(body, sort_keys=True, indent=2) + "\n").encode("utf-8"))
    return 0


# ---------------------------------------------------------------------------
# dispatch and entry points
# ---------------------------------------------------------------------------

_RUNNERS = {
    "phantom": _cmd_phantom,
    "forward": _cmd_forward,
    "invert": _cmd_invert,
    "backproject": _cmd_backproject,
    "report": _cmd_report,
    "export": _cmd_export,
    "qtomo-husimi": _cmd_qtomo_husimi,
    "qtomo-phi": _cmd_qtomo_phi,
    "qtomo-quantize": _cmd_qtomo_quantize,
    "qtomo-reconstruct": _cmd_qtomo_reconstruct,
    "qtomo-star": _cmd_qtomo_star,
    "gtomo-spin": _cmd_gtomo_spin,
    "gtomo-fourier": _cmd_gtomo_fourier,
    "gtomo-gram": _cmd_gtomo_gram,
}


def run(config: JobConfig) -> int:
    """Execute one validated job; returns the process exit code."""
    return _RUNNERS[config.subcommand](config)


def _build_parser(prog, description, subs, strip_prefix=""):
    p = argparse.ArgumentParser(
        prog=prog, description=description,
        epilog="TOMO_BACKEND=auto|numba|numpy selects the kernels; "
               "TOMO_THREADS caps parallelism.  '-' means stdin/stdout.")
    sp = p.add_subparsers(dest="subcommand", required=True)
    for name in subs:
        schema = _SCHEMAS[name]
        q = sp.add_parser(name[len(strip_prefix):] if strip_prefix else name)
        q.add_argument("--config", default=None,
                       help="JSON file with option values (flags override)")
        for opt_name, opt in schema.items():
            flag = "--" + opt_name.replace("_", "-")
            if opt.kind == "flag":
                q.add_argument(flag, dest=opt_name, action="store_const",
                               const=True, default=None, help=opt.help)
            else:
                q.add_argument(flag, dest=opt_name, default=None, help=opt.help)
    return p


def _drive(parser, prefix, argv) -> int:
    try:
        args = vars(parser.parse_args(argv))
        sub = prefix + args.pop("subcommand")
        config_path = args.pop("config")
        cfg = config_from_sources(sub, args, config_path)
        return run(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    parser = _build_parser(
        "tomo",
        "Classical, deformed and quadric tomographic transforms.",
        ("phantom", "forward", "invert", "backproject", "report", "export"))
    return _drive(parser, "", argv)


def qtomo_main(argv=None) -> int:
    parser = _build_parser(
        "qtomo",
        "Coherent-state tomography: K and phi symbols, quantizer, star product.",
        ("qtomo-husimi", "qtomo-phi", "qtomo-quantize", "qtomo-reconstruct",
         "qtomo-star"),
        strip_prefix="qtomo-")
    return _drive(parser, "qtomo-", argv)


def gtomo_main(argv=None) -> int:
    parser = _build_parser(
        "gtomo",
        "Spin tomography on SU(2) representations.",
        ("gtomo-spin", "gtomo-fourier", "gtomo-gram"),
        strip_prefix="gtomo-")
    return _drive(parser, "gtomo-", argv)


if __name__ == "__main__":
    sys.exit(main())
