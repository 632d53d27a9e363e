"""Command-line front end: ``flatmod surface|strata|surgery|chyp ...``."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import __version__
from .errors import FlatmodError, InputError, PreconditionError

SCHEMA = 1
log = logging.getLogger("flatmod")


# ---------------------------------------------------------------------------- output helpers
def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return _plain(x.item())
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _rows_out(ctx, header, rows):
    fmt = ctx.obj["format"]
    if fmt == "json":
        click.echo(json.dumps({"schema": SCHEMA, "rows": [dict(zip(header, _plain(r))) for r in rows]}, indent=2))
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        click.echo(buf.getvalue(), nl=False)
    else:
        cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        for r in cells:
            click.echo("  ".join(c.rjust(w) for c, w in zip(r, widths)))


def _obj_out(ctx, payload: dict):
    payload = {"schema": SCHEMA, **_plain(payload)}
    fmt = ctx.obj["format"]
    if fmt == "json":
        click.echo(json.dumps(payload, indent=2))
        return
    flat = []

    def walk(prefix, v):
        if isinstance(v, dict):
            for k, x in v.items():
                walk(f"{prefix}.{k}" if prefix else k, x)
        else:
            flat.append((prefix, json.dumps(v) if isinstance(v, list) else v))

    walk("", payload)
    _rows_out(ctx, ["key", "value"], flat)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc


def _json_arg(text):
    """Inline JSON, or @file."""
    if text.startswith("@"):
        return _load_json(text[1:])
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"not valid JSON: {text!r}") from exc


def _complex_vec(data) -> np.ndarray:
    try:
        return np.array([complex(*z) if isinstance(z, list) else complex(z) for z in data])
    except (TypeError, ValueError) as exc:
        raise InputError(f"expected a list of numbers or [re, im] pairs, got {data!r}") from exc


def _complex_mat(data) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise InputError("a form is a nonempty list of rows")
    M = np.array([_complex_vec(row) for row in data])
    if M.ndim != 2:
        raise InputError("form rows have different lengths")
    return M


def _load_surface(path):
    from .surface import FlatSurface, PolygonalModel, build_from_polygon

    data = _load_json(path)
    if isinstance(data, dict) and "sides" in data:
        return build_from_polygon(PolygonalModel.from_json(data))
    S = FlatSurface.from_json(data)
    S.validate()
    return S


def _write_surface(S, out):
    text = json.dumps(_plain(S.to_json()))
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    return text


def _angle_list(text):
    from .angles import RationalAngle

    try:
        return [RationalAngle.of(a) for a in text.split(",") if a.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse angles {text!r}; use a/b,c/d,... as fractions of 2pi") from exc


# ---------------------------------------------------------------------------- root
@click.group()
@click.version_option(__version__, prog_name="flatmod")
@click.option("--seed", default=0, show_default=True, help="Seed for every random choice.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "table"]), default="json", show_default=True)
@click.option("--tol", default=1e-7, show_default=True, help="Geometric tolerance for checks.")
@click.option("--jobs", default=1, show_default=True, help="Workers for parallel enumerations.")
@click.pass_context
def cli(ctx, seed, fmt, tol, jobs):
    """Flat surfaces with cone points and moduli of flat tori."""
    level = os.environ.get("FLATMOD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"seed": seed, "format": fmt, "tol": tol, "jobs": max(1, jobs),
               "rng": np.random.default_rng(seed)}


# ---------------------------------------------------------------------------- surface
@cli.group()
def surface():
    """Build, check and measure surfaces."""


@surface.command("build")
@click.argument("path")
@click.option("-o", "--out", default=None, help="Output surface file (default: stdout).")
@click.option("--normalize/--no-normalize", default=True, show_default=True, help="Scale to area 1.")
def surface_build(path, out, normalize):
    """Read a polygonal model or surface file and write a normalized surface file."""
    S = _load_surface(path)
    if normalize:
        S = S.normalized()
    text = _write_surface(S, out)
    if not out:
        click.echo(text)


@surface.command("check")
@click.argument("path")
@click.pass_context
def surface_check(ctx, path):
    """Validate gluings and the Gauss-Bonnet angle sum."""
    S = _load_surface(path)
    res = S.gauss_bonnet_residual()
    ok = abs(res) < max(ctx.obj["tol"], 1e-9) * 10
    _obj_out(ctx, {"ok": ok, "genus": S.genus, "points": S.n_points, "area": S.area(),
                   "gauss_bonnet_residual": res,
                   "cone_angles": {str(k): v for k, v in S.cone_angles().items()}})
    if not ok:
        raise PreconditionError(f"angle sum misses Gauss-Bonnet by {res:.3g}")


@surface.command("invariants")
@click.argument("path")
@click.option("--samples", default=3, show_default=True, help="Sample points per triangle for the diameter.")
@click.pass_context
def surface_invariants(ctx, path, samples):
    """Systole, relative systole, diameter bracket and relative diameter at area 1."""
    from .delaunay import metric_report

    S = _load_surface(path)
    rep = metric_report(S, samples)
    out = rep.to_json()
    out["inequalities"] = rep.inequalities()
    out["cone_angles"] = {str(k): v for k, v in S.cone_angles().items()}
    _obj_out(ctx, out)


@surface.command("fixture")
@click.argument("name", type=click.Choice(["square-torus", "lattice-torus", "hexagon", "triangle-sphere",
                                           "polygon-sphere"]))
@click.option("--tau", default="0,1", show_default=True, help="Lattice modulus re,im.")
@click.option("--pattern", default=2, show_default=True, help="Hexagon gluing pattern 1-3.")
@click.option("--angles", default="1/8,1/8", show_default=True, help="Two base angles of the triangle.")
@click.option("--n", "nsides", default=4, show_default=True, help="Polygon sides for polygon-sphere.")
@click.option("-o", "--out", default=None)
def surface_fixture(name, tau, pattern, angles, nsides, out):
    """Write one of the canned surfaces."""
    from . import surface as sf

    if name == "square-torus":
        S = sf.square_torus()
    elif name == "lattice-torus":
        try:
            re_, im_ = (float(x) for x in tau.split(","))
        except ValueError as exc:
            raise InputError(f"bad --tau {tau!r}") from exc
        S = sf.lattice_torus(complex(re_, im_))
    elif name == "hexagon":
        S = sf.hexagon_torus(pattern, sf.regular_hexagon_sides())
    elif name == "triangle-sphere":
        a, b = (x.radians for x in _angle_list(angles))
        S = sf.triangle_sphere(a, b)
    else:
        S = sf.regular_polygon_sphere(nsides)
    text = _write_surface(S, out)
    if not out:
        click.echo(text)


# ---------------------------------------------------------------------------- strata
def _y1_row(M):
    from .strata import y1_counts

    return y1_counts(M)[-1]


@cli.command()
@click.option("--angles", default=None, help="Cone angles a/b,c/d,... as fractions of 2pi.")
@click.option("--M", "M", default=1, show_default=True, type=int, help="Holonomy multiplier.")
@click.option("--table1", is_flag=True, help="Emit the arithmetic-lattice table as CSV.")
@click.option("--y1", is_flag=True, help="Emit the (3pi, pi) counting table.")
@click.option("--max-M", "max_M", default=20, show_default=True, type=int)
@click.pass_context
def strata(ctx, angles, M, table1, y1, max_M):
    """Codimension-one strata, cone points, cusps and punctures of a leaf."""
    from .angles import label_from_fractions
    from .strata import leaf_report, table1_csv

    if table1:
        # always the CSV layout of the golden file
        click.echo(table1_csv(), nl=False)
        return
    if y1:
        if max_M < 2:
            raise InputError("--max-M must be at least 2")
        Ms = list(range(2, max_M + 1))
        if ctx.obj["jobs"] > 1:
            with ProcessPoolExecutor(ctx.obj["jobs"]) as ex:
                rows = list(ex.map(_y1_row, Ms))
        else:
            from .strata import y1_counts
            rows = y1_counts(max_M)
        rows.sort()
        _rows_out(ctx, ["M", "cone_points", "cusps", "punctures"], rows)
        return
    if not angles:
        raise click.UsageError("give --angles, --table1 or --y1")
    if M <= 0:
        raise InputError("--M must be positive")
    lab = label_from_fractions(_angle_list(angles), M)
    _obj_out(ctx, leaf_report(lab).to_json())


# ---------------------------------------------------------------------------- surgery
@cli.group()
def surgery():
    """Apply surgeries."""


@surgery.command("apply")
@click.argument("spec_path")
@click.argument("surface_path", required=False)
@click.option("-o", "--out", default=None, help="Write the resulting surface here.")
@click.option("--reverse/--no-reverse", "do_reverse", default=False,
              help="Also undo the surgery and compare with the input.")
@click.pass_context
def surgery_apply(ctx, spec_path, surface_path, out, do_reverse):
    """Apply the surgery described by SPEC_PATH to SURFACE_PATH (S4 needs no surface)."""
    from .delaunay import isometric
    from .surgeries import SurgerySpec, apply, reverse, stratum_cone_angle

    spec = SurgerySpec.from_json(_load_json(spec_path))
    S = _load_surface(surface_path) if surface_path else None
    res = apply(spec, S)
    payload = {"spec": spec.to_json(), "result": res.to_json()}
    try:
        if spec.kind in ("S1", "S2"):
            ang = stratum_cone_angle(spec.kind, _frac_angle(S.cone_angle(spec.target[0])))
        elif spec.kind == "S3":
            a, b = (_frac_angle(S.cone_angle(x)) for x in spec.target[:2])
            ang = stratum_cone_angle("S3", a, b)
        else:
            ang = stratum_cone_angle(spec.kind)
        payload["stratum_cone_angle"] = ang.to_json()
    except (PreconditionError, InputError):
        payload["stratum_cone_angle"] = None
    if do_reverse:
        back, why = reverse(res, explain=True)
        rep = {"status": "ok" if back is not None else "absent", "reason": why}
        if back is not None:
            base = S if S is not None else _s4_base(spec)
            rep["isometric"] = isometric(back.surface, base, tol=ctx.obj["tol"])
            rep["recovered"] = back.data
        payload["reverse"] = rep
    if out:
        _write_surface(res.surface, out)
        payload["output"] = out
    _obj_out(ctx, payload)


def _frac_angle(theta):
    from fractions import Fraction

    fr = Fraction(theta / (2 * math.pi)).limit_denominator(10000)
    if abs(float(fr) * 2 * math.pi - theta) > 1e-9:
        raise PreconditionError("irrational cone angle")
    return fr


def _s4_base(spec):
    from .surface import lattice_torus

    return lattice_torus(spec.tau if spec.tau is not None else 1j)


# ---------------------------------------------------------------------------- chyp
@cli.group()
def chyp():
    """Complex hyperbolic distances, metric checks and volumes."""


@chyp.command("distance")
@click.option("--form", "form", required=True, help="Hermitian matrix as JSON (or @file).")
@click.option("--x", "x", required=True, help="First point as a JSON complex array.")
@click.option("--y", "y", required=True, help="Second point as a JSON complex array.")
@click.pass_context
def chyp_distance(ctx, form, x, y):
    """Distance between two positive lines of a signature (1, n) form."""
    from .chyp import check_signature, chd_distance

    H = _complex_mat(_json_arg(form))
    n = check_signature(H)
    d = chd_distance(_complex_vec(_json_arg(x)), _complex_vec(_json_arg(y)), H)
    _obj_out(ctx, {"n": n, "distance": d, "cosh2_half": math.cosh(d / 2) ** 2})


@chyp.command("volume")
@click.option("--n", "n", default=1, show_default=True, help="Complex dimension of the chart.")
@click.option("--a", "a", default=None, help="Splitting form (JSON); default diag(1, -1, ...).")
@click.option("--K", "K", default=1.0, show_default=True)
@click.option("--lambda", "lam", default=1.0, show_default=True)
@click.option("--umax", "umax", default=8.0, show_default=True, help="Largest truncation level.")
@click.option("--doublings", default=3, show_default=True, help="Also report u_max/2, u_max/4, ...")
@click.option("--rtol", default=1e-2, show_default=True)
@click.pass_context
def chyp_volume(ctx, n, a, K, lam, umax, doublings, rtol):
    """Truncated volumes of the region |xi_j|, |Re xi_n| < K, Im xi_n > lambda."""
    from .chyp import PseudoHorosphericalChart, density_decay, region_volume

    chart = PseudoHorosphericalChart(_complex_mat(_json_arg(a))) if a else PseudoHorosphericalChart.standard(n)
    rows = []
    levels = [umax / 2 ** k for k in range(doublings, -1, -1)]
    for u in levels:
        v = region_volume(chart, K, lam, u, rtol=rtol)
        rows.append((u, v.value, v.error, v.grid))
    # increments only count once the truncation level reaches the region
    diffs = [rows[i + 1][1] - rows[i][1] for i in range(len(rows) - 1) if rows[i][1] > 0]
    payload = {"n": chart.n, "K": K, "lambda": lam,
               "volumes": [dict(zip(["u_max", "value", "error", "grid"], r)) for r in rows],
               "increments": diffs,
               "increments_decrease": all(diffs[i + 1] < diffs[i] for i in range(len(diffs) - 1)),
               "density_ratio_at_doubled_u": density_decay(chart, max(umax / 2, 1.0), np.zeros(chart.n - 1))}
    _obj_out(ctx, payload)


@chyp.command("metric-check")
@click.option("--n", "n", default=2, show_default=True)
@click.option("--samples", default=100, show_default=True)
@click.pass_context
def chyp_metric_check(ctx, n, samples):
    """Compare the chart metric with finite differences of the distance."""
    from .chyp import PseudoHorosphericalChart, finite_difference_metric, ph_metric_tensor

    rng = ctx.obj["rng"]
    worst = 0.0
    for _ in range(samples):
        ch = PseudoHorosphericalChart.random(n, rng)
        rest = rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1)
        xi = ch.point(rng.normal(), 0.2 + 3 * rng.random(), rest)
        t = rng.normal(size=n) + 1j * rng.normal(size=n)
        g = ph_metric_tensor(ch, xi, t)
        worst = max(worst, abs(g - finite_difference_metric(ch, xi, t)) / g)
    _obj_out(ctx, {"n": n, "samples": samples, "max_relative_error": worst, "ok": worst < 1e-4})


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="flatmod", standalone_mode=False)
    except FlatmodError as exc:
        click.echo(json.dumps({"schema": SCHEMA, "error": type(exc).__name__, "message": str(exc)}), err=True)
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
