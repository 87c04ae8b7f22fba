"""``lat`` command-line front end.

Every table is written as CSV with a ``#`` comment header echoing the tool version,
field label, seed and all parameters, so identical invocations give identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .boxcount import Box, growth_experiment, remainder, sup_remainder
from .errors import LatError, ValidationError
from .fourier import PoissonParams, SmoothingKernel, auto_cutoff, poisson_remainder
from .lattice import (build_lattice, dual_lattice, lattice_from_matrix, module_from_field_data, nm_floor,
                      save_lattice)
from .lds import (generate_pointset, load_pointset, prefix_sup_experiment, save_pointset,
                  star_discrepancy)
from .numfield import embed_float, load_field_file, norm
from .unitsgeo import (count_unit_powers, enumerate_F_norm_bounded, normalize_box, reduce_element,
                       reduce_to_F, required_coeff_radius, unit_system)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


class Table:
    """Collects a header and rows, then writes CSV to a file or stdout."""

    def __init__(self, args, label: str, columns: list[str]):
        self.args = args
        self.label = label
        self.columns = columns
        self.rows: list[list] = []

    def add(self, *row):
        self.rows.append(list(row))

    def render(self) -> str:
        buf = io.StringIO()
        buf.write(f"# lat {__version__}\n")
        buf.write(f"# command: {self.args.command}{' ' + self.args.action if getattr(self.args, 'action', None) else ''}\n")
        buf.write(f"# field: {self.label}\n")
        buf.write(f"# seed: {getattr(self.args, 'seed', 0)}\n")
        params = {k: v for k, v in vars(self.args).items()
                  if k not in ("command", "action", "func", "out", "plot", "threads")}
        echo = " ".join(f"{k}={_echo(v)}" for k, v in sorted(params.items()))
        buf.write(f"# params: {echo}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def emit(self) -> Path | None:
        text = self.render()
        if self.args.out:
            path = Path(self.args.out)
            path.write_text(text)
            return path
        sys.stdout.write(text)
        return None


def _echo(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return _fmt(v)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("LAT_THREADS", "1")))


def _lattice(args):
    if args.field.lower() in ("z2", "z3"):
        s = int(args.field[1])
        g = lattice_from_matrix(np.eye(s, dtype=int).tolist(), label=f"Z^{s}")
        return None, g
    fd = load_field_file(args.field)
    return fd, build_lattice(module_from_field_data(fd))


def _shift(args, s: int) -> np.ndarray:
    x = np.zeros(s) if args.shift is None else np.asarray(args.shift, dtype=float)
    if x.shape != (s,):
        raise ValidationError(f"--shift needs {s} values")
    return x


def _sides(values, s: int, name: str = "--box") -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != (s,):
        raise ValidationError(f"{name} needs {s} values")
    return v


def _plot_path(args, table_path: Path | None):
    if not args.plot:
        return None
    if table_path is None:
        raise ValidationError("--plot needs --out")
    from .plotting import figure_path

    return figure_path(table_path)


# ---------------------------------------------------------------------------
# commands


def cmd_field(args) -> int:
    fd = load_field_file(args.field)
    f = fd.field
    t = Table(args, fd.label, ["key", "value"])
    t.add("label", fd.label)
    t.add("degree", f.degree)
    t.add("poly_coeffs", " ".join(str(c) for c in f.coeffs))
    t.add("poly_discriminant", f.discriminant())
    t.add("basis_discriminant", fd.discriminant)
    for j, r in enumerate(embed_float(f.gen)):
        t.add(f"root_{j + 1}", r)
    for i, e in enumerate(fd.units):
        t.add(f"unit_{i + 1}", " ".join(str(c) for c in e.coords))
    t.emit()
    return 0


def cmd_lattice(args) -> int:
    fd, g = _lattice(args)
    if args.dual:
        g = dual_lattice(g)
    t = Table(args, g.label, ["key", "value"])
    for i, row in enumerate(g.basis):
        t.add(f"row_{i + 1}", " ".join(repr(float(v)) for v in row))
    t.add("det", g.det)
    t.add("error_bound", g.error_bound)
    if not args.dual:
        floor = nm_floor(g, args.radius)
        t.add("nm_floor", floor.min_abs_norm)
        t.add("nm_floor_witness", " ".join(str(c) for c in floor.witness.coeffs))
        t.add("admissible_on_ball", floor.admissible)
    if args.save:
        save_lattice(g, args.save)
    t.emit()
    return 0


def cmd_count(args) -> int:
    _, g = _lattice(args)
    box = Box(tuple(_shift(args, g.dim)), tuple(_sides(args.box, g.dim)))
    rep = remainder(g, box, closed_upper=args.closed)
    if args.command == "count":
        t = Table(args, g.label, ["count"])
        t.add(rep.count)
    else:
        t = Table(args, g.label, ["count", "volume", "det", "remainder"])
        t.add(rep.count, rep.volume, rep.det, rep.remainder)
    t.emit()
    return 0


def cmd_supsearch(args) -> int:
    _, g = _lattice(args)
    res = sup_remainder(g, _sides(args.box, g.dim), _shift(args, g.dim), mode=args.mode, seed=args.seed,
                        n_samples=args.samples)
    cols = ["sup_abs_R"] + [f"theta{i + 1}" for i in range(g.dim)] + ["approach", "signed_R", "cells"]
    t = Table(args, g.label, cols)
    t.add(res.sup_abs_remainder, *res.theta_star, res.approach, res.signed_remainder, res.cells_visited)
    t.emit()
    return 0


def _n_list(args) -> list[int]:
    if args.nmin < 1 or args.nmax < args.nmin:
        raise ValidationError("need 1 <= nmin <= nmax")
    if args.nsteps is None:
        out, n = [], args.nmin
        while n <= args.nmax:
            out.append(n)
            n *= 2
        return out
    if args.nsteps < 1:
        raise ValidationError("--nsteps must be >= 1")
    if args.nsteps == 1:
        return [args.nmin]
    ratio = (args.nmax / args.nmin) ** (1.0 / (args.nsteps - 1))
    return sorted({int(round(args.nmin * ratio ** k)) for k in range(args.nsteps)})


def cmd_growth(args) -> int:
    _, g = _lattice(args)
    rows = growth_experiment(g, _shift(args, g.dim), _n_list(args), aspect=args.aspect, mode=args.mode,
                             seed=args.seed, n_samples=args.samples)
    cols = ["N", "ln_N", "sup_abs_R"] + [f"theta{i + 1}" for i in range(g.dim)] + ["mode"]
    t = Table(args, g.label, cols)
    for r in rows:
        t.add(r.N, r.ln_N, r.sup_abs_R, *r.theta, r.mode)
    path = t.emit()
    fig = _plot_path(args, path)
    if fig is not None and rows:
        from .plotting import plot_xy

        plot_xy(fig, [r.ln_N for r in rows], {"sup |R|": [r.sup_abs_R for r in rows]},
                "ln N", "sup over theta of |R|", title=g.label, fit="sup |R|")
    return 0


def cmd_poisson(args) -> int:
    _, g = _lattice(args)
    s = g.dim
    sides = _sides(args.N, s, "--N")
    theta = np.ones(s) if args.theta is None else _sides(args.theta, s, "--theta")
    lengths = theta * sides
    vol_n = float(np.prod(sides))
    tau = vol_n ** -2 if args.tau == "auto" else float(args.tau)
    kernel = SmoothingKernel(args.nodes)
    cutoff = auto_cutoff(kernel, lengths, tau, args.budget) if args.cutoff == "auto" else float(args.cutoff)
    if args.shift is not None:
        shifts = _shift(args, s)[None, :]
    else:
        shifts = np.random.default_rng(args.seed).random((args.shifts, s)) * lengths
    res = poisson_remainder(g, lengths, shifts, PoissonParams(tau, cutoff, args.nodes), kernel=kernel,
                            max_points=args.max_dual_points, threads=_threads(args))
    band = 2.0 ** s
    cols = [f"x{i + 1}" for i in range(s)] + ["R_direct", "R_poisson", "band", "budget"]
    t = Table(args, g.label, cols)
    direct = []
    for x, r in zip(shifts, np.atleast_1d(res.r_dotdot)):
        rd = remainder(g, Box(tuple(x), tuple(lengths))).remainder
        direct.append(rd)
        t.add(*x, rd, float(r), band, res.truncation_budget)
    path = t.emit()
    fig = _plot_path(args, path)
    if fig is not None:
        from .plotting import plot_scatter

        plot_scatter(fig, direct, np.atleast_1d(res.r_dotdot), "R (direct count)", "R smoothed (dual sum)",
                     title=f"{g.label}, N = {vol_n:g}", diagonal=True)
    return 0


def cmd_units(args) -> int:
    fd = load_field_file(args.field)
    u = unit_system(fd.units)
    if args.action == "verify":
        t = Table(args, fd.label, ["unit", "coords", "norm"] + [f"log{j + 1}" for j in range(u.degree)])
        for i, e in enumerate(u.units):
            t.add(i + 1, " ".join(str(c) for c in e.coords), norm(e), *u.log_matrix[i])
        t.add("regulator", "", "", u.regulator, *([""] * (u.degree - 1)))
    elif args.action == "count":
        t = Table(args, fd.label, ["t", "mode", "count"])
        for mode in (["max_le", "min_ge"] if args.mode == "both" else [args.mode]):
            t.add(args.t, mode, count_unit_powers(u, args.t, mode))
    else:
        nb = normalize_box(_sides(args.box, u.degree), u, args.radius)
        cols = [f"k{i + 1}" for i in range(u.rank)] + [f"N{i + 1}" for i in range(u.degree)] + ["c3_achieved"]
        t = Table(args, fd.label, cols)
        t.add(*nb.k, *nb.nvec_prime, nb.c3_achieved)
    t.emit()
    return 0


def cmd_reduce(args) -> int:
    fd = load_field_file(args.field)
    u = unit_system(fd.units)
    s = u.degree
    cols = [f"k{i + 1}" for i in range(u.rank)] + ["sign_flip"] + [f"y{j + 1}" for j in range(s)]
    if args.coeffs is not None:
        g = build_lattice(module_from_field_data(fd))
        if len(args.coeffs) != s:
            raise ValidationError(f"--coeffs needs {s} values")
        k, flip, b = reduce_element(g.element(args.coeffs), u)
        t = Table(args, fd.label, cols + ["reduced_coords"])
        t.add(*k, flip, *embed_float(b), " ".join(str(c) for c in b.coords))
    else:
        if args.point is None or len(args.point) != s:
            raise ValidationError(f"give --point with {s} values or --coeffs")
        red = reduce_to_F(args.point, u)
        t = Table(args, fd.label, cols)
        t.add(*red.k, red.sign_flip, *red.y_reduced)
    t.emit()
    return 0


def cmd_fdomain(args) -> int:
    fd = load_field_file(args.field)
    u = unit_system(fd.units)
    g = build_lattice(module_from_field_data(fd))
    M = Fraction(args.max_norm)
    radius = required_coeff_radius(g, u, M) if args.radius is None else args.radius
    pts = enumerate_F_norm_bounded(g, u, M, radius)
    s = g.dim
    cols = ["k", "abs_norm"] + [f"c{i + 1}" for i in range(s)] + [f"y{j + 1}" for j in range(s)]
    t = Table(args, fd.label, cols)
    for k, p in enumerate(pts, start=1):
        t.add(k, p.abs_norm, *p.point.coeffs, *p.point.coords)
    path = t.emit()
    fig = _plot_path(args, path)
    if fig is not None and pts:
        from .plotting import plot_xy

        ks = np.arange(1, len(pts) + 1)
        plot_xy(fig, ks, {"|Nm| / k": [float(p.abs_norm) / k for k, p in zip(ks, pts)]},
                "k", "|Nm| / k", title=f"{fd.label}, |Nm| <= {M}")
    return 0


def _pointset(args):
    if getattr(args, "points", None):
        return "file", load_pointset(args.points)
    _, g = _lattice(args)
    return g.label, generate_pointset(g, _shift(args, g.dim), args.n)


def cmd_lds(args) -> int:
    if args.action == "gen":
        label, ps = _pointset(args)
        if not args.out:
            raise ValidationError("lds gen needs --out")
        save_pointset(ps, args.out)
        print(f"{ps.n} points written to {args.out}", file=sys.stderr)
        return 0
    if args.action == "dstar":
        label, ps = _pointset(args)
        rep = star_discrepancy(ps, args.prefix, args.mode, n_samples=args.samples, seed=args.seed)
        cols = ["n", "prefix", "d_star", "n_dstar"] + [f"y{j + 1}" for j in range(ps.dim)]
        t = Table(args, label, cols)
        t.add(ps.n, args.prefix or ps.n, rep.d_star, rep.n_dstar, *rep.witness_box)
        t.emit()
        return 0
    if args.action == "prefix":
        label, ps = _pointset(args)
        rows = prefix_sup_experiment(ps, args.mode, projected=not args.full)
        t = Table(args, label, ["m", "d_star_m", "m_times_d_star_m", "running_sup"])
        for r in rows:
            t.add(*r)
        path = t.emit()
        fig = _plot_path(args, path)
        if fig is not None:
            from .plotting import plot_xy

            plot_xy(fig, [math.log(r.m) for r in rows], {"m D*_m": [r.m_times_d_star_m for r in rows],
                                                         "running sup": [r.running_sup for r in rows]},
                    "ln m", "m D*_m", title=label)
        return 0
    # sweep over n
    _, g = _lattice(args)
    x = _shift(args, g.dim)
    t = Table(args, g.label, ["n", "points", "d_star", "n_dstar", "n_dstar_over_1_plus_ln_n", "prefix_sup"])
    lns, norm_col, sup_col = [], [], []
    for n in _n_list(args):
        ps = generate_pointset(g, x, n)
        rep = star_discrepancy(ps, None, args.mode, n_samples=args.samples, seed=args.seed)
        sup = prefix_sup_experiment(ps, args.mode)[-1].running_sup
        t.add(n, ps.n, rep.d_star, rep.n_dstar, rep.n_dstar / (1 + math.log(n)), sup)
        lns.append(math.log(n))
        norm_col.append(rep.n_dstar / (1 + math.log(n)))
        sup_col.append(sup)
    path = t.emit()
    fig = _plot_path(args, path)
    if fig is not None and lns:
        from .plotting import plot_xy

        plot_xy(fig, lns, {"n D* / (1 + ln n)": norm_col, "sup_m m D*_m": sup_col}, "ln n", "value",
                title=g.label, fit="sup_m m D*_m")
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p, field_default="sqrt2"):
    p.add_argument("--field", default=field_default,
                   help="bundled name (sqrt2, sqrt5, cubic), Z2/Z3, or a field file path")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--plot", action="store_true", help="also render a PNG next to --out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker threads (env LAT_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lat", description="Lattice point counts in boxes for totally real fields.")
    ap.add_argument("--version", action="version", version=f"lat {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("field", help="field data summary")
    _common(p)
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("lattice", help="embedding lattice, determinant, norm floor")
    _common(p)
    p.add_argument("--dual", action="store_true")
    p.add_argument("--radius", type=int, default=5, help="coefficient radius for the norm floor")
    p.add_argument("--save", help="save basis midpoints as JSON")
    p.set_defaults(func=cmd_lattice)

    for name in ("count", "remainder"):
        p = sub.add_parser(name, help=f"lattice point {name} in a box")
        _common(p)
        p.add_argument("--box", type=_floats, required=True, help="side lengths N1,...,Ns")
        p.add_argument("--shift", type=_floats, help="box origin x1,...,xs")
        p.add_argument("--closed", action="store_true", help="include the upper faces")
        p.set_defaults(func=cmd_count)

    p = sub.add_parser("supsearch", help="sup over theta of |R| for the boxes theta*N + x")
    _common(p)
    p.add_argument("--box", type=_floats, required=True)
    p.add_argument("--shift", type=_floats)
    p.add_argument("--mode", choices=["exact_sweep", "sampled"], default="exact_sweep")
    p.add_argument("--samples", type=int, default=4096)
    p.set_defaults(func=cmd_supsearch)

    p = sub.add_parser("growth", help="sup |R| against box volume N")
    _common(p)
    p.add_argument("--shift", type=_floats)
    p.add_argument("--aspect", type=_floats, help="side ratios, normalized to product 1")
    p.add_argument("--nmin", type=int, default=16)
    p.add_argument("--nmax", type=int, default=16384)
    p.add_argument("--nsteps", type=int, help="geometric steps; default doubles from nmin")
    p.add_argument("--mode", choices=["exact_sweep", "sampled"], default="exact_sweep")
    p.add_argument("--samples", type=int, default=4096)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("poisson", help="direct remainder against the truncated dual-lattice sum")
    _common(p)
    p.add_argument("--N", type=_floats, required=True, help="side lengths N1,...,Ns")
    p.add_argument("--theta", type=_floats, help="scaling in [0,1]^s, default all ones")
    p.add_argument("--shift", type=_floats, help="one shift; otherwise --shifts random ones")
    p.add_argument("--shifts", type=int, default=10)
    p.add_argument("--tau", default="auto", help="'auto' for (N1...Ns)^-2 or a value")
    p.add_argument("--cutoff", default="auto", help="'auto' or a sup-norm radius")
    p.add_argument("--budget", type=float, default=0.45, help="tail budget target for auto cutoff")
    p.add_argument("--nodes", type=int, default=2048, help="kernel quadrature nodes")
    p.add_argument("--max-dual-points", type=float, default=1e7)
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("units", help="unit system checks")
    p.add_argument("action", choices=["verify", "count", "normalize"])
    _common(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--mode", choices=["max_le", "min_ge", "both"], default="both")
    p.add_argument("--box", type=_floats, help="side lengths for normalize")
    p.add_argument("--radius", type=int, default=20)
    p.set_defaults(func=cmd_units)

    p = sub.add_parser("reduce", help="reduce a point into the fundamental domain")
    _common(p)
    p.add_argument("--point", type=_floats, help="embedded coordinates")
    p.add_argument("--coeffs", type=_ints, help="lattice coefficients (exact reduction)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("fdomain-enum", help="fundamental-domain points ordered by |Nm|")
    _common(p)
    p.add_argument("--max-norm", required=True)
    p.add_argument("--radius", type=int, help="coefficient radius; default is sufficient")
    p.set_defaults(func=cmd_fdomain)

    p = sub.add_parser("lds", help="low-discrepancy point sets")
    p.add_argument("action", choices=["gen", "dstar", "prefix", "sweep"])
    _common(p)
    p.add_argument("--shift", type=_floats)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--points", help="point-set file instead of generating")
    p.add_argument("--prefix", type=int)
    p.add_argument("--mode", choices=["exact", "lower_bound"], default="exact")
    p.add_argument("--samples", type=int, default=1 << 14)
    p.add_argument("--full", action="store_true", help="prefix table on all s coordinates")
    p.add_argument("--nmin", type=int, default=16)
    p.add_argument("--nmax", type=int, default=16384)
    p.add_argument("--nsteps", type=int)
    p.set_defaults(func=cmd_lds)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LatError as e:
        print(f"lat: error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, ZeroDivisionError) as e:
        print(f"lat: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
