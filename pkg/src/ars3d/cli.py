"""Batch command-line front end.

Every computation is exposed as a subcommand writing machine-readable CSV or
JSON plus a JSON run manifest; ``--plot`` renders a PNG figure next to the
delimited output. Exit codes: 0 success, 1 computation failure, 2 argument
or precondition error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import abnormal as ab
from . import frames as fr
from . import geodesics as ge
from . import heat as he
from . import nilpotent as ni
from .serialize import fmt, write_csv, write_json, write_manifest


def _parse_point(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"expected 'x,y,z', got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_floats(text: str):
    return [float(p) for p in text.split(",")]


def _load_frame(args) -> fr.FrameSpec:
    if getattr(args, "frame", None):
        return fr.parse_frame_spec(args.frame)
    if getattr(args, "frame_file", None):
        return fr.parse_frame_spec(Path(args.frame_file).read_text())
    if getattr(args, "sigma", None) is not None:
        return fr.nilpotent_frame(args.sigma)
    raise ValueError("a frame is required: --frame, --frame-file or --sigma")


class _Emitter:
    """Collects one table or document, then writes CSV/JSON and the manifest."""

    def __init__(self, args, command: str):
        self.out = getattr(args, "out", None)
        self.format = getattr(args, "format", "csv")
        self.command = command
        self.params = {k: v for k, v in vars(args).items()
                       if k not in ("func", "out") and v is not None}
        self.t0 = time.monotonic()

    def emit_table(self, header, rows, json_meta=None):
        rows = list(rows)
        if self.out and self.format == "json":
            doc = {"columns": list(header),
                   "rows": [[float(v) if not isinstance(v, str) else v
                             for v in row] for row in rows]}
            doc.update(json_meta or {})
            write_json(self.out, doc)
        elif self.out:
            write_csv(self.out, header, rows)
        else:
            sys.stdout.write(",".join(header) + "\n")
            for row in rows:
                sys.stdout.write(",".join(fmt(v) for v in row) + "\n")
        self._manifest()

    def emit_doc(self, doc: dict):
        if self.out:
            write_json(self.out, doc)
        else:
            json.dump(doc, sys.stdout, indent=2, sort_keys=True,
                      default=_json_default)
            sys.stdout.write("\n")
        self._manifest()

    def _manifest(self):
        if self.out:
            write_manifest(self.out, self.command, _jsonable(self.params),
                           time.monotonic() - self.t0)

    def figure_path(self) -> Path:
        if not self.out:
            raise ValueError("--plot requires --out")
        return Path(self.out).with_suffix(".png")


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=_json_default))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_classify(args):
    f = _load_frame(args)
    pc = fr.classify_point(f, _parse_point(args.point), args.tol)
    em = _Emitter(args, "classify")
    em.emit_doc({
        "kind": pc.kind.value,
        "det_value": pc.det_value,
        "bracket_span_rank": pc.bracket_span_rank,
        "tangency_residual": None if math.isnan(pc.tangency_residual)
        else pc.tangency_residual,
    })
    return 0


def _cmd_validate(args):
    f = _load_frame(args)
    report = fr.validate_normal_form(f, args.kind)
    em = _Emitter(args, "validate")
    em.emit_table(
        ("check", "value", "tol", "passed"),
        [(c.name, c.value, c.tol, str(c.passed).lower())
         for c in report.checks],
        json_meta={"kind": report.kind, "passed": report.passed})
    return 0


def _cmd_geodesic(args):
    em = _Emitter(args, "geodesic")
    if args.frame or args.frame_file:
        f = _load_frame(args)
        q0 = _parse_point(args.q0)
        if args.p0:
            p0 = _parse_point(args.p0)
        elif args.theta is not None:
            p0 = ge.CovectorInit(args.theta, args.a or 0.0).covector()
        else:
            raise ValueError("initial covector required: --p0 or --theta/--a")
        path = ge.integrate_geodesic(f, ge.PhaseState(q0, p0), args.T, args.h)
        em.emit_table(ge.CSV_HEADER, path.csv_rows(),
                      json_meta={"hamiltonian_drift": path.hamiltonian_drift,
                                 "h": path.h})
        if args.plot:
            from .figures import save_trajectory
            save_trajectory(path.positions, em.figure_path(), "geodesic")
    else:
        if args.sigma is None:
            raise ValueError("closed-form mode requires --sigma")
        p = ni.NilpotentParams(args.sigma)
        c = ge.CovectorInit(args.theta or 0.0, args.a or 0.0)
        ts = np.linspace(0.0, args.T, args.nt)
        pts = np.array([ni.geodesic_closed_form(p, c, float(t)) for t in ts])
        em.emit_table(("a", "theta", "t", "x", "y", "z"),
                      [(c.a, c.theta, t, q[0], q[1], q[2])
                       for t, q in zip(ts, pts)])
        if args.plot:
            from .figures import save_trajectory
            save_trajectory(pts, em.figure_path(), "closed-form geodesic")
    return 0


def _cmd_exp_map(args):
    f = _load_frame(args)
    q0 = _parse_point(args.q0)
    pt = ge.exponential_map(f, q0, ge.CovectorInit(args.theta, args.a),
                            args.t, args.h)
    em = _Emitter(args, "exp-map")
    em.emit_doc({"point": list(pt), "theta": args.theta, "a": args.a,
                 "t": args.t})
    return 0


def _cmd_distance(args):
    f = _load_frame(args)
    opts = ge.ShootOptions(residual_tol=args.tol)
    res = ge.shoot_distance(f, _parse_point(args.q0), _parse_point(args.q1),
                            opts)
    em = _Emitter(args, "distance")
    em.emit_doc({"distance": res.distance, "theta": res.covector.theta,
                 "a": res.covector.a, "residual": res.residual,
                 "p0": list(res.p0)})
    return 0


def _cmd_conjugate(args):
    p = ni.NilpotentParams(args.sigma)
    em = _Emitter(args, "conjugate")
    if args.a is not None and args.na is None:
        tc = ni.conjugate_time(p, ge.CovectorInit(args.theta or 0.0, args.a))
        if tc is ni.WHOLE_RAY:
            value = "whole_ray"
        else:
            value = tc
        em.emit_doc({"sigma": args.sigma, "a": args.a,
                     "theta": args.theta or 0.0, "conjugate_time": value})
        return 0
    lo, hi = _parse_floats(args.a_range)
    rows = []
    pts = []
    for a in np.linspace(lo, hi, args.na):
        for th in np.linspace(0.0, 2.0 * math.pi, args.ntheta, endpoint=False):
            c = ge.CovectorInit(float(th), float(a))
            tc = ni.conjugate_time(p, c)
            if tc is None or tc is ni.WHOLE_RAY:
                continue
            q = ni.geodesic_closed_form(p, c, tc)
            rows.append((a, th, tc, q[0], q[1], q[2]))
            pts.append(q)
    em.emit_table(("a", "theta", "t", "x", "y", "z"), rows,
                  json_meta={"sigma": args.sigma})
    if args.plot and pts:
        from .figures import save_point_cloud
        save_point_cloud(np.array(pts), em.figure_path(), "first conjugate locus")
    return 0


def _cmd_cut(args):
    p = ni.NilpotentParams(args.sigma)
    em = _Emitter(args, "cut")
    if args.point:
        member = ni.cut_membership(p, _parse_point(args.point), args.tol)
        em.emit_doc({"sigma": args.sigma, "point": list(_parse_point(args.point)),
                     "member": member})
        return 0
    if args.a is not None:
        tc = ni.cut_time(p, ge.CovectorInit(args.theta or 0.0, args.a))
        em.emit_doc({"sigma": args.sigma, "a": args.a,
                     "theta": args.theta or 0.0,
                     "cut_time": "inf" if math.isinf(tc) else tc})
        return 0
    if args.curve_samples:
        lo, hi = _parse_floats(args.a_range)
        desc = ni.cut_locus_description(p)
        rows = []
        pts = []
        for sign, th in ((+1, desc.theta_plus), (-1, desc.theta_minus)):
            for a in np.linspace(lo, hi, args.curve_samples):
                q = ni.cut_locus_curve(p, sign, float(a))
                rows.append((sign * a, th, 2.0 * desc.tau / a,
                             q[0], q[1], q[2]))
                pts.append(q)
        em.emit_table(("a", "theta", "t", "x", "y", "z"), rows,
                      json_meta={"sigma": args.sigma, "tau": desc.tau,
                                 "theta_plus": desc.theta_plus})
        if args.plot:
            from .figures import save_trajectory
            save_trajectory(np.array(pts), em.figure_path(), "cut-locus curves")
        return 0
    desc = ni.cut_locus_description(p)
    em.emit_doc({"sigma": args.sigma, "tau": desc.tau,
                 "theta_plus": desc.theta_plus,
                 "theta_minus": desc.theta_minus})
    return 0


def _cmd_sphere(args):
    p = ni.NilpotentParams(args.sigma)
    sample = ni.sphere_sample(p, args.r, args.na, args.ntheta)
    em = _Emitter(args, "sphere")
    em.emit_table(("a", "theta", "t", "x", "y", "z"), sample.rows(),
                  json_meta={"sigma": sample.sigma, "r": sample.r,
                             "tau": sample.tau_value,
                             "theta_plus": sample.theta_plus})
    if args.plot:
        from .figures import save_point_cloud
        save_point_cloud(sample.points, em.figure_path(),
                         f"sphere r={args.r}", color_by=sample.a)
    return 0


def _cmd_abnormal(args):
    f = _load_frame(args)
    em = _Emitter(args, "abnormal")
    if args.linearize:
        lin = ab.type2_linearization(f, args.tol)
        em.emit_doc({
            "matrix": lin.matrix.tolist(),
            "eigenvalues": [[v.real, v.imag] for v in lin.eigenvalues],
            "stability": lin.stability,
            "a": lin.a, "b": lin.b, "beta1": lin.beta1,
            "degenerate_linear_term": lin.degenerate_linear_term,
        })
        return 0
    if args.point:
        q = _parse_point(args.point)
        u = ab.abnormal_controls(f, q, args.tol)
        X = ab.abnormal_field(f, q, args.tol)
        em.emit_doc({"point": list(q), "controls": [u.u1, u.u2, u.u3],
                     "field": list(X),
                     "field_norm": float(np.linalg.norm(X))})
        return 0
    if args.q0:
        tr = ab.trace_abnormal(f, _parse_point(args.q0), args.T, args.h,
                               normalized=args.normalized, tol=args.tol)
        em.emit_table(ab.TRACE_CSV_HEADER, tr.csv_rows(),
                      json_meta={"annihilation_max": tr.annihilation_max,
                                 "det_max": tr.det_max})
        if args.plot:
            from .figures import save_trajectory
            save_trajectory(tr.points, em.figure_path(), "abnormal extremal")
        return 0
    raise ValueError("abnormal requires one of --point, --q0 or --linearize")


def _quad_from_args(args) -> he.QuadratureConfig:
    return he.QuadratureConfig(
        nu_cutoff=args.nu_cutoff, abs_tol=args.abs_tol,
        rel_tol=args.rel_tol, max_subdivisions=args.max_subdivisions)


def _cmd_heat_kernel(args):
    quad = _quad_from_args(args)
    src = _parse_point(args.source)
    tgt = _parse_point(args.target)
    rows = []
    for t in _parse_floats(args.t):
        hq = he.HeatQuery(args.sigma, t, src, tgt, quad)
        K, err = he.kernel_with_error(hq)
        rows.append((args.sigma, t, *src, *tgt, K, err))
    em = _Emitter(args, "heat kernel")
    em.emit_table(("sigma", "t", "x", "y", "z", "xb", "yb", "zb",
                   "K", "err_est"), rows)
    return 0


def _cmd_heat_pde_check(args):
    res = he.pde_residual(args.sigma, args.t, _parse_point(args.q),
                          _parse_point(args.qbar), args.h_space, args.h_time)
    em = _Emitter(args, "heat pde-check")
    em.emit_doc({"sigma": args.sigma, "t": args.t, "residual": res,
                 "h_space": args.h_space, "h_time": args.h_time})
    return 0


def _cmd_heat_leandre(args):
    src = _parse_point(args.source)
    tgt = _parse_point(args.target)
    if args.dref is not None:
        dref = args.dref
    else:
        f = fr.nilpotent_frame(args.sigma)
        dref = ge.shoot_distance(f, src, tgt).distance
    rep = he.leandre_report(args.sigma, src, tgt,
                            _parse_floats(args.times), dref)
    em = _Emitter(args, "heat leandre")
    em.emit_doc(rep)
    return 0


def _cmd_heat_barrier(args):
    grid = he.BarrierGrid(L=args.L, n=args.n, dt=args.dt, T=args.T)
    res = he.barrier_simulation(args.sigma, args.mu, args.nu, grid,
                                init=args.init,
                                barrier_term=not args.no_barrier_term,
                                output_every=args.output_every)
    em = _Emitter(args, "heat barrier")
    em.emit_table(("t", "mass_left", "mass_right"),
                  zip(res.times, res.mass_left, res.mass_right),
                  json_meta={"cross_fraction":
                             float(res.mass_left[-1] / res.total[-1])
                             if args.init == "right" else
                             float(res.mass_right[-1] / res.total[-1])})
    if args.plot:
        from .figures import save_mass_series
        save_mass_series(res.times, res.mass_left, res.mass_right,
                         em.figure_path(), "barrier masses")
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def _add_frame_opts(sp, with_sigma=True):
    sp.add_argument("--frame", help="inline frame description")
    sp.add_argument("--frame-file", help="path to a frame description file")
    if with_sigma:
        sp.add_argument("--sigma", type=float,
                        help="use the nilpotent type-1 frame with this sigma")


def _add_out_opts(sp, plot=False):
    sp.add_argument("--out", help="output file (stdout when omitted)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    if plot:
        sp.add_argument("--plot", action="store_true",
                        help="render a PNG figure next to --out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ars3d",
        description="Numerics for 3D almost-Riemannian structures")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("classify", help="classify a point of a frame")
    _add_frame_opts(sp)
    sp.add_argument("--point", required=True)
    sp.add_argument("--tol", type=float, default=fr.DEFAULT_TOL,
                    help="classification tolerance on |det| (default 1e-9)")
    _add_out_opts(sp)
    sp.set_defaults(func=_cmd_classify)

    sp = sub.add_parser("validate", help="normal-form residual report")
    _add_frame_opts(sp)
    sp.add_argument("--kind", choices=fr.KINDS,
                    help="override the declared kind")
    _add_out_opts(sp)
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("geodesic",
                        help="integrate a geodesic or sample a closed form")
    _add_frame_opts(sp)
    sp.add_argument("--q0", default="0,0,0")
    sp.add_argument("--p0", help="initial covector px,py,pz (integrate mode)")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--a", type=float)
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--h", type=float, default=1e-3)
    sp.add_argument("--nt", type=int, default=201,
                    help="samples for the closed-form mode")
    _add_out_opts(sp, plot=True)
    sp.set_defaults(func=_cmd_geodesic)

    sp = sub.add_parser("exp-map", help="exponential map endpoint")
    _add_frame_opts(sp)
    sp.add_argument("--q0", default="0,0,0")
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--h", type=float, default=1e-3)
    _add_out_opts(sp)
    sp.set_defaults(func=_cmd_exp_map)

    sp = sub.add_parser("distance", help="two-point distance by shooting")
    _add_frame_opts(sp)
    sp.add_argument("--q0", default="0,0,0")
    sp.add_argument("--q1", required=True)
    sp.add_argument("--tol", type=float, default=1e-8)
    _add_out_opts(sp)
    sp.set_defaults(func=_cmd_distance)

    sp = sub.add_parser("conjugate",
                        help="first conjugate time or locus sampling")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--a", type=float)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--a-range", default="0.25,3.0")
    sp.add_argument("--na", type=int)
    sp.add_argument("--ntheta", type=int, default=16)
    _add_out_opts(sp, plot=True)
    sp.set_defaults(func=_cmd_conjugate)

    sp = sub.add_parser("cut", help="cut time, angles, curves, membership")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--point", help="test membership of this point")
    sp.add_argument("--a", type=float, help="cut time of the geodesic (a, theta)")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--curve-samples", type=int,
                    help="sample both boundary curves at this many a-values")
    sp.add_argument("--a-range", default="0.25,3.0")
    sp.add_argument("--tol", type=float, default=1e-8)
    _add_out_opts(sp, plot=True)
    sp.set_defaults(func=_cmd_cut)

    sp = sub.add_parser("sphere", help="sample a metric sphere")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--na", type=int, default=64)
    sp.add_argument("--ntheta", type=int, default=64)
    _add_out_opts(sp, plot=True)
    sp.set_defaults(func=_cmd_sphere)

    sp = sub.add_parser("abnormal",
                        help="abnormal field, traces, type-2 linearisation")
    _add_frame_opts(sp)
    sp.add_argument("--point", help="evaluate controls and field here")
    sp.add_argument("--q0", help="trace from this point")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=1e-3)
    sp.add_argument("--normalized", action="store_true",
                    help="integrate the unit field")
    sp.add_argument("--linearize", action="store_true")
    sp.add_argument("--tol", type=float, default=fr.DEFAULT_TOL)
    _add_out_opts(sp, plot=True)
    sp.set_defaults(func=_cmd_abnormal)

    hp = sub.add_parser("heat", help="heat-kernel computations")
    hsub = hp.add_subparsers(dest="heat_command", required=True)

    sp = hsub.add_parser("kernel", help="evaluate the heat kernel")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--t", required=True, help="time or comma list of times")
    sp.add_argument("--source", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--nu-cutoff", type=float, default=1e6)
    sp.add_argument("--abs-tol", type=float, default=1e-12)
    sp.add_argument("--rel-tol", type=float, default=1e-10)
    sp.add_argument("--max-subdivisions", type=int, default=2 ** 14)
    _add_out_opts(sp)
    sp.set_defaults(func=_cmd_heat_kernel)

    sp = hsub.add_parser("pde-check", help="normalised (d/dt - L)K residual")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--qbar", required=True)
    sp.add_argument("--h-space", type=float, default=1e-3)
    sp.add_argument("--h-time", type=float, default=1e-3)
    _add_out_opts(sp)
    sp.set_defaults(func=_cmd_heat_pde_check)

    sp = hsub.add_parser("leandre", help="small-time -4t log K table")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--source", default="0,0,0")
    sp.add_argument("--target", required=True)
    sp.add_argument("--times", default="0.02,0.01,0.005")
    sp.add_argument("--dref", type=float,
                    help="reference distance (computed by shooting if omitted)")
    _add_out_opts(sp)
    sp.set_defaults(func=_cmd_heat_leandre)

    sp = hsub.add_parser("barrier", help="Crank-Nicolson barrier demonstration")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--mu", type=float, default=0.0)
    sp.add_argument("--nu", type=float, default=1.0)
    sp.add_argument("--L", type=float, default=6.0)
    sp.add_argument("--n", type=int, default=800)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--init", choices=("right", "left"), default="right")
    sp.add_argument("--no-barrier-term", action="store_true",
                    help="ablate the 3/(4x^2) term")
    sp.add_argument("--output-every", type=int, default=10)
    _add_out_opts(sp, plot=True)
    sp.set_defaults(func=_cmd_heat_barrier)

    return ap


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
