"""Command-line interface: solve, inpaint, verify, converge, stability,
nonunique, bench.

Every subcommand writes a machine-readable report (JSON and/or CSV with
17-significant-digit floats); `verify` and the experiment commands exit
nonzero when an embedded assertion fails.
"""

import argparse
import sys
import time

import numpy as np

from . import verify as V
from . import netpbm
from ._kernels import available_backends, trace_endpoints
from .characteristics import integrate_backward
from .errors import CharflowError
from .geometry import domain_by_name
from .gridio import save_grid
from .inpaint import field_beta_est, inpaint_image, normal_raster, raster_flow
from .linear_solver import make_linear_problem, solve_on_grid
from .bv_analysis import discrete_tv
from .quasilinear import nonuniqueness_demo
from .reports import save_csv, save_json
from .timefield import (check_causality, disk_segment_timefield, estimate_m0,
                        field_from_distance_grid, inward_radial_field, normal_field,
                        radial_timefield, rect_skeleton_timefield, rotated_field,
                        sample_grid)


def _positive(x, name):
    if x <= 0:
        raise SystemExit(f"{name} must be positive, got {x}")
    return x


def _build_problem(args):
    domain = domain_by_name(args.domain)
    if args.domain == "disk":
        tf = radial_timefield(q=args.q)
    elif args.domain == "disk-segment":
        tf = disk_segment_timefield(q=args.q)
    else:
        tf = rect_skeleton_timefield(q=args.q)
    if args.field == "radial":
        if args.domain != "disk":
            raise SystemExit("the radial field is a disk built-in")
        c = inward_radial_field()
    elif args.field == "spiral":
        if args.domain != "disk":
            raise SystemExit("the spiral field is a disk built-in")
        c = rotated_field(inward_radial_field(), args.theta)
    else:
        c = normal_field(tf)
    span = domain.boundary.span
    a0 = domain.boundary.period[0]
    if args.u0 == "cos":
        u0 = lambda s: np.cos(2.0 * np.pi * (np.asarray(s, dtype=float) - a0) / span)
    elif args.u0 == "step":
        u0 = lambda s: ((np.asarray(s, dtype=float) - a0) / span >= 0.5).astype(float)
    elif args.u0.startswith("const:"):
        val = float(args.u0.split(":", 1)[1])
        u0 = lambda s: np.full_like(np.asarray(s, dtype=float), val)
    else:
        raise SystemExit(f"unknown --u0 {args.u0!r} (cos, step, const:<v>)")
    f = V.f_one if args.f == "one" else None
    return make_linear_problem(domain, tf, c, u0, f=f)


def cmd_solve(args):
    _positive(args.step, "--step")
    if args.grid < 8:
        raise SystemExit("--grid must be at least 8")
    p = _build_problem(args)
    if args.beta is not None:
        pts = sample_grid(p.domain, p.tf, 64)
        beta_est = check_causality(p.tf, p.c, pts)
        if beta_est < args.beta - 1e-9:
            print(f"FAIL causality: sampled beta {beta_est:.6g} < declared {args.beta}")
            return 1
    t0 = time.time()
    g = solve_on_grid(p, resolution=args.grid, step=args.step, threads=args.threads)
    elapsed = time.time() - t0
    header = save_grid(g, args.out)
    pts = sample_grid(p.domain, p.tf, 64)
    report = {
        "subcommand": "solve",
        "domain": args.domain, "field": args.field, "u0": args.u0, "f": args.f,
        "q": args.q, "declared_beta": p.beta, "m0": p.tf.m0,
        "beta_est": check_causality(p.tf, p.c, pts),
        "m0_est": estimate_m0(p.tf, pts),
        "grid": args.grid, "step": args.step,
        "linf": g.linf(), "tv": discrete_tv(g),
        "output": header,
    }
    save_json(args.out + ".json", report)
    if args.trace_from:
        x = np.array([float(v) for v in args.trace_from.split(",")], dtype=float)
        tr = integrate_backward(x, p.sf, p.tf, step=args.step,
                                max_steps=args.max_steps, bbox=p.domain.bbox)
        save_csv(args.out + ".trace.csv", ["tau", "x", "y", "T0"], tr.csv_rows())
    print(f"solved {args.domain}/{args.field} at grid {args.grid} in {elapsed:.2f}s -> {args.out}.*")
    return 0


def cmd_inpaint(args):
    img, maxval = netpbm.read_image(args.image)
    mask_arr, _ = netpbm.read_image(args.mask)
    if mask_arr.ndim != 2:
        raise SystemExit("mask must be a single-channel PGM")
    unit = netpbm.to_unit(img, maxval)
    t0 = time.time()
    out, report = inpaint_image(unit, mask_arr > 0, blend=args.blend,
                                smoothing=args.smoothing, q=args.q, beta=args.beta,
                                step=args.step, tol=args.tol, max_iter=args.max_iter,
                                threads=args.threads, backend=args.backend)
    elapsed = time.time() - t0
    netpbm.write_image(args.out, netpbm.from_unit(out, maxval), maxval=maxval)
    tf = field_from_distance_grid(mask_arr > 0, spacing=1.0, q=args.q)
    report.update({"subcommand": "inpaint",
                   "beta_est": field_beta_est(tf, normal_raster(tf)),
                   "image": args.image, "mask": args.mask, "output": args.out})
    save_json(args.out + ".json", report)
    print(f"inpainted {args.image} -> {args.out} in {elapsed:.2f}s")
    return 0


def cmd_verify(args):
    results, ok, extras = V.run_verify(grid=args.grid, step=args.step, threads=args.threads,
                                       lie_beta=args.inject_beta_lie)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}")
    save_json(args.out, {"subcommand": "verify", "grid": args.grid, "step": args.step,
                         "checks": {r.name: r.as_dict() for r in results},
                         "bv_estimates": extras["bv_estimates"],
                         "all_passed": ok})
    print(f"verify: {'all checks passed' if ok else 'FAILURES present'} -> {args.out}")
    return 0 if ok else 1


def cmd_stability(args):
    rows, summary = V.stability_experiment(grid=args.grid, step=args.step,
                                           threads=args.threads)
    save_csv(args.out, ["n", "theta", "l1_err", "tv"],
             [[r["n"], r["theta"], r["l1_err"], r["tv"]] for r in rows])
    save_json(args.out + ".json", {"subcommand": "stability", **summary})
    ok = summary["decreasing"] and summary["final_within_3x_floor"] and summary["tv_within_cap"]
    print(f"stability: decreasing={summary['decreasing']} "
          f"final<=3*floor={summary['final_within_3x_floor']} "
          f"tv<=cap={summary['tv_within_cap']} -> {args.out}")
    return 0 if ok else 1


def cmd_converge(args):
    step_rows, tv_rows, summary = V.convergence_experiment(threads=args.threads)
    rows = [["rk4", r["step"], r["grid"], r["max_err"]] for r in step_rows]
    rows += [["tv", 1e-3, r["grid"], r["tv"]] for r in tv_rows]
    save_csv(args.out, ["kind", "step", "grid", "value"], rows)
    save_json(args.out + ".json", {"subcommand": "converge", **summary})
    ok = summary["order"] >= 3.5 and summary["cauchy_shrink_ok"]
    print(f"converge: order={summary['order']:.2f} cauchy_ok={summary['cauchy_shrink_ok']} -> {args.out}")
    return 0 if ok else 1


def cmd_nonunique(args):
    seeds = [float(v) for v in args.seeds.split(",")]
    rows, a_l1 = nonuniqueness_demo(seeds, resolution=args.grid, tol=args.tol,
                                    step=args.step, threads=args.threads)
    save_csv(args.out, ["seed", "alpha", "residual", "n_iters"],
             [[r.seed, r.alpha, r.residual, r.n_iters] for r in rows])
    iter_rows = []
    for r in rows:
        iter_rows += [[r.seed] + row for row in r.report.iteration_rows()]
    save_csv(args.out + ".iters.csv", ["seed", "iter", "l1_residual", "l1_norm", "tv"],
             iter_rows)
    limits = sorted({round(r.alpha, 9) for r in rows})
    ok = all(r.residual <= args.tol for r in rows) and len(limits) >= 2
    save_json(args.out + ".json", {"subcommand": "nonunique", "a_l1": a_l1,
                                   "limits": limits, "all_residuals_ok": ok})
    for r in rows:
        print(f"seed {r.seed:+.3g} -> alpha {r.alpha:+.9f} (residual {r.residual:.2e}, "
              f"{r.n_iters} iterations)")
    print(f"nonunique: |a|_L1 = {a_l1:.9f}, {len(limits)} distinct fixed points -> {args.out}")
    return 0 if ok else 1


def cmd_bench(args):
    """Compare the compiled and numpy trace kernels on one raster problem."""
    n = args.size
    jj, ii = np.meshgrid(np.arange(n), np.arange(n))
    mask = (ii - n / 2) ** 2 + (jj - n / 2) ** 2 < (0.4 * n) ** 2
    tf = field_from_distance_grid(mask, spacing=1.0)
    flow = raster_flow(tf, normal_raster(tf))
    ii, jj = np.nonzero(tf.inside)
    starts = np.ascontiguousarray(np.c_[jj.astype(float), ii.astype(float)])
    max_steps = int(np.ceil(4.0 / args.step))
    timings = {}
    ends = {}
    for backend in available_backends():
        best = np.inf
        for _ in range(args.repeat):
            t0 = time.time()
            e, st = trace_endpoints(flow, starts, step=args.step, max_steps=max_steps,
                                    backend=backend, threads=args.threads)
            best = min(best, time.time() - t0)
        timings[backend] = best
        ends[backend] = e
        print(f"{backend:9s} {best:8.3f}s for {len(starts)} pixel traces")
    report = {"subcommand": "bench", "size": n, "pixels": int(len(starts)),
              "step": args.step, "timings": timings}
    if len(ends) == 2:
        diff = float(np.abs(ends["compiled"] - ends["numpy"]).max())
        report["max_endpoint_diff"] = diff
        report["speedup"] = timings["numpy"] / timings["compiled"]
        print(f"max endpoint difference: {diff:.2e}; speedup {report['speedup']:.1f}x")
    save_json(args.out, report)
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(prog="charflow",
                                 description="transport solver with an interior stop set")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp, grid=128):
        sp.add_argument("--q", type=float, default=2.0, help="time transform exponent (> 1)")
        sp.add_argument("--step", type=float, default=1e-3, help="integration step in clock units")
        sp.add_argument("--grid", type=int, default=grid, help="solve resolution")
        sp.add_argument("--threads", type=int, default=None,
                        help="parallel width (default: CHARFLOW_THREADS or auto)")

    sp = sub.add_parser("solve", help="solve a built-in problem and dump the grid")
    common(sp)
    sp.add_argument("--domain", default="disk", choices=["disk", "disk-segment", "rect-skeleton"])
    sp.add_argument("--field", default="radial", choices=["radial", "spiral", "normal"])
    sp.add_argument("--theta", type=float, default=np.pi / 6, help="spiral rotation angle")
    sp.add_argument("--u0", default="cos", help="boundary data: cos | step | const:<v>")
    sp.add_argument("--f", default="zero", choices=["zero", "one"])
    sp.add_argument("--beta", type=float, default=None,
                    help="declared causality constant, verified before solving")
    sp.add_argument("--max-steps", type=int, default=None)
    sp.add_argument("--trace-from", default=None, metavar="X,Y",
                    help="also dump one backward trace from this point")
    sp.add_argument("--out", default="solution")
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("inpaint", help="fill the masked region of a PGM/PPM image")
    sp.add_argument("--image", required=True)
    sp.add_argument("--mask", required=True, help="PGM, nonzero = region to fill")
    sp.add_argument("--out", required=True)
    sp.add_argument("--blend", type=float, default=0.0,
                    help="0 = distance transport, (0,1] = isophote-adapted")
    sp.add_argument("--smoothing", type=float, default=2.0, help="isophote mollification width")
    sp.add_argument("--q", type=float, default=2.0)
    sp.add_argument("--beta", type=float, default=0.2)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--max-iter", type=int, default=8)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--backend", default=None, choices=[None, "compiled", "numpy"])
    sp.set_defaults(fn=cmd_inpaint)

    sp = sub.add_parser("verify", help="run the verification suites")
    common(sp)
    sp.add_argument("--out", default="verify.json")
    sp.add_argument("--inject-beta-lie", type=float, default=None,
                    help="declare a false beta for the spiral case (negative control)")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("stability", help="perturbation study of the transport field")
    common(sp)
    sp.add_argument("--out", default="stability.csv")
    sp.set_defaults(fn=cmd_stability)

    sp = sub.add_parser("converge", help="integrator-order and TV refinement study")
    common(sp, grid=64)
    sp.add_argument("--out", default="converge.csv")
    sp.set_defaults(fn=cmd_converge)

    sp = sub.add_parser("nonunique", help="distinct fixed points of the scalar example")
    common(sp, grid=96)
    sp.add_argument("--seeds", default="-2,0,0.5,2")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--out", default="nonunique.csv")
    sp.set_defaults(fn=cmd_nonunique)

    sp = sub.add_parser("bench", help="compare the compiled and numpy trace kernels")
    sp.add_argument("--size", type=int, default=192)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--repeat", type=int, default=3)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", default="bench.json")
    sp.set_defaults(fn=cmd_bench)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except CharflowError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
