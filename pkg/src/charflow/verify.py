"""Verification suites: quantitative checks of the solver against its theory.

Each check returns a CheckResult with the measured numbers; `run_verify`
aggregates them for the CLI.  The built-in problem instances here are also
the fixtures of the acceptance tests.
"""

from dataclasses import dataclass

import numpy as np

from . import bv_analysis as bv
from . import characteristics as ch
from . import linear_solver as ls
from .geometry import disk_domain, disk_segment_domain, rect_skeleton_domain
from .timefield import (check_causality, disk_segment_timefield, estimate_m0,
                        inward_radial_field, normal_field, radial_timefield,
                        rect_skeleton_timefield, rotated_field, sample_grid,
                        transform_time_raw)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict

    def as_dict(self):
        return {"passed": self.passed, "measured": self.measured}


# ---------------------------------------------------------------------------
# built-in case catalog


def u0_cos(s):
    return np.cos(s)


def u0_zero(s):
    return np.zeros_like(np.asarray(s, dtype=float))


def u0_const5(s):
    return np.full_like(np.asarray(s, dtype=float), 5.0)


def u0_upper_step(s):
    """1 on the upper semicircle, 0 on the lower (clockwise circle)."""
    return (np.sin(np.asarray(s, dtype=float)) < 0).astype(float)


def f_one(P):
    return np.ones(len(P))


def radial_problem(u0=u0_cos, f=None, theta=0.0, q=2.0, grad_f=None):
    domain = disk_domain()
    tf = radial_timefield(q=q)
    c = inward_radial_field() if theta == 0.0 else rotated_field(inward_radial_field(), theta)
    return ls.make_linear_problem(domain, tf, c, u0, f=f, grad_f=grad_f)


def segment_problem(u0=u0_upper_step):
    domain = disk_segment_domain()
    tf = disk_segment_timefield()
    return ls.make_linear_problem(domain, tf, normal_field(tf), u0)


def rect_problem():
    domain = rect_skeleton_domain()
    tf = rect_skeleton_timefield()
    perim = domain.boundary.span

    def u0(s):
        return np.cos(2.0 * np.pi * np.asarray(s, dtype=float) / perim)

    return ls.make_linear_problem(domain, tf, normal_field(tf), u0)


def radial_exact_cos(g):
    """Closed form x1/|x| of the radial cosine case at the cell centers."""
    centers = g.cell_centers()
    r = np.maximum(np.hypot(centers[:, 0], centers[:, 1]), 1e-300)
    return (centers[:, 0] / r).reshape(g.values.shape)


def spiral_exact_cos(g, theta):
    """Closed form of the rotated-field cosine case.

    The backward characteristics are logarithmic spirals; the angular drift
    from radius r to the boundary is tan(theta) * ln(1/r).
    """
    centers = g.cell_centers()
    r = np.maximum(np.hypot(centers[:, 0], centers[:, 1]), 1e-300)
    ang = np.arctan2(centers[:, 1], centers[:, 0])
    return np.cos(ang + np.tan(theta) * np.log(1.0 / r)).reshape(g.values.shape)


# ---------------------------------------------------------------------------
# individual checks


def check_causality_suite(lie_beta=None):
    """Sampled beta against the advertised constant for every built-in pair."""
    out = []
    cases = []
    p = radial_problem()
    cases.append(("radial", p, p.c.beta))
    sp = radial_problem(theta=np.pi / 6)
    cases.append(("spiral", sp, lie_beta if lie_beta is not None else sp.c.beta))
    seg = segment_problem()
    cases.append(("disk-segment", seg, seg.c.beta))
    rect = rect_problem()
    cases.append(("rect-skeleton", rect, rect.c.beta))
    for name, prob, advertised in cases:
        pts = sample_grid(prob.domain, prob.tf, 96)
        beta_est = check_causality(prob.tf, prob.c, pts)
        out.append(CheckResult(f"causality.{name}", beta_est >= advertised - 1e-9,
                               {"beta_est": beta_est, "advertised": advertised}))
    return out


def check_m0_suite():
    """The declared m0 must lower-bound the raw sampled minimum of |grad T0|."""
    out = []
    for name, prob in (("radial", radial_problem()), ("disk-segment", segment_problem()),
                       ("rect-skeleton", rect_problem())):
        pts = sample_grid(prob.domain, prob.tf, 96)
        raw_min = estimate_m0(prob.tf, pts, safety=1.0)
        out.append(CheckResult(f"m0.{name}", raw_min >= prob.tf.m0 - 1e-12,
                               {"sampled_min": raw_min, "declared": prob.tf.m0,
                                "estimate": 0.9 * raw_min}))
    return out


def _interior_starts(prob, n, t0_cap=0.95, seed=7):
    rng = np.random.default_rng(seed)
    pts = np.empty((0, 2))
    while len(pts) < n:
        cand = rng.uniform(-1, 1, (4 * n, 2))
        xmin, xmax, ymin, ymax = prob.domain.bbox
        cand = cand * [0.5 * (xmax - xmin), 0.5 * (ymax - ymin)]
        cand += [0.5 * (xmax + xmin), 0.5 * (ymax + ymin)]
        keep = prob.domain.contains(cand)
        cand = cand[keep]
        cand = cand[transform_time_raw(prob.tf, cand) <= t0_cap]
        pts = np.vstack([pts, cand])
    return pts[:n]


def near_sigma_starts(prob, eps=1e-4, m=8):
    """Deterministic starts a distance eps from the stop set.

    These pin the measured arc-length maximum near its supremum (a start
    next to the stop set flows the full way back to the boundary).
    """
    sigma = prob.domain.stopset
    center = sigma.point if sigma.degenerate else sigma.arcs[0].position(np.array([0.5]))[0]
    ang = 2.0 * np.pi * np.arange(m) / m + 0.25
    pts = center + eps * np.c_[np.cos(ang), np.sin(ang)]
    keep = prob.domain.contains(pts) & (sigma.distance(pts) > 0.5 * eps)
    return pts[keep]


def trace_start_set(prob, n, step=1e-3, t0_cap=0.99, eps=1e-4):
    return np.vstack([_interior_starts(prob, n, t0_cap=t0_cap),
                      near_sigma_starts(prob, eps=eps)])


def check_arc_lengths(n=1024, step=1e-3):
    """Measured characteristic lengths against 1/(beta*m0) per built-in."""
    out = []
    for name, prob in (("radial", radial_problem()),
                       ("spiral", radial_problem(theta=np.pi / 6)),
                       ("disk-segment", segment_problem())):
        starts = trace_start_set(prob, n, step=step)
        _, _, arclen, _ = ch.backward_endpoints(starts, prob.sf, prob.tf, step,
                                                want_arclength=True)
        rep = ch.arc_length_bound_check(list(arclen), prob.beta, prob.tf.m0)
        out.append(CheckResult(f"arc_length_bound.{name}", rep.passed, rep.as_dict()))
    return out


def check_clock_identity(n=1024, step=1e-3, tol=1e-6):
    """Clock law T0(y(tau)) = T0(x) - tau along analytic backward traces."""
    out = []
    for name, prob in (("radial", radial_problem()),
                       ("spiral", radial_problem(theta=np.pi / 6))):
        starts = trace_start_set(prob, n, step=step)
        dev = ch.max_clock_deviation_batch(starts, prob.sf, prob.tf, step=step)
        out.append(CheckResult(f"clock_identity.{name}", dev <= tol,
                               {"max_deviation": dev, "tol": tol, "n_traces": len(starts)}))
    return out


def check_forward_monotone(step=1e-3, n=16):
    """T0 strictly increases along forward traces at rate >= m0*beta/2."""
    out = []
    for name, prob in (("radial", radial_problem()),
                       ("spiral", radial_problem(theta=np.pi / 6))):
        params = prob.domain.boundary.sample_params(n)
        ok = True
        worst = np.inf
        for s in params:
            tr = ch.integrate_forward(prob.domain, s, prob.sf, prob.tf, step=step)
            dt0 = np.diff(tr.t0_values)
            dtau = np.diff(tr.times)
            rate = dt0 / np.maximum(dtau, 1e-300)
            worst = min(worst, float(rate.min()))
            ok &= bool((dt0 >= 0.5 * prob.tf.m0 * prob.beta * dtau - 1e-12).all())
        out.append(CheckResult(f"monotone_time.{name}", ok,
                               {"min_rate": worst, "required": 0.5 * prob.tf.m0 * prob.beta}))
    return out


def det_sandwich_samples(prob, n=200, h=1e-4, step=1e-3, seed=11):
    """Finite-difference Jacobians of xi at random (t, s), batched."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.05, 0.9, n)
    a, b = prob.domain.boundary.period
    s = rng.uniform(a, b, n)
    params = np.concatenate([s - h, s + h, s, s])
    times = np.concatenate([t, t, t - h, t + h])
    pts = ch.forward_points(prob.domain, params, times, prob.sf, step)
    p_sm, p_sp, p_tm, p_tp = np.split(pts, 4)
    d_s = (p_sp - p_sm) / (2.0 * h)
    d_t = (p_tp - p_tm) / (2.0 * h)
    det = d_t[:, 0] * d_s[:, 1] - d_t[:, 1] * d_s[:, 0]
    prod = np.hypot(d_t[:, 0], d_t[:, 1]) * np.hypot(d_s[:, 0], d_s[:, 1])
    return det, prod


def check_det_sandwich(n=200, h=1e-4, step=1e-3):
    """0 < det Dxi <= |d_t xi||d_s xi| <= det Dxi / beta, up to fd slack."""
    out = []
    for name, prob in (("radial", radial_problem()),
                       ("spiral", radial_problem(theta=np.pi / 6))):
        det, prod = det_sandwich_samples(prob, n=n, h=h, step=step)
        slack = 10.0 * h
        ok = bool((det > 0).all())
        ok &= bool((det <= prod + slack).all())
        ok &= bool((prod <= det / prob.beta + slack).all())
        out.append(CheckResult(f"det_sandwich.{name}", ok,
                               {"min_det": float(det.min()),
                                "max_prod_minus_det_over_beta": float((prod - det / prob.beta).max()),
                                "slack": slack, "n": n}))
    return out


# ---------------------------------------------------------------------------
# solve-based checks


def solve_cases(grid=128, step=1e-3, threads=None):
    """The bound-checked solves shared by the verify command and the tests."""
    cases = {}
    specs = [
        ("radial-cos", radial_problem(), grid),
        ("radial-const", radial_problem(u0=u0_const5), grid),
        ("radial-f1", radial_problem(u0=u0_zero, f=f_one), grid),
        ("spiral-cos", radial_problem(theta=np.pi / 6), grid),
        ("segment-step", segment_problem(), grid),
        ("rect-cos", rect_problem(), min(grid, 64)),
    ]
    for name, prob, res in specs:
        g = ls.solve_on_grid(prob, resolution=res, step=step, threads=threads)
        aux = bv.estimate_aux_norms(prob, resolution=min(res, 96)) if prob.f is not None else None
        traces = None
        if not prob.domain.stopset.degenerate:
            traces = [ls.traces_on_stopset(prob, k, 64, step=step)
                      for k in range(len(prob.domain.stopset.arcs))]
        est = bv.assemble_bv_estimate(prob, g, aux=aux, stop_traces=traces)
        cases[name] = {"problem": prob, "grid": g, "estimate": est, "traces": traces}
    return cases


def check_bounds_suite(cases):
    out = []
    for name, case in cases.items():
        rep = bv.check_bounds(case["problem"], case["grid"], case["estimate"])
        for check_name, passed, detail in rep.entries:
            out.append(CheckResult(f"{check_name}.{name}", passed, {"detail": detail}))
    return out


def check_radial_closed_form(cases, tol=2e-3):
    g = cases["radial-cos"]["grid"]
    err = np.abs(g.values - radial_exact_cos(g))[g.mask == ls.MASK_INSIDE].max()
    return [CheckResult("closed_form.radial-cos", err <= tol, {"max_err": float(err), "tol": tol})]


def check_jump_mass(cases, tol=2e-2):
    out = []
    case = cases["segment-step"]
    est = case["estimate"]
    sigma_len = case["problem"].domain.stopset.total_length
    out.append(CheckResult("jump_mass.step", abs(est.jump_mass_sigma - sigma_len) <= tol,
                           {"jump_mass": est.jump_mass_sigma, "sigma_length": sigma_len,
                            "tol": tol}))
    sym = segment_problem(u0=u0_cos)
    traces = [ls.traces_on_stopset(sym, 0, 64)]
    jm = bv.jump_mass_sigma(sym, traces)
    out.append(CheckResult("jump_mass.symmetric", jm <= tol, {"jump_mass": jm, "tol": tol}))
    return out


def check_restart(grid=128, step=1e-3, lam=0.5, tol=5e-3, threads=None):
    """The level-line restart reproduces the direct solution above the level."""
    out = []
    for name, prob in (("radial-cos", radial_problem()),
                       ("radial-f1", radial_problem(u0=u0_zero, f=f_one))):
        direct = ls.solve_on_grid(prob, resolution=grid, step=step, threads=threads)
        trace = ls.trace_on_level(prob, lam, n=2048, step=step)
        restarted = ls.restart_solve(prob, lam, trace, resolution=grid, step=step,
                                     threads=threads)
        both = (direct.mask == ls.MASK_INSIDE) & (restarted.mask == ls.MASK_INSIDE)
        err = float(np.abs(direct.values - restarted.values)[both].max())
        out.append(CheckResult(f"restart.{name}", err <= tol,
                               {"max_err": err, "tol": tol, "level": lam,
                                "cells": int(both.sum())}))
    return out


def check_boundary_trace(step=1e-3, r0=0.1, m=256, seed=3):
    """Half-disk averages of |u - u0(z)| shrink toward a continuity point."""
    prob = radial_problem()
    z_param = 1.0  # gamma(1.0) is a continuity point of cos
    z = prob.domain.boundary.position(np.array([z_param]))[0]
    u0z = float(prob.u0(np.array([z_param]))[0])
    rng = np.random.default_rng(seed)
    means = []
    for r in (r0, r0 / 2, r0 / 4):
        pts = z + r * (rng.uniform(-1, 1, (4 * m, 2)))
        keep = prob.domain.contains(pts)
        keep &= np.hypot(pts[:, 0] - z[0], pts[:, 1] - z[1]) <= r
        pts = pts[keep][:m]
        vals = ls.evaluate_batch(prob, pts, step=step)
        means.append(float(np.abs(vals - u0z).mean()))
    ok = means[0] > means[1] > means[2]
    return [CheckResult("boundary_trace.radial", ok, {"means": means, "radii": [r0, r0 / 2, r0 / 4]})]


def check_pde_residual(cases, band=(0.3, 0.8), factor=30.0):
    """<c0, grad u> matches f0 at interior cells, to first order in spacing."""
    out = []
    for name in ("radial-cos", "radial-f1"):
        case = cases[name]
        g = case["grid"]
        prob = case["problem"]
        h = g.spacing
        gy, gx = np.gradient(g.values, h)
        centers = g.cell_centers()
        r = np.hypot(centers[:, 0], centers[:, 1]).reshape(g.values.shape)
        fin = g.mask == ls.MASK_INSIDE
        ok_cell = fin & (r > band[0]) & (r < band[1])
        ok_cell[1:-1, 1:-1] &= fin[2:, 1:-1] & fin[:-2, 1:-1] & fin[1:-1, 2:] & fin[1:-1, :-2]
        ok_cell[[0, -1], :] = False
        ok_cell[:, [0, -1]] = False
        pts = centers[ok_cell.ravel()]
        c0 = prob.sf.c0(pts)
        f0 = prob.sf.f0(pts) if prob.sf.f0 is not None else np.zeros(len(pts))
        lhs = c0[:, 0] * gx[ok_cell] + c0[:, 1] * gy[ok_cell]
        res = float(np.abs(lhs - f0).max())
        tol = factor * h
        out.append(CheckResult(f"pde_residual.{name}", res <= tol,
                               {"max_residual": res, "tol": tol}))
    return out


def check_superposition(grid=64, step=1e-3, tol=1e-9, seed=5, threads=None):
    """The solution map is linear in (u0, f) cellwise."""
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=(2, 5))
    lin = rng.normal(size=(2, 3))

    def trig(k):
        def u0(s):
            c = coeffs[k]
            return (c[0] + c[1] * np.cos(s) + c[2] * np.sin(s)
                    + c[3] * np.cos(2 * s) + c[4] * np.sin(2 * s))
        return u0

    def affine(k):
        def f(P):
            return lin[k][0] + lin[k][1] * P[:, 0] + lin[k][2] * P[:, 1]
        return f

    pa = radial_problem(u0=trig(0), f=affine(0))
    pb = radial_problem(u0=trig(1), f=affine(1))
    pab = radial_problem(u0=lambda s: trig(0)(s) + trig(1)(s),
                         f=lambda P: affine(0)(P) + affine(1)(P))
    ga = ls.solve_on_grid(pa, grid, step=step, threads=threads)
    gb = ls.solve_on_grid(pb, grid, step=step, threads=threads)
    gab = ls.solve_on_grid(pab, grid, step=step, threads=threads)
    m = ga.mask == ls.MASK_INSIDE
    err = float(np.abs(ga.values + gb.values - gab.values)[m].max())
    return [CheckResult("superposition.radial", err <= tol, {"max_err": err, "tol": tol})]


# ---------------------------------------------------------------------------
# experiments (stability / convergence)


def stability_experiment(grid=128, step=1e-3, theta0=np.pi / 6, n_levels=6,
                         table_n=512, threads=None):
    """L1 distance of perturbed solves to the base solve as the rotation shrinks.

    The boundary data is a sampled table (piecewise constant), which sets a
    nonzero interpolation floor; the floor is measured against the closed
    form of the unperturbed problem.
    """
    domain = disk_domain()
    tf = radial_timefield()
    params = domain.boundary.sample_params(table_n)
    u0 = ls.u0_from_samples(domain.boundary, np.cos(params))
    base = ls.make_linear_problem(domain, tf, inward_radial_field(), u0)
    g_base = ls.solve_on_grid(base, grid, step=step, threads=threads)
    exact = radial_exact_cos(g_base)
    fin = g_base.mask == ls.MASK_INSIDE
    floor = float(np.abs(g_base.values - exact)[fin].sum() * g_base.spacing**2)

    m4 = base.u0_sup()
    m5 = base.u0_variation()
    beta_min = float(np.cos(theta0))
    cap = m5 / (beta_min * tf.m0)  # self-map TV cap for f == 0 and point stop set

    rows = []
    for n in range(n_levels):
        theta = theta0 / 2**n
        pert = base.with_data(c=rotated_field(inward_radial_field(), theta))
        g_n = ls.solve_on_grid(pert, grid, step=step, threads=threads)
        l1_err = float(np.abs(g_n.values - g_base.values)[fin].sum() * g_n.spacing**2)
        rows.append({"n": n, "theta": theta, "l1_err": l1_err,
                     "tv": bv.discrete_tv(g_n)})
    errs = [r["l1_err"] for r in rows]
    decreasing = all(errs[i] > errs[i + 1] for i in range(len(errs) - 1))
    within_floor = errs[-1] <= 3.0 * floor
    tv_ok = all(r["tv"] <= cap for r in rows)
    summary = {"floor": floor, "tv_cap": cap, "decreasing": decreasing,
               "final_within_3x_floor": within_floor, "tv_within_cap": tv_ok,
               "m4": m4, "m5": m5}
    return rows, summary


def convergence_experiment(steps=(3e-2, 1e-2, 3e-3, 1e-3), grid=64,
                           tv_grids=(64, 128, 256), theta=np.pi / 6, threads=None):
    """RK4 order study plus a TV Cauchy study on built-in cases.

    The rotated (spiral) case drives the step study: its characteristics
    are genuinely curved, so the endpoint error scales with the integrator
    order.  (The purely radial case is step-size independent: every RK4
    stage is a radial vector, so the transported angle is exact.)
    """
    prob = radial_problem(theta=theta)
    step_rows = []
    for s in steps:
        g = ls.solve_on_grid(prob, grid, step=s, threads=threads)
        err = float(np.abs(g.values - spiral_exact_cos(g, theta))[g.mask == ls.MASK_INSIDE].max())
        step_rows.append({"step": s, "grid": grid, "max_err": err})
    # fit the order over the rows above the boundary-projection floor
    pts = [(np.log(r["step"]), np.log(max(r["max_err"], 1e-300)))
           for r in step_rows if r["max_err"] > 1e-9]
    order = 0.0
    if len(pts) >= 2:
        xs, ys = zip(*pts)
        order = float(np.polyfit(xs, ys, 1)[0])

    tv_rows = []
    for res in tv_grids:
        g = ls.solve_on_grid(prob, res, step=1e-3, threads=threads)
        tv_rows.append({"grid": res, "tv": bv.discrete_tv(g)})
    cauchy = [abs(tv_rows[i + 1]["tv"] - tv_rows[i]["tv"]) for i in range(len(tv_rows) - 1)]
    shrink_ok = all(cauchy[i + 1] <= 0.7 * cauchy[i] for i in range(len(cauchy) - 1))

    # the step-data case has axis-aligned jump lines of total length 2
    step_prob = radial_problem(u0=u0_upper_step)
    g_step = ls.solve_on_grid(step_prob, grid, step=1e-3, threads=threads)
    tv_step = bv.discrete_tv(g_step)
    const_prob = radial_problem(u0=u0_const5)
    g_const = ls.solve_on_grid(const_prob, grid, step=steps[0], threads=threads)
    const_floor = float(np.abs(g_const.values - 5.0)[g_const.mask == ls.MASK_INSIDE].max())
    summary = {"order": order, "cauchy_diffs": cauchy, "cauchy_shrink_ok": shrink_ok,
               "tv_step_case": tv_step, "constant_case_floor": const_floor}
    return step_rows, tv_rows, summary


# ---------------------------------------------------------------------------
# aggregation


def run_verify(grid=128, step=1e-3, threads=None, lie_beta=None):
    """Run every check suite; returns (results, all_passed, extras)."""
    results = []
    results += check_causality_suite(lie_beta=lie_beta)
    results += check_m0_suite()
    results += check_arc_lengths(step=step)
    results += check_clock_identity(step=step)
    results += check_forward_monotone(step=step)
    results += check_det_sandwich(step=step)
    cases = solve_cases(grid=grid, step=step, threads=threads)
    results += check_radial_closed_form(cases)
    results += check_bounds_suite(cases)
    results += check_jump_mass(cases)
    results += check_restart(grid=grid, step=step, threads=threads)
    results += check_boundary_trace(step=step)
    results += check_pde_residual(cases)
    results += check_superposition(grid=min(grid, 64), step=step, threads=threads)
    ok = all(r.passed for r in results)
    extras = {"bv_estimates": {name: case["estimate"].as_dict() for name, case in cases.items()}}
    return results, ok, extras
