"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion.  Default working point: grid 128, step 1e-3.
"""

import numpy as np
import pytest

from charflow import bv_analysis as bv
from charflow import characteristics as ch
from charflow import linear_solver as ls
from charflow import netpbm
from charflow import verify as V
from charflow.inpaint import inpaint_image
from charflow.quasilinear import clamp_unit, nonuniqueness_demo

GRID = 128
STEP = 1e-3


def report(num, name, passed, detail):
    print(f"{'PASS' if passed else 'FAIL'} criterion-{num:02d} {name}: {detail}")
    assert passed, f"criterion {num} ({name}): {detail}"


@pytest.fixture(scope="module")
def cases():
    return V.solve_cases(grid=GRID, step=STEP)


def test_criterion_01_radial_closed_form(cases):
    g = cases["radial-cos"]["grid"]
    err = float(np.abs(g.values - V.radial_exact_cos(g))[g.mask == ls.MASK_INSIDE].max())
    report(1, "radial closed-form solve", err <= 2e-3,
           f"max cell error {err:.3e} <= 2e-3 at grid {GRID}, step {STEP}")


def test_criterion_02_arc_length_bound():
    lines = []
    ok = True
    expected = {"radial": (1.0, 2.0), "spiral": (1 / np.cos(np.pi / 6), 2 / np.cos(np.pi / 6))}
    for name, prob in (("radial", V.radial_problem()),
                       ("spiral", V.radial_problem(theta=np.pi / 6)),
                       ("disk-segment", V.segment_problem())):
        starts = V.trace_start_set(prob, 1024, step=STEP)
        assert len(starts) >= 1000
        _, _, arclen, _ = ch.backward_endpoints(starts, prob.sf, prob.tf, STEP,
                                                want_arclength=True)
        rep = ch.arc_length_bound_check(list(arclen), prob.beta, prob.tf.m0)
        ok &= rep.passed
        if name in expected:
            meas, bound = expected[name]
            ok &= abs(rep.max_arc_length - meas) <= 2e-3
            ok &= abs(rep.bound - bound) <= 1e-9
        lines.append(f"{name}: max {rep.max_arc_length:.4f} <= bound {rep.bound:.4f}")
    report(2, "arc-length bound", ok, "; ".join(lines))


def test_criterion_03_clock_identity():
    worst = 0.0
    n_total = 0
    for prob in (V.radial_problem(), V.radial_problem(theta=np.pi / 6)):
        starts = V.trace_start_set(prob, 1024, step=STEP)
        n_total += len(starts)
        worst = max(worst, ch.max_clock_deviation_batch(starts, prob.sf, prob.tf, step=STEP))
    report(3, "T0 clock identity", worst <= 1e-6,
           f"max deviation {worst:.2e} <= 1e-6 over {n_total} traces at step {STEP}")


def test_criterion_04_det_sandwich():
    ok = True
    details = []
    h = 1e-4
    for name, prob in (("radial", V.radial_problem()),
                       ("spiral", V.radial_problem(theta=np.pi / 6))):
        det, prod = V.det_sandwich_samples(prob, n=200, h=h, step=STEP)
        slack = 10.0 * h
        ok &= bool((det > 0).all())
        ok &= bool((det <= prod + slack).all())
        ok &= bool((prod <= det / prob.beta + slack).all())
        details.append(f"{name}: min det {det.min():.3e}")
    report(4, "det sandwich at 200 random (t,s)", ok, "; ".join(details))


def test_criterion_05_linf_bound_exact(cases):
    ok = True
    worst = ""
    for name, case in cases.items():
        est = case["estimate"]
        if est.linf > est.linf_bound:
            ok = False
            worst = f"{name}: {est.linf} > {est.linf_bound}"
    report(5, "L-inf bound with zero tolerance", ok,
           worst or f"max|u| <= |u0| + |f|/(beta m0) on all {len(cases)} solves")


def test_criterion_06_tv_bound(cases):
    ok = True
    details = []
    for name, case in cases.items():
        est = case["estimate"]
        cap = est.tv_bound_total * 1.10
        good = est.tv_discrete <= cap
        ok &= good
        details.append(f"{name}: {est.tv_discrete:.3f} <= {cap:.3f}")
    report(6, "TV bound with 10% slack", ok, "; ".join(details))


def test_criterion_07_jump_mass(cases):
    est = cases["segment-step"]["estimate"]
    err = abs(est.jump_mass_sigma - 1.0)
    sym = V.segment_problem(u0=V.u0_cos)
    traces = [ls.traces_on_stopset(sym, 0, 64, step=STEP)]
    jm_sym = bv.jump_mass_sigma(sym, traces)
    ok = err <= 2e-2 and jm_sym <= 2e-2
    report(7, "stop-set jump mass", ok,
           f"step data: |{est.jump_mass_sigma:.4f} - 1| <= 2e-2; symmetric: {jm_sym:.2e} <= 2e-2")


def test_criterion_08_restart_reproduction():
    res = V.check_restart(grid=GRID, step=STEP, lam=0.5, tol=5e-3)
    ok = all(r.passed for r in res)
    report(8, "restart reproduction at lambda=0.5", ok,
           "; ".join(f"{r.name}: max err {r.measured['max_err']:.2e}" for r in res))


def test_criterion_09_stability():
    rows, summary = V.stability_experiment(grid=GRID, step=STEP)
    errs = [r["l1_err"] for r in rows]
    ok = summary["decreasing"] and summary["final_within_3x_floor"] and summary["tv_within_cap"]
    report(9, "stability under field perturbation", ok,
           f"L1 errors {['%.4f' % e for e in errs]} strictly decreasing, "
           f"final {errs[-1]:.4f} <= 3 x floor {summary['floor']:.4f}")


def test_criterion_10_nonuniqueness():
    rows, a_l1 = nonuniqueness_demo([-2.0, 0.0, 0.5, 2.0], resolution=96, tol=1e-6,
                                    step=STEP)
    limits = [r.alpha for r in rows]
    ok = np.allclose(limits, [-1.0, 0.0, 0.5, 1.0], atol=1e-9)
    ok &= all(abs(r.alpha - clamp_unit(r.alpha)) <= 1e-6 for r in rows)
    ok &= abs(a_l1 - np.pi / 3) <= 1e-3
    ok &= len({round(x, 6) for x in limits}) >= 2
    report(10, "non-uniqueness of the quasi-linear problem", ok,
           f"limits {['%+.6f' % x for x in limits]}, |a|_L1 = {a_l1:.6f} vs pi/3 = {np.pi / 3:.6f}")


def test_criterion_11_superposition():
    res = V.check_superposition(grid=64, step=STEP)[0]
    report(11, "superposition in (u0, f)", res.passed,
           f"max cellwise error {res.measured['max_err']:.2e} <= 1e-9 on random data pairs")


def test_criterion_12_inpainting_smoke():
    h = w = 56
    jj = np.meshgrid(np.arange(w), np.arange(h))[0]
    ii = np.meshgrid(np.arange(w), np.arange(h))[1]
    mask = (ii - 28) ** 2 + (jj - 28) ** 2 < 11**2

    const = np.full((h, w), 0.375)
    out_c, _ = inpaint_image(const, mask)
    ok = np.array_equal(out_c, const)
    detail = "constant image reproduced exactly"

    step_img = (jj >= 28).astype(float)
    out_s, _ = inpaint_image(step_img, mask)
    band_ok = True
    for i in range(h):
        if not mask[i].any():
            continue
        jumps = np.nonzero(np.abs(np.diff(out_s[i])) > 0.5)[0]
        band_ok &= len(jumps) == 1 and abs(int(jumps[0]) + 1 - 28) <= 2
    ok &= band_ok
    detail += f"; step within 2-cell band: {band_ok}"

    rng = np.random.default_rng(21)
    noisy = rng.uniform(size=(h, w))
    one, _ = inpaint_image(noisy, mask, threads=1)
    four, _ = inpaint_image(noisy, mask, threads=4)
    det_ok = np.array_equal(netpbm.from_unit(one), netpbm.from_unit(four))
    ok &= det_ok
    detail += f"; deterministic across thread counts: {det_ok}"
    report(12, "inpainting smoke test", ok, detail)
