import numpy as np
import pytest

from charflow import bv_analysis as bv
from charflow import linear_solver as ls
from charflow import quasilinear as ql
from charflow import verify as V
from charflow.errors import NotCausal
from charflow.timefield import field_from_distance_grid, rotated_field, inward_radial_field


@pytest.fixture(scope="module")
def base():
    return ql.radial_base_problem()


@pytest.fixture(scope="module")
def arc_length_grid(base):
    return ls.solve_on_grid(base.with_data(f=V.f_one), resolution=96)


def constant_fc(base):
    return ql.FunctionalCoefficients(c_of=lambda v: base.c, f_of=lambda v: V.f_one,
                                     beta=1.0, m1=7.0, m2=1.0, m3=0.0)


class TestApplyU:
    def test_v_independent_reduces_to_linear(self, base, arc_length_grid):
        fc = constant_fc(base)
        u1 = ql.apply_U(fc, base, arc_length_grid.like(np.zeros_like(arc_length_grid.values)))
        u2 = ql.apply_U(fc, base, arc_length_grid.like(37.0 * np.ones_like(arc_length_grid.values)))
        assert np.array_equal(u1.values, u2.values)

    def test_idempotent_for_v_independent(self, base, arc_length_grid):
        fc = constant_fc(base)
        u1 = ql.apply_U(fc, base, arc_length_grid)
        u2 = ql.apply_U(fc, base, u1)
        m = u1.finite()
        assert np.abs(u1.values - u2.values)[m].max() <= 1e-12

    def test_scalar_functional_branches(self, base, arc_length_grid):
        a = arc_length_grid
        a_l1 = a.l1()

        def f_of(v):
            scale = ql.clamp_unit(v.integral() / a_l1)
            return lambda P, s=scale: np.full(len(P), s)

        fc = ql.FunctionalCoefficients(c_of=lambda v: base.c, f_of=f_of, beta=1.0)
        zero = a.like(np.zeros_like(a.values))
        u = ql.apply_U(fc, base, zero)
        assert np.abs(u.values[u.finite()]).max() <= 1e-12  # clamp(0) = 0
        u2 = ql.apply_U(fc, base, a.like(2.0 * a.values))
        m = u2.finite()
        assert np.abs(u2.values - a.values)[m].max() <= 1e-9  # clamp(2) = 1

    def test_causality_violation_raises(self, base, arc_length_grid):
        bad = rotated_field(inward_radial_field(), 0.9 * np.pi / 2 + 0.3)
        fc = ql.FunctionalCoefficients(c_of=lambda v: bad, f_of=lambda v: None, beta=1.0)
        with pytest.raises(NotCausal):
            ql.apply_U(fc, base, arc_length_grid)


class TestSolveQuasilinear:
    def test_linear_coefficients_converge_immediately(self, base, arc_length_grid):
        fc = constant_fc(base)
        u, rep = ql.solve_quasilinear(fc, base, arc_length_grid, tol=1e-10)
        assert rep.converged and rep.n_iters <= 2
        assert rep.l1_residuals[-1] <= 1e-10

    def test_midbranch_fixed_point(self, base, arc_length_grid):
        a = arc_length_grid
        a_l1 = a.l1()

        def f_of(v):
            scale = ql.clamp_unit(v.integral() / a_l1)
            return lambda P, s=scale: np.full(len(P), s)

        fc = ql.FunctionalCoefficients(c_of=lambda v: base.c, f_of=f_of, beta=1.0)
        seed = a.like(0.5 * a.values)
        u, rep = ql.solve_quasilinear(fc, base, seed, tol=1e-6)
        assert rep.converged and rep.n_iters <= 2
        assert np.abs(u.values - 0.5 * a.values)[u.finite()].max() <= 1e-9

    def test_clamped_fixed_point(self, base, arc_length_grid):
        a = arc_length_grid
        a_l1 = a.l1()

        def f_of(v):
            scale = ql.clamp_unit(v.integral() / a_l1)
            return lambda P, s=scale: np.full(len(P), s)

        fc = ql.FunctionalCoefficients(c_of=lambda v: base.c, f_of=f_of, beta=1.0)
        u, rep = ql.solve_quasilinear(fc, base, a.like(2.0 * a.values), tol=1e-6)
        assert rep.converged
        assert np.abs(u.values - a.values)[u.finite()].max() <= 1e-9

    def test_not_converged_is_reported_not_raised(self, base, arc_length_grid):
        a = arc_length_grid
        flip = [1.0]

        def f_of(v):  # alternating forcing defeats the iteration
            flip[0] = -flip[0]
            return lambda P, s=flip[0]: np.full(len(P), s)

        fc = ql.FunctionalCoefficients(c_of=lambda v: base.c, f_of=f_of, beta=1.0)
        u, rep = ql.solve_quasilinear(fc, base, a, tol=1e-9, max_iter=3)
        assert not rep.converged
        assert rep.n_iters == 3
        assert len(rep.l1_residuals) == 3

    def test_self_map_membership(self, base, arc_length_grid):
        a = arc_length_grid
        a_l1 = a.l1()

        def f_of(v):
            scale = ql.clamp_unit(v.integral() / a_l1)
            return lambda P, s=scale: np.full(len(P), s)

        aux = bv.estimate_aux_norms(base, resolution=64)
        bounds = ql.self_map_bounds(m1=aux.dc_l1 * 1.2, m2=1.0, m3=0.0, m4=0.0, m5=0.0,
                                    beta=1.0, m0=base.tf.m0, area=aux.area,
                                    sigma_length=0.0, dn_l1=aux.dn_l1 * 1.2)
        fc = ql.FunctionalCoefficients(c_of=lambda v: base.c, f_of=f_of, beta=1.0)
        u, rep = ql.solve_quasilinear(fc, base, a.like(0.5 * a.values), tol=1e-6,
                                      bounds=bounds)
        assert rep.in_x
        assert rep.final_l1_norm <= bounds.m_star
        assert rep.final_tv <= bounds.m_starstar * 1.1

    def test_bad_arguments(self, base, arc_length_grid):
        fc = constant_fc(base)
        with pytest.raises(ValueError):
            ql.solve_quasilinear(fc, base, arc_length_grid, tol=0.0)
        with pytest.raises(ValueError):
            ql.solve_quasilinear(fc, base, arc_length_grid, max_iter=0)


class TestNonUniqueness:
    def test_seed_table(self):
        rows, a_l1 = ql.nonuniqueness_demo([-2.0, 0.0, 0.5, 2.0], resolution=96)
        assert a_l1 == pytest.approx(np.pi / 3, abs=1e-3)
        limits = [r.alpha for r in rows]
        assert np.allclose(limits, [-1.0, 0.0, 0.5, 1.0], atol=1e-9)
        assert all(r.residual <= 1e-6 for r in rows)
        assert len({round(x, 6) for x in limits}) >= 2  # certified non-uniqueness


class TestSelfMapBounds:
    def test_formulas(self):
        b = ql.self_map_bounds(m1=2.0, m2=1.0, m3=0.5, m4=3.0, m5=4.0,
                               beta=0.5, m0=0.5, area=np.pi, sigma_length=1.0, dn_l1=6.0)
        expect_star = (3.0 + 1.0 / 0.25) * np.pi
        expect_sstar = (2 * (3.0 + 4.0) * 1.0 + 4.0 / 0.25
                        + (1.0 / 0.5 + 0.5 / (0.25 * 0.5)) * np.pi + 1.0 / (0.125 * 0.5) * 8.0)
        assert b.m_star == pytest.approx(expect_star, rel=1e-12)
        assert b.m_starstar == pytest.approx(expect_sstar, rel=1e-12)


class TestInpaintingCoefficients:
    def disk_tf(self, n=48):
        jj, ii = np.meshgrid(np.arange(n), np.arange(n))
        mask = (ii - n / 2) ** 2 + (jj - n / 2) ** 2 < (0.35 * n) ** 2
        return field_from_distance_grid(mask, spacing=1.0)

    def test_blend_zero_is_normal_field(self):
        tf = self.disk_tf()
        fc = ql.build_inpainting_coefficients(tf, beta=0.2, smoothing=2.0, blend=0.0)
        rng = np.random.default_rng(10)
        v = ls.GridFunction(values=rng.normal(size=tf.t_raster.shape),
                            mask=tf.inside.astype(np.uint8), spacing=1.0, origin=(0, 0))
        c = fc.c_of(v)
        from charflow.inpaint import normal_raster
        n = normal_raster(tf)
        inside = tf.inside & ~tf.sigma_cells
        assert np.abs(c - n)[inside].max() <= 1e-12

    def test_constant_iterate_falls_back_to_normal(self):
        tf = self.disk_tf()
        fc = ql.build_inpainting_coefficients(tf, beta=0.2, smoothing=2.0, blend=0.7)
        v = ls.GridFunction(values=np.full(tf.t_raster.shape, 0.3),
                            mask=tf.inside.astype(np.uint8), spacing=1.0, origin=(0, 0))
        c = fc.c_of(v)
        from charflow.inpaint import normal_raster
        n = normal_raster(tf)
        inside = tf.inside & ~tf.sigma_cells
        assert np.abs(c - n)[inside].max() <= 1e-12

    def test_cone_projection_enforces_beta(self):
        tf = self.disk_tf()
        beta = 0.35
        fc = ql.build_inpainting_coefficients(tf, beta=beta, smoothing=1.0, blend=1.0)
        jj, ii = np.meshgrid(np.arange(48), np.arange(48))
        v = ls.GridFunction(values=np.sin(0.8 * ii) + np.cos(1.1 * jj),
                            mask=tf.inside.astype(np.uint8), spacing=1.0, origin=(0, 0))
        c = fc.c_of(v)
        from charflow.inpaint import field_beta_est
        assert field_beta_est(tf, c) >= beta - 1e-9
        mag = np.hypot(c[:, :, 0], c[:, :, 1])
        # unit speed away from the ridge cells (whose direction is unused)
        assert np.abs(mag[tf.inside & ~tf.sigma_cells] - 1.0).max() <= 1e-9

    def test_continuity_under_mollification(self):
        # L1-converging iterates produce uniformly converging coefficients:
        # the solve outputs converge in L1 as the perturbation scale shrinks
        from scipy import ndimage
        from charflow.inpaint import InpaintProblem
        tf = self.disk_tf()
        rng = np.random.default_rng(11)
        jj, ii = np.meshgrid(np.arange(48), np.arange(48))
        known = 0.5 + 0.4 * np.sin(0.3 * jj)
        base = InpaintProblem(tf=tf, known=known, step=2e-3)
        fc = ql.build_inpainting_coefficients(tf, beta=0.2, smoothing=2.0, blend=0.6)
        v = base.grid(known + 0.2 * rng.normal(size=known.shape))
        u_ref = ql.apply_U(fc, base, v)
        diffs = []
        for sigma in (4.0, 2.0, 1.0):
            v_n = base.grid(ndimage.gaussian_filter(v.values, sigma))
            diffs.append(ql.apply_U(fc, base, v_n).diff_l1(u_ref))
        assert diffs[0] > diffs[1] > diffs[2]

    def test_parameter_validation(self):
        tf = self.disk_tf()
        with pytest.raises(ValueError):
            ql.build_inpainting_coefficients(tf, smoothing=0.0)
        with pytest.raises(ValueError):
            ql.build_inpainting_coefficients(tf, blend=1.5)
