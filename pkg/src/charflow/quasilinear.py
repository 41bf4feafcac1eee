"""Quasi-linear problems by Picard iteration of the linear solution operator.

Freezing the functional coefficients at an iterate v turns the problem
linear; re-solving and updating realizes u = U[u] when the iteration
settles.  Existence theory guarantees a fixed point but not convergence of
the iteration, so non-convergence is reported, never asserted away.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .bv_analysis import discrete_tv
from .linear_solver import make_linear_problem, solve_on_grid
from .timefield import inward_radial_field, radial_timefield
from .geometry import disk_domain


@dataclass(frozen=True)
class FunctionalCoefficients:
    """Solution-dependent coefficients with their declared uniform caps.

    c_of(v) and f_of(v) freeze the coefficients at an iterate; m1 caps
    ||D_x c[v]||_L1, m2 caps ||f[v]||_inf, m3 caps ||grad_x f[v]||_inf, and
    beta is the uniform causality constant valid for every v.
    """

    c_of: callable
    f_of: callable
    beta: float
    m1: float = None
    m2: float = None
    m3: float = None


@dataclass(frozen=True)
class SelfMapBounds:
    """L1 and TV caps that make the solution operator a self-mapping."""

    m_star: float
    m_starstar: float
    m4: float
    m5: float


def self_map_bounds(m1, m2, m3, m4, m5, beta, m0, area, sigma_length, dn_l1):
    """Evaluate the displayed cap formulas for the iterate set."""
    m_star = (m4 + m2 / (beta * m0)) * area
    m_starstar = (
        2.0 * (m4 + m2 / (beta * m0)) * sigma_length
        + m5 / (beta * m0)
        + (m2 / beta + m3 / (beta**2 * m0)) * area
        + m2 / (beta**3 * m0) * (m1 + dn_l1)
    )
    return SelfMapBounds(m_star=float(m_star), m_starstar=float(m_starstar), m4=m4, m5=m5)


@dataclass
class FixedPointReport:
    n_iters: int
    l1_residuals: list
    converged: bool
    final_l1_norm: float
    final_tv: float
    in_x: bool
    l1_norms: list = None  # per-iterate history, parallel to l1_residuals
    tvs: list = None

    def as_dict(self):
        return {"n_iters": self.n_iters, "l1_residuals": list(self.l1_residuals),
                "converged": self.converged, "final_l1_norm": self.final_l1_norm,
                "final_tv": self.final_tv, "in_x": self.in_x}

    def iteration_rows(self):
        """CSV rows (iter, l1_residual, l1_norm, tv) of the iteration log."""
        return [[k + 1, self.l1_residuals[k], self.l1_norms[k], self.tvs[k]]
                for k in range(self.n_iters)]


def apply_U(fc, base, v, step=1e-3, threads=None):
    """One application of the solution operator with coefficients frozen at v."""
    c = fc.c_of(v)
    f = fc.f_of(v)
    return base.solve_with(c, f, like=v, step=step, threads=threads)


def solve_quasilinear(fc, base, seed, tol=1e-6, max_iter=20, omega=1.0,
                      bounds=None, step=1e-3, threads=None):
    """Picard iteration u_{k+1} = (1-omega) u_k + omega U[u_k].

    Stops when the L1 increment falls below tol; otherwise returns the last
    iterate with converged=False.  Residual monotonicity is not assumed.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    u = seed
    residuals = []
    norms = []
    tvs = []
    converged = False
    for _ in range(max_iter):
        u_next = apply_U(fc, base, u, step=step, threads=threads)
        if omega != 1.0:
            u_next = u_next.like((1.0 - omega) * u.values + omega * u_next.values)
        residuals.append(u_next.diff_l1(u))
        norms.append(u_next.l1())
        tvs.append(discrete_tv(u_next))
        u = u_next
        if residuals[-1] <= tol:
            converged = True
            break
    in_x = True
    if bounds is not None:
        # membership must hold for every iterate, not just the last
        in_x = (all(n <= bounds.m_star for n in norms)
                and all(tv <= bounds.m_starstar * 1.1 for tv in tvs))
    report = FixedPointReport(n_iters=len(residuals), l1_residuals=residuals,
                              converged=converged, final_l1_norm=norms[-1],
                              final_tv=tvs[-1], in_x=in_x, l1_norms=norms, tvs=tvs)
    return u, report


# ---------------------------------------------------------------------------
# the scalar non-uniqueness construction


def clamp_unit(t):
    """Piecewise clamp: -1 below -1, identity on (-1, 1], 1 above."""
    return float(np.clip(t, -1.0, 1.0))


def radial_base_problem(q=2.0):
    """Unit-disk template with zero boundary data and the inward radial field."""
    domain = disk_domain()
    tf = radial_timefield(q=q)
    c = inward_radial_field()
    return make_linear_problem(domain, tf, c, u0=lambda s: np.zeros_like(s))


@dataclass
class NonUniquenessRow:
    seed: float
    alpha: float
    residual: float
    n_iters: int
    report: FixedPointReport = None


def nonuniqueness_demo(seeds, resolution=96, tol=1e-6, max_iter=12, step=1e-3,
                       threads=None, q=2.0):
    """Distinct fixed points of an almost-linear problem from different seeds.

    The right-hand side depends on the iterate only through the scalar
    quadrature s(v) (the signed cell sum, which equals the L1 norm on the
    nonnegative multiples of the arc-length function a and extends the
    scalar recursion to negative multiples).  Every fixed point has the form
    alpha * a with alpha a fixed point of the clamp function.
    """
    base = radial_base_problem(q=q)
    ones = lambda P: np.ones(len(P))
    a = solve_on_grid(base.with_data(f=ones), resolution=resolution, step=step,
                      threads=threads)
    a_l1 = a.l1()

    def f_of(v):
        scale = clamp_unit(v.integral() / a_l1)
        return lambda P, s=scale: np.full(len(P), s)

    fc = FunctionalCoefficients(c_of=lambda v: base.c, f_of=f_of, beta=1.0,
                                m1=0.0, m2=1.0, m3=0.0)
    rows = []
    for seed in seeds:
        seed_grid = a.like(float(seed) * a.values)
        u, rep = solve_quasilinear(fc, base, seed_grid, tol=tol, max_iter=max_iter,
                                   step=step, threads=threads)
        alpha = u.integral() / a_l1
        rows.append(NonUniquenessRow(seed=float(seed), alpha=float(alpha),
                                     residual=abs(alpha - clamp_unit(alpha)),
                                     n_iters=rep.n_iters, report=rep))
    return rows, a_l1


# ---------------------------------------------------------------------------
# image-adapted coefficients


def build_inpainting_coefficients(tf, beta=0.2, smoothing=2.0, blend=0.5):
    """Isophote-following transport for a grid time field.

    c[v] blends the time-field normal N with the mollified isophote
    direction of the iterate v, then rotates any violating direction back
    into the causality cone <c, N> >= beta.  blend = 0 reduces to pure
    distance transport; f[v] is zero.
    """
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    if not 0.0 <= blend <= 1.0:
        raise ValueError("blend must lie in [0, 1]")
    nx_r = tf.gx_raster
    ny_r = tf.gy_raster
    mag = np.hypot(nx_r, ny_r)
    mag = np.where(mag > 0, mag, 1.0)
    n_field = np.stack([nx_r / mag, ny_r / mag], axis=-1)
    sigma_px = smoothing / tf.spacing

    def c_of(v):
        vals = np.where(np.isfinite(v.values), v.values, 0.0)
        smooth = ndimage.gaussian_filter(vals, sigma_px, mode="nearest")
        gy, gx = np.gradient(smooth, tf.spacing)
        gmag = np.hypot(gx, gy)
        floor = 1e-8 * max(gmag.max(), 1e-30)
        ok = gmag > floor
        # isophote direction: rotate the image gradient by 90 degrees
        px = np.where(ok, -gy / np.where(ok, gmag, 1.0), n_field[:, :, 0])
        py = np.where(ok, gx / np.where(ok, gmag, 1.0), n_field[:, :, 1])
        # orient along the causal side
        dot = px * n_field[:, :, 0] + py * n_field[:, :, 1]
        flip = np.where(dot < 0, -1.0, 1.0)
        px *= flip
        py *= flip
        cx = (1.0 - blend) * n_field[:, :, 0] + blend * px
        cy = (1.0 - blend) * n_field[:, :, 1] + blend * py
        cmag = np.hypot(cx, cy)
        degen = cmag < 1e-12
        cx = np.where(degen, n_field[:, :, 0], cx / np.where(degen, 1.0, cmag))
        cy = np.where(degen, n_field[:, :, 1], cy / np.where(degen, 1.0, cmag))
        # cone projection: rotate toward N until <c, N> = beta
        dot = cx * n_field[:, :, 0] + cy * n_field[:, :, 1]
        perp = cx * (-n_field[:, :, 1]) + cy * n_field[:, :, 0]
        bad = dot < beta
        root = np.sqrt(max(1.0 - beta * beta, 0.0))
        sgn = np.where(perp >= 0, 1.0, -1.0)
        cx = np.where(bad, beta * n_field[:, :, 0] - sgn * root * n_field[:, :, 1], cx)
        cy = np.where(bad, beta * n_field[:, :, 1] + sgn * root * n_field[:, :, 0], cy)
        return np.stack([cx, cy], axis=-1)

    return FunctionalCoefficients(c_of=c_of, f_of=lambda v: None, beta=beta,
                                  m2=0.0, m3=0.0)
