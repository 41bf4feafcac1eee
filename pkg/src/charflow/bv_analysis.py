"""Discrete total variation and the explicit a priori bounds of the solution.

The solution of the transport problem is BV; its total variation over the
domain is controlled by the boundary-data variation, the right-hand side,
the L1 norms of the field derivatives, and a jump term carried on the stop
set.  This module computes the discrete quantities and checks the bound
inequalities with a stated slack.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MissingAux
from .timefield import sample_grid, transform_time_raw


def discrete_tv(g):
    """Anisotropic 4-neighbor total variation: sum of |du| * spacing.

    Pairs where either cell is outside the finite mask are skipped.
    """
    fin = g.finite()
    if fin.sum() < 4:
        raise ValueError("grid needs at least a 2x2 block of finite cells")
    v = g.values
    tv = 0.0
    m = fin[:, 1:] & fin[:, :-1]
    tv += np.abs(v[:, 1:] - v[:, :-1])[m].sum()
    m = fin[1:, :] & fin[:-1, :]
    tv += np.abs(v[1:, :] - v[:-1, :])[m].sum()
    return float(tv * g.spacing)


@dataclass(frozen=True)
class AuxFieldNorms:
    """Sampled L1 norms of the field derivatives, plus the sampled area."""

    dc_l1: float
    dn_l1: float
    area: float
    resolution: int


def estimate_aux_norms(p, resolution=96, node_eps_cells=4.0, tube_cells=2.0):
    """Finite-difference quadrature of ||Dc||_L1 and ||DN||_L1.

    Disks of radius node_eps_cells * spacing around the stop-set nodes are
    excluded (the derivative poles there are integrable but must not be
    sampled), as is a small tube around the stop set itself.
    """
    from .linear_solver import _grid_layout

    h, nx, ny, origin = _grid_layout(p.domain, resolution)
    jj, ii = np.meshgrid(np.arange(nx), np.arange(ny))
    centers = np.c_[origin[0] + jj.ravel() * h, origin[1] + ii.ravel() * h]
    inside = p.domain.contains(centers)
    ok = inside & (p.domain.stopset.distance(centers) > tube_cells * h)
    t0 = transform_time_raw(p.tf, centers)
    ok &= t0 < 1.0 - 1e-6
    if not p.domain.stopset.degenerate:
        for xy, _kind in p.domain.stopset.nodes:
            ok &= np.hypot(centers[:, 0] - xy[0], centers[:, 1] - xy[1]) > node_eps_cells * h
    ok = ok.reshape(ny, nx)
    if ok.sum() < 16:
        raise MissingAux("aux sampling produced too few valid cells")

    cvals = np.full((ny, nx, 2), np.nan)
    nvals = np.full((ny, nx, 2), np.nan)
    pts = centers[ok.ravel()]
    cvals.reshape(-1, 2)[ok.ravel()] = p.c.c(pts) if hasattr(p.c, "c") else p.c(pts)
    nvals.reshape(-1, 2)[ok.ravel()] = p.tf.normal(pts)

    def l1_of(field):
        """Quadrature of the Frobenius norm of the field Jacobian."""
        valid = ok & np.isfinite(field[:, :, 0])
        sq = np.zeros(field.shape[:2])
        for comp in range(2):
            gy, gx = np.gradient(field[:, :, comp], h)
            sq += gx**2 + gy**2
        good = valid.copy()
        # central differences touch both neighbors; require them valid
        good[1:-1, :] &= valid[2:, :] & valid[:-2, :]
        good[:, 1:-1] &= valid[:, 2:] & valid[:, :-2]
        good[[0, -1], :] = False
        good[:, [0, -1]] = False
        return float(np.sqrt(sq[good]).sum() * h * h)

    area = float(inside.sum() * h * h)
    return AuxFieldNorms(dc_l1=float(l1_of(cvals)), dn_l1=float(l1_of(nvals)),
                         area=area, resolution=resolution)


def tv_bound_interior(p, aux=None, area=None):
    """Explicit bound on the variation away from the stop set.

    |Du0|/(beta m0) + (||f||/beta + ||grad f||/(beta^2 m0)) * area
    + ||f||/(beta^3 m0) * (||Dc||_L1 + ||DN||_L1).
    """
    beta = p.beta
    m0 = p.tf.m0
    bound = p.u0_variation() / (beta * m0)
    if p.f is None:
        return bound
    if aux is None:
        raise MissingAux("nonzero right-hand side needs sampled ||Dc||_L1 and ||DN||_L1")
    if area is None:
        area = aux.area
    pts = sample_grid(p.domain, p.tf, 64)
    f_sup = p.f_sup(pts)
    gf_sup = p.grad_f_sup(pts)
    bound += (f_sup / beta + gf_sup / (beta**2 * m0)) * area
    bound += f_sup / (beta**3 * m0) * (aux.dc_l1 + aux.dn_l1)
    return float(bound)


def jump_mass_sigma(p, traces):
    """Total jump carried on the stop set: sum over arcs of int |u+ - u-| dH1.

    Trapezoid over the sampled arc interior; the short stubs left out by the
    node exclusion are closed with the nearest sampled jump value.
    """
    if p.domain.stopset.degenerate:
        return 0.0
    total = 0.0
    for tr in traces:
        jump = np.abs(tr.u_plus - tr.u_minus)
        if len(jump) == 0:
            continue
        total += float(np.trapezoid(jump, tr.arclength))
        arc_len = p.domain.stopset.arcs[tr.arc_index].length
        stub = arc_len - (tr.arclength[-1] - tr.arclength[0])
        total += 0.5 * stub * float(jump[0] + jump[-1])
    return total


@dataclass
class BVEstimate:
    """Measured norms and the assembled bound terms for one solve."""

    linf: float
    linf_bound: float
    tv_discrete: float
    tv_bound_interior: float
    tv_bound_total: float
    jump_mass_sigma: float
    du0_variation: float
    sigma_length: float

    def as_dict(self):
        return {k: getattr(self, k) for k in (
            "linf", "linf_bound", "tv_discrete", "tv_bound_interior",
            "tv_bound_total", "jump_mass_sigma", "du0_variation", "sigma_length")}


def assemble_bv_estimate(p, g, aux=None, stop_traces=None):
    sigma_len = p.domain.stopset.total_length
    linf_bound = p.linf_bound()
    interior = tv_bound_interior(p, aux)
    return BVEstimate(
        linf=g.linf(),
        linf_bound=linf_bound,
        tv_discrete=discrete_tv(g),
        tv_bound_interior=interior,
        tv_bound_total=interior + 2.0 * linf_bound * sigma_len,
        jump_mass_sigma=jump_mass_sigma(p, stop_traces) if stop_traces else 0.0,
        du0_variation=p.u0_variation(),
        sigma_length=sigma_len,
    )


@dataclass
class BoundsReport:
    entries: list

    @property
    def ok(self):
        return all(passed for _, passed, _ in self.entries)

    def as_dict(self):
        return {name: {"passed": passed, "detail": detail} for name, passed, detail in self.entries}


def check_bounds(p, g, est, tv_slack=0.10):
    """Pass/fail report for the sup-norm bound and the total-variation bound."""
    entries = []
    entries.append(("linf_bound", est.linf <= est.linf_bound,
                    f"{est.linf:.6g} <= {est.linf_bound:.6g}"))
    cap = est.tv_bound_total * (1.0 + tv_slack + 2.0 * g.spacing)
    entries.append(("tv_bound", est.tv_discrete <= cap,
                    f"{est.tv_discrete:.6g} <= {cap:.6g}"))
    entries.append(("jump_vs_linf", est.jump_mass_sigma <= 2.0 * est.linf * est.sigma_length + 1e-12,
                    f"{est.jump_mass_sigma:.6g} <= {2.0 * est.linf * est.sigma_length:.6g}"))
    return BoundsReport(entries)
