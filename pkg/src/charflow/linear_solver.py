"""Explicit solution of the linear transport problem.

The solution at x is the boundary datum carried along the backward
characteristic plus the integral of the rescaled right-hand side:

    u(x) = u0(endpoint) + integral of f0 along the backward path.

Grid solves evaluate this independently per cell (parallel map); cells in a
small tube around the stop set are filled by one-sided extension so the
jump across the stop set is never averaged.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from . import characteristics as ch
from ._kernels import analytic_thread_count
from .errors import LevelNotFound, NodeProximity
from .timefield import check_causality, sample_grid, transform_time_raw


@dataclass
class LinearProblem:
    """Domain, fields, and data of one linear transport problem."""

    domain: object
    tf: object
    c: object  # TransportField
    u0: callable  # boundary parameter (N,) -> values (N,)
    f: callable = None  # (N, 2) -> (N,), None means f == 0
    grad_f: callable = None  # optional (N, 2) -> (N, 2)
    beta: float = None
    _sf: object = None
    _u0_table: np.ndarray = None

    def __post_init__(self):
        if self.beta is None:
            self.beta = getattr(self.c, "beta", 1.0)

    @property
    def sf(self):
        if self._sf is None:
            self._sf = ch.make_scaled_field(self.tf, self.c, self.f, beta=self.beta)
        return self._sf

    def u0_table(self, n=4096):
        if self._u0_table is None or len(self._u0_table) != n:
            s = self.domain.boundary.sample_params(n)
            self._u0_table = np.asarray(self.u0(s), dtype=float)
        return self._u0_table

    def u0_sup(self):
        return float(np.abs(self.u0_table()).max())

    def u0_variation(self):
        """Discrete 1-D variation of the boundary data over one period."""
        v = self.u0_table()
        return float(np.abs(np.diff(np.concatenate([v, v[:1]]))).sum())

    def f_sup(self, points):
        return 0.0 if self.f is None else float(np.abs(self.f(points)).max())

    def grad_f_sup(self, points, h=1e-5):
        if self.f is None:
            return 0.0
        if self.grad_f is not None:
            g = self.grad_f(points)
        else:
            gx = (self.f(points + [h, 0.0]) - self.f(points - [h, 0.0])) / (2 * h)
            gy = (self.f(points + [0.0, h]) - self.f(points - [0.0, h])) / (2 * h)
            g = np.c_[gx, gy]
        return float(np.hypot(g[:, 0], g[:, 1]).max())

    def linf_bound(self):
        """A priori bound ||u0||_inf + ||f||_inf / (beta * m0)."""
        fs = 0.0
        if self.f is not None:
            pts = sample_grid(self.domain, self.tf, 64)
            fs = self.f_sup(pts)
        return self.u0_sup() + fs / (self.beta * self.tf.m0)

    def with_data(self, u0=None, f=None, grad_f=None, c=None):
        p = replace(self, u0=u0 or self.u0, f=self.f if f is None else f,
                    grad_f=self.grad_f if grad_f is None else grad_f,
                    c=self.c if c is None else c)
        p._sf = None
        p._u0_table = None
        if c is not None:
            p.beta = getattr(c, "beta", p.beta)
        return p

    def solve_with(self, c, f, like, step=1e-3, threads=None, check_points=None):
        """Solve with frozen coefficients on the same grid as `like`.

        Used by the fixed-point iteration of the quasi-linear scheme; raises
        NotCausal when the frozen transport field violates the declared beta.
        """
        frozen = self.with_data(c=c, f=f)
        if check_points is None:
            check_points = sample_grid(self.domain, self.tf, 32)
        check_causality(self.tf, c, check_points)
        return solve_on_grid(frozen, resolution=like.resolution, step=step, threads=threads)


def make_linear_problem(domain, tf, c, u0, f=None, grad_f=None, validate=True,
                        check_resolution=48):
    """Assemble a problem; optionally verify causality on a coarse sampling."""
    p = LinearProblem(domain=domain, tf=tf, c=c, u0=u0, f=f, grad_f=grad_f)
    if validate:
        pts = sample_grid(domain, tf, check_resolution)
        beta_est = check_causality(tf, c, pts)
        if beta_est <= 0:
            raise AssertionError("unreachable; check_causality raises NotCausal")
    return p


def u0_from_samples(curve, values):
    """Piecewise-constant boundary data from equispaced samples.

    Constant interpolation keeps jumps sharp, which is what transported BV
    data needs; linear interpolation would smear them.
    """
    vals = np.asarray(values, dtype=float)
    n = len(vals)
    a, b = curve.period

    def u0(s):
        idx = np.floor((np.asarray(s, dtype=float) - a) / (b - a) * n).astype(np.intp) % n
        return vals[idx]

    return u0


# ---------------------------------------------------------------------------
# grid functions

MASK_OUTSIDE, MASK_INSIDE, MASK_TUBE = 0, 1, 2


@dataclass
class GridFunction:
    """Raster of solution samples over the domain bounding box."""

    values: np.ndarray
    mask: np.ndarray  # uint8, {0 outside, 1 inside, 2 sigma tube}
    spacing: float
    origin: tuple  # world coordinates of cell (0, 0) center

    @property
    def resolution(self):
        return self.values.shape[1]

    def finite(self):
        return self.mask > 0

    def cell_centers(self, which=None):
        ny, nx = self.values.shape
        jj, ii = np.meshgrid(np.arange(nx), np.arange(ny))
        if which is not None:
            ii, jj = ii[which], jj[which]
        return np.c_[self.origin[0] + jj.ravel() * self.spacing,
                     self.origin[1] + ii.ravel() * self.spacing]

    def l1(self):
        """Midpoint-rule L1 norm over all finite cells."""
        return float(np.abs(self.values[self.finite()]).sum() * self.spacing**2)

    def integral(self):
        return float(self.values[self.finite()].sum() * self.spacing**2)

    def linf(self):
        return float(np.abs(self.values[self.finite()]).max())

    def area(self):
        return float(self.finite().sum() * self.spacing**2)

    def like(self, values):
        return GridFunction(values=np.asarray(values, dtype=float), mask=self.mask.copy(),
                            spacing=self.spacing, origin=self.origin)

    def diff_l1(self, other):
        m = self.finite() & other.finite()
        return float(np.abs(self.values[m] - other.values[m]).sum() * self.spacing**2)


def _grid_layout(domain, resolution):
    xmin, xmax, ymin, ymax = domain.bbox
    h = (xmax - xmin) / resolution
    ny = int(round((ymax - ymin) / h))
    origin = (xmin + 0.5 * h, ymin + 0.5 * h)
    return h, resolution, ny, origin


def _side_of(stopset, P):
    """Rough side labels (+1/-1/0) w.r.t. the nearest stop-set arc."""
    k, t, _ = stopset.project(P)
    labels = np.zeros(len(P))
    for arc_id in np.unique(k):
        sel = k == arc_id
        arc = stopset.arcs[arc_id]
        proj = arc.position(t[sel])
        nrm = arc.normal(t[sel])
        v = P[sel] - proj
        labels[sel] = np.sign(v[:, 0] * nrm[:, 0] + v[:, 1] * nrm[:, 1])
    return labels


def _fill_tube(domain, centers_tube, centers_done, values_done):
    """One-sided nearest-neighbor fill: never average across the stop set."""
    if len(centers_tube) == 0:
        return np.empty(0)
    tree = cKDTree(centers_done)
    if domain.stopset.degenerate:
        _, idx = tree.query(centers_tube)
        return values_done[idx]
    side_tube = _side_of(domain.stopset, centers_tube)
    k = min(16, len(centers_done))
    _, idx = tree.query(centers_tube, k=k)
    idx = np.atleast_2d(idx)
    side_done = _side_of(domain.stopset, centers_done)
    out = np.empty(len(centers_tube))
    for i in range(len(centers_tube)):
        cands = idx[i]
        match = cands[side_done[cands] == side_tube[i]]
        out[i] = values_done[match[0] if len(match) else cands[0]]
    return out


def _chunked_backward(P, p, step, threads):
    """Backward endpoints and f-integrals, split across threads by chunks."""
    n = len(P)
    nthreads = analytic_thread_count(threads)
    ends = np.empty_like(P)
    fint = np.empty(n)

    def run(lo, hi):
        e, fi, _, _ = ch.backward_endpoints(P[lo:hi], p.sf, p.tf, step)
        ends[lo:hi] = e
        fint[lo:hi] = fi

    if nthreads == 1 or n < 4 * nthreads:
        run(0, n)
    else:
        bounds = np.linspace(0, n, nthreads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            for fut in [pool.submit(run, bounds[i], bounds[i + 1]) for i in range(nthreads)]:
                fut.result()
    return ends, fint


def evaluate_batch(p, P, step=1e-3, threads=None):
    """Solution values at a batch of interior points."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    ends, fint = _chunked_backward(P, p, step, threads)
    s, _ = p.domain.boundary.project(ends)
    return np.asarray(p.u0(s), dtype=float) + fint


def evaluate_solution(p, x, step=1e-3):
    """Pointwise solution u(x) by one backward characteristic."""
    return float(evaluate_batch(p, np.asarray(x, dtype=float)[None, :], step)[0])


def solve_on_grid(p, resolution=128, step=1e-3, threads=None, tube_cells=1.0,
                  tube_t0=1e-4):
    """Evaluate the solution at every inside cell center.

    Cells within `tube_cells` grid spacings of the stop set (or inside the
    T0 stop tube) are filled by same-side nearest-neighbor extension.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    h, nx, ny, origin = _grid_layout(p.domain, resolution)
    g = GridFunction(values=np.zeros((ny, nx)), mask=np.zeros((ny, nx), dtype=np.uint8),
                     spacing=h, origin=origin)
    centers = g.cell_centers()
    inside = p.domain.contains(centers)
    sig_d = p.domain.stopset.distance(centers)
    t0 = transform_time_raw(p.tf, centers)
    tube = inside & ((sig_d <= tube_cells * h) | (t0 > 1.0 - tube_t0))
    compute = inside & ~tube

    vals = np.full(nx * ny, np.nan)
    P = centers[compute]
    vals[compute] = evaluate_batch(p, P, step=step, threads=threads)
    if tube.any():
        vals[tube] = _fill_tube(p.domain, centers[tube], centers[compute], vals[compute])

    g.values = vals.reshape(ny, nx)
    m = np.zeros(nx * ny, dtype=np.uint8)
    m[compute] = MASK_INSIDE
    m[tube] = MASK_TUBE
    g.mask = m.reshape(ny, nx)
    g.values[g.mask == MASK_OUTSIDE] = 0.0
    return g


# ---------------------------------------------------------------------------
# level-line traces and restart


@dataclass
class LevelTrace:
    """Solution samples along one level line of T0."""

    level: float
    params: np.ndarray  # boundary parameters launching the samples
    points: np.ndarray  # (n, 2) on the level line
    values: np.ndarray
    arclength: np.ndarray  # cumulative polyline coordinate

    def variation(self):
        return float(np.abs(np.diff(np.concatenate([self.values, self.values[:1]]))).sum())


def trace_on_level(p, lam, n=1024, step=1e-3):
    """Sample u along the level line {T0 = lam} via forward characteristics."""
    eps = p.tf.eps_sigma
    if not (0.05 <= lam <= 1.0 - eps - 0.05):
        raise ValueError("level must lie in [0.05, 1 - eps - 0.05]")
    params = p.domain.boundary.sample_params(n)
    starts = p.domain.boundary.position(params)
    durations = np.full(n, lam)
    ends, fint, _ = ch.advect_clock(starts, durations, p.sf.rhs_forward, step)
    if not p.domain.in_bbox(ends).all():
        raise LevelNotFound(f"level line {lam} left the bounding box")
    vals = np.asarray(p.u0(params), dtype=float) + fint
    seg = np.hypot(*np.diff(ends, axis=0).T)
    arcl = np.concatenate([[0.0], np.cumsum(seg)])
    return LevelTrace(level=lam, params=params, points=ends, values=vals, arclength=arcl)


def restart_solve(p, lam, trace, resolution=128, step=1e-3, threads=None,
                  tube_cells=1.0, tube_t0=1e-4):
    """Solve on the upper set {T0 > lam} with the level trace as inflow data.

    The backward characteristics are stopped after clock time T0(x) - lam and
    the trace value nearest to the arrival point is taken as the datum.
    """
    if abs(trace.level - lam) > 1e-12:
        raise ValueError("trace was sampled at a different level")
    h, nx, ny, origin = _grid_layout(p.domain, resolution)
    g = GridFunction(values=np.zeros((ny, nx)), mask=np.zeros((ny, nx), dtype=np.uint8),
                     spacing=h, origin=origin)
    centers = g.cell_centers()
    inside = p.domain.contains(centers)
    t0 = transform_time_raw(p.tf, centers)
    above = inside & (t0 > lam)
    sig_d = p.domain.stopset.distance(centers)
    tube = above & ((sig_d <= tube_cells * h) | (t0 > 1.0 - tube_t0))
    compute = above & ~tube

    P = centers[compute]
    durations = t0[compute] - lam
    ends, fint, _ = ch.advect_clock(P, durations, p.sf.rhs_backward, step)
    tree = cKDTree(trace.points)
    _, idx = tree.query(ends)
    vals = np.full(nx * ny, np.nan)
    vals[compute] = trace.values[idx] + fint
    if tube.any():
        vals[tube] = _fill_tube(p.domain, centers[tube], centers[compute], vals[compute])
    g.values = vals.reshape(ny, nx)
    m = np.zeros(nx * ny, dtype=np.uint8)
    m[compute] = MASK_INSIDE
    m[tube] = MASK_TUBE
    g.mask = m.reshape(ny, nx)
    g.values[g.mask == MASK_OUTSIDE] = 0.0
    return g


# ---------------------------------------------------------------------------
# one-sided traces on the stop set


@dataclass
class StopSetTraces:
    arc_index: int
    arc_params: np.ndarray
    points: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    arclength: np.ndarray


def traces_on_stopset(p, k, n, delta=5e-3, node_excl=0.02, step=1e-3, threads=None):
    """One-sided limits of u on arc k by offset evaluation.

    Values at z +/- delta*n and z +/- (delta/2)*n are combined by first-order
    Richardson extrapolation toward the arc.
    """
    if p.domain.stopset.degenerate:
        raise NodeProximity("stop set is a point; there are no arc traces")
    arc = p.domain.stopset.arcs[k]
    if n == 0:
        e = np.empty(0)
        return StopSetTraces(k, e, np.empty((0, 2)), e, e, e)
    t = np.linspace(node_excl, 1.0 - node_excl, n)
    if node_excl <= 0 or node_excl >= 0.5:
        raise NodeProximity("node exclusion radius must lie in (0, 0.5)")
    z = arc.position(t)
    nrm = arc.normal(t)
    offs = [z + delta * nrm, z + 0.5 * delta * nrm, z - delta * nrm, z - 0.5 * delta * nrm]
    vals = evaluate_batch(p, np.vstack(offs), step=step, threads=threads)
    vp1, vp2, vm1, vm2 = np.split(vals, 4)
    u_plus = 2.0 * vp2 - vp1
    u_minus = 2.0 * vm2 - vm1
    seg = np.hypot(*np.diff(z, axis=0).T)
    arcl = np.concatenate([[0.0], np.cumsum(seg)])
    return StopSetTraces(k, t, z, u_plus, u_minus, arcl)
