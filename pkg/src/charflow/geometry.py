"""Domain geometry: boundary curves, stop sets, and projection queries.

All curve/arc parametrizations are vectorized closures mapping a 1-D numpy
array of parameters to an (N, 2) array of points.  Geometry objects are
immutable after construction and all queries are pure.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import AmbiguousProjection

_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


def _as_points(x):
    """Accept a single (2,) point or an (N, 2) batch; return batch + scalar flag."""
    p = np.asarray(x, dtype=float)
    if p.ndim == 1:
        return p[None, :], True
    return p, False


def _golden_minimize(fun, lo, hi, iters=32):
    """Vectorized golden-section minimization of fun over per-row brackets."""
    a = lo.copy()
    b = hi.copy()
    for _ in range(iters):
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = fun(c) < fun(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    mid = 0.5 * (a + b)
    return mid, fun(mid)


class BoundaryCurve:
    """Closed boundary curve with a regular periodic parametrization.

    Parameters
    ----------
    period : (a, b) tuple
        Generator interval [a, b) of the parametrization.
    position, tangent : callables
        Vectorized maps from parameters (N,) to points/vectors (N, 2).
    orientation : str
        "clockwise" or "counterclockwise".
    samples : int
        Resolution of the cached polyline used for projection queries.
    """

    def __init__(self, period, position, tangent, orientation="clockwise", samples=4096):
        self.period = (float(period[0]), float(period[1]))
        self.position = position
        self.tangent = tangent
        self.orientation = orientation
        a, b = self.period
        self._s = np.linspace(a, b, samples, endpoint=False)
        self._pts = position(self._s)
        self._ds = (b - a) / samples
        self._tree = cKDTree(self._pts)

    @property
    def span(self):
        return self.period[1] - self.period[0]

    def wrap(self, s):
        a, b = self.period
        return a + np.mod(s - a, b - a)

    def sample_params(self, n):
        a, b = self.period
        return np.linspace(a, b, n, endpoint=False)

    def polyline(self):
        return self._pts

    def project(self, x):
        """Nearest boundary point: returns (s, dist) for one point or a batch."""
        P, scalar = _as_points(x)
        _, idx = self._tree.query(P)
        s0 = self._s[idx]
        lo = s0 - 1.5 * self._ds
        hi = s0 + 1.5 * self._ds

        def dist2(s):
            q = self.position(self.wrap(s))
            return np.sum((q - P) ** 2, axis=1)

        s_best, d2 = _golden_minimize(dist2, lo, hi)
        s_best = self.wrap(s_best)
        d = np.sqrt(d2)
        if scalar:
            return float(s_best[0]), float(d[0])
        return s_best, d

    def length(self):
        d = np.diff(np.vstack([self._pts, self._pts[:1]]), axis=0)
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


class StopArc:
    """One oriented C1 arc of a stop set, parametrized over [0, 1]."""

    def __init__(self, position, normal, samples=512):
        self.position = position
        self.normal = normal
        self._t = np.linspace(0.0, 1.0, samples)
        self._pts = position(self._t)
        seg = np.diff(self._pts, axis=0)
        self._cum = np.concatenate([[0.0], np.cumsum(np.hypot(seg[:, 0], seg[:, 1]))])
        self.length = float(self._cum[-1])
        self._tree = cKDTree(self._pts)

    def endpoints(self):
        return self._pts[0], self._pts[-1]

    def project(self, P):
        """Per-point nearest parameter and distance on this arc."""
        _, idx = self._tree.query(P)
        t0 = self._t[idx]
        dt = self._t[1] - self._t[0]
        lo = np.clip(t0 - 1.5 * dt, 0.0, 1.0)
        hi = np.clip(t0 + 1.5 * dt, 0.0, 1.0)

        def dist2(t):
            q = self.position(np.clip(t, 0.0, 1.0))
            return np.sum((q - P) ** 2, axis=1)

        t_best, d2 = _golden_minimize(dist2, lo, hi)
        return np.clip(t_best, 0.0, 1.0), np.sqrt(d2)


class StopSet:
    """Interior outflow set: an isolated point or a tree of oriented C1 arcs."""

    def __init__(self, arcs=(), nodes=(), point=None):
        self.arcs = list(arcs)
        self.nodes = list(nodes)  # (xy, kind) with kind in {terminal, branching, kink}
        self.degenerate = not self.arcs
        if self.degenerate and point is None:
            raise ValueError("degenerate stop set needs the isolated point")
        self.point = None if point is None else np.asarray(point, dtype=float)
        self.total_length = sum(a.length for a in self.arcs)

    def distance(self, x):
        """Distance from point(s) to the stop set."""
        P, scalar = _as_points(x)
        if self.degenerate:
            d = np.hypot(P[:, 0] - self.point[0], P[:, 1] - self.point[1])
        else:
            d = np.full(len(P), np.inf)
            for arc in self.arcs:
                _, da = arc.project(P)
                d = np.minimum(d, da)
        return float(d[0]) if scalar else d

    def project(self, x):
        """Nearest arc: returns (arc index, param, dist, signed normal offset)."""
        P, scalar = _as_points(x)
        best_k = np.zeros(len(P), dtype=int)
        best_t = np.zeros(len(P))
        best_d = np.full(len(P), np.inf)
        for k, arc in enumerate(self.arcs):
            t, d = arc.project(P)
            take = d < best_d
            best_k[take] = k
            best_t[take] = t[take]
            best_d[take] = d[take]
        if scalar:
            return int(best_k[0]), float(best_t[0]), float(best_d[0])
        return best_k, best_t, best_d

    def min_node_spacing(self):
        if len(self.nodes) < 2:
            return self.arcs[0].length if self.arcs else 0.0
        pts = np.array([xy for xy, _ in self.nodes], dtype=float)
        d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
        d[d == 0] = np.inf
        return float(d.min())


@dataclass(frozen=True)
class Domain:
    """Bounded simply connected domain with boundary curve and interior stop set."""

    boundary: BoundaryCurve
    stopset: StopSet
    bbox: tuple  # (xmin, xmax, ymin, ymax)
    name: str = "custom"

    def contains(self, x, edges=1024, chunk=1024):
        """Even-odd crossing test against a decimated boundary polyline."""
        P, scalar = _as_points(x)
        poly = self.boundary.polyline()
        stride = max(1, len(poly) // edges)
        poly = poly[::stride]
        x0, y0 = poly[:, 0], poly[:, 1]
        x1 = np.roll(x0, -1)
        y1 = np.roll(y0, -1)
        dx = x1 - x0
        dy = y1 - y0
        inside = np.empty(len(P), dtype=bool)
        for lo in range(0, len(P), chunk):
            px = P[lo:lo + chunk, 0][:, None]
            py = P[lo:lo + chunk, 1][:, None]
            crosses = (y0[None, :] > py) != (y1[None, :] > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x0[None, :] + (py - y0[None, :]) / dy[None, :] * dx[None, :]
            hits = crosses & (px < xint)
            inside[lo:lo + chunk] = (hits.sum(axis=1) % 2) == 1
        return bool(inside[0]) if scalar else inside

    def in_bbox(self, x):
        P, scalar = _as_points(x)
        xmin, xmax, ymin, ymax = self.bbox
        ok = (P[:, 0] >= xmin) & (P[:, 0] <= xmax) & (P[:, 1] >= ymin) & (P[:, 1] <= ymax)
        return bool(ok[0]) if scalar else ok


# ---------------------------------------------------------------------------
# operations


def project_to_boundary(domain, x):
    """Nearest boundary point of x: returns (parameter, distance)."""
    return domain.boundary.project(x)


def classify_side(stopset, x, tube_radius=None, node_excl=0.02):
    """Classify x as lying on the +/- side of its nearest stop-set arc.

    Returns (arc index, side, dist) with side in {+1, -1}.  Raises
    AmbiguousProjection when the nearest projection is a node, is shared by
    two arcs at tolerance, or lies beyond the classification tube.
    """
    if stopset.degenerate:
        raise AmbiguousProjection("stop set is an isolated point; sides are undefined")
    x = np.asarray(x, dtype=float)
    if tube_radius is None:
        tube_radius = 0.1 * stopset.min_node_spacing()
    k, t, d = stopset.project(x)
    if d > tube_radius:
        raise AmbiguousProjection(f"point at distance {d:.3g} is outside the side tube {tube_radius:.3g}")
    arc = stopset.arcs[k]
    if t < node_excl or t > 1.0 - node_excl:
        raise AmbiguousProjection("nearest projection is a stop-set node")
    # non-unique across arcs at tolerance
    for j, other in enumerate(stopset.arcs):
        if j == k:
            continue
        _, dj = other.project(x[None, :])
        if dj[0] <= d + 1e-12:
            raise AmbiguousProjection("projection shared by two arcs")
    p = arc.position(np.array([t]))[0]
    n = arc.normal(np.array([t]))[0]
    v = x - p
    dot = float(v @ n)
    if abs(dot) < 1e-14:
        raise AmbiguousProjection("point lies on the arc at tolerance")
    side = 1 if dot > 0 else -1
    return k, side, float(d)


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)  # (name, passed, detail)

    def add(self, name, passed, detail=""):
        self.entries.append((name, bool(passed), detail))

    @property
    def ok(self):
        return all(p for _, p, _ in self.entries)

    def as_dict(self):
        return {n: {"passed": p, "detail": d} for n, p, d in self.entries}


def validate_domain(domain, n_samples=256):
    """Sample-based validity checks; failures are report entries, not errors."""
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    rep = ValidationReport()
    s = domain.boundary.sample_params(n_samples)
    pts = domain.boundary.position(s)
    tan = domain.boundary.tangent(s)
    tmag = np.hypot(tan[:, 0], tan[:, 1])
    rep.add("boundary regularity", tmag.min() > 1e-12, f"min |tangent| = {tmag.min():.3g}")

    # simplicity at sample scale: non-neighbor samples keep a positive gap
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    n = len(pts)
    i = np.arange(n)
    ring_gap = np.minimum(np.abs(i[:, None] - i[None, :]), n - np.abs(i[:, None] - i[None, :]))
    d[ring_gap <= 2] = np.inf
    seg = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
    rep.add("simplicity at sample scale", d.min() > 0.5 * seg.max(),
            f"min non-neighbor gap = {d.min():.3g}")

    # stop set compactly contained
    if domain.stopset.degenerate:
        sig_pts = domain.stopset.point[None, :]
    else:
        sig_pts = np.vstack([a._pts for a in domain.stopset.arcs])
    bd_tree = cKDTree(domain.boundary.polyline())
    margin, _ = bd_tree.query(sig_pts)
    inside = domain.contains(sig_pts)
    rep.add("stop set compactly contained", bool(inside.all()) and margin.min() > 1e-9,
            f"min margin = {margin.min():.3g}")

    rep.add("boundary inside bbox", bool(domain.in_bbox(pts).all()), "")

    if not domain.stopset.degenerate:
        rep.add("stop set tree structure", _is_tree(domain.stopset), "")
    return rep


def _is_tree(stopset, tol=1e-9):
    """Connected and loop-free: components == 1 and edges == vertices - 1."""
    ends = []
    for arc in stopset.arcs:
        p0, p1 = arc.endpoints()
        ends.append(p0)
        ends.append(p1)
    ends = np.asarray(ends)
    n_v = 0
    label = np.full(len(ends), -1, dtype=int)
    for i in range(len(ends)):
        if label[i] >= 0:
            continue
        same = np.hypot(ends[:, 0] - ends[i, 0], ends[:, 1] - ends[i, 1]) < tol
        label[same] = n_v
        n_v += 1
    # union-find over arcs as edges
    parent = list(range(n_v))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in range(len(stopset.arcs)):
        a, b = find(label[2 * k]), find(label[2 * k + 1])
        if a == b:
            return False  # loop
        parent[a] = b
    roots = {find(v) for v in range(n_v)}
    return len(roots) == 1


# ---------------------------------------------------------------------------
# built-in domains


def disk_domain():
    """Unit disk with the origin as isolated stop point."""

    def pos(s):
        s = np.asarray(s, dtype=float)
        return np.c_[np.cos(s), -np.sin(s)]

    def tan(s):
        s = np.asarray(s, dtype=float)
        return np.c_[-np.sin(s), -np.cos(s)]

    curve = BoundaryCurve((0.0, 2.0 * np.pi), pos, tan, orientation="clockwise")
    sigma = StopSet(point=(0.0, 0.0))
    return Domain(curve, sigma, bbox=(-1.0, 1.0, -1.0, 1.0), name="disk")


def _segment_arc(half=0.5, y=0.0):
    def pos(t):
        t = np.asarray(t, dtype=float)
        return np.c_[-half + 2 * half * t, np.full_like(t, y)]

    def nrm(t):
        t = np.asarray(t, dtype=float)
        return np.c_[np.zeros_like(t), np.ones_like(t)]

    return StopArc(pos, nrm)


def disk_segment_domain():
    """Unit disk with a centered horizontal segment of length 1 as stop set."""
    base = disk_domain()
    arc = _segment_arc(0.5)
    sigma = StopSet(arcs=[arc], nodes=[((-0.5, 0.0), "terminal"), ((0.5, 0.0), "terminal")])
    return Domain(base.boundary, sigma, bbox=base.bbox, name="disk-segment")


def rect_skeleton_domain(a=1.0, b=0.6):
    """Axis-aligned rectangle [-a,a]x[-b,b] with the central medial segment.

    The boundary is piecewise C1 (corners); the parametrization is by
    arclength, clockwise, starting at the top-left corner.
    """
    if not a > b > 0:
        raise ValueError("need a > b > 0")
    L = np.array([2 * a, 2 * b, 2 * a, 2 * b])
    cum = np.concatenate([[0.0], np.cumsum(L)])
    perim = cum[-1]
    corners = np.array([[-a, b], [a, b], [a, -b], [-a, -b]])
    dirs = np.array([[1.0, 0.0], [0.0, -1.0], [-1.0, 0.0], [0.0, 1.0]])

    def pos(s):
        s = np.mod(np.asarray(s, dtype=float), perim)
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, 3)
        return corners[idx] + (s - cum[idx])[:, None] * dirs[idx]

    def tan(s):
        s = np.mod(np.asarray(s, dtype=float), perim)
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, 3)
        return dirs[idx].copy()

    curve = BoundaryCurve((0.0, perim), pos, tan, orientation="clockwise")
    arc = _segment_arc(a - b)
    sigma = StopSet(arcs=[arc], nodes=[((-(a - b), 0.0), "terminal"), ((a - b, 0.0), "terminal")])
    return Domain(curve, sigma, bbox=(-a, a, -b, b), name="rect-skeleton")


BUILTIN_DOMAINS = {
    "disk": disk_domain,
    "disk-segment": disk_segment_domain,
    "rect-skeleton": rect_skeleton_domain,
}


def domain_by_name(name):
    try:
        return BUILTIN_DOMAINS[name]()
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choices: {sorted(BUILTIN_DOMAINS)}") from None
