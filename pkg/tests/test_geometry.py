import numpy as np
import pytest

from charflow import geometry as geo
from charflow.errors import AmbiguousProjection


@pytest.fixture(scope="module")
def disk():
    return geo.disk_domain()


@pytest.fixture(scope="module")
def disk_segment():
    return geo.disk_segment_domain()


class TestProjectToBoundary:
    def test_outside_point(self, disk):
        s, dist = geo.project_to_boundary(disk, np.array([2.0, 0.0]))
        assert dist == pytest.approx(1.0, abs=1e-9)
        assert np.allclose(disk.boundary.position(np.array([s]))[0], [1.0, 0.0], atol=1e-7)

    def test_point_near_boundary(self, disk):
        s, dist = geo.project_to_boundary(disk, np.array([0.999, 0.0]))
        assert dist == pytest.approx(0.001, abs=1e-9)
        assert np.allclose(disk.boundary.position(np.array([s]))[0], [1.0, 0.0], atol=1e-7)

    def test_interior_point(self, disk):
        s, dist = geo.project_to_boundary(disk, np.array([0.0, -0.5]))
        assert dist == pytest.approx(0.5, abs=1e-9)
        assert np.allclose(disk.boundary.position(np.array([s]))[0], [0.0, -1.0], atol=1e-7)

    def test_boundary_points_project_to_themselves(self, disk):
        s = disk.boundary.sample_params(64) + 1e-4
        pts = disk.boundary.position(s)
        s_hat, dist = disk.boundary.project(pts)
        assert dist.max() < 1e-9
        assert np.allclose(disk.boundary.position(s_hat), pts, atol=1e-7)


class TestClassifySide:
    def test_plus_side(self, disk_segment):
        k, side, d = geo.classify_side(disk_segment.stopset, np.array([0.0, 0.1]))
        assert (k, side) == (0, 1)
        assert d == pytest.approx(0.1)

    def test_minus_side(self, disk_segment):
        k, side, d = geo.classify_side(disk_segment.stopset, np.array([0.0, -0.1]))
        assert (k, side) == (0, -1)
        assert d == pytest.approx(0.1)

    def test_node_projection_refused(self, disk_segment):
        with pytest.raises(AmbiguousProjection):
            geo.classify_side(disk_segment.stopset, np.array([0.6, 0.0]))

    def test_outside_tube_refused(self, disk_segment):
        with pytest.raises(AmbiguousProjection):
            geo.classify_side(disk_segment.stopset, np.array([0.0, 0.9]))

    def test_degenerate_stop_set_refused(self, disk):
        with pytest.raises(AmbiguousProjection):
            geo.classify_side(disk.stopset, np.array([0.0, 0.1]))

    def test_side_flips_under_reflection(self, disk_segment):
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.4, 0.4, 16)
        y = rng.uniform(0.01, 0.09, 16)
        for xi, yi in zip(x, y):
            _, s1, _ = geo.classify_side(disk_segment.stopset, np.array([xi, yi]))
            _, s2, _ = geo.classify_side(disk_segment.stopset, np.array([xi, -yi]))
            assert s1 == -s2


class TestValidateDomain:
    def test_disk_all_pass(self, disk):
        rep = geo.validate_domain(disk, 256)
        assert rep.ok, rep.entries

    def test_disk_segment_and_rect_pass(self, disk_segment):
        assert geo.validate_domain(disk_segment).ok
        assert geo.validate_domain(geo.rect_skeleton_domain()).ok

    def test_sigma_touching_boundary_fails(self, disk):
        arc = geo._segment_arc(half=1.0)  # reaches (+-1, 0) on the circle
        sigma = geo.StopSet(arcs=[arc], nodes=[((-1.0, 0.0), "terminal"), ((1.0, 0.0), "terminal")])
        bad = geo.Domain(disk.boundary, sigma, bbox=disk.bbox)
        rep = geo.validate_domain(bad)
        failed = {n for n, p, _ in rep.entries if not p}
        assert "stop set compactly contained" in failed

    def test_cusp_boundary_fails_regularity(self):
        # half cardioid: the tangent vanishes at s = pi
        def pos(s):
            s = np.asarray(s, dtype=float)
            return np.c_[0.5 * (1 + np.cos(s)) * np.cos(s) + 0.25,
                         -0.5 * (1 + np.cos(s)) * np.sin(s)]

        def tan(s):
            s = np.asarray(s, dtype=float)
            dx = 0.5 * (-np.sin(s) * np.cos(s) - (1 + np.cos(s)) * np.sin(s))
            dy = -0.5 * (-np.sin(s) * np.sin(s) + (1 + np.cos(s)) * np.cos(s))
            return np.c_[dx, dy]

        curve = geo.BoundaryCurve((0.0, 2 * np.pi), pos, tan)
        dom = geo.Domain(curve, geo.StopSet(point=(0.5, 0.0)), bbox=(-1, 2, -1, 1))
        rep = geo.validate_domain(dom, 256)
        failed = {n for n, p, _ in rep.entries if not p}
        assert "boundary regularity" in failed

    def test_small_sample_count_rejected(self, disk):
        with pytest.raises(ValueError):
            geo.validate_domain(disk, 8)


class TestStopSetTree:
    def test_single_arc_is_tree(self, disk_segment):
        assert geo._is_tree(disk_segment.stopset)

    def test_loop_is_rejected(self):
        # two arcs sharing both endpoints form a loop
        def upper(t):
            t = np.asarray(t, dtype=float)
            return np.c_[np.cos(np.pi * (1 - t)) * 0.5, 0.2 * np.sin(np.pi * t)]

        def lower(t):
            t = np.asarray(t, dtype=float)
            return np.c_[np.cos(np.pi * (1 - t)) * 0.5, -0.2 * np.sin(np.pi * t)]

        def nrm(t):
            t = np.asarray(t, dtype=float)
            return np.c_[np.zeros_like(t), np.ones_like(t)]

        loop = geo.StopSet(arcs=[geo.StopArc(upper, nrm), geo.StopArc(lower, nrm)],
                           nodes=[((-0.5, 0.0), "branching"), ((0.5, 0.0), "branching")])
        assert not geo._is_tree(loop)

    def test_two_arc_tree(self):
        def left(t):
            t = np.asarray(t, dtype=float)
            return np.c_[-0.5 + 0.5 * t, np.zeros_like(t)]

        def up(t):
            t = np.asarray(t, dtype=float)
            return np.c_[np.zeros_like(t), 0.4 * t]

        def nrm(t):
            t = np.asarray(t, dtype=float)
            return np.c_[np.zeros_like(t), np.ones_like(t)]

        tree = geo.StopSet(arcs=[geo.StopArc(left, nrm), geo.StopArc(up, nrm)],
                           nodes=[((-0.5, 0.0), "terminal"), ((0.0, 0.0), "branching"),
                                  ((0.0, 0.4), "terminal")])
        assert geo._is_tree(tree)
        # arcs - interior joins = components = 1
        assert len(tree.arcs) - 1 == 1


def test_domain_contains(disk):
    pts = np.array([[0.0, 0.0], [0.5, 0.5], [0.99, 0.0], [1.01, 0.0], [2.0, 2.0]])
    assert list(disk.contains(pts)) == [True, True, True, False, False]


def test_builtin_domain_names():
    for name in ("disk", "disk-segment", "rect-skeleton"):
        assert geo.domain_by_name(name).name == name
    with pytest.raises(ValueError):
        geo.domain_by_name("torus")
