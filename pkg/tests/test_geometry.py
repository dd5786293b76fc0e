import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import circle_polyline, first_disconnection
from snapbm import (Barrier, Circle, DomainSpec, Ellipse, Spline, area, geodesic_distance,
                    geodesic_diameter, geometry_report, max_curvature, normal_at,
                    separation_rho, side_of)
from snapbm.errors import ConfigError, InvalidGeometry, PointNotOnCurve, PointOutsideDomain
from snapbm.scenarios import crescent_points, disk_one_barrier, nested_circles, nonconvex_spline


def two_circles(r_in=1.0, r_mid=2.0, r_out=3.0):
    return DomainSpec(Circle((0, 0), r_out), (Barrier(Circle((0, 0), r_in), 1, 1),
                                              Barrier(Circle((0, 0), r_mid), 1, 1)))


class TestSide:
    def test_inside_outside_and_on(self):
        c = Circle((0, 0), 2)
        assert side_of(c, (1, 0)) == 1
        assert side_of(c, (3, 0)) == -1
        assert side_of(c, (2, 0)) == 1

    def test_vectorised(self):
        c = Barrier(Ellipse((0, 0), 2, 1, 0.3), 1, 1)
        out = side_of(c, np.array([[0, 0], [5, 5]]))
        assert out.tolist() == [1, -1]

    @given(st.floats(0, 2 * math.pi), st.floats(0.01, 1.0), st.sampled_from([-1, 1]))
    def test_locally_constant_off_curve(self, theta, gap, direction):
        c = Ellipse((0.2, -0.1), 1.5, 0.7, 0.4)
        q = c.polyline(256)[int(theta / (2 * math.pi) * 255)]
        n = c.inward_normal(q[None])[0]
        p = q + direction * gap * n
        tau = 1e-9 * 3
        assert side_of(c, p) == side_of(c, p + tau / 10 * np.array([1, -1]) / math.sqrt(2))


class TestNormal:
    def test_examples(self):
        assert np.allclose(normal_at(Circle((0, 0), 1), (1, 0)), (-1, 0))
        assert np.allclose(normal_at(Circle((0, 0), 1), (0, -1)), (0, 1))
        assert np.allclose(normal_at(Ellipse((0, 0), 2, 1, 0), (2, 0)), (-1, 0))

    def test_off_curve_point_is_rejected(self):
        with pytest.raises(PointNotOnCurve):
            normal_at(Circle((0, 0), 1), (0.5, 0))

    @pytest.mark.parametrize("curve", [Circle((0.3, 0.1), 0.8), Ellipse((0, 0), 2, 1, 0.7),
                                       Spline(crescent_points())])
    def test_unit_and_pointing_inward(self, curve):
        pts = curve.polyline(1000)
        for q in pts:
            n = normal_at(curve, q)
            assert abs(math.hypot(*n) - 1) < 1e-12
            assert side_of(curve, q + 1e-6 * n) == 1


class TestCurvature:
    def test_examples(self):
        dom = DomainSpec(Circle((0, 0), 3), (Barrier(Circle((0, 0), 1), 1, 1),))
        assert max_curvature(dom) == 1.0
        assert max_curvature(nested_circles(2)) == 1.0
        assert max_curvature(DomainSpec(Ellipse((0, 0), 2, 1, 0))) == pytest.approx(2, rel=1e-12)

    @given(st.floats(0.05, 20))
    def test_circle_exact(self, r):
        assert abs(Circle((0, 0), r).max_curvature() - 1 / r) <= 1e-12 / r

    @given(st.floats(0.2, 5), st.floats(0.2, 5))
    def test_ellipse_exact(self, a, b):
        expected = max(a / b**2, b / a**2)
        assert Ellipse((1, 2), a, b, 0.3).max_curvature() == pytest.approx(expected, rel=1e-9)

    def test_spline_of_circle(self):
        t = np.linspace(0, 2 * math.pi, 64, endpoint=False)
        s = Spline(np.column_stack([2 * np.cos(t), 2 * np.sin(t)]))
        assert s.max_curvature() == pytest.approx(0.5, rel=1e-3)


class TestArea:
    def test_examples(self):
        assert abs(area(DomainSpec(Circle((0, 0), 1))) - math.pi) < 1e-6
        assert abs(area(DomainSpec(Circle((0, 0), 3))) - 9 * math.pi) < 1e-5
        assert abs(area(DomainSpec(Ellipse((0, 0), 2, 1, 0))) - 2 * math.pi) < 1e-5

    def test_barriers_do_not_remove_area(self):
        assert area(disk_one_barrier()) == area(DomainSpec(Circle((0, 0), 1)))

    def test_spline_shoelace(self):
        t = np.linspace(0, 2 * math.pi, 200, endpoint=False)
        s = Spline(np.column_stack([np.cos(t), np.sin(t)]))
        assert s.enclosed_area() == pytest.approx(math.pi, rel=1e-5)


class TestRho:
    def test_concentric_against_sampling_oracle(self):
        dom = two_circles()
        polys = [circle_polyline((0, 0), r, 2048) for r in (1, 2, 3)]
        theta = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        centers = [(rr * math.cos(a), rr * math.sin(a))
                   for rr in np.linspace(0.6, 2.9, 24) for a in theta]
        oracle = first_disconnection(polys, centers, np.arange(0.3, 0.7, 0.0025))
        assert oracle == pytest.approx(0.5, abs=0.01)
        assert separation_rho(dom) == pytest.approx(oracle, rel=0.02)

    def test_nested_circles_one(self):
        assert separation_rho(nested_circles(1)) == pytest.approx(0.5, rel=0.02)

    def test_plain_disk_is_capped_at_diameter(self):
        assert separation_rho(DomainSpec(Circle((0, 0), 1))) >= 1.0
        assert separation_rho(DomainSpec(Circle((0, 0), 1))) <= 2.0 + 1e-9

    def test_small_barrier_far_from_wall(self):
        dom = disk_one_barrier(0.05)
        assert separation_rho(dom) == pytest.approx(0.475, rel=0.03)


class TestGeodesic:
    def test_convex_is_euclidean(self):
        d = DomainSpec(Circle((0, 0), 1))
        assert geodesic_distance(d, (-0.9, 0), (0.9, 0)) == pytest.approx(1.8, abs=1e-12)
        assert geodesic_distance(disk_one_barrier(), (-0.9, 0), (0.9, 0)) == \
            pytest.approx(1.8, abs=1e-12)

    def test_outside_point(self):
        with pytest.raises(PointOutsideDomain):
            geodesic_distance(DomainSpec(Circle((0, 0), 1)), (0, 0), (2, 0))

    def test_crescent_against_fine_grid(self):
        dom = nonconvex_spline()
        a, b = (-0.53, 0.53), (-0.53, -0.53)
        coarse = geodesic_distance(dom, a, b)
        from snapbm.geodesic import default_pitch
        fine = geodesic_distance(dom, a, b, h=default_pitch(dom) / 4)
        assert coarse == pytest.approx(fine, rel=0.03)
        # The path must go around the inner wall of radius 0.5.
        assert fine > 0.5 * math.pi * 1.5

    def test_diameters(self):
        assert geodesic_diameter(DomainSpec(Circle((0, 0), 1))) == pytest.approx(2, rel=0.02)
        assert geodesic_diameter(nested_circles(2)) == pytest.approx(10, rel=0.02)
        dom = nonconvex_spline()
        from snapbm.geodesic import default_pitch
        fine = geodesic_diameter(dom, h=default_pitch(dom) / 4)
        assert geodesic_diameter(dom) == pytest.approx(fine, rel=0.03)

    @given(st.lists(st.tuples(st.floats(0, 2 * math.pi), st.floats(0.52, 0.98)),
                    min_size=3, max_size=3))
    def test_metric_properties(self, polar):
        dom = nonconvex_spline(barrier=False)
        pts = [np.array([r * math.cos(t), r * math.sin(t)]) for t, r in polar]
        pts = [p for p in pts if dom.contains(p)]
        if len(pts) < 3:
            return
        x, y, z = pts
        from snapbm.geodesic import default_pitch
        h = default_pitch(dom)
        dxy, dyx = geodesic_distance(dom, x, y), geodesic_distance(dom, y, x)
        assert dxy == dyx
        assert dxy >= np.hypot(*(x - y)) - 1e-9
        assert geodesic_distance(dom, x, z) <= dxy + geodesic_distance(dom, y, z) + 2 * h


class TestReport:
    def test_nested_one(self):
        rep = geometry_report(nested_circles(1))
        assert rep.R == pytest.approx(0.5, rel=0.02)
        assert rep.kappa == 1.0

    def test_disk_with_fast_barrier(self):
        rep = geometry_report(disk_one_barrier(0.5, 2, 2))
        assert rep.kappa == 2.0
        assert rep.lambda_max == 2.0
        assert rep.R == pytest.approx(0.25, rel=0.02)

    def test_linear_in_c(self):
        dom = disk_one_barrier()
        r1 = geometry_report(dom, c=1.0)
        r2 = geometry_report(dom, c=0.1)
        assert r2.R == pytest.approx(0.1 * r1.R, rel=1e-12)

    def test_no_barriers(self):
        rep = geometry_report(DomainSpec(Circle((0, 0), 1)))
        assert rep.lambda_min is None and rep.lambda_max is None
        assert rep.R == pytest.approx(1.0)

    @settings(max_examples=10)
    @given(st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5))
    def test_rigid_motion_invariance(self, angle, sx, sy):
        dom = DomainSpec(Ellipse((0, 0), 2, 1, 0.2), (Barrier(Circle((0.5, 0), 0.3), 1, 2),))
        base = geometry_report(dom, rho=None)
        moved = geometry_report(dom.moved(angle, (sx, sy)))
        for key in ("kappa", "rho", "delta", "area"):
            assert getattr(moved, key) == pytest.approx(getattr(base, key), rel=0.01)


class TestValidation:
    def test_intersecting_barriers(self):
        with pytest.raises(InvalidGeometry):
            DomainSpec(Circle((0, 0), 3), (Barrier(Circle((0, 0), 1), 1, 1),
                                           Barrier(Circle((1, 0), 1), 1, 1)))

    def test_barrier_outside(self):
        with pytest.raises(InvalidGeometry):
            DomainSpec(Circle((0, 0), 1), (Barrier(Circle((0.9, 0), 0.5), 1, 1),))

    def test_nonpositive_rate(self):
        with pytest.raises(InvalidGeometry):
            Barrier(Circle((0, 0), 1), 0.0, 1.0)

    def test_self_intersecting_spline(self):
        with pytest.raises(InvalidGeometry):
            DomainSpec(Spline([(0, 0), (1, 1), (1, 0), (0, 1)]))

    def test_json_round_trip(self):
        dom = nested_circles(2)
        again = DomainSpec.from_json(dom.to_json())
        assert again.to_dict() == dom.to_dict()

    def test_json_error_location(self):
        with pytest.raises(ConfigError, match="line 1"):
            DomainSpec.from_json('{"boundary": {"type": "circle" "radius": 1}}')

    def test_json_missing_rate(self):
        text = ('{"boundary": {"type": "circle", "center": [0, 0], "radius": 2}, '
                '"barriers": [{"type": "circle", "center": [0, 0], "radius": 1}]}')
        with pytest.raises(ConfigError, match="barrier 1"):
            DomainSpec.from_json(text)
