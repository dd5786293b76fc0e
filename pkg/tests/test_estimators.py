import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from oracles import nested_inner_mass
from snapbm import (Circle, DomainSpec, SimConfig, doeblin_constant, histogram,
                    mixing_time_estimate, pi_min_estimate, simulate_paths, stationary_estimate,
                    tv_distance)
from snapbm.errors import EmptyEnsemble, GridMismatch, HorizonTooShort, NotConverged, SmallSample
from snapbm.estimators import (GridHistogram, average, default_start_mesh, histogram_grid,
                               write_pi_hat_csv, write_summary_json, write_tv_curve_csv)
from snapbm.geometry import area, sample_uniform
from snapbm.scenarios import disk_one_barrier, disk_plain, nested_circles

DISK = disk_plain()
GRID = histogram_grid(DISK, 0.125)
SMALL = histogram_grid(DISK, 0.5)


def masses(draw_vec):
    v = np.asarray(draw_vec, float) + 1e-12
    return GridHistogram(SMALL, v / v.sum())


vectors = st.lists(st.floats(0, 1), min_size=len(SMALL), max_size=len(SMALL))


class TestHistogram:
    def test_point_mass(self):
        h = histogram(np.tile([0.3, -0.2], (50, 1)), DISK, grid=GRID)
        assert np.count_nonzero(h.mass) == 1
        assert h.mass.max() == 1.0

    def test_empty(self):
        with pytest.raises(EmptyEnsemble):
            histogram(np.zeros((0, 2)), DISK, grid=GRID)

    def test_uniform_samples_match_cell_areas(self):
        n = 1_000_000
        pts = sample_uniform(DISK, n, np.random.default_rng(0))
        h = histogram(pts, DISK, grid=GRID)
        # Cells whose four corners lie in the disk are exactly full.
        corners = GRID.centers[:, None, :] + GRID.h / 2 * np.array([[1, 1], [1, -1], [-1, 1],
                                                                      [-1, -1]])
        full = np.all(np.hypot(corners[..., 0], corners[..., 1]) <= 1, axis=1)
        assert np.all(GRID.fraction[full] == 1.0)
        expect = GRID.cell_area[full] / area(DISK)
        z = (h.mass[full] - expect) / np.sqrt(expect * (1 - expect) / n)
        # A 3-sigma level for the whole family of cells, not for each cell separately.
        z_family = norm.isf(norm.sf(3) / full.sum())
        assert np.abs(z).max() <= z_family
        assert 0.8 <= np.mean(z**2) <= 1.2
        # Partial cells are checked in aggregate against an exact clipped area.
        partial_mass = h.mass[~full].sum()
        exact_partial = 1 - full.sum() * GRID.h**2 / area(DISK)
        se_p = math.sqrt(exact_partial * (1 - exact_partial) / n)
        assert abs(partial_mass - exact_partial) <= 3 * se_p

    def test_merge_is_average(self):
        pts = sample_uniform(DISK, 2000, np.random.default_rng(1))
        a = histogram(pts[:1000], DISK, grid=GRID)
        b = histogram(pts[1000:], DISK, grid=GRID)
        both = histogram(pts, DISK, grid=GRID)
        merged = average([a, b])
        assert np.allclose(merged.mass, both.mass, atol=1e-15)
        assert abs(merged.mass.sum() - 1) < 1e-12

    @given(vectors, vectors, st.floats(0.01, 100))
    def test_average_conserves_mass(self, u, v, w):
        m = average([masses(u), masses(v)], weights=[1.0, w])
        assert abs(m.mass.sum() - 1) < 1e-12
        assert m.mass.min() >= 0


class TestTV:
    def test_examples(self):
        p = np.zeros(len(GRID))
        q = np.zeros(len(GRID))
        p[0] = p[1] = 0.5
        q[0] = 1.0
        P, Q = GridHistogram(GRID, p), GridHistogram(GRID, q)
        assert tv_distance(P, P) == 0
        assert tv_distance(P, Q) == pytest.approx(0.5)
        r = np.zeros(len(GRID))
        r[5] = 1.0
        assert tv_distance(Q, GridHistogram(GRID, r)) == 1.0

    def test_grid_mismatch(self):
        other = histogram_grid(DISK, 0.25)
        with pytest.raises(GridMismatch):
            tv_distance(GRID.uniform(), other.uniform())

    @given(vectors, vectors, vectors)
    def test_metric(self, u, v, w):
        p, q, r = masses(u), masses(v), masses(w)
        assert tv_distance(p, q) == tv_distance(q, p)
        assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-15
        assert 0 <= tv_distance(p, q) <= 1
        assert (tv_distance(p, q) == 0) == np.array_equal(p.mass, q.mass)


class TestPiMin:
    def test_uniform(self):
        pm = pi_min_estimate(GRID.uniform())
        assert pm.value == pytest.approx(1 / math.pi, rel=0.01)

    def test_empty_cell(self):
        pts = sample_uniform(DISK, 3000, np.random.default_rng(2))
        h = histogram(pts, DISK, grid=GRID)
        h.mass[3] = 0
        h.mass /= h.mass.sum()
        with pytest.warns(SmallSample):
            pm = pi_min_estimate(h)
        assert pm.value == 0 and pm.small_sample


@pytest.mark.slow
class TestStationary:
    def test_plain_disk_uniform(self):
        pi = stationary_estimate(DISK, SimConfig(seed=1, particles=20_000, t_final=3.0), 1.0)
        assert tv_distance(pi, pi.grid.uniform()) <= 0.05
        assert pi.diagnostics["converged"]

    def test_symmetric_barrier_uniform(self):
        # The radial interface oracle gives a flat stationary density for equal rates.
        dom = disk_one_barrier(0.5, 1.0, 1.0)
        pi = stationary_estimate(dom, SimConfig(seed=2, particles=20_000, t_final=4.0), 1.0)
        assert tv_distance(pi, pi.grid.uniform()) <= 0.05
        comp = pi.diagnostics["component_mass"]["+"]
        assert abs(comp["mass"] - 0.25) <= 3 * comp["stderr"] + 0.01

    def test_inward_trapping_skews_inward(self):
        pi = stationary_estimate(disk_one_barrier(0.5, 10.0, 0.1),
                                 SimConfig(seed=3, particles=2000, t_final=20.0), 10.0)
        comp = pi.diagnostics["component_mass"]["+"]
        assert comp["mass"] - 3 * comp["stderr"] > 0.25

    def test_outward_nested_inner_mass_below_area_fraction(self):
        dom = nested_circles(1, mode="outward")
        cfg = SimConfig(dt=0.01, seed=4, particles=4000, t_final=100.0)
        pi = stationary_estimate(dom, cfg, 30.0, n_snapshots=40)
        comp = pi.diagnostics["component_mass"]["++"]
        assert comp["mass"] + 3 * comp["stderr"] < 1 / 9
        target = nested_inner_mass([2, 1], [(0.25, 1.0)] * 2, 3)
        assert comp["mass"] == pytest.approx(target, rel=0.3)

    def test_not_converged_flag(self):
        dom = nested_circles(1, mode="outward")
        with pytest.warns(NotConverged):
            pi = stationary_estimate(dom, SimConfig(dt=0.01, seed=5, particles=2000,
                                                    t_final=6.0), 0.0)
        assert not pi.diagnostics["converged"]


@pytest.fixture(scope="module")
def disk_mixing():
    cfg = SimConfig(seed=6, particles=1000, t_final=3.0)
    pi = GRID.uniform()
    times = np.linspace(0.1, 3.0, 30)
    mesh = default_start_mesh(DISK)
    return cfg, pi, times, mesh, mixing_time_estimate(DISK, cfg, mesh, times, pi_hat=pi)


@pytest.mark.slow
class TestMixing:
    def test_disk_order_diameter_squared(self, disk_mixing):
        est = disk_mixing[-1]
        assert 0.2 <= est.t_mix_hat <= 2.0
        assert np.all((est.tv_curve >= 0) & (est.tv_curve <= 1))

    def test_start_mesh_spacing(self, disk_mixing):
        mesh = disk_mixing[3]
        assert len(mesh) >= 40
        assert DISK.contains(mesh).all()

    @given(st.floats(0.01, 0.99), st.floats(0.0, 0.5))
    def test_monotone_in_threshold(self, disk_mixing, lo, gap):
        est = disk_mixing[-1]
        assert est.at_threshold(min(lo + gap, 1.0)) <= est.at_threshold(lo)

    def test_single_start_not_larger(self, disk_mixing):
        cfg, pi, times, mesh, est = disk_mixing
        one = mixing_time_estimate(DISK, cfg, mesh[:1], times, pi_hat=pi)
        assert np.array_equal(one.tv_curve[0], est.tv_curve[0])
        assert one.t_mix_hat <= est.t_mix_hat

    def test_horizon_too_short(self):
        cfg = SimConfig(seed=7, particles=200, t_final=0.05)
        with pytest.warns(HorizonTooShort):
            est = mixing_time_estimate(DISK, cfg, [(0.9, 0.0)], [0.025, 0.05],
                                       pi_hat=GRID.uniform())
        assert est.unbounded and est.t_mix_hat == math.inf


class TestDoeblin:
    @pytest.mark.slow
    def test_disk_near_stationary(self):
        starts = [(0.0, 0.0)] + [(0.9 * math.cos(a), 0.9 * math.sin(a))
                                 for a in np.linspace(0, 2 * math.pi, 8, endpoint=False)]
        est = doeblin_constant(DISK, SimConfig(seed=8, particles=10_000), 4.0, starts)
        assert 0.5 <= est.C * area(DISK) <= 1.0
        assert est.C <= est.C_point

    def test_short_horizon_gives_zero(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SmallSample)
            est = doeblin_constant(DISK, SimConfig(seed=9, particles=500), 0.01, [(0, 0)])
        assert est.C == 0

    @settings(max_examples=5)
    @given(st.floats(0.05, 1.0), st.integers(0, 1000))
    def test_scaled_constant_in_unit_interval(self, T, seed):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SmallSample)
            est = doeblin_constant(DISK, SimConfig(seed=seed, particles=200), T,
                                   [(0.5, 0), (-0.5, 0)])
        assert 0 <= est.C * area(DISK) <= 1

    @pytest.mark.slow
    def test_below_stationary_floor(self):
        dom = disk_one_barrier(0.5, 1.0, 1.0)
        h = histogram_grid(dom, 0.25).h
        cfg = SimConfig(seed=10, particles=20_000, t_final=4.0)
        pi = stationary_estimate(dom, cfg, 1.0, h=h)
        floor = pi_min_estimate(pi)
        est = doeblin_constant(dom, SimConfig(seed=10, particles=4000), 4.0,
                               [(0.0, 0.0), (0.9, 0.0)], h=h)
        sigma = math.sqrt(floor.value / (pi.n_samples * h * h))
        assert est.C <= floor.value + 3 * sigma


def test_writers(tmp_path):
    cfg = SimConfig(seed=1, particles=100, t_final=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonTooShort)
        est = mixing_time_estimate(DISK, cfg, [(0, 0)], [0.1, 0.2], pi_hat=GRID.uniform())
    write_tv_curve_csv(tmp_path / "tv.csv", est)
    assert (tmp_path / "tv.csv").read_text().splitlines()[0] == "start_x,start_y,t,tv"
    write_pi_hat_csv(tmp_path / "pi.csv", GRID.uniform())
    lines = (tmp_path / "pi.csv").read_text().splitlines()
    assert lines[0] == "cell_x,cell_y,mass,cell_area"
    assert len(lines) == len(GRID) + 1
    write_summary_json(tmp_path / "s.json", {"b": math.inf, "a": np.float64(1.5),
                                             "c": np.array([1, 2]), "d": np.bool_(True)})
    data = json.loads((tmp_path / "s.json").read_text())
    assert list(data) == ["a", "b", "c", "d"]
    assert data["b"] == "inf" and data["c"] == [1, 2] and data["d"] is True


def test_ensemble_input():
    ens = simulate_paths(DISK, SimConfig(seed=2, particles=300, t_final=0.1), (0, 0))
    h = histogram(ens, DISK, grid=GRID)
    assert h.n_samples == 300 and abs(h.mass.sum() - 1) < 1e-12
