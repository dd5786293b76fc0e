import csv
import json
import math

import numpy as np
import pytest

from snapbm import crossing_probability_scaling, pill_event_probability, time_reversal_uniformity
from snapbm.errors import ConstraintViolation
from snapbm.proofcheck import (CheckResult, endpoint_in_ball, pill_event_euler, wilson_interval,
                               write_proofcheck_csv)
from snapbm.scenarios import disk_one_barrier, disk_plain, nested_circles


def close(a, b, k=3.0):
    return abs(a.estimate - b.estimate) <= k * math.hypot(a.half_width, b.half_width)


class TestPill:
    @pytest.mark.parametrize("args", [(1.0, (0, 0), 0.3, 0.5), (1.0, (0, 0), 0.1, 1.0),
                                      (1.0, (0, 0), 0.1, 0.0), (1.0, (1.5, 0), 0.1, 0.5),
                                      (0.0, (0, 0), 0.1, 0.5)])
    def test_constraints(self, args):
        with pytest.raises(ConstraintViolation):
            pill_event_probability(*args, N=10)

    def test_endpoint_law(self):
        # Centred ball: P(|Z| <= r) = 1 - exp(-r^2 / (2 R^2)) for a planar Gaussian.
        assert endpoint_in_ball(2.0, (0, 0), 0.5) == pytest.approx(1 - math.exp(-0.5**2 / 8))
        rng = np.random.default_rng(5)
        z = rng.normal(size=(400_000, 2))
        mc = np.mean(np.hypot(z[:, 0] - 0.7, z[:, 1]) <= 0.4)
        assert endpoint_in_ball(1.0, (0.7, 0), 0.4) == pytest.approx(mc, abs=4e-3)

    @pytest.mark.slow
    def test_plain_walk_agrees_with_fine_bridge(self):
        fine = pill_event_probability(1.0, (0, 0), 0.4, 0.9, 50_000, seed=11, n_steps=16384)
        plain = pill_event_euler(1.0, (0, 0), 0.4, 0.9, 200_000, seed=12)
        same_dt = pill_event_probability(1.0, (0, 0), 0.4, 0.9, 200_000, seed=13)
        assert close(plain, fine)
        assert close(plain, same_dt)

    def test_scale_invariance(self):
        a = pill_event_probability(1.0, (0.5, 0.0), 0.1, 0.5, 100_000, seed=1, n_steps=512)
        b = pill_event_probability(2.0, (1.0, 0.0), 0.2, 0.5, 100_000, seed=2, n_steps=512)
        assert close(a, b)

    def test_monotone_in_tube_and_target(self):
        kw = dict(N=100_000, n_steps=256)
        g = [pill_event_probability(1.0, (0, 0), 0.1, gm, seed=i, **kw)
             for i, gm in enumerate((0.4, 0.6, 0.9))]
        e = [pill_event_probability(1.0, (0, 0), ep, 0.6, seed=10 + i, **kw)
             for i, ep in enumerate((0.05, 0.1, 0.2))]
        for seq in (g, e):
            for lo, hi in zip(seq, seq[1:]):
                assert lo.estimate <= hi.estimate + 3 * math.hypot(lo.half_width, hi.half_width)
            assert all(0 <= p.estimate <= 1 for p in seq)

    def test_interval_shrinks_like_root_n(self):
        w = [pill_event_probability(1.0, (0, 0), 0.4, 0.9, n, seed=3, n_steps=128).half_width
             / pill_event_probability(1.0, (0, 0), 0.4, 0.9, n, seed=3, n_steps=128).estimate
             for n in (10_000, 100_000, 1_000_000)]
        for a, b in zip(w, w[1:]):
            assert a / b == pytest.approx(math.sqrt(10), rel=0.2)

    def test_wilson(self):
        ci = wilson_interval(0, 100)
        assert ci.estimate == 0 and ci.ci_low == 0 and 0 < ci.ci_high < 0.05
        assert wilson_interval(100, 100).ci_high == 1.0
        ci = wilson_interval(50, 100)
        assert ci.ci_low < 0.5 < ci.ci_high


class TestCrossing:
    def test_vanishes_without_permeability(self):
        tab = crossing_probability_scaling(disk_one_barrier(), [1e-9], 20_000, seed=2)
        assert tab.estimates[0].estimate == 0.0

    @pytest.mark.slow
    def test_same_side_target_does_not_scale(self):
        tab = crossing_probability_scaling(disk_one_barrier(), [0.5, 0.25, 0.125], 100_000,
                                           seed=4, target=(-0.2, 0.0))
        assert all(0.8 <= r <= 1.25 for r in tab.ratios)
        assert abs(tab.slope) < 0.2


class TestTimeReversal:
    def test_zero_time_is_sampling_noise(self):
        assert time_reversal_uniformity(disk_plain(), 0.0, 100_000, seed=1) <= 0.03

    @pytest.mark.slow
    def test_annulus_region(self):
        tv = time_reversal_uniformity(nested_circles(1), 8.0, 100_000, seed=2, region=(1, -1),
                                      dt=4e-3)
        assert tv <= 0.05


def test_csv(tmp_path):
    res = [CheckResult("demo", {"N": 3}, 0.5, 0.25, 0.75, True),
           CheckResult("other", {}, 2.0, math.nan, math.nan, False)]
    path = tmp_path / "proofcheck.csv"
    write_proofcheck_csv(path, res)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["check_name", "params", "estimate", "ci_low", "ci_high", "pass"]
    assert json.loads(rows[1][1]) == {"N": 3}
    assert rows[1][5] == "true" and rows[2][5] == "false"
    assert float(rows[1][2]) == 0.5
