# Trapping in nested circles
#
# Concentric circles of radius 1, 2, ..., 2n+1, with the outermost one as the
# reflecting wall. Barriers in the inner half let particles in easily and out
# slowly, and the outer half does the opposite, so a particle started at the
# centre has to beat n unfavourable barriers to escape. The median escape
# time should multiply with every extra pair of circles.

# %%
import numpy as np

from snapbm import SimConfig, nested_circles, simulate_paths

# %%
medians = []
for n in (1, 2, 3):
    dom = nested_circles(n, lambda_base=1.0, bias=4.0, mode="metastable")
    cfg = SimConfig(dt=0.01, seed=3, particles=400, t_final=2000.0)
    ens = simulate_paths(dom, cfg, (0.0, 0.0), exit_ball=((0.0, 0.0), n + 1.0))
    t = np.where(np.isnan(ens.exit_times), np.inf, ens.exit_times)
    medians.append(float(np.median(t)))
    print(f"n={n}: median time to pass radius {n + 1} is {medians[-1]:.1f} "
          f"({np.isnan(ens.exit_times).sum()} never escaped)")

# %% [markdown]
# The growth factors, not the times themselves, are the point.

# %%
print("growth factors:", [round(b / a, 2) for a, b in zip(medians, medians[1:])])

# %% [markdown]
# In the "outward" arrangement every barrier pushes mass away from the
# centre, so the stationary density in the innermost disk falls by a constant
# factor per barrier crossed.

# %%
from snapbm import stationary_estimate

for n in (1, 2):
    dom = nested_circles(n, bias=4.0, mode="outward")
    pi = stationary_estimate(dom, SimConfig(dt=0.01, seed=4, particles=3000, t_final=200.0),
                             burn_in=50.0, n_snapshots=40)
    comp = pi.diagnostics["component_mass"].get("+" * (2 * n), {"mass": 0.0})
    print(f"n={n}: mass in the unit disk {comp['mass']:.5f}")
