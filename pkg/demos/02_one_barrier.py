# One semipermeable circle inside a disk
#
# A circle of radius 0.5 sits in the unit disk. Particles leave the inside at
# rate lambda_minus and the outside at rate lambda_plus, both per unit of
# reflection local time, so in equilibrium the density inside is
# lambda_plus / lambda_minus times the density outside.

# %%
import math

import numpy as np

from snapbm import (SimConfig, disk_one_barrier, geometry_report, mixing_time_estimate,
                    pi_min_estimate, stationary_estimate, theorem_bounds)
from snapbm.estimators import default_start_mesh

# %% [markdown]
# First the stationary law. With lambda_plus = 2 and lambda_minus = 1 the
# inner disk (a quarter of the area) should hold 2 / (2 + 3) = 0.4 of the mass.
# The time-stepped scheme falls slightly short of that near a curved barrier,
# by about 0.009 at dt = 2e-3 and 0.004 at dt = 5e-4, so expect a value just
# under 0.4.

# %%
dom = disk_one_barrier(0.5, lp=2.0, lm=1.0)
cfg = SimConfig(dt=1e-3, seed=7, particles=5000, t_final=8.0)
pi = stationary_estimate(dom, cfg, burn_in=3.0)
inner = pi.diagnostics["component_mass"]["+"]
print(f"inner mass {inner['mass']:.3f} +- {inner['stderr']:.3f} (expected 0.400)")
print("split-half TV:", round(pi.diagnostics["split_half_tv"], 4))

# %% [markdown]
# Next the mixing time: run a cloud from each point of a coarse start mesh
# and record when the worst of them comes within 1/4 of the stationary law.

# %%
starts = default_start_mesh(dom, 0.5)
est = mixing_time_estimate(dom, SimConfig(dt=2e-3, seed=8, particles=800, t_final=3.0),
                           starts, np.linspace(0.1, 3.0, 30), pi_hat=pi)
print(f"{len(starts)} starts, empirical t_mix = {est.t_mix_hat:.2f}")
for t, tv in zip(est.times[::5], est.worst()[::5]):
    print(f"  t={t:4.1f}  worst TV={tv:.3f}")

# %% [markdown]
# The closed-form bound is very loose here, which is expected: it is a worst
# case over all geometries with the same parameters.

# %%
pm = pi_min_estimate(pi)
b = theorem_bounds(geometry_report(dom), est.t_mix_hat, pm.value)
print(f"bound t_mix <= {b.tmix_upper:.3g}, empirical {est.t_mix_hat:.2f}")
print(f"bound pi_min >= {b.pimin_lower:.3g}, empirical {pm.value:.3f} "
      f"(uniform would be {1 / math.pi:.3f})")
print("consistent:", b.consistency_flags["all_pass"])
