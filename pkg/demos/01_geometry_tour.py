# Geometry of the built-in domains
#
# Every quantity that enters the mixing-time bound is a property of the
# curves alone: the largest curvature, the scale below which no ball sees two
# separate pieces of curve, the geodesic diameter and the area. This script
# prints them for the standard fixtures and then evaluates the bound itself.

# %%
import math

from snapbm import fixtures, geometry_report, theorem_bounds

# %% [markdown]
# The fixtures range from a plain disk to a wiggly boundary and a pair of
# barriers 0.05 apart. The two pathological ones are there to show that the
# curvature and separation estimates notice what they should.

# %%
print(f"{'fixture':24s} {'kappa':>8s} {'rho':>8s} {'delta':>8s} {'area':>8s} {'R':>8s}")
for fx in fixtures():
    rep = geometry_report(fx.domain)
    print(f"{fx.name:24s} {rep.kappa:8.3f} {rep.rho:8.4f} {rep.delta:8.3f} "
          f"{rep.area:8.3f} {rep.R:8.4f}")

# %% [markdown]
# The bound grows like (R lambda)^(-delta/R): as soon as the product of the
# smallest length scale and the smallest permeability drops below one it
# explodes, which is why it is reported in log10 as well.

# %%
for fx in fixtures():
    rep = geometry_report(fx.domain)
    if rep.lambda_min is None:
        continue
    b = theorem_bounds(rep)
    print(f"{fx.name:24s} log10 t_mix <= {b.tmix_upper_log10:10.2f}   "
          f"log10 pi_min >= {b.pimin_lower_log10:10.2f}")

# %%
print("unit disk area check:", abs(geometry_report(fixtures()[0].domain).area - math.pi))
