"""Simulation and analysis of snapping-out Brownian motion in planar domains."""

__version__ = "0.1.0"

from .bounds import BoundReport, consistency_check, doeblin_to_tmix, theorem_bounds
from .errors import (ConfigError, ConstraintViolation, DegenerateGeometry, EmptyEnsemble,
                     GridMismatch, HorizonTooShort, InconsistentSigns, InvalidGeometry,
                     InvalidMinorization, NoBarriers, NotConverged, PointNotOnCurve,
                     PointOutsideDomain, SnapBMError, StuckParticle)
from .estimators import (GridHistogram, MixingEstimate, doeblin_constant, histogram,
                         mixing_time_estimate, pi_min_estimate, stationary_estimate,
                         tv_distance)
from .geodesic import geodesic_diameter, geodesic_distance
from .geometry import (Barrier, Circle, DomainSpec, Ellipse, GeometryReport, Spline, area,
                       geometry_report, max_curvature, normal_at, separation_rho, side_of)
from .process import (Ensemble, ParticleState, SimConfig, crossing_count, init_state,
                      simulate_paths, step)
from .proofcheck import (crossing_probability_scaling, pill_event_probability,
                         time_reversal_uniformity)
from .scenarios import disk_one_barrier, fixtures, nested_circles
