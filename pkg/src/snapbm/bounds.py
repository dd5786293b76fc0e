"""Closed-form worst-case bounds on mixing time and stationary density floor.

With ``R = c * min(1/kappa, 1/lambda_max, rho)`` the bounds are

    t_mix  <= delta**2 * (R * lambda_min) ** (-delta / R)
    pi_min >= (R * lambda_min) ** (delta / R) / area

and a minorization ``P(X_T in E) >= C * Area(E)`` gives
``t_mix <= T * ceil(log(1/4) / log(1 - C * area))``. Everything is evaluated
in log space so that astronomically large bounds stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidMinorization, NoBarriers
from .geometry import GeometryReport

LN10 = math.log(10.0)
DYADIC_RANGE = range(-20, 21)


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


@dataclass
class BoundReport:
    R: float
    tmix_upper: float
    pimin_lower: float
    c_used: float
    tmix_upper_log10: float
    pimin_lower_log10: float
    delta: float
    area: float
    lambda_min: float
    R_unscaled: float
    empirical_tmix: Optional[float] = None
    empirical_pimin: Optional[float] = None
    consistency_flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"R": self.R, "c": self.c_used,
                "tmix_upper": self.tmix_upper, "pimin_lower": self.pimin_lower,
                "tmix_upper_log10": self.tmix_upper_log10,
                "pimin_lower_log10": self.pimin_lower_log10,
                "empirical_tmix": self.empirical_tmix,
                "empirical_pimin": self.empirical_pimin,
                "flags": dict(self.consistency_flags)}


def log_bounds(delta: float, R: float, lambda_min: float, area: float):
    """Natural logs of the mixing-time upper bound and the density lower bound."""
    exponent = (delta / R) * math.log(R * lambda_min)
    return 2.0 * math.log(delta) - exponent, exponent - math.log(area)


def theorem_bounds(report: GeometryReport, empirical_tmix: Optional[float] = None,
                   empirical_pimin: Optional[float] = None) -> BoundReport:
    """Evaluate both bounds for a geometry report.

    Raises :class:`NoBarriers` when the domain has no barrier: without one the
    process is ordinary reflected Brownian motion, whose stationary law is
    uniform, and the bounds say nothing.
    """
    if report.lambda_min is None:
        raise NoBarriers("bounds need at least one barrier; without barriers the process is "
                         "classical reflected Brownian motion with uniform stationary law")
    log_t, log_p = log_bounds(report.delta, report.R, report.lambda_min, report.area)
    out = BoundReport(R=report.R, tmix_upper=_exp(log_t), pimin_lower=_exp(log_p),
                      c_used=report.c, tmix_upper_log10=log_t / LN10,
                      pimin_lower_log10=log_p / LN10, delta=report.delta, area=report.area,
                      lambda_min=report.lambda_min, R_unscaled=report.R / report.c,
                      empirical_tmix=empirical_tmix, empirical_pimin=empirical_pimin)
    out.consistency_flags = consistency_check(out)
    return out


def doeblin_to_tmix(C: float, T: float, area: float) -> float:
    """Mixing-time bound implied by a minorization with constant ``C`` at time ``T``."""
    x = C * area
    if not 0.0 < x < 1.0:
        raise InvalidMinorization(f"C * area = {x:g} must lie strictly between 0 and 1")
    if not T > 0:
        raise ValueError("T must be positive")
    ratio = math.log(0.25) / math.log1p(-x)
    # Guard against a ratio that is an integer up to rounding.
    n = math.ceil(ratio * (1.0 - 1e-12))
    return T * max(1, n)


def _passes(bound: BoundReport, c: float) -> bool:
    log_t, log_p = log_bounds(bound.delta, c * bound.R_unscaled, bound.lambda_min, bound.area)
    return (math.log(bound.empirical_tmix) <= log_t if bound.empirical_tmix > 0 else True) and \
        (bound.empirical_pimin > 0 and math.log(bound.empirical_pimin) >= log_p)


def consistency_check(bound: BoundReport) -> dict:
    """Compare empirical values with the bounds at the configured ``c`` and nearby dyadic ``c``.

    ``passing_c`` is the dyadic value closest to the configured one (ties go
    to the smaller) at which both comparisons hold. Because the bounds loosen
    as ``c`` shrinks while ``R * lambda_min < e``, ``largest_passing_c`` is
    the informative quantity: the strictest scale still consistent with the
    data.
    """
    if bound.empirical_tmix is None or bound.empirical_pimin is None:
        return {"evaluated": False}
    tmix_ok = bound.empirical_tmix <= bound.tmix_upper
    pimin_ok = bound.empirical_pimin >= bound.pimin_lower
    scaled = [bound.c_used * 2.0**k for k in DYADIC_RANGE
              if _passes(bound, bound.c_used * 2.0**k)]
    nearest = min(scaled, key=lambda c: (abs(math.log(c / bound.c_used)), c)) if scaled else None
    return {"evaluated": True, "tmix_ok": bool(tmix_ok), "pimin_ok": bool(pimin_ok),
            "all_pass": bool(tmix_ok and pimin_ok), "passing_c": nearest,
            "smallest_passing_c": min(scaled) if scaled else None,
            "largest_passing_c": max(scaled) if scaled else None}
