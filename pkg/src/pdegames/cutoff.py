"""Clamped waiting times for the geometric games.

Every move in the eikonal and curvature games resets the clock by a
candidate increment (eps over the local speed, or eps over the curvature)
clamped into [eps^lo_exp, eps^hi_exp]; staying put costs exactly eps^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class CutoffParams:
    """Clamp exponents; defaults clamp into [eps^(3/2), eps^(1/2)]."""

    eps: float
    lo_exp: float = 1.5
    hi_exp: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0.0 < self.hi_exp < self.lo_exp:
            raise ConfigError("need 0 < hi_exp < lo_exp so the clamp interval is nonempty")

    @property
    def floor(self) -> float:
        return self.eps**self.lo_exp

    @property
    def ceil(self) -> float:
        return self.eps**self.hi_exp

    @property
    def stay(self) -> float:
        return self.eps**2


def cutoff(params: CutoffParams, r: float) -> float:
    """(r v eps^(3/2)) ^ eps^(1/2): non-decreasing, clamped both sides."""
    if r < 0 or math.isnan(r):
        raise InputError(f"cutoff argument must be >= 0, got {r}")
    return min(max(r, params.floor), params.ceil)


def eikonal_time_reset(params: CutoffParams, moved: bool, speed_magnitude: float = 0.0) -> float:
    """Clock increment after one eikonal sub-move.

    A move at local speed v costs cutoff(eps / v); eps / 0 is treated as
    +inf and lands on the upper clamp.  Staying costs eps^2.
    """
    if speed_magnitude < 0:
        raise InputError(f"speed magnitude must be >= 0, got {speed_magnitude}")
    if not moved:
        return params.stay
    if speed_magnitude == 0.0:
        return params.ceil
    return cutoff(params, params.eps / speed_magnitude)


def icf_time_reset(params: CutoffParams, grad_nonzero: bool, kappa: float,
                   side: int = +1) -> float:
    """Clock increment after one curvature-game sub-move.

    ``side=+1`` is the branch that needs kappa > 0, ``side=-1`` the branch
    that needs kappa < 0.  If the gradient vanishes or the sign condition
    fails the mover stays and the increment is eps^2.
    """
    if side not in (+1, -1):
        raise InputError("side must be +1 or -1")
    active = grad_nonzero and (kappa > 0 if side == +1 else kappa < 0)
    if not active:
        return params.stay
    return cutoff(params, params.eps / abs(kappa))
