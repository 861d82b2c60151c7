"""Curvature-to-velocity blending.

Maps the normalized smooth curvature at the vehicle's nearest centerline
point to a coefficient beta in (0, 1] that blends the aggressive and safe
overall-velocity targets in the planner objective. beta = 1 on the flattest
sections (full aggressive tracking) and decays to exp(-alpha) at the
sharpest curvature, which keeps a strictly positive velocity floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InvalidFactor

NSC_CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class MappingParams:
    """Sensitivity of the blending coefficient to normalized curvature."""

    alpha: float = 3.0

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class VelocityBounds:
    """Aggressive (upper) and safe (lower) overall-velocity pairs.

    Each pair is (body velocity, progress velocity) in m/s. The safe pair
    must be strictly below the aggressive pair componentwise.
    """

    v_bar: tuple[float, float] = (4.18, 3.8)
    v_under: tuple[float, float] = (2.72, 2.47)

    def __post_init__(self):
        for lo, hi in zip(self.v_under, self.v_bar):
            if not (0.0 < lo < hi):
                raise InvalidFactor(
                    f"need 0 < safe < aggressive componentwise, got {self.v_under} vs {self.v_bar}"
                )


def map_nsc_to_beta(nsc: float, params: MappingParams) -> float:
    """Blending coefficient exp(-alpha * nsc^2) for nsc in [0, 1].

    Strictly decreasing and continuous; equals 1 at nsc = 0 and exp(-alpha)
    at nsc = 1. Values outside [0, 1] by more than a 1e-9 tolerance raise
    ``DomainError``; within tolerance they are clamped.
    """
    if nsc < -NSC_CLAMP_TOL or nsc > 1.0 + NSC_CLAMP_TOL:
        raise DomainError(f"nsc must lie in [0, 1], got {nsc}")
    nsc = min(max(nsc, 0.0), 1.0)
    return math.exp(-params.alpha * nsc * nsc)


def derive_velocity_bounds(
    expert_vp: float, body_factor: float, discount: float
) -> VelocityBounds:
    """Build velocity bounds from an expert-driven lap's progress velocity.

    The aggressive pair is (expert_vp * body_factor, expert_vp); the safe
    pair applies ``discount`` componentwise. ``discount`` must lie strictly
    inside (0, 1) and ``body_factor`` must be >= 1.
    """
    if expert_vp <= 0.0:
        raise InvalidFactor(f"expert_vp must be positive, got {expert_vp}")
    if not (0.0 < discount < 1.0):
        raise InvalidFactor(f"discount must lie in (0, 1), got {discount}")
    if body_factor < 1.0:
        raise InvalidFactor(f"body_factor must be >= 1, got {body_factor}")
    v_bar = (expert_vp * body_factor, expert_vp)
    v_under = (v_bar[0] * discount, v_bar[1] * discount)
    return VelocityBounds(v_bar=v_bar, v_under=v_under)
