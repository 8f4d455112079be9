"""Spherical coordinates, Cartesian embedding, and tangent-frame operators.

Conventions: longitude lam in [0, 2*pi), latitude phi in [-pi/2, pi/2],
unit sphere embedded in R^3 with

    n(lam, phi) = (cos(phi) cos(lam), cos(phi) sin(lam), sin(phi)).

The tangent frame (i_lam, i_phi) is singular at the poles; operations that
need it reject pole input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

#: absolute tolerance for angular comparisons
ANGLE_TOL = 1e-12


class PoleError(ValueError):
    """Raised when a tangent-frame operation is evaluated at a pole."""


def wrap_lambda(lam: float) -> float:
    """Wrap a longitude into [0, 2*pi)."""
    lam = math.fmod(lam, TWO_PI)
    if lam < 0.0:
        lam += TWO_PI
    if lam >= TWO_PI:  # fmod can round up to 2*pi
        lam -= TWO_PI
    return lam


def wrapped_delta(lam_to: float, lam_from: float) -> float:
    """Signed longitude difference lam_to - lam_from wrapped into (-pi, pi]."""
    d = math.fmod(lam_to - lam_from, TWO_PI)
    if d <= -math.pi:
        d += TWO_PI
    elif d > math.pi:
        d -= TWO_PI
    return d


def to_cartesian(lam: float, phi: float) -> Tuple[float, float, float]:
    """Map (lam, phi) to unit-sphere Cartesian coordinates.

    lam is wrapped mod 2*pi; phi must lie in [-pi/2, pi/2].
    """
    if not -HALF_PI - ANGLE_TOL <= phi <= HALF_PI + ANGLE_TOL:
        raise ValueError(f"latitude {phi!r} outside [-pi/2, pi/2]")
    phi = min(max(phi, -HALF_PI), HALF_PI)
    lam = wrap_lambda(lam)
    cp = math.cos(phi)
    return (cp * math.cos(lam), cp * math.sin(lam), math.sin(phi))


def from_cartesian(x1: float, x2: float, x3: float) -> Tuple[float, float]:
    """Recover (lam, phi) from a unit vector; lam in [0, 2*pi)."""
    phi = math.asin(min(max(x3, -1.0), 1.0))
    lam = wrap_lambda(math.atan2(x2, x1))
    return lam, phi


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit sphere with cached Cartesian embedding."""

    lam: float
    phi: float
    cart: Tuple[float, float, float]

    @classmethod
    def from_angles(cls, lam: float, phi: float) -> "SpherePoint":
        cart = to_cartesian(lam, phi)
        return cls(wrap_lambda(lam), min(max(phi, -HALF_PI), HALF_PI), cart)

    @property
    def is_pole(self) -> bool:
        return abs(abs(self.phi) - HALF_PI) <= ANGLE_TOL


def normal(lam: float, phi: float) -> np.ndarray:
    """Outward unit normal n(lam, phi) as a 3-vector."""
    return np.array(to_cartesian(lam, phi))


def tangent_basis(lam: float, phi: float) -> Tuple[np.ndarray, np.ndarray]:
    """Unit tangent vectors (i_lam, i_phi) at a non-pole point.

    i_lam = (-sin lam, cos lam, 0)
    i_phi = (-sin phi cos lam, -sin phi sin lam, cos phi)
    """
    if abs(phi) >= HALF_PI - ANGLE_TOL:
        raise PoleError("tangent frame singular at pole")
    sl, cl = math.sin(lam), math.cos(lam)
    sp, cp = math.sin(phi), math.cos(phi)
    i_lam = np.array([-sl, cl, 0.0])
    i_phi = np.array([-sp * cl, -sp * sl, cp])
    return i_lam, i_phi


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector in (i_lam, i_phi) components at a non-pole point."""

    f_lambda: float
    f_phi: float
    at: SpherePoint

    def __post_init__(self):
        if self.at.is_pole:
            raise PoleError("tangent frame singular at pole")

    def cartesian(self) -> np.ndarray:
        i_lam, i_phi = tangent_basis(self.at.lam, self.at.phi)
        return self.f_lambda * i_lam + self.f_phi * i_phi


def analytic_divergence(
    field: Callable[[float, float], Tuple[float, float]],
    lam: float,
    phi: float,
    h_step: float = 1e-5,
) -> float:
    """Central finite-difference tangential divergence of a smooth field.

    field(lam, phi) returns the (F_lambda, F_phi) components.  Evaluates

        (1/cos phi) * [ d(F_phi cos phi)/dphi + d(F_lambda)/dlam ]

    to O(h_step^2).  Intended as a test oracle, not a production operator.
    """
    if abs(phi) >= HALF_PI - ANGLE_TOL:
        raise PoleError("tangent frame singular at pole")

    def fphi_cos(p: float) -> float:
        return field(lam, p)[1] * math.cos(p)

    d_phi = (fphi_cos(phi + h_step) - fphi_cos(phi - h_step)) / (2.0 * h_step)
    d_lam = (field(lam + h_step, phi)[0] - field(lam - h_step, phi)[0]) / (2.0 * h_step)
    return (d_phi + d_lam) / math.cos(phi)
