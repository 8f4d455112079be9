"""Geometry-compatible flux models on the sphere.

A model is defined by a scalar potential h(x, u); the flux vector is the
tangential field F = n(x) x grad_x h(x, u).  Because every edge flux below is
an exact endpoint difference of h, the discrete divergence of any constant
state telescopes to zero around each cell boundary, making constant states
exact fixed points of the solver.

The separable family

    h(x, u) = r1(x1) f1(u) + r2(x2) f2(u) + r3(x3) f3(u),   qj = rj'

is the fast path; the homogeneous family is rj(x) = x.  Arbitrary smooth
h(x, u) is supported through ``GeneralFluxModel`` with finite-difference
gradients.

Directional split fluxes (midpoint-frozen 1D fluxes used by the Riemann
solver):

    g(x, u) = F_lambda / cos(phi)
            = tan(phi) (q1 cos(lam) f1 + q2 sin(lam) f2) - q3 f3
    k(x, u) = F_phi * cos(phi)
            = (-sin(lam) q1 f1 + cos(lam) q2 f2) cos(phi)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .geometry import PoleError, SpherePoint, TangentVector, HALF_PI, ANGLE_TOL
from .grid import Edge, Grid

ArrayLike = Union[float, np.ndarray]


def _polyval(coeffs: np.ndarray, u: ArrayLike) -> ArrayLike:
    # low-to-high coefficient order
    return np.polynomial.polynomial.polyval(u, coeffs)


def _polyder(coeffs: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyder(coeffs)


@dataclass(frozen=True)
class FluxComponent:
    """One u-dependent component f_j with derivative; poly coeffs if known."""

    func: Callable[[ArrayLike], ArrayLike]
    deriv: Callable[[ArrayLike], ArrayLike]
    poly: Optional[np.ndarray]  # monomial coefficients, low to high, or None
    label: str = ""

    def __call__(self, u: ArrayLike) -> ArrayLike:
        return self.func(u)


def polynomial(coeffs: Sequence[float], label: str = "") -> FluxComponent:
    """f(u) = sum_k coeffs[k] u^k."""
    c = np.asarray(coeffs, dtype=float)
    d = _polyder(c) if c.size > 1 else np.zeros(1)
    return FluxComponent(
        func=lambda u, c=c: _polyval(c, u),
        deriv=lambda u, d=d: _polyval(d, u),
        poly=c,
        label=label or f"poly{list(c)}",
    )


def linear(c: float) -> FluxComponent:
    """f(u) = c*u."""
    return polynomial([0.0, c], label=f"linear({c})")


def burgers(a: float) -> FluxComponent:
    """f(u) = a*u^2/2."""
    return polynomial([0.0, 0.0, 0.5 * a], label=f"burgers({a})")


def zero() -> FluxComponent:
    """f(u) = 0."""
    return polynomial([0.0], label="zero")


@dataclass(frozen=True)
class RadialWeight:
    """Coordinate weight r_j with derivative q_j = r_j'."""

    r: Callable[[ArrayLike], ArrayLike]
    q: Callable[[ArrayLike], ArrayLike]
    label: str = ""


def identity_weight() -> RadialWeight:
    """r(x) = x (the homogeneous case: q = 1)."""
    return RadialWeight(
        r=lambda x: x,
        q=lambda x: np.ones_like(x, dtype=float) if isinstance(x, np.ndarray) else 1.0,
        label="identity",
    )


def poly_weight(coeffs: Sequence[float], label: str = "") -> RadialWeight:
    """r(x) = sum_k coeffs[k] x^k."""
    c = np.asarray(coeffs, dtype=float)
    d = _polyder(c) if c.size > 1 else np.zeros(1)
    return RadialWeight(
        r=lambda x, c=c: _polyval(c, x),
        q=lambda x, d=d: _polyval(d, x),
        label=label or f"poly{list(c)}",
    )


def _as_cart(point) -> Tuple[float, float, float]:
    if isinstance(point, SpherePoint):
        return point.cart
    return tuple(point)


@dataclass(frozen=True)
class FluxModel:
    """Separable gradient flux h(x,u) = sum_j r_j(x_j) f_j(u)."""

    f: Tuple[FluxComponent, FluxComponent, FluxComponent]
    r: Tuple[RadialWeight, RadialWeight, RadialWeight]
    label: str = ""

    separable = True

    @classmethod
    def homogeneous(cls, f1: FluxComponent, f2: FluxComponent, f3: FluxComponent,
                    label: str = "") -> "FluxModel":
        w = identity_weight()
        return cls(f=(f1, f2, f3), r=(w, w, w), label=label)

    @property
    def poly_degree(self) -> Optional[int]:
        """Highest monomial degree over the components, None if not polynomial."""
        degs = []
        for comp in self.f:
            if comp.poly is None:
                return None
            nz = np.nonzero(comp.poly)[0]
            degs.append(int(nz[-1]) if nz.size else 0)
        return max(degs)

    # -- evaluation ------------------------------------------------------

    def h(self, point, u: ArrayLike) -> ArrayLike:
        """Potential value h(x, u)."""
        x1, x2, x3 = _as_cart(point)
        return (self.r[0].r(x1) * self.f[0](u)
                + self.r[1].r(x2) * self.f[1](u)
                + self.r[2].r(x3) * self.f[2](u))

    def h_cart(self, x1: ArrayLike, x2: ArrayLike, x3: ArrayLike,
               u: ArrayLike) -> ArrayLike:
        return (self.r[0].r(x1) * self.f[0](u)
                + self.r[1].r(x2) * self.f[1](u)
                + self.r[2].r(x3) * self.f[2](u))

    def phi_vector(self, point, u: float) -> np.ndarray:
        """Ambient gradient Phi = grad_x h = (q1 f1, q2 f2, q3 f3)."""
        x1, x2, x3 = _as_cart(point)
        return np.array([
            self.r[0].q(x1) * self.f[0](u),
            self.r[1].q(x2) * self.f[1](u),
            self.r[2].q(x3) * self.f[2](u),
        ])

    def tangent_flux(self, point: SpherePoint, u: float) -> TangentVector:
        """F = n x Phi in (i_lambda, i_phi) components; rejects poles."""
        if point.is_pole:
            raise PoleError("tangent frame singular at pole")
        lam, phi = point.lam, point.phi
        p1, p2, p3 = self.phi_vector(point, u)
        sl, cl = math.sin(lam), math.cos(lam)
        sp, cp = math.sin(phi), math.cos(phi)
        f_lambda = sp * (p1 * cl + p2 * sl) - cp * p3
        f_phi = -p1 * sl + p2 * cl
        return TangentVector(f_lambda=f_lambda, f_phi=f_phi, at=point)

    def g(self, lam: float, phi: float, u: ArrayLike) -> ArrayLike:
        """Lambda-directional split flux F_lambda / cos(phi)."""
        if abs(abs(phi) - HALF_PI) <= ANGLE_TOL:
            raise PoleError("tangent frame singular at pole")
        cp = math.cos(phi)
        x1, x2, x3 = cp * math.cos(lam), cp * math.sin(lam), math.sin(phi)
        tp = math.tan(phi)
        return (tp * (self.r[0].q(x1) * math.cos(lam) * self.f[0](u)
                      + self.r[1].q(x2) * math.sin(lam) * self.f[1](u))
                - self.r[2].q(x3) * self.f[2](u))

    def k(self, lam: float, phi: float, u: ArrayLike) -> ArrayLike:
        """Phi-directional split flux F_phi * cos(phi)."""
        cp = math.cos(phi)
        x1, x2, x3 = cp * math.cos(lam), cp * math.sin(lam), math.sin(phi)
        return (-math.sin(lam) * self.r[0].q(x1) * self.f[0](u)
                + math.cos(lam) * self.r[1].q(x2) * self.f[1](u)) * cp

    def g_u(self, lam: float, phi: float, u: float) -> float:
        """du-derivative of g at fixed coordinates."""
        cp = math.cos(phi)
        x1, x2, x3 = cp * math.cos(lam), cp * math.sin(lam), math.sin(phi)
        tp = math.tan(phi)
        return (tp * (self.r[0].q(x1) * math.cos(lam) * self.f[0].deriv(u)
                      + self.r[1].q(x2) * math.sin(lam) * self.f[1].deriv(u))
                - self.r[2].q(x3) * self.f[2].deriv(u))

    def k_u(self, lam: float, phi: float, u: float) -> float:
        cp = math.cos(phi)
        x1, x2 = cp * math.cos(lam), cp * math.sin(lam)
        return (-math.sin(lam) * self.r[0].q(x1) * self.f[0].deriv(u)
                + math.cos(lam) * self.r[1].q(x2) * self.f[1].deriv(u)) * cp


class GeneralFluxModel:
    """Gradient flux from an arbitrary smooth potential h(x1, x2, x3, u).

    The potential must be defined in a neighborhood of the sphere (it is
    differentiated off-surface by central differences).  Edge fluxes remain
    exact endpoint differences of h, so discrete compatibility of constant
    states is preserved without any quadrature.
    """

    separable = False
    poly_degree = None

    def __init__(self, h_func: Callable[[float, float, float, float], float],
                 dx: float = 1e-6, label: str = ""):
        self.h_func = h_func
        self.dx = dx
        self.label = label

    def h(self, point, u: float) -> float:
        x1, x2, x3 = _as_cart(point)
        return self.h_func(x1, x2, x3, u)

    def h_cart(self, x1, x2, x3, u):
        return self.h_func(x1, x2, x3, u)

    def phi_vector(self, point, u: float) -> np.ndarray:
        x = np.array(_as_cart(point))
        grad = np.empty(3)
        for j in range(3):
            e = np.zeros(3)
            e[j] = self.dx
            grad[j] = (self.h_func(*(x + e), u) - self.h_func(*(x - e), u)) / (2 * self.dx)
        return grad

    def tangent_flux(self, point: SpherePoint, u: float) -> TangentVector:
        if point.is_pole:
            raise PoleError("tangent frame singular at pole")
        lam, phi = point.lam, point.phi
        p1, p2, p3 = self.phi_vector(point, u)
        sp, cp = math.sin(phi), math.cos(phi)
        sl, cl = math.sin(lam), math.cos(lam)
        return TangentVector(
            f_lambda=sp * (p1 * cl + p2 * sl) - cp * p3,
            f_phi=-p1 * sl + p2 * cl,
            at=point,
        )

    def g(self, lam: float, phi: float, u: float) -> float:
        if abs(abs(phi) - HALF_PI) <= ANGLE_TOL:
            raise PoleError("tangent frame singular at pole")
        point = SpherePoint.from_angles(lam, phi)
        p1, p2, p3 = self.phi_vector(point, u)
        return math.tan(phi) * (p1 * math.cos(lam) + p2 * math.sin(lam)) - p3

    def k(self, lam: float, phi: float, u: float) -> float:
        point = SpherePoint.from_angles(lam, phi)
        p1, p2, _ = self.phi_vector(point, u)
        return (-p1 * math.sin(lam) + p2 * math.cos(lam)) * math.cos(phi)

    def _du(self, func: Callable[[float], float], u: float) -> float:
        h = 1e-6 * (1.0 + abs(u))
        return (func(u + h) - func(u - h)) / (2 * h)

    def g_u(self, lam: float, phi: float, u: float) -> float:
        return self._du(lambda w: self.g(lam, phi, w), u)

    def k_u(self, lam: float, phi: float, u: float) -> float:
        return self._du(lambda w: self.k(lam, phi, w), u)


AnyFluxModel = Union[FluxModel, GeneralFluxModel]


# -- spec-level operations ------------------------------------------------

def h_eval(model: AnyFluxModel, point, u: float) -> float:
    """Potential h(x, u) at a point (SpherePoint or Cartesian triple)."""
    return model.h(point, u)


def tangent_flux(model: AnyFluxModel, point: SpherePoint, u: float) -> TangentVector:
    """Tangential flux vector F = n x grad h at a non-pole point."""
    return model.tangent_flux(point, u)


def g_flux(model: AnyFluxModel, lam: float, phi: float, u: float) -> float:
    """Lambda-directional split flux (equals F_lambda / cos phi)."""
    return model.g(lam, phi, u)


def k_flux(model: AnyFluxModel, lam: float, phi: float, u: float) -> float:
    """Phi-directional split flux (equals F_phi * cos phi)."""
    return model.k(lam, phi, u)


def edge_flux(model: AnyFluxModel, edge: Edge, u_star: float) -> float:
    """Outward flux integral of the edge for its left cell.

    Evaluates -(h(e2, u) - h(e1, u)) with the endpoints ordered along the
    left cell's counterclockwise boundary traversal (as seen from outside the
    sphere); the right cell receives the negated value.  For "lambda" edges
    (phi = const) the left cell lies south, so the traversal runs against
    increasing lambda; for "phi" edges it runs with increasing phi.

    Degenerate pole edges have coincident endpoints (the pole itself) and
    carry identically zero flux.
    """
    if not np.isfinite(u_star):
        raise ValueError("u_star must be finite")
    if edge.degenerate:
        return 0.0
    dh = model.h(edge.p2, u_star) - model.h(edge.p1, u_star)
    return dh if edge.kind == "lambda" else -dh


def discrete_divergence(model: AnyFluxModel, grid: Grid, cell_id: int,
                        edge_values: Mapping[int, float]) -> float:
    """Approximate flux divergence I_R / A_R of one cell.

    edge_values maps edge-id -> interface value u_star; it must cover every
    edge of the cell.
    """
    total = 0.0
    for eid, sign in grid.cell_edges[cell_id]:
        if eid not in edge_values:
            raise ValueError(f"missing edge value for edge {eid}")
        total += sign * edge_flux(model, grid.edge(eid), edge_values[eid])
    return total / float(grid.c_area[cell_id])
