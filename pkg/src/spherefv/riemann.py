"""Scalar Riemann solver for 1D fluxes that need not be convex.

The interface value of the self-similar solution at the initial jump is the
argmin of the flux over [uL, uR] when uL < uR (convex-envelope construction)
and the argmax over [uR, uL] when uL > uR (concave envelope).  Three outcomes
are distinguished: the value sticks to an endpoint (left/right upwind) or sits
at an interior stationary point (sonic).

``solve_riemann`` is the scalar reference implementation; ``batch_interface``
is a vectorized equivalent for polynomial fluxes of degree <= 3, used by the
time steppers.  Both share the tie-breaking rule: on (near-)ties the left
state wins, then the right state, then interior candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

SONIC = "sonic"
LEFT_UPWIND = "left_upwind"
RIGHT_UPWIND = "right_upwind"

# integer codes used by the vectorized path
CAT_SONIC = 0
CAT_LEFT = 1
CAT_RIGHT = 2

_CODE_TO_NAME = {CAT_SONIC: SONIC, CAT_LEFT: LEFT_UPWIND, CAT_RIGHT: RIGHT_UPWIND}

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_N_SAMPLES = 257
_U_TOL = 1e-12
_TIE_EPS = 1e-12


def _poly_val(c: np.ndarray, u):
    return np.polynomial.polynomial.polyval(u, c)


def _poly_der(c: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1)


@dataclass(frozen=True)
class Flux1D:
    """A 1D flux: callable with derivative, optionally a known polynomial."""

    func: Callable[[float], float]
    deriv: Callable[[float], float]
    poly: Optional[np.ndarray] = None  # monomial coefficients, low to high

    def __call__(self, u):
        return self.func(u)

    @classmethod
    def from_poly(cls, coeffs: Sequence[float]) -> "Flux1D":
        c = np.asarray(coeffs, dtype=float)
        d = _poly_der(c)
        return cls(
            func=lambda u, c=c: _poly_val(c, u),
            deriv=lambda u, d=d: _poly_val(d, u),
            poly=c,
        )

    @classmethod
    def from_callable(cls, f: Callable[[float], float],
                      df: Optional[Callable[[float], float]] = None) -> "Flux1D":
        if df is None:
            def df(u, f=f):
                h = 1e-6 * (1.0 + abs(u))
                return (f(u + h) - f(u - h)) / (2.0 * h)
        return cls(func=f, deriv=df, poly=None)


@dataclass(frozen=True)
class RiemannSolution:
    u_star: float
    category: str  # sonic | left_upwind | right_upwind
    flux_at_interface: float


def _as_flux(flux_1d) -> Flux1D:
    if isinstance(flux_1d, Flux1D):
        return flux_1d
    return Flux1D.from_callable(flux_1d)


def _golden_section(f: Callable[[float], float], a: float, b: float,
                    tol: float = _U_TOL) -> float:
    """Minimize f over [a, b] to tolerance tol in the argument."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _quadratic_roots(c0: float, c1: float, c2: float) -> Tuple[float, ...]:
    """Real roots of c2 x^2 + c1 x + c0 (degenerate cases included)."""
    if c2 == 0.0:
        if c1 == 0.0:
            return ()
        return (-c0 / c1,)
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        return ()
    s = math.sqrt(disc)
    q = -0.5 * (c1 + math.copysign(s, c1)) if c1 != 0.0 else 0.5 * s
    if q == 0.0:
        return (0.0,) if c0 == 0.0 else ()
    r1 = q / c2
    r2 = c0 / q
    return (r1, r2)


def _interior_candidates(flux: Flux1D, a: float, b: float,
                         minimize: bool) -> list:
    """Stationary points of the flux strictly inside (a, b)."""
    if flux.poly is not None:
        d = _poly_der(flux.poly)
        nz = np.nonzero(d)[0]
        deg = int(nz[-1]) if nz.size else -1
        if deg <= 1:
            roots = _quadratic_roots(float(d[0]),
                                     float(d[1]) if len(d) > 1 else 0.0,
                                     float(d[2]) if len(d) > 2 else 0.0)
        else:
            rr = np.polynomial.polynomial.polyroots(d[: deg + 2])
            scale = 1.0 + max(abs(a), abs(b))
            roots = [float(r.real) for r in np.atleast_1d(rr)
                     if abs(r.imag) <= 1e-10 * scale]
        return [r for r in roots if a < r < b]

    # generic callable: uniform scan, then golden-section on the best bracket
    xs = np.linspace(a, b, _N_SAMPLES)
    vals = np.array([flux(x) for x in xs], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite flux values on the interval")
    k = int(np.argmin(vals) if minimize else np.argmax(vals))
    lo = xs[max(k - 1, 0)]
    hi = xs[min(k + 1, _N_SAMPLES - 1)]
    if minimize:
        r = _golden_section(flux, lo, hi)
    else:
        r = _golden_section(lambda x: -flux(x), lo, hi)
    return [r] if a < r < b else []


def solve_riemann(flux_1d, uL: float, uR: float) -> RiemannSolution:
    """Interface value and classification for the jump (uL, uR).

    Returns the argmin of the flux over [uL, uR] for uL < uR, the argmax over
    [uR, uL] for uL > uR, and uL for equal states.  Tied extrema resolve to
    uL, then uR (the interface flux is identical for all tied candidates, so
    the tie-break only labels the category).
    """
    if not (np.isfinite(uL) and np.isfinite(uR)):
        raise ValueError("Riemann states must be finite")
    flux = _as_flux(flux_1d)

    if uL == uR:
        val = float(flux(uL))
        if not np.isfinite(val):
            raise ValueError("non-finite flux values on the interval")
        return RiemannSolution(u_star=uL, category=LEFT_UPWIND,
                               flux_at_interface=val)

    minimize = uL < uR
    a, b = (uL, uR) if minimize else (uR, uL)
    candidates = [uL, uR] + _interior_candidates(flux, a, b, minimize)
    vals = np.array([flux(c) for c in candidates], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite flux values on the interval")

    scored = vals if minimize else -vals
    best = float(np.min(scored))
    eps = _TIE_EPS * (1.0 + abs(best))
    idx = int(np.argmax(scored <= best + eps))  # first candidate within tie
    u_star = float(candidates[idx])
    category = (LEFT_UPWIND, RIGHT_UPWIND)[idx] if idx < 2 else SONIC
    return RiemannSolution(u_star=u_star, category=category,
                           flux_at_interface=float(vals[idx]))


def wave_speed_bound(flux_1d, uL: float, uR: float) -> float:
    """Max |flux'(v)| over the closed interval spanned by uL and uR.

    For polynomial fluxes the extrema of the derivative are located exactly;
    otherwise a 257-point scan plus golden-section refinement is used, so the
    bound never underestimates by more than the refinement tolerance.
    """
    if not (np.isfinite(uL) and np.isfinite(uR)):
        raise ValueError("states must be finite")
    flux = _as_flux(flux_1d)
    a, b = min(uL, uR), max(uL, uR)
    if flux.poly is not None:
        d1 = _poly_der(flux.poly)
        d2 = _poly_der(d1)
        candidates = [a, b]
        nz = np.nonzero(d2)[0]
        deg = int(nz[-1]) if nz.size else -1
        if deg >= 0 and a < b:
            if deg <= 1:
                roots = _quadratic_roots(float(d2[0]),
                                         float(d2[1]) if len(d2) > 1 else 0.0,
                                         float(d2[2]) if len(d2) > 2 else 0.0)
            else:
                rr = np.polynomial.polynomial.polyroots(d2[: deg + 2])
                roots = [float(r.real) for r in np.atleast_1d(rr)
                         if abs(r.imag) <= 1e-10]
            candidates += [r for r in roots if a < r < b]
        return float(np.max(np.abs(_poly_val(d1, np.array(candidates)))))

    if a == b:
        return abs(float(flux.deriv(a)))
    xs = np.linspace(a, b, _N_SAMPLES)
    speeds = np.abs(np.array([flux.deriv(x) for x in xs], dtype=float))
    k = int(np.argmax(speeds))
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, _N_SAMPLES - 1)]
    r = _golden_section(lambda x: -abs(flux.deriv(x)), lo, hi)
    return float(max(np.max(speeds), abs(flux.deriv(r))))


# -- vectorized path for per-edge polynomial fluxes (degree <= 3) ----------

def batch_interface(coeffs: np.ndarray, uL: np.ndarray,
                    uR: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized interface solve for cubic-or-lower polynomial fluxes.

    Args:
        coeffs: (n, 4) monomial coefficients (low to high) of each flux.
        uL, uR: (n,) adjacent states.

    Returns:
        (u_star, category) with category in {CAT_SONIC, CAT_LEFT, CAT_RIGHT}.
        Matches ``solve_riemann`` including the tie-break preference
        uL > uR > interior.
    """
    n = uL.shape[0]
    c1 = coeffs[:, 1]
    c2 = coeffs[:, 2]
    c3 = coeffs[:, 3]
    # stationary points: roots of 3 c3 u^2 + 2 c2 u + c1
    qa = 3.0 * c3
    qb = 2.0 * c2
    qc = c1
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = qb * qb - 4.0 * qa * qc
        sq = np.sqrt(np.maximum(disc, 0.0))
        r1 = np.where(qa != 0.0, (-qb + sq) / (2.0 * qa), -qc / qb)
        r2 = np.where(qa != 0.0, (-qb - sq) / (2.0 * qa), np.nan)
    valid1 = np.where(qa != 0.0, disc >= 0.0, qb != 0.0)
    valid2 = (qa != 0.0) & (disc >= 0.0)

    a = np.minimum(uL, uR)
    b = np.maximum(uL, uR)
    valid1 &= (r1 > a) & (r1 < b)
    valid2 &= (r2 > a) & (r2 < b)

    cand = np.stack([uL, uR,
                     np.where(valid1, r1, 0.0),
                     np.where(valid2, r2, 0.0)], axis=1)
    vals = (coeffs[:, 0:1] + cand * (coeffs[:, 1:2]
            + cand * (coeffs[:, 2:3] + cand * coeffs[:, 3:4])))
    minimize = (uL <= uR)[:, None]
    scored = np.where(minimize, vals, -vals)
    scored[:, 2][~valid1] = np.inf
    scored[:, 3][~valid2] = np.inf

    best = np.min(scored, axis=1)
    eps = _TIE_EPS * (1.0 + np.abs(best))
    idx = np.argmax(scored <= (best + eps)[:, None], axis=1)
    rows = np.arange(n)
    u_star = cand[rows, idx]
    category = np.where(idx == 0, CAT_LEFT,
                        np.where(idx == 1, CAT_RIGHT, CAT_SONIC)).astype(np.int8)
    return u_star, category


def batch_speed_bound(coeffs: np.ndarray, uL: np.ndarray,
                      uR: np.ndarray) -> np.ndarray:
    """Vectorized max |flux'| over [min(uL,uR), max(uL,uR)], degree <= 3."""
    a = np.minimum(uL, uR)
    b = np.maximum(uL, uR)
    d0 = coeffs[:, 1]
    d1 = 2.0 * coeffs[:, 2]
    d2 = 3.0 * coeffs[:, 3]

    def dval(u):
        return np.abs(d0 + u * (d1 + u * d2))

    out = np.maximum(dval(a), dval(b))
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = -d1 / (2.0 * d2)
    inside = (d2 != 0.0) & (vertex > a) & (vertex < b)
    if np.any(inside):
        out = np.where(inside, np.maximum(out, dval(np.where(inside, vertex, 0.0))),
                       out)
    return out


def category_name(code: int) -> str:
    return _CODE_TO_NAME[int(code)]
