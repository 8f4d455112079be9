"""Shipped test problems, analytic references, and error metrics.

Three configurations are bundled:

  * ``equatorial``: a sin(lambda) profile confined to the band
    0 < phi < pi/12 with a Burgers-type third flux component; within the band
    the dynamics reduce to the 1D periodic problem in lambda, so a
    high-resolution 1D solution serves as the reference.
  * ``steady``: u0 = cos(lambda) cos(phi) = x1 with a Burgers first
    component; any function of x1 alone is stationary for that flux, so the
    initial field is the exact solution for all time.
  * ``confined``: the steady setup multiplied by a C^1 cutoff in x1; the flux
    potential vanishes identically for x1 >= sqrt(2)/2, so the solution stays
    exactly zero there, remains steady for x1 <= 0, and is stationary
    overall (it depends on x1 only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from . import flux
from .flux import FluxModel, RadialWeight
from .godunov import State
from .grid import Grid

TWO_PI = 2.0 * math.pi

#: latitude extent of the equatorial test band
BAND_PHI_MAX = math.pi / 12.0

#: shock formation time of the equatorial profile
SHOCK_TIME = 1.0 / TWO_PI

_SQRT2_HALF = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class Metric:
    """A named scalar error measure with its normalization constant."""

    name: str  # u_diff | l1_vs_reference | mass_drift
    value: float
    normalization: float


# -- models -----------------------------------------------------------------


def equatorial_model() -> FluxModel:
    """Homogeneous flux with f3(u) = -2*pi*u^2/2 (band-periodic dynamics)."""
    return FluxModel.homogeneous(flux.zero(), flux.zero(),
                                 flux.burgers(-TWO_PI), label="equatorial")


def steady_model() -> FluxModel:
    """Homogeneous flux with f1(u) = u^2/2 (x1-profiles are stationary)."""
    return FluxModel.homogeneous(flux.burgers(1.0), flux.zero(), flux.zero(),
                                 label="steady")


def psi_cutoff(x1: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """C^1 cutoff: 1 for x1 <= 0, a cubic ramp, 0 for x1 >= sqrt(2)/2."""
    x = np.asarray(x1, dtype=float)
    mid = 1.0 - 6.0 * x * x + (8.0 / math.sqrt(2.0)) * x ** 3
    out = np.where(x <= 0.0, 1.0, np.where(x >= _SQRT2_HALF, 0.0, mid))
    return float(out) if np.ndim(x1) == 0 else out


def psi_cutoff_deriv(x1: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    x = np.asarray(x1, dtype=float)
    mid = -12.0 * x + (24.0 / math.sqrt(2.0)) * x * x
    out = np.where((x > 0.0) & (x < _SQRT2_HALF), mid, 0.0)
    return float(out) if np.ndim(x1) == 0 else out


def cutoff_weight() -> RadialWeight:
    """r(x) = psi(x) * x with q = r' from the product rule."""
    return RadialWeight(
        r=lambda x: psi_cutoff(x) * x,
        q=lambda x: psi_cutoff(x) + x * psi_cutoff_deriv(x),
        label="cutoff_psi",
    )


def confined_model() -> FluxModel:
    """f1(u) = u^2/2 weighted by the cutoff: the flux potential vanishes
    identically for x1 >= sqrt(2)/2, confining solutions started there at 0."""
    ident = flux.identity_weight()
    return FluxModel(
        f=(flux.burgers(1.0), flux.zero(), flux.zero()),
        r=(cutoff_weight(), ident, ident),
        label="confined",
    )


# -- initial states ----------------------------------------------------------


def init_equatorial(grid: Grid, averaging: str = "midpoint") -> State:
    """sin(lambda) inside the band 0 < phi < pi/12, zero elsewhere.

    ``averaging="exact"`` replaces cell-center sampling with the exact
    lambda-average of sin over each in-band cell (used by convergence
    studies; band membership is still decided by the cell center).
    """
    if averaging not in ("midpoint", "exact"):
        raise ValueError(f"unknown averaging {averaging!r}")
    phi_c = grid.cell_phi_center
    in_band = (phi_c > 0.0) & (phi_c < BAND_PHI_MAX)
    if averaging == "midpoint":
        values = np.sin(grid.cell_lam_center)
    else:
        values = (np.cos(grid.c_lam1) - np.cos(grid.c_lam2)) / (
            grid.c_lam2 - grid.c_lam1
        )
    return State(u=np.where(in_band, values, 0.0), time=0.0)


def init_steady(grid: Grid) -> State:
    """cos(lambda) cos(phi) sampled at cell centers (the x1 coordinate)."""
    return State(u=np.cos(grid.cell_lam_center) * np.cos(grid.cell_phi_center),
                 time=0.0)


def init_confined(grid: Grid) -> Tuple[State, FluxModel]:
    """Cutoff-weighted steady data psi(x1) * x1 with its flux model."""
    x1 = np.cos(grid.cell_lam_center) * np.cos(grid.cell_phi_center)
    state = State(u=psi_cutoff(x1) * x1, time=0.0)
    return state, confined_model()


# -- metrics -----------------------------------------------------------------


def u_diff_metric(grid: Grid, state_a: State, state_b: State) -> float:
    """Area-weighted mean |u_a - u_b|: sum(A_c |du|) / (4*pi)."""
    ua, ub = state_a.u, state_b.u
    if ua.shape != ub.shape or ua.shape[0] != grid.n_cells:
        raise ValueError("states must live on the same grid")
    return float(np.sum(grid.c_area * np.abs(ua - ub)) / (4.0 * math.pi))


def u_diff_raw(grid: Grid, state_a: State, state_b: State) -> float:
    """Unnormalized area-weighted sum, reported alongside the mean."""
    ua, ub = state_a.u, state_b.u
    if ua.shape != ub.shape or ua.shape[0] != grid.n_cells:
        raise ValueError("states must live on the same grid")
    return float(np.sum(grid.c_area * np.abs(ua - ub)))


def total_mass(grid: Grid, state: State) -> float:
    """Discrete integral sum(A_c u_c)."""
    return float(np.sum(grid.c_area * state.u))


# -- 1D reference solution ----------------------------------------------------

_hi_res_cache: Dict[Tuple[float, int], np.ndarray] = {}


def _burgers_1d_hi(n: int, t: float) -> np.ndarray:
    """First-order Godunov solution of du/dt + d(pi u^2)/dx = 0, periodic on
    [0, 2*pi), started from exact cell averages of sin."""
    dx = TWO_PI / n
    edges = np.arange(n + 1) * dx
    u = (np.cos(edges[:-1]) - np.cos(edges[1:])) / dx

    def godunov_flux(ul: np.ndarray, ur: np.ndarray) -> np.ndarray:
        # exact for the convex flux pi*u^2 with its minimum at u = 0
        a = np.maximum(ul, 0.0)
        b = np.minimum(ur, 0.0)
        return np.maximum(math.pi * a * a, math.pi * b * b)

    # |u| <= 1 for all time (monotone scheme), so the speed bound 2*pi holds
    dt0 = 0.45 * dx / TWO_PI
    time = 0.0
    while time < t - 1e-15:
        dt = min(dt0, t - time)
        fl = godunov_flux(u, np.roll(u, -1))  # flux at each cell's east face
        u = u - (dt / dx) * (fl - np.roll(fl, 1))
        time += dt
    return u


def reference_burgers_1d(n_cells: int, t: float, n_hi: int = 1 << 15) -> np.ndarray:
    """High-resolution 1D periodic reference averaged onto n_cells cells.

    Cell i covers [i, i+1) * 2*pi / n_cells; n_hi must be a multiple of
    n_cells.  The high-resolution run is cached per (t, n_hi).
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if n_hi % n_cells != 0:
        raise ValueError(f"n_hi={n_hi} is not a multiple of n_cells={n_cells}")
    key = (float(t), n_hi)
    u_hi = _hi_res_cache.get(key)
    if u_hi is None:
        u_hi = _burgers_1d_hi(n_hi, float(t))
        _hi_res_cache[key] = u_hi
    return u_hi.reshape(n_cells, -1).mean(axis=1)


def equatorial_band_error(grid: Grid, state: State,
                          reference: np.ndarray) -> float:
    """Area-weighted mean |u - reference| over the equatorial test band.

    The reference is indexed by in-band cell position, so every band row
    must carry exactly len(reference) cells starting at lambda = 0.
    """
    phi_c = grid.cell_phi_center
    in_band = (phi_c > 0.0) & (phi_c < BAND_PHI_MAX)
    ids = np.nonzero(in_band)[0]
    if ids.size == 0:
        raise ValueError("grid has no cells inside the equatorial band")
    n = reference.shape[0]
    idx = grid.c_index[ids]
    for b in set(int(grid.c_band[i]) for i in ids):
        if grid.bands[b].n_cells != n:
            raise ValueError(
                f"band {b} has {grid.bands[b].n_cells} cells; reference has {n}"
            )
    err = np.abs(state.u[ids] - reference[idx])
    w = grid.c_area[ids]
    return float(np.sum(w * err) / np.sum(w))
