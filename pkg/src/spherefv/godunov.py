"""First-order Godunov finite volume stepper on the sphere web grid.

Each non-degenerate edge poses a 1D Riemann problem for a directional flux
with coordinates frozen at the edge midpoint:

  * "phi" edges (lambda = const): flux g(x, u), wave speed dlambda/dt;
  * "lambda" edges (phi = const): flux k(x, u)/cos(phi), wave speed dphi/dt
    (the positive factor does not change the Riemann solution and makes the
    speed bound dimensionally consistent with the phi cell width).

The interface value u* feeds the endpoint-difference edge flux, and cells are
updated conservatively with all edge fluxes summed at once.

Exactness note: the per-cell flux sum is accumulated as vertex-paired
potential differences h(v, u_out) - h(v, u_in) rather than per-edge flux
values.  Algebraically this is the same telescoping sum, but it makes the
accumulated divergence of a constant state *bitwise* zero: each pair
subtracts identical floats.  Summing pre-rounded edge fluxes instead leaves
O(1e-16) residuals that dt/A amplifies on small polar cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple
from weakref import WeakKeyDictionary

import numpy as np

from . import riemann
from .flux import AnyFluxModel, FluxModel
from .grid import Edge, Grid, KIND_LAMBDA, KIND_PHI
from .riemann import CAT_LEFT, CAT_RIGHT, Flux1D, solve_riemann, wave_speed_bound

DEFAULT_CFL = 0.45
DEFAULT_DT_MAX = 0.1

_SPEED_FLOOR = 1e-30
_BOUND_TOL = 1e-12


class NumericalError(RuntimeError):
    """Raised when the time stepper produces an invalid state."""


class CflViolationError(NumericalError):
    """Raised when a step violates the local maximum principle."""


@dataclass(frozen=True)
class State:
    """Per-cell averages at a given time."""

    u: np.ndarray
    time: float

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))

    def copy(self) -> "State":
        return State(u=self.u.copy(), time=self.time)


def _wrap_pm(d: np.ndarray) -> np.ndarray:
    """Wrap angle differences into (-pi, pi]."""
    return d - 2.0 * np.pi * np.round(d / (2.0 * np.pi))


def directional_flux_1d(model: AnyFluxModel, edge: Edge) -> Flux1D:
    """The frozen-coordinate 1D flux governing an edge's Riemann problem."""
    lam, phi = edge.midpoint.lam, edge.midpoint.phi
    if edge.kind == "phi":
        func = lambda u: model.g(lam, phi, u)
        deriv = lambda u: model.g_u(lam, phi, u)
    else:
        cp = math.cos(phi)
        func = lambda u: model.k(lam, phi, u) / cp
        deriv = lambda u: model.k_u(lam, phi, u) / cp
    poly = None
    if getattr(model, "separable", False) and model.poly_degree is not None:
        kind = KIND_PHI if edge.kind == "phi" else KIND_LAMBDA
        a1, a2, a3 = _directional_coeffs(model, lam, phi, np.int64(kind))
        poly = _combine_poly(model, float(a1), float(a2), float(a3))
    return Flux1D(func=func, deriv=deriv, poly=poly)


def _directional_coeffs(model: FluxModel, mlam, mphi, kind):
    """Per-edge weights (a1, a2, a3) so that G(u) = sum_j a_j f_j(u)."""
    cp = np.cos(mphi)
    x1 = cp * np.cos(mlam)
    x2 = cp * np.sin(mlam)
    x3 = np.sin(mphi)
    q1 = model.r[0].q(x1)
    q2 = model.r[1].q(x2)
    q3 = model.r[2].q(x3)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tp = np.tan(mphi)
    meridional = kind == KIND_PHI
    a1 = np.where(meridional, tp * q1 * np.cos(mlam), -np.sin(mlam) * q1)
    a2 = np.where(meridional, tp * q2 * np.sin(mlam), np.cos(mlam) * q2)
    a3 = np.where(meridional, -q3, 0.0)
    return a1, a2, a3


def _combine_poly(model: FluxModel, a1: float, a2: float, a3: float,
                  width: int = 4) -> np.ndarray:
    out = np.zeros(width)
    for a, comp in zip((a1, a2, a3), model.f):
        c = comp.poly
        out[: len(c)] += a * c
    return out


class _Operator:
    """Precomputed per-(grid, model) stepping machinery.

    Holds edge gather indices, frozen directional flux data, CFL length
    scales, reconstruction offsets, and the vertex-paired accumulation
    tables.  Supports a vectorized fast path for separable models whose
    components are polynomials of degree <= 3, and a per-edge scalar
    fallback for everything else.
    """

    def __init__(self, grid: Grid, model: AnyFluxModel):
        self.grid = grid
        self.model = model
        n_edges = grid.n_edges

        self.kind = grid.e_kind.astype(np.int64)
        self.left = grid.e_left
        self.deg = grid.e_deg
        self.right = grid.e_right
        self.right_gather = np.where(self.deg, self.left, self.right)
        self.nondeg = ~self.deg

        # CFL length scale: the wave-direction width of the smaller adjacent
        # cell (lambda width for meridional edges, phi width for zonal ones)
        dlam_c = grid.c_lam2 - grid.c_lam1
        dphi_c = grid.c_phi2 - grid.c_phi1
        meridional = self.kind == KIND_PHI
        wL = np.where(meridional, dlam_c[self.left], dphi_c[self.left])
        wR = np.where(meridional, dlam_c[self.right_gather],
                      dphi_c[self.right_gather])
        self.length_scale = np.minimum(wL, wR)

        # reconstruction offsets from cell centers to edge midpoints
        clam = grid.cell_lam_center
        cphi = grid.cell_phi_center
        self.off_lam_L = _wrap_pm(grid.e_mlam - clam[self.left])
        self.off_phi_L = grid.e_mphi - cphi[self.left]
        self.off_lam_R = _wrap_pm(grid.e_mlam - clam[self.right_gather])
        self.off_phi_R = grid.e_mphi - cphi[self.right_gather]

        self.separable = bool(getattr(model, "separable", False))
        deg_poly = model.poly_degree if self.separable else None
        self.fast = self.separable and deg_poly is not None and deg_poly <= 3

        if self.separable:
            a1, a2, a3 = _directional_coeffs(model, grid.e_mlam, grid.e_mphi,
                                             self.kind)
            self.a = (a1, a2, a3)
            if self.fast:
                self.coeffs = np.zeros((n_edges, 4))
                for a, comp in zip(self.a, model.f):
                    c = comp.poly
                    self.coeffs[:, : len(c)] += a[:, None] * c
                d = self.coeffs[:, 1:] * np.array([1.0, 2.0, 3.0])
                self.dcoeffs = d

        self._build_corners()
        self._flux1d_cache: Optional[List[Optional[Flux1D]]] = None

    # -- vertex-paired accumulation tables ------------------------------

    def _build_corners(self) -> None:
        grid = self.grid
        cell_ids: List[int] = []
        e_out: List[int] = []
        e_in: List[int] = []
        lam_v: List[float] = []
        phi_v: List[float] = []
        for cid in range(grid.n_cells):
            entry = grid.cell_edges[cid]
            m = len(entry)
            for i in range(m):
                eid, sign = entry[i]
                tau = 1 if grid.e_kind[eid] == KIND_LAMBDA else -1
                # start vertex of this edge along the cell's ccw traversal
                if sign * tau == -1:
                    lam, phi = float(grid.e_lam1[eid]), float(grid.e_phi1[eid])
                else:
                    lam, phi = float(grid.e_lam2[eid]), float(grid.e_phi2[eid])
                cell_ids.append(cid)
                e_out.append(eid)
                e_in.append(entry[i - 1][0])
                lam_v.append(lam)
                phi_v.append(phi)
        self.corner_cell = np.array(cell_ids, dtype=np.int64)
        self.corner_out = np.array(e_out, dtype=np.int64)
        self.corner_in = np.array(e_in, dtype=np.int64)
        lam_arr = np.array(lam_v)
        phi_arr = np.array(phi_v)
        cp = np.cos(phi_arr)
        cp[np.abs(phi_arr) == 0.5 * np.pi] = 0.0  # exact pole vertices
        self.corner_cart = (cp * np.cos(lam_arr), cp * np.sin(lam_arr),
                            np.sin(phi_arr))
        if self.separable:
            x1, x2, x3 = self.corner_cart
            self.corner_r = (self.model.r[0].r(x1), self.model.r[1].r(x2),
                             self.model.r[2].r(x3))

    # -- per-edge interface values ---------------------------------------

    def _edge_flux1d(self, eid: int) -> Flux1D:
        if self._flux1d_cache is None:
            self._flux1d_cache = [None] * self.grid.n_edges
        cached = self._flux1d_cache[eid]
        if cached is None:
            cached = directional_flux_1d(self.model, self.grid.edge(eid))
            self._flux1d_cache[eid] = cached
        return cached

    def interface(self, uL: np.ndarray, uR: np.ndarray):
        """Per-edge (u_star, category, G'(u_star)) for the frozen fluxes."""
        if self.fast:
            u_star, cat = riemann.batch_interface(self.coeffs, uL, uR)
            d = self.dcoeffs
            gprime = d[:, 0] + u_star * (d[:, 1] + u_star * d[:, 2])
            return u_star, cat, gprime
        n = uL.shape[0]
        u_star = np.empty(n)
        cat = np.empty(n, dtype=np.int8)
        gprime = np.empty(n)
        for e in range(n):
            if self.deg[e]:
                u_star[e] = uL[e]
                cat[e] = CAT_LEFT
                gprime[e] = 0.0
                continue
            f1d = self._edge_flux1d(e)
            sol = solve_riemann(f1d, float(uL[e]), float(uR[e]))
            u_star[e] = sol.u_star
            cat[e] = {riemann.SONIC: riemann.CAT_SONIC,
                      riemann.LEFT_UPWIND: CAT_LEFT,
                      riemann.RIGHT_UPWIND: CAT_RIGHT}[sol.category]
            gprime[e] = f1d.deriv(sol.u_star)
        return u_star, cat, gprime

    # -- conservative accumulation ---------------------------------------

    def divergence_sum(self, u_mid: np.ndarray) -> np.ndarray:
        """Per-cell sum of outward edge fluxes (the I_R of each cell)."""
        acc = np.zeros(self.grid.n_cells)
        if self.separable:
            f = [comp(u_mid) for comp in self.model.f]
            contrib = np.zeros(self.corner_cell.shape[0])
            for rj, fj in zip(self.corner_r, f):
                contrib += rj * (fj[self.corner_out] - fj[self.corner_in])
        else:
            x1, x2, x3 = self.corner_cart
            n = self.corner_cell.shape[0]
            contrib = np.empty(n)
            h = self.model.h_cart
            for i in range(n):
                contrib[i] = (
                    h(x1[i], x2[i], x3[i], u_mid[self.corner_out[i]])
                    - h(x1[i], x2[i], x3[i], u_mid[self.corner_in[i]])
                )
        np.add.at(acc, self.corner_cell, contrib)
        return acc

    # -- time step bound ---------------------------------------------------

    def dt_bound(self, state: State, cfl: float, dt_max: float) -> float:
        u = state.u
        uL = u[self.left]
        uR = u[self.right_gather]
        if self.fast:
            speeds = riemann.batch_speed_bound(self.coeffs, uL, uR)
        else:
            speeds = np.zeros(uL.shape[0])
            for e in range(uL.shape[0]):
                if not self.deg[e]:
                    speeds[e] = wave_speed_bound(self._edge_flux1d(e),
                                                 float(uL[e]), float(uR[e]))
        speeds = np.maximum(speeds, _SPEED_FLOOR)
        ratios = self.length_scale[self.nondeg] / speeds[self.nondeg]
        dt = cfl * float(np.min(ratios)) if ratios.size else dt_max
        return min(dt, dt_max)

    # -- one conservative step --------------------------------------------

    def step(self, state: State, dt: float, slopes=None,
             strict_check: bool = True) -> State:
        if dt <= 0.0:
            raise NumericalError(f"time step must be positive, got {dt}")
        u = state.u
        uL = u[self.left]
        uR = u[self.right_gather]
        if slopes is not None:
            sl, sp = slopes.s_lambda, slopes.s_phi
            uL = uL + sl[self.left] * self.off_lam_L + sp[self.left] * self.off_phi_L
            uR = (uR + sl[self.right_gather] * self.off_lam_R
                  + sp[self.right_gather] * self.off_phi_R)

        u_star, cat, gprime = self.interface(uL, uR)

        if slopes is None:
            u_mid = u_star
        else:
            meridional = self.kind == KIND_PHI
            s_dir_L = np.where(meridional, slopes.s_lambda[self.left],
                               slopes.s_phi[self.left])
            s_dir_R = np.where(meridional, slopes.s_lambda[self.right_gather],
                               slopes.s_phi[self.right_gather])
            s_m = np.where(cat == CAT_LEFT, s_dir_L,
                           np.where(cat == CAT_RIGHT, s_dir_R, 0.0))
            u_mid = u_star + 0.5 * dt * (-s_m * gprime)

        acc = self.divergence_sum(u_mid)
        u_new = u - dt * acc / self.grid.c_area

        if strict_check:
            self._check_strict(u, u_new)
        else:
            self._check_relaxed(u, u_new)
        return State(u=u_new, time=state.time + dt)

    def _check_strict(self, u: np.ndarray, u_new: np.ndarray) -> None:
        """Local maximum principle: valid for the first-order scheme."""
        nmin = u.copy()
        nmax = u.copy()
        nd = self.nondeg
        np.minimum.at(nmin, self.left[nd], u[self.right[nd]])
        np.minimum.at(nmin, self.right[nd], u[self.left[nd]])
        np.maximum.at(nmax, self.left[nd], u[self.right[nd]])
        np.maximum.at(nmax, self.right[nd], u[self.left[nd]])
        if np.any(u_new < nmin - _BOUND_TOL) or np.any(u_new > nmax + _BOUND_TOL):
            raise CflViolationError("CFL violated")
        if not np.all(np.isfinite(u_new)):
            raise NumericalError("non-finite state after step")

    def _check_relaxed(self, u: np.ndarray, u_new: np.ndarray) -> None:
        """Blow-up guard for the second-order scheme.

        A second-order step may legitimately push a cell beyond the span of
        its old neighborhood (transients on coarse polar cells reach several
        percent of the global range), so only gross excursions past the old
        global range are treated as CFL violations; an actual blow-up grows
        exponentially and crosses this margin within a few steps.
        """
        if not np.all(np.isfinite(u_new)):
            raise NumericalError("non-finite state after step")
        gmin = float(np.min(u))
        gmax = float(np.max(u))
        margin = 0.25 * (gmax - gmin) + 1e-9
        if np.any(u_new < gmin - margin) or np.any(u_new > gmax + margin):
            raise CflViolationError("CFL violated")


_operators: "WeakKeyDictionary[Grid, list]" = WeakKeyDictionary()


def get_operator(grid: Grid, model: AnyFluxModel) -> _Operator:
    """Fetch (or build) the cached stepping operator for a grid/model pair."""
    entries = _operators.setdefault(grid, [])
    for m, op in entries:
        if m is model:
            return op
    op = _Operator(grid, model)
    entries.append((model, op))
    return op


def compute_dt(grid: Grid, model: AnyFluxModel, state: State,
               cfl: float = DEFAULT_CFL, dt_max: float = DEFAULT_DT_MAX) -> float:
    """CFL time step: cfl * min over edges of width / wave-speed bound.

    The width is the wave-direction extent of the smaller adjacent cell and
    the speed bound is max |G'| of the edge's directional flux over the two
    adjacent values (floored at 1e-30); the result is capped at dt_max.
    """
    if not 0.0 < cfl <= 1.0:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    return get_operator(grid, model).dt_bound(state, cfl, dt_max)


def godunov_step(grid: Grid, model: AnyFluxModel, state: State,
                 dt: float) -> State:
    """Advance one first-order step; raises CflViolationError post-hoc if a
    cell leaves the span of its old neighborhood by more than 1e-12."""
    return get_operator(grid, model).step(state, dt, slopes=None,
                                          strict_check=True)


def run(grid: Grid, model: AnyFluxModel, state0: State, t_final: float,
        stepping: Tuple[str, float] = ("cfl", DEFAULT_CFL), order: int = 1,
        limiter: str = "minmod", dt_max: float = DEFAULT_DT_MAX,
        callbacks: Sequence[Callable] = (),
        snapshot_times: Sequence[float] = (),
        on_snapshot: Optional[Callable[[State], None]] = None):
    """Advance the state to exactly t_final.

    Args:
        stepping: ("fixed", dt) or ("cfl", number).
        order: 1 for Godunov, 2 for the GRP stepper.
        callbacks: called after each step with (step, time, dt, mass, min_u,
            max_u); the same rows are returned as the diagnostics list.
        snapshot_times: times to land on exactly; on_snapshot(state) is
            called at each.

    Returns:
        (final State, diagnostics rows).
    """
    if t_final < state0.time:
        raise ValueError("t_final must be >= the initial time")
    mode, value = stepping
    if mode not in ("fixed", "cfl"):
        raise ValueError(f"unknown stepping mode {mode!r}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if order == 2:
        from .grp import grp_step  # deferred to avoid a module cycle

    op = get_operator(grid, model)
    snaps = {t for t in snapshot_times if state0.time < t <= t_final}
    stops = sorted(snaps | {t_final})

    state = state0
    diagnostics = []
    step_index = 0
    si = 0
    while state.time < t_final - 1e-12:
        stop = stops[si]
        if mode == "fixed":
            dt = value
        else:
            dt = op.dt_bound(state, value, dt_max)
        remaining = stop - state.time
        hit_stop = dt >= remaining * (1.0 - 1e-9)
        if hit_stop:
            dt = remaining

        if order == 1:
            state = op.step(state, dt, slopes=None, strict_check=True)
        else:
            state = grp_step(grid, model, state, dt, limiter=limiter)
        if hit_stop:
            state = State(u=state.u, time=stop)  # land on the stop exactly

        step_index += 1
        mass = float(np.sum(grid.c_area * state.u))
        row = (step_index, state.time, dt, mass,
               float(np.min(state.u)), float(np.max(state.u)))
        diagnostics.append(row)
        for cb in callbacks:
            cb(*row)
        if hit_stop:
            if on_snapshot is not None and stop in snaps:
                on_snapshot(state)
            si += 1
    return state, diagnostics
