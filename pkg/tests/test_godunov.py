import math

import numpy as np
import pytest

from spherefv import testcases
from spherefv.flux import FluxModel, identity_weight, poly_weight, polynomial, zero
from spherefv.godunov import (
    CflViolationError,
    State,
    compute_dt,
    godunov_step,
    run,
)
from spherefv.grid import build_grid

TWO_PI = 2.0 * math.pi


def random_model(rng):
    comps = tuple(polynomial(rng.uniform(-1, 1, size=rng.randint(1, 5)))
                  for _ in range(3))
    weights = tuple(
        identity_weight() if rng.rand() < 0.5
        else poly_weight(rng.uniform(-1, 1, size=rng.randint(2, 5)))
        for _ in range(3))
    return FluxModel(f=comps, r=weights)


# -- compute_dt -------------------------------------------------------------


def test_dt_zero_flux_hits_cap():
    g = build_grid(8, 16, "none")
    model = FluxModel.homogeneous(zero(), zero(), zero())
    state = State(u=np.ones(g.n_cells), time=0.0)
    assert compute_dt(g, model, state, 0.45, dt_max=0.07) == 0.07


def test_dt_linear_in_cfl():
    g = build_grid(8, 16, "none")
    model = testcases.steady_model()
    state = testcases.init_steady(g)
    dt1 = compute_dt(g, model, state, 0.1, dt_max=10.0)
    dt2 = compute_dt(g, model, state, 0.2, dt_max=10.0)
    assert dt2 == pytest.approx(2.0 * dt1, rel=1e-14)


def test_dt_equatorial_burgers_bound():
    # the binding edges are the meridional ones inside the band, with wave
    # speed 2*pi*max|u| evaluated from the initial data
    g = build_grid(12, 16, "none")
    model = testcases.equatorial_model()
    state = testcases.init_equatorial(g)
    cfl = 0.45
    dt = compute_dt(g, model, state, cfl, dt_max=10.0)
    dlam = TWO_PI / 16
    umax = float(np.max(np.abs(state.u)))
    assert dt == pytest.approx(cfl * dlam / (TWO_PI * umax), rel=1e-12)
    assert dt <= cfl * dlam / (TWO_PI * umax) * (1 + 1e-12)


def test_dt_rejects_bad_cfl():
    g = build_grid(8, 16, "none")
    state = State(u=np.zeros(g.n_cells), time=0.0)
    with pytest.raises(ValueError):
        compute_dt(g, testcases.steady_model(), state, 0.0)


# -- godunov_step ------------------------------------------------------------


def test_constant_state_is_exact_fixed_point():
    rng = np.random.RandomState(30)
    g = build_grid(12, 32, "halving")
    for _ in range(5):
        model = random_model(rng)
        c = rng.uniform(-1, 1)
        state = State(u=np.full(g.n_cells, c), time=0.0)
        dt = compute_dt(g, model, state, 0.45)
        for _ in range(5):
            state = godunov_step(g, model, state, dt)
        assert np.all(state.u == c)


def test_zero_flux_model_keeps_any_state():
    g = build_grid(8, 16, "halving")
    model = FluxModel.homogeneous(zero(), zero(), zero())
    rng = np.random.RandomState(31)
    u0 = rng.uniform(-1, 1, size=g.n_cells)
    state = godunov_step(g, model, State(u=u0, time=0.0), 0.05)
    assert np.array_equal(state.u, u0)
    assert state.time == 0.05


def test_cfl_violation_detected():
    g = build_grid(12, 32, "none")
    model = testcases.equatorial_model()
    state = testcases.init_equatorial(g)
    safe = compute_dt(g, model, state, 1.0)
    with pytest.raises(CflViolationError, match="CFL violated"):
        godunov_step(g, model, state, 40.0 * safe)


def test_time_step_must_be_positive():
    g = build_grid(8, 16, "none")
    state = State(u=np.zeros(g.n_cells), time=0.0)
    with pytest.raises(Exception):
        godunov_step(g, testcases.steady_model(), state, -0.1)


# -- 1D equivalence ----------------------------------------------------------


def oracle_burgers_step_1d(u, dt, dlam):
    """Independent periodic Godunov step for du/dt + d(pi u^2)/dlam = 0.

    The interface value is found by brute-force sampling, with no reference
    to the package's Riemann solver.
    """
    n = u.shape[0]
    fluxes = np.empty(n)  # flux at each cell's east interface
    for i in range(n):
        ul, ur = u[i], u[(i + 1) % n]
        vs = np.linspace(min(ul, ur), max(ul, ur), 20001)
        vals = math.pi * vs * vs
        fluxes[i] = vals.min() if ul <= ur else vals.max()
    return u - (dt / dlam) * (fluxes - np.roll(fluxes, 1))


def band_cells(g):
    phi_c = g.cell_phi_center
    return np.nonzero((phi_c > 0) & (phi_c < math.pi / 12))[0]


def test_single_step_matches_1d_oracle():
    n_lon = 16
    g = build_grid(12, n_lon, "none")
    model = testcases.equatorial_model()
    state = testcases.init_equatorial(g)
    ids = band_cells(g)
    u1d = state.u[ids].copy()
    dt = compute_dt(g, model, state, 0.45)
    stepped = godunov_step(g, model, state, dt)
    expected = oracle_burgers_step_1d(u1d, dt, TWO_PI / n_lon)
    assert np.max(np.abs(stepped.u[ids] - expected)) < 1e-12
    outside = np.setdiff1d(np.arange(g.n_cells), ids)
    assert np.all(stepped.u[outside] == 0.0)


def test_ten_steps_match_1d_oracle():
    n_lon = 16
    g = build_grid(12, n_lon, "none")
    model = testcases.equatorial_model()
    state = testcases.init_equatorial(g)
    ids = band_cells(g)
    u1d = state.u[ids].copy()
    for _ in range(10):
        dt = compute_dt(g, model, state, 0.45)
        state = godunov_step(g, model, state, dt)
        u1d = oracle_burgers_step_1d(u1d, dt, TWO_PI / n_lon)
    assert np.max(np.abs(state.u[ids] - u1d)) < 1e-11


# -- invariants --------------------------------------------------------------


def test_mass_conservation_and_maximum_principle():
    rng = np.random.RandomState(32)
    g = build_grid(12, 32, "halving")
    x1, x2, x3 = g.cell_center_cartesian()
    for _ in range(5):
        model = random_model(rng)
        u0 = 0.6 * np.sin(2 * x1 + x2) + 0.4 * x3
        state = State(u=u0, time=0.0)
        mass0 = testcases.total_mass(g, state)
        for _ in range(20):
            dt = compute_dt(g, model, state, 0.45)
            state = godunov_step(g, model, state, dt)
        assert abs(testcases.total_mass(g, state) - mass0) < 1e-12 * g.n_cells
        assert state.u.min() >= u0.min() - 1e-12
        assert state.u.max() <= u0.max() + 1e-12


# -- run ---------------------------------------------------------------------


def test_run_zero_duration_returns_initial_state():
    g = build_grid(8, 16, "none")
    state0 = testcases.init_steady(g)
    final, diag = run(g, testcases.steady_model(), state0, 0.0)
    assert final is state0
    assert diag == []


def test_run_fixed_stepping_lands_exactly():
    g = build_grid(8, 16, "halving")
    model = testcases.steady_model()
    state0 = testcases.init_steady(g)
    final, diag = run(g, model, state0, 0.5, stepping=("fixed", 0.05), order=1)
    assert final.time == 0.5
    assert len(diag) == 10
    steps = [row[0] for row in diag]
    assert steps == list(range(1, 11))


def test_run_snapshots_land_exactly():
    g = build_grid(8, 16, "halving")
    model = testcases.steady_model()
    state0 = testcases.init_steady(g)
    seen = []
    final, _ = run(g, model, state0, 0.3, stepping=("fixed", 0.04), order=1,
                   snapshot_times=(0.1, 0.25), on_snapshot=lambda s: seen.append(s.time))
    assert seen == [0.1, 0.25]
    assert final.time == 0.3


def test_run_diagnostics_track_mass():
    g = build_grid(8, 16, "none")
    model = testcases.steady_model()
    state0 = testcases.init_steady(g)
    rows = []
    final, diag = run(g, model, state0, 0.2, stepping=("cfl", 0.4), order=1,
                      callbacks=[lambda *row: rows.append(row)])
    assert rows == diag
    masses = [row[3] for row in diag]
    assert max(masses) - min(masses) < 1e-12


def test_run_is_deterministic():
    g = build_grid(12, 32, "halving")
    model = testcases.steady_model()
    state0 = testcases.init_steady(g)
    a, _ = run(g, model, state0, 0.4, stepping=("cfl", 0.45), order=2)
    b, _ = run(g, model, state0, 0.4, stepping=("cfl", 0.45), order=2)
    assert np.array_equal(a.u, b.u)


def test_run_rejects_bad_arguments():
    g = build_grid(8, 16, "none")
    state0 = testcases.init_steady(g)
    model = testcases.steady_model()
    with pytest.raises(ValueError):
        run(g, model, state0, -1.0)
    with pytest.raises(ValueError):
        run(g, model, state0, 1.0, stepping=("adaptive", 0.1))
    with pytest.raises(ValueError):
        run(g, model, state0, 1.0, order=3)
