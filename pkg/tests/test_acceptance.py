"""Acceptance suite: every shipped criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion.
"""

import math

import numpy as np
import pytest

from spherefv import testcases
from spherefv.flux import FluxModel, identity_weight, poly_weight, polynomial
from spherefv.godunov import State, compute_dt, godunov_step, run
from spherefv.grid import build_grid
from spherefv.grp import SlopeField, grp_step
from spherefv.riemann import Flux1D, solve_riemann
from spherefv.testcases import (
    SHOCK_TIME,
    equatorial_band_error,
    init_confined,
    init_equatorial,
    init_steady,
    reference_burgers_1d,
    total_mass,
    u_diff_metric,
)

SQRT2_HALF = math.sqrt(2.0) / 2.0


def _report(criterion, ok, detail):
    print(f"\ncriterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {criterion}: {detail}"


def random_model(rng):
    comps = tuple(polynomial(rng.uniform(-1, 1, size=rng.randint(1, 5)))
                  for _ in range(3))
    weights = tuple(
        identity_weight() if rng.rand() < 0.5
        else poly_weight(rng.uniform(-1, 1, size=rng.randint(2, 5)))
        for _ in range(3))
    return FluxModel(f=comps, r=weights)


# -- shared expensive runs ----------------------------------------------------


@pytest.fixture(scope="module")
def steady_run():
    grid = build_grid(60, 256, "halving", 0.9)
    model = testcases.steady_model()
    s0 = init_steady(grid)
    final, diag = run(grid, model, s0, 5.0, stepping=("fixed", 0.05), order=2)
    return grid, s0, final, diag


@pytest.fixture(scope="module")
def confined_run():
    grid = build_grid(60, 256, "halving", 0.9)
    s0, model = init_confined(grid)
    final, diag = run(grid, model, s0, 5.0, stepping=("fixed", 0.05), order=2)
    return grid, s0, final, diag


@pytest.fixture(scope="module")
def equatorial_runs():
    out = {}
    model = testcases.equatorial_model()
    for n_lon in (16, 32, 64):
        grid = build_grid(12, n_lon, "none")
        s0 = init_equatorial(grid)
        final, diag = run(grid, model, s0, SHOCK_TIME,
                          stepping=("cfl", 0.45), order=2)
        out[n_lon] = (grid, s0, final, diag)
    return out


# -- criteria -------------------------------------------------------------------


def test_criterion_1_discrete_geometry_compatibility():
    """20 random flux models: constant states are exact fixed points."""
    rng = np.random.RandomState(100)
    small = [build_grid(4, 8, "none"), build_grid(8, 16, "halving"),
             build_grid(12, 32, "halving")]
    big = build_grid(60, 256, "halving")
    worst = 0.0
    for i in range(20):
        model = random_model(rng)
        grid = big if i >= 18 else small[i % 3]
        c = float(rng.uniform(-1, 1))
        state = State(u=np.full(grid.n_cells, c), time=0.0)
        dt = compute_dt(grid, model, state, 0.45)
        s1 = s2 = state
        for _ in range(100):
            s1 = godunov_step(grid, model, s1, dt)
            s2 = grp_step(grid, model, s2, dt)
        worst = max(worst,
                    float(np.max(np.abs(s1.u - c))),
                    float(np.max(np.abs(s2.u - c))))
    _report(1, worst <= 1e-12,
            f"max constant-state drift over 100 steps, both orders: {worst:.2e} <= 1e-12")


def test_criterion_2_conservation(steady_run, confined_run, equatorial_runs):
    """Total mass drifts by at most 1e-11 over every shipped run."""
    worst = 0.0
    runs = [("steady", steady_run), ("confined", confined_run)]
    runs += [(f"equatorial n={n}", r) for n, r in equatorial_runs.items()]
    for name, (grid, s0, final, diag) in runs:
        mass0 = total_mass(grid, s0)
        drift = max(abs(row[3] - mass0) for row in diag)
        worst = max(worst, drift)
    _report(2, worst <= 1e-11, f"max |mass drift| over all shipped runs: {worst:.2e} <= 1e-11")


def test_criterion_3_equatorial_burgers(equatorial_runs):
    """Band solution converges to the 1D reference at the shock time."""
    errors = []
    leak = 0.0
    for n_lon in (16, 32, 64):
        grid, s0, final, _ = equatorial_runs[n_lon]
        reference = reference_burgers_1d(n_lon, SHOCK_TIME)
        errors.append(equatorial_band_error(grid, final, reference))
        phi_c = grid.cell_phi_center
        outside = ~((phi_c > 0) & (phi_c < math.pi / 12))
        leak = max(leak, float(np.max(np.abs(final.u[outside]))))
    monotone = errors[0] > errors[1] > errors[2]
    ok = monotone and errors[2] <= 0.02 and leak == 0.0
    _report(3, ok,
            f"band L1 errors {['%.4f' % e for e in errors]} monotone={monotone}, "
            f"finest {errors[2]:.4f} <= 0.02, off-band leak {leak} == 0")


def test_criterion_4_steady_state(steady_run):
    """GRP keeps the stationary profile: u_diff near the published 0.0093."""
    grid, s0, final, _ = steady_run
    ud = u_diff_metric(grid, final, s0)
    in_window = 0.0093 / 2 <= ud <= 0.0093 * 2
    below_cap = ud <= 0.01
    fmin, fmax = float(final.u.min()), float(final.u.max())
    range_ok = abs(fmin + 0.998) <= 1e-3 and abs(fmax - 0.998) <= 1e-3
    imin, imax = float(s0.u.min()), float(s0.u.max())
    init_ok = abs(imin + 0.998) <= 2e-3 and abs(imax - 0.998) <= 2e-3
    ok = in_window and below_cap and range_ok and init_ok
    _report(4, ok,
            f"u_diff={ud:.5f} in [0.00465, 0.0186] and <= 0.01; "
            f"t=5 range ({fmin:.4f}, {fmax:.4f}) within (-0.998, 0.998) +/- 0.001; "
            f"initial range ({imin:.4f}, {imax:.4f}) within +/- 0.002")


def test_criterion_5_confined(confined_run):
    """Cutoff flux: near-steady, published range, cap exactly zero."""
    grid, s0, final, _ = confined_run
    ud = u_diff_metric(grid, final, s0)
    in_window = 0.0057 / 2 <= ud <= 0.0057 * 2
    fmin, fmax = float(final.u.min()), float(final.u.max())
    range_ok = abs(fmin + 0.998) <= 2e-3 and abs(fmax - 0.183) <= 2e-3
    cap = np.ones(grid.n_cells, dtype=bool)
    for lam in (grid.c_lam1, grid.c_lam2):
        for phi in (grid.c_phi1, grid.c_phi2):
            cap &= np.cos(phi) * np.cos(lam) >= SQRT2_HALF
    cap_exact = cap.sum() > 0 and np.all(final.u[cap] == 0.0)
    ok = in_window and range_ok and cap_exact
    _report(5, ok,
            f"u_diff={ud:.5f} in [0.00285, 0.0114]; t=5 range ({fmin:.4f}, {fmax:.4f}) "
            f"within (-0.998, 0.183) +/- 0.002; {int(cap.sum())} cap cells exactly 0: {cap_exact}")


def test_criterion_6_riemann_oracle_equivalence():
    """Interface flux equals brute-force interval extrema within 1e-8."""
    rng = np.random.RandomState(101)
    worst = 0.0
    for _ in range(10 ** 4):
        deg = rng.randint(0, 6)
        coeffs = rng.uniform(-2, 2, size=deg + 1)
        uL, uR = rng.uniform(-3, 3, size=2)
        sol = solve_riemann(Flux1D.from_poly(coeffs), uL, uR)
        a, b = min(uL, uR), max(uL, uR)
        vs = np.linspace(a, b, 10 ** 5)
        vals = np.polynomial.polynomial.polyval(vs, coeffs)
        target = float(vals.min() if uL <= uR else vals.max())
        worst = max(worst, abs(sol.flux_at_interface - target))
    _report(6, worst <= 1e-8,
            f"10^4 random fluxes (deg <= 5): max |interface flux - oracle| = {worst:.2e} <= 1e-8")


def test_criterion_7_order_of_accuracy():
    """Observed orders: Godunov ~1, GRP >= 1.8 on the smooth profile."""
    t_smooth = 0.5 * SHOCK_TIME
    model = testcases.equatorial_model()

    def orders(order, limiter):
        errs = []
        for n_lon in (16, 32, 64):
            grid = build_grid(12, n_lon, "none")
            s0 = init_equatorial(grid, averaging="exact")
            final, _ = run(grid, model, s0, t_smooth,
                           stepping=("cfl", 0.45), order=order, limiter=limiter)
            reference = reference_burgers_1d(n_lon, t_smooth)
            errs.append(equatorial_band_error(grid, final, reference))
        return errs, [math.log2(errs[i] / errs[i + 1]) for i in range(2)]

    e1, o1 = orders(1, "minmod")
    e2, o2 = orders(2, "none")
    godunov_ok = all(0.75 <= o <= 1.25 for o in o1)
    grp_ok = o2[-1] >= 1.8 and e2[0] > e2[1] > e2[2]
    _report(7, godunov_ok and grp_ok,
            f"godunov orders {['%.2f' % o for o in o1]} within 1 +/- 0.25; "
            f"grp (no limiter) orders {['%.2f' % o for o in o2]}, finest >= 1.8")


def test_criterion_8_godunov_reduction():
    """GRP with slopes forced to zero matches Godunov bit for bit."""
    setups = []
    g1 = build_grid(12, 32, "none")
    setups.append((g1, testcases.equatorial_model(), init_equatorial(g1)))
    g2 = build_grid(12, 32, "halving")
    setups.append((g2, testcases.steady_model(), init_steady(g2)))
    g3 = build_grid(16, 32, "halving")
    s3, m3 = init_confined(g3)
    setups.append((g3, m3, s3))
    identical = True
    for grid, model, state in setups:
        a = b = state
        zeros = SlopeField.zeros(grid.n_cells)
        for _ in range(10):
            dt = compute_dt(grid, model, a, 0.45)
            a = godunov_step(grid, model, a, dt)
            b = grp_step(grid, model, b, dt, slopes=zeros)
            identical = identical and np.array_equal(a.u, b.u)
    _report(8, identical,
            "zero-slope GRP equals Godunov bit for bit on all three test cases, 10 steps")
