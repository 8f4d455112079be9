"""Finite volume solver for scalar conservation laws on the unit sphere."""

from .geometry import (
    PoleError,
    SpherePoint,
    TangentVector,
    analytic_divergence,
    from_cartesian,
    tangent_basis,
    to_cartesian,
)
from .grid import (
    Band,
    Cell,
    Edge,
    Grid,
    GridError,
    build_grid,
    cell_area,
    validate_grid,
)
from .flux import (
    FluxComponent,
    FluxModel,
    GeneralFluxModel,
    RadialWeight,
    burgers,
    discrete_divergence,
    edge_flux,
    g_flux,
    h_eval,
    identity_weight,
    k_flux,
    linear,
    poly_weight,
    polynomial,
    tangent_flux,
    zero,
)
from .riemann import (
    Flux1D,
    RiemannSolution,
    solve_riemann,
    wave_speed_bound,
)
from .godunov import (
    CflViolationError,
    NumericalError,
    State,
    compute_dt,
    godunov_step,
    run,
)
from .grp import SlopeField, grp_edge_value, grp_step, reconstruct_slopes
from . import testcases
from .cli import ConfigError, RunConfig, convergence_study, parse_config, write_field

__version__ = "0.1.0"
