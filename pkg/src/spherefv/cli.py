"""Configuration parsing, run orchestration, output files, and the CLI.

Config files are plain ``key=value`` tokens separated by whitespace or
newlines; ``#`` starts a comment.  Command-line flags mirror config keys and
override them.  Exit codes: 0 success, 2 config error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import flux, testcases
from .flux import FluxComponent, FluxModel, RadialWeight
from .godunov import DEFAULT_CFL, DEFAULT_DT_MAX, NumericalError, State, run
from .grid import Grid, GridError, build_grid, dump_cells_csv, dump_edges_csv, validate_grid
from .testcases import Metric


class ConfigError(ValueError):
    """Raised for invalid or inconsistent run configuration."""


_TEST_CASES = ("equatorial", "steady", "confined", "custom")

_KNOWN_KEYS = {
    "test_case", "n_lat", "n_lon_equator", "reduction", "threshold",
    "t_final", "dt", "cfl", "dt_max", "order", "limiter", "snapshots",
    "field_out", "diagnostics_out", "plot", "averaging",
    "f1", "f2", "f3", "r1", "r2", "r3", "u0",
}


@dataclass(frozen=True)
class RunConfig:
    test_case: str
    n_lat: int
    n_lon_equator: int
    t_final: float
    reduction: str = "halving"
    threshold: float = 0.9
    stepping: Tuple[str, float] = ("cfl", DEFAULT_CFL)
    dt_max: float = DEFAULT_DT_MAX
    order: int = 2
    limiter: str = "minmod"
    snapshot_times: Tuple[float, ...] = ()
    field_out: str = "field.csv"
    diagnostics_out: Optional[str] = None
    plot: bool = False
    averaging: str = "midpoint"
    custom: Optional[Dict[str, str]] = None


def _tokenize(text: str) -> List[Tuple[int, str]]:
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        for tok in body.split():
            tokens.append((lineno, tok))
    return tokens


def _parse_value(key: str, raw: str, lineno: int, kind):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: key '{key}' has invalid value {raw!r}"
        ) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a key=value configuration.

    Defaults: order=2, limiter=minmod, cfl=0.45, reduction=halving(0.9).
    Raises ConfigError naming the offending key and line.
    """
    pairs: Dict[str, Tuple[int, str]] = {}
    for lineno, tok in _tokenize(text):
        if "=" not in tok:
            raise ConfigError(f"line {lineno}: expected key=value, got {tok!r}")
        key, raw = tok.split("=", 1)
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        pairs[key] = (lineno, raw)

    if "test_case" not in pairs:
        raise ConfigError("test_case required")
    lineno, test_case = pairs["test_case"]
    if test_case not in _TEST_CASES:
        raise ConfigError(
            f"line {lineno}: key 'test_case' must be one of {_TEST_CASES}"
        )

    def require(key, kind):
        if key not in pairs:
            raise ConfigError(f"{key} required")
        lineno, raw = pairs[key]
        return _parse_value(key, raw, lineno, kind)

    def optional(key, kind, default):
        if key not in pairs:
            return default
        lineno, raw = pairs[key]
        return _parse_value(key, raw, lineno, kind)

    n_lat = require("n_lat", int)
    n_lon = require("n_lon_equator", int)
    t_final = require("t_final", float)
    if t_final < 0.0:
        raise ConfigError(f"line {pairs['t_final'][0]}: t_final must be >= 0")

    reduction = optional("reduction", str, "halving")
    if reduction not in ("none", "halving"):
        raise ConfigError(
            f"line {pairs['reduction'][0]}: reduction must be none or halving"
        )
    threshold = optional("threshold", float, 0.9)

    if "dt" in pairs and "cfl" in pairs:
        raise ConfigError(
            f"lines {pairs['dt'][0]} and {pairs['cfl'][0]}: "
            "keys 'dt' and 'cfl' are mutually exclusive"
        )
    if "dt" in pairs:
        dt = _parse_value("dt", pairs["dt"][1], pairs["dt"][0], float)
        if dt <= 0.0:
            raise ConfigError(f"line {pairs['dt'][0]}: dt must be positive")
        stepping = ("fixed", dt)
    else:
        cfl = optional("cfl", float, DEFAULT_CFL)
        if not 0.0 < cfl <= 1.0:
            raise ConfigError(f"line {pairs['cfl'][0]}: cfl must be in (0, 1]")
        stepping = ("cfl", cfl)

    dt_max = optional("dt_max", float, DEFAULT_DT_MAX)
    order = optional("order", int, 2)
    if order not in (1, 2):
        raise ConfigError(f"line {pairs['order'][0]}: order must be 1 or 2")
    limiter = optional("limiter", str, "minmod")
    if limiter not in ("minmod", "none"):
        raise ConfigError(
            f"line {pairs['limiter'][0]}: limiter must be minmod or none"
        )
    averaging = optional("averaging", str, "midpoint")
    if averaging not in ("midpoint", "exact"):
        raise ConfigError(
            f"line {pairs['averaging'][0]}: averaging must be midpoint or exact"
        )

    snapshots: Tuple[float, ...] = ()
    if "snapshots" in pairs:
        lineno, raw = pairs["snapshots"]
        try:
            snapshots = tuple(sorted(float(s) for s in raw.split(",") if s))
        except ValueError:
            raise ConfigError(
                f"line {lineno}: key 'snapshots' has invalid value {raw!r}"
            ) from None
        for t in snapshots:
            if t > t_final:
                raise ConfigError(
                    f"line {lineno}: snapshot time {t:g} exceeds t_final"
                )

    plot_raw = optional("plot", str, "false")
    if plot_raw not in ("true", "false"):
        raise ConfigError(f"line {pairs['plot'][0]}: plot must be true or false")

    custom = None
    if test_case == "custom":
        custom = {}
        for key in ("f1", "f2", "f3", "r1", "r2", "r3", "u0"):
            if key in pairs:
                custom[key] = pairs[key][1]
        for key in ("u0",):
            if key not in custom:
                raise ConfigError(f"{key} required for test_case=custom")
        if not any(k in custom for k in ("f1", "f2", "f3")):
            raise ConfigError("custom test case needs at least one of f1,f2,f3")
        # catalog names must resolve at parse time
        for key in ("f1", "f2", "f3"):
            if key in custom:
                try:
                    _component_from_spec(custom[key])
                except (ConfigError, ValueError):
                    raise ConfigError(
                        f"line {pairs[key][0]}: key '{key}' has invalid "
                        f"component spec {custom[key]!r}"
                    ) from None
        for key in ("r1", "r2", "r3"):
            if key in custom:
                try:
                    _weight_from_spec(custom[key])
                except (ConfigError, ValueError):
                    raise ConfigError(
                        f"line {pairs[key][0]}: key '{key}' has invalid "
                        f"weight spec {custom[key]!r}"
                    ) from None
        u0_name = custom["u0"].partition(":")[0]
        if u0_name not in ("x1", "x2", "x3", "sum", "zero", "const"):
            raise ConfigError(
                f"line {pairs['u0'][0]}: key 'u0' has unknown profile "
                f"{custom['u0']!r}"
            )
    else:
        for key in ("f1", "f2", "f3", "r1", "r2", "r3", "u0"):
            if key in pairs:
                raise ConfigError(
                    f"line {pairs[key][0]}: key '{key}' only applies to "
                    "test_case=custom"
                )

    return RunConfig(
        test_case=test_case, n_lat=n_lat, n_lon_equator=n_lon,
        t_final=t_final, reduction=reduction, threshold=threshold,
        stepping=stepping, dt_max=dt_max, order=order, limiter=limiter,
        snapshot_times=snapshots, field_out=optional("field_out", str, "field.csv"),
        diagnostics_out=optional("diagnostics_out", str, None),
        plot=plot_raw == "true", averaging=averaging, custom=custom,
    )


# -- custom model construction -------------------------------------------


def _component_from_spec(spec: str) -> FluxComponent:
    name, _, arg = spec.partition(":")
    if name == "zero":
        return flux.zero()
    if name == "linear":
        return flux.linear(float(arg))
    if name == "burgers":
        return flux.burgers(float(arg))
    if name == "poly":
        return flux.polynomial([float(c) for c in arg.split(",")])
    raise ConfigError(f"unknown flux component spec {spec!r}")


def _weight_from_spec(spec: str) -> RadialWeight:
    name, _, arg = spec.partition(":")
    if name == "identity":
        return flux.identity_weight()
    if name == "cutoff_psi":
        return testcases.cutoff_weight()
    if name == "poly":
        return flux.poly_weight([float(c) for c in arg.split(",")])
    raise ConfigError(f"unknown weight spec {spec!r}")


def _u0_from_spec(spec: str, grid: Grid) -> np.ndarray:
    x1, x2, x3 = grid.cell_center_cartesian()
    name, _, arg = spec.partition(":")
    fields = {"x1": x1, "x2": x2, "x3": x3, "sum": x1 + x2 + x3,
              "zero": np.zeros(grid.n_cells)}
    if name in fields:
        return fields[name]
    if name == "const":
        return np.full(grid.n_cells, float(arg))
    raise ConfigError(f"unknown u0 spec {spec!r}")


def build_problem(config: RunConfig) -> Tuple[Grid, FluxModel, State]:
    """Grid, flux model, and initial state for a parsed configuration."""
    try:
        grid = build_grid(config.n_lat, config.n_lon_equator,
                          reduction=config.reduction,
                          threshold=config.threshold)
    except GridError as exc:
        raise ConfigError(str(exc)) from exc

    if config.test_case == "equatorial":
        model = testcases.equatorial_model()
        state = testcases.init_equatorial(grid, averaging=config.averaging)
    elif config.test_case == "steady":
        model = testcases.steady_model()
        state = testcases.init_steady(grid)
    elif config.test_case == "confined":
        state, model = testcases.init_confined(grid)
    else:
        spec = config.custom or {}
        comps = tuple(
            _component_from_spec(spec.get(k, "zero")) for k in ("f1", "f2", "f3")
        )
        weights = tuple(
            _weight_from_spec(spec.get(k, "identity")) for k in ("r1", "r2", "r3")
        )
        model = FluxModel(f=comps, r=weights, label="custom")
        state = State(u=_u0_from_spec(spec["u0"], grid), time=0.0)
    return grid, model, state


# -- output files ------------------------------------------------------------


def write_field(grid: Grid, state: State, path: str) -> None:
    """Per-cell field CSV with full double precision, ordered by cell id.

    Output is byte-identical across runs with identical inputs.
    """
    lam_c = grid.cell_lam_center
    phi_c = grid.cell_phi_center
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("cell_id,lambda_center,phi_center,area,u\n")
        for i in range(grid.n_cells):
            f.write(
                f"{i},{lam_c[i]:.17g},{phi_c[i]:.17g},"
                f"{grid.c_area[i]:.17g},{state.u[i]:.17g}\n"
            )


def write_diagnostics(rows: Sequence[tuple], path: str, order: int,
                      limiter: str) -> None:
    """Per-step diagnostics CSV; the scheme order is recorded in the header."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# order={order} limiter={limiter}\n")
        f.write("step,time,dt,mass,min_u,max_u\n")
        for step, time, dt, mass, umin, umax in rows:
            f.write(f"{step},{time:.17g},{dt:.17g},{mass:.17g},"
                    f"{umin:.17g},{umax:.17g}\n")


def _snapshot_path(field_out: str, t: float) -> str:
    base, ext = os.path.splitext(field_out)
    return f"{base}_t{t:g}{ext or '.csv'}"


def run_from_config(config: RunConfig):
    """Execute a configured run; returns (grid, final state, diagnostics)."""
    grid, model, state0 = build_problem(config)

    written: List[str] = []

    def on_snapshot(state: State) -> None:
        path = _snapshot_path(config.field_out, state.time)
        write_field(grid, state, path)
        written.append(path)

    final, diagnostics = run(
        grid, model, state0, config.t_final, stepping=config.stepping,
        order=config.order, limiter=config.limiter, dt_max=config.dt_max,
        snapshot_times=config.snapshot_times, on_snapshot=on_snapshot,
    )
    write_field(grid, final, config.field_out)
    written.append(config.field_out)
    if config.diagnostics_out:
        write_diagnostics(diagnostics, config.diagnostics_out,
                          config.order, config.limiter)
    if config.plot:
        from . import plotting

        for path in written:
            base, _ = os.path.splitext(path)
            plotting.render_field_csv(path, base + ".png")
    return grid, final, diagnostics


def run_metrics(grid: Grid, state0: State, final: State) -> List[Metric]:
    mean = testcases.u_diff_metric(grid, final, state0)
    raw = testcases.u_diff_raw(grid, final, state0)
    drift = testcases.total_mass(grid, final) - testcases.total_mass(grid, state0)
    return [
        Metric("u_diff", mean, normalization=4.0 * math.pi),
        Metric("u_diff", raw, normalization=1.0),
        Metric("mass_drift", drift, normalization=1.0),
    ]


# -- convergence study ---------------------------------------------------


def _restrict_to_coarse(fine: Grid, u_fine: np.ndarray, coarse: Grid) -> np.ndarray:
    """Area-weighted restriction between tensor grids with equal n_lat."""
    if len(fine.bands) != len(coarse.bands):
        raise ConfigError("convergence grids must share n_lat")
    out = np.empty(coarse.n_cells)
    for bf, bc in zip(fine.bands, coarse.bands):
        if bf.n_cells % bc.n_cells != 0:
            raise ConfigError("refinement factors must nest the grids")
        ratio = bf.n_cells // bc.n_cells
        rows = u_fine[bf.cell0: bf.cell0 + bf.n_cells]
        out[bc.cell0: bc.cell0 + bc.n_cells] = rows.reshape(-1, ratio).mean(axis=1)
    return out


def convergence_study(base_config: RunConfig,
                      refinements: Sequence[int]) -> List[tuple]:
    """L1 errors and observed orders under lambda refinement.

    The equatorial case is compared against the 1D reference solution at
    matching resolution; other cases are compared against their own run on
    the finest grid (restricted by area-weighted averaging, which requires
    reduction=none).  Returns rows (n_lon, dlam, l1_error, order-or-None)
    where order = log2(e_k / e_{k+1}) for dyadic refinement.
    """
    factors = sorted(set(int(f) for f in refinements))
    if len(factors) < 2:
        raise ConfigError("need at least 2 refinement factors")

    errors: List[float] = []
    resolutions: List[int] = []
    use_oracle = base_config.test_case == "equatorial"

    finest_state = None
    finest_grid = None
    if not use_oracle:
        if base_config.reduction != "none":
            raise ConfigError(
                "self-referenced convergence requires reduction=none"
            )
        finest_cfg = replace(base_config,
                             n_lon_equator=base_config.n_lon_equator * factors[-1] * 2)
        finest_grid, finest_state, _ = run_from_config(finest_cfg)

    for f in factors:
        cfg = replace(base_config, n_lon_equator=base_config.n_lon_equator * f,
                      averaging="exact" if use_oracle else base_config.averaging)
        grid, final, _ = run_from_config(cfg)
        if use_oracle:
            reference = testcases.reference_burgers_1d(cfg.n_lon_equator,
                                                       cfg.t_final)
            err = testcases.equatorial_band_error(grid, final, reference)
        else:
            restricted = _restrict_to_coarse(finest_grid, finest_state.u, grid)
            err = float(np.sum(grid.c_area * np.abs(final.u - restricted))
                        / (4.0 * math.pi))
        errors.append(err)
        resolutions.append(cfg.n_lon_equator)

    rows = []
    for i, (n, err) in enumerate(zip(resolutions, errors)):
        if i == 0:
            order = None
        else:
            ratio = math.log2(resolutions[i] / resolutions[i - 1])
            order = (math.log2(errors[i - 1] / err) / ratio
                     if err > 0.0 and errors[i - 1] > 0.0 else None)
        rows.append((n, 2.0 * math.pi / n, err, order))
    return rows


# -- command line ----------------------------------------------------------


def _add_override_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--test-case", dest="test_case")
    p.add_argument("--n-lat", dest="n_lat")
    p.add_argument("--n-lon-equator", dest="n_lon_equator")
    p.add_argument("--t-final", dest="t_final")
    p.add_argument("--dt", dest="dt")
    p.add_argument("--cfl", dest="cfl")
    p.add_argument("--dt-max", dest="dt_max")
    p.add_argument("--order", dest="order")
    p.add_argument("--limiter", dest="limiter")
    p.add_argument("--reduction", dest="reduction")
    p.add_argument("--threshold", dest="threshold")
    p.add_argument("--snapshots", dest="snapshots")
    p.add_argument("--field-out", dest="field_out")
    p.add_argument("--diagnostics-out", dest="diagnostics_out")
    p.add_argument("--averaging", dest="averaging")
    p.add_argument("--plot", dest="plot", action="store_const", const="true")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    text = ""
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            text = f.read()
    overrides = []
    for key in ("test_case", "n_lat", "n_lon_equator", "t_final", "dt", "cfl",
                "dt_max", "order", "limiter", "reduction", "threshold",
                "snapshots", "field_out", "diagnostics_out", "averaging",
                "plot"):
        value = getattr(args, key, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    if overrides:
        text += "\n" + "\n".join(overrides)
    return parse_config(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="spherefv",
        description="Finite volume solver for scalar conservation laws on "
                    "the unit sphere.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="advance a configured problem in time")
    p_run.add_argument("config", nargs="?", help="key=value config file")
    _add_override_args(p_run)

    p_val = sub.add_parser("validate-grid", help="build a grid and check invariants")
    p_val.add_argument("--n-lat", type=int, required=True)
    p_val.add_argument("--n-lon-equator", type=int, required=True)
    p_val.add_argument("--reduction", default="halving")
    p_val.add_argument("--threshold", type=float, default=0.9)
    p_val.add_argument("--dump-cells", help="write cell table CSV")
    p_val.add_argument("--dump-edges", help="write edge table CSV")

    p_conv = sub.add_parser("converge", help="lambda-refinement error study")
    p_conv.add_argument("config", nargs="?")
    p_conv.add_argument("--factors", default="1,2,4",
                        help="comma-separated refinement factors")
    p_conv.add_argument("--out", help="write the table as CSV")
    _add_override_args(p_conv)

    p_orc = sub.add_parser("oracle-burgers",
                           help="write the 1D reference solution")
    p_orc.add_argument("--n-cells", type=int, required=True)
    p_orc.add_argument("--time", type=float, required=True)
    p_orc.add_argument("--out", required=True)

    p_rep = sub.add_parser("report", help="render a field CSV to a PNG")
    p_rep.add_argument("field_csv")
    p_rep.add_argument("--out", help="output image (default: csv name + .png)")
    p_rep.add_argument("--title")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "run":
        config = _config_from_args(args)
        grid, final, diagnostics = run_from_config(config)
        state0 = build_problem(config)[2]
        for m in run_metrics(grid, state0, final):
            print(f"{m.name} (normalization {m.normalization:g}): {m.value:.6g}")
        print(f"cells={grid.n_cells} steps={len(diagnostics)} "
              f"t={final.time:g} field={config.field_out}")
        return 0

    if args.command == "validate-grid":
        try:
            grid = build_grid(args.n_lat, args.n_lon_equator,
                              reduction=args.reduction,
                              threshold=args.threshold)
        except GridError as exc:
            raise ConfigError(str(exc)) from exc
        violations = validate_grid(grid)
        if args.dump_cells:
            dump_cells_csv(grid, args.dump_cells)
        if args.dump_edges:
            dump_edges_csv(grid, args.dump_edges)
        print(f"cells={grid.n_cells} edges={grid.n_edges} "
              f"area={grid.total_area:.12f} violations={len(violations)}")
        for v in violations:
            print(f"  {v}")
        return 0

    if args.command == "converge":
        config = _config_from_args(args)
        factors = [int(f) for f in args.factors.split(",") if f]
        rows = convergence_study(config, factors)
        lines = ["n_lon,dlam,l1_error,observed_order"]
        for n, dlam, err, order in rows:
            lines.append(f"{n},{dlam:.17g},{err:.17g},"
                         f"{'' if order is None else format(order, '.4f')}")
        table = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as f:
                f.write(table)
        sys.stdout.write(table)
        if config.plot:
            from . import plotting

            base = os.path.splitext(args.out or "convergence.csv")[0]
            plotting.render_convergence(rows, base + ".png")
        return 0

    if args.command == "oracle-burgers":
        values = testcases.reference_burgers_1d(args.n_cells, args.time)
        dlam = 2.0 * math.pi / args.n_cells
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write("cell_id,lambda_center,u\n")
            for i, u in enumerate(values):
                f.write(f"{i},{(i + 0.5) * dlam:.17g},{u:.17g}\n")
        print(f"wrote {args.out} ({args.n_cells} cells, t={args.time:g})")
        return 0

    if args.command == "report":
        from . import plotting

        out = args.out or os.path.splitext(args.field_csv)[0] + ".png"
        plotting.render_field_csv(args.field_csv, out, title=args.title)
        print(f"wrote {out}")
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
