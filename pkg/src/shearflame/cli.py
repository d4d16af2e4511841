"""Command-line front end.

Subcommands: solve, sweep, select, verify-inequalities, perturb.  All read
a TOML config (see README) and write JSON/CSV into the output directory.
Exit codes: 0 success, 1 config error, 2 solver or verification failure,
3 selection refused (ill-posed flow).

Outputs are deterministic for a fixed config and seed: no timestamps, keys
sorted, atomic writes.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import inequalities, inviscid, perturbation, selection
from .cell import (
    SolverError,
    alpha_from_formula,
    solve_cell,
    sweep_markstein,
    turbulent_flame_speed,
)
from .flows import FlowProfile, Momentum, build_flow, flow_from_config, normalize
from .reports import write_csv, write_json

ENV_OUT = "SHEARFLAME_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    flow: Optional[FlowProfile]
    gamma: float
    mu: float
    d: float
    d_schedule: list
    grid_n: Optional[int]
    tol: Optional[float]
    seed: int
    output_dir: Path
    raw: dict = field(default_factory=dict)


def load_config(path, out_override=None, seed_override=None, grid_override=None,
                tol_override=None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    flow = None
    if "flow" in data:
        try:
            flow = flow_from_config(data["flow"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad [flow] section: {exc}") from exc
    mom = data.get("momentum", {})
    solver = data.get("solver", {})
    out = data.get("output", {})
    grid_n = grid_override if grid_override is not None else solver.get("grid_n")
    if grid_n is not None:
        grid_n = int(grid_n)
        if grid_n < 64 or grid_n & (grid_n - 1):
            raise ConfigError("solver.grid_n must be a power of two >= 64")
    d_schedule = [float(x) for x in solver.get("d_schedule", [])]
    outdir = out_override or out.get("dir") or os.environ.get(ENV_OUT) or "out"
    tol = tol_override if tol_override is not None else solver.get("tol")
    return RunConfig(
        flow=flow,
        gamma=float(mom.get("gamma", 1.0)),
        mu=float(mom.get("mu", 0.0)),
        d=float(solver.get("d", 1.0)),
        d_schedule=d_schedule,
        grid_n=grid_n,
        tol=None if tol is None else float(tol),
        seed=int(seed_override if seed_override is not None else data.get("seed", 0)),
        output_dir=Path(outdir),
        raw=data,
    )


def _require_flow(config: RunConfig) -> FlowProfile:
    if config.flow is None:
        raise ConfigError("config needs a [flow] section")
    return config.flow


def cmd_solve(config: RunConfig) -> int:
    outdir = config.output_dir
    if config.gamma == 0.0:
        H = abs(config.mu)
        x = np.arange(64) / 64
        write_json(outdir / "cell_solution.json", {
            "degenerate": True, "gamma": 0.0, "mu": config.mu,
            "d": config.d, "E": None, "H": H, "residual": 0.0,
        })
        write_csv(outdir / "cell_solution.csv", ["x", "phi", "w"],
                  [x, np.full_like(x, np.nan), np.zeros_like(x)])
        return 0
    flow = _require_flow(config)
    problem = normalize(flow, Momentum(config.gamma, config.mu))
    try:
        sol = solve_cell(problem, config.d, grid_n=config.grid_n, tol=config.tol)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    write_json(outdir / "cell_solution.json", {
        "degenerate": False,
        "gamma": config.gamma, "mu": config.mu, "d": sol.d,
        "grid_n": sol.grid_n, "E": sol.E, "H": sol.H,
        "residual": sol.residual, "newton_iters": sol.newton_iters,
        "method": sol.method,
        "c_shift": problem.c_shift, "reflected": problem.reflected,
        "gamma_flipped": problem.gamma_flipped,
        "x": sol.x, "phi": sol.phi, "w": sol.w,
    })
    write_csv(outdir / "cell_solution.csv", ["x", "phi", "w"],
              [sol.x, sol.phi, sol.w])
    return 0


def cmd_sweep(config: RunConfig) -> int:
    flow = _require_flow(config)
    if not config.d_schedule:
        raise ConfigError("sweep needs a non-empty solver.d_schedule")
    if config.gamma == 0.0:
        raise ConfigError("sweep needs gamma != 0 (degenerate direction is flat)")
    problem = normalize(flow, Momentum(config.gamma, config.mu))
    try:
        sweep = sweep_markstein(
            problem, config.d_schedule, grid_n=config.grid_n, tol=config.tol
        )
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    inv = inviscid.solve_inviscid_H(problem)
    p_norm = Momentum(config.gamma, config.mu).norm
    h_large = p_norm + config.gamma * flow.mean
    write_csv(
        config.output_dir / "sweep.csv",
        ["d", "H", "dH_dd_fd", "dE_dd_formula", "residual"],
        [sweep.d_values, sweep.H_values, sweep.dH_dd_fd,
         sweep.dE_dd_formula, sweep.residuals],
    )
    write_json(config.output_dir / "sweep.json", {
        "d_values": sweep.d_values, "H_values": sweep.H_values,
        "dH_dd_fd": sweep.dH_dd_fd, "dE_dd_formula": sweep.dE_dd_formula,
        "dE_dd_fd": sweep.dE_dd_fd, "residuals": sweep.residuals,
        "strictly_decreasing": sweep.strictly_decreasing,
        "H_large_d_limit": h_large,
        "H_inviscid": inv.H0, "inviscid_regime": inv.regime,
    })
    return 0


def cmd_select(config: RunConfig) -> int:
    flow = _require_flow(config)
    if config.gamma == 0.0:
        raise ConfigError("selection needs gamma != 0")
    problem = normalize(flow, Momentum(config.gamma, config.mu))
    sel_cfg = config.raw.get("selection", {})
    d_values = [float(x) for x in sel_cfg.get("d_values", [1e-1, 1e-2, 1e-3])]
    slope_ds = [float(x) for x in sel_cfg.get(
        "slope_d_values", [1e-2, 5e-3, 2.5e-3])]
    try:
        sel = selection.physical_fluctuation(problem)
        if sel.regime == "trapped":
            ratios = selection.slope_diagnostic(problem, slope_ds, tol=config.tol)
            slope = selection.richardson_slope(slope_ds, ratios)
            distances = []
            last_sol = None
            for d in sorted(d_values, reverse=True):
                last_sol = solve_cell(problem, d, grid_n=config.grid_n,
                                      tol=config.tol,
                                      warm=None if last_sol is None else
                                      (last_sol.phi, last_sol.E, last_sol.d))
                distances.append(
                    selection.verify_selection(problem, d, solution=last_sol)
                )
        else:
            ratios, slope, distances, last_sol = [], None, [], None
    except selection.SelectionError as exc:
        print(f"selection refused: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    payload = {
        "regime": sel.regime,
        "x_bar": sel.x_bar, "x_mu": sel.x_mu,
        "slope_target": sel.slope_target,
        "slope_ratios": list(ratios),
        "slope_extrapolated": slope,
        "d_values": sorted(d_values, reverse=True),
        "distances": distances,
    }
    write_json(config.output_dir / "selection.json", payload)
    if last_sol is not None:
        pts = np.concatenate([[0.0], last_sol.x])
        vals = inviscid.branch_values(problem, sel.x_bar, pts, xmu=sel.x_mu)
        w0 = vals[1:] - vals[0]
        write_csv(config.output_dir / "selection_comparison.csv",
                  ["x", "w_d", "w0"], [last_sol.x, last_sol.w, w0])
    return 0


def cmd_verify(config: RunConfig) -> int:
    ver = config.raw.get("verify", {})
    report = inequalities.run_random_suite(
        n_discrete=int(ver.get("discrete_cases", 1000)),
        n_continuous=int(ver.get("continuous_cases", 200)),
        seed=config.seed,
    )
    write_json(config.output_dir / "inequalities.json", report)
    if not report["passed"]:
        print("inequality suite found counterexamples", file=sys.stderr)
        return 2
    return 0


def cmd_perturb(config: RunConfig) -> int:
    pert = config.raw.get("perturb", {})
    p = np.asarray(pert.get("p", (1.0, 0.0)), dtype=float)
    nrm = np.linalg.norm(p)
    if nrm == 0:
        raise ConfigError("perturb.p must be nonzero")
    p = p / nrm
    d = float(pert.get("d", 1.0))
    delta = float(pert.get("delta", 0.01))
    beta = float(pert.get("beta", 2.0))
    C = float(pert.get("C", 0.0))
    if "field_file" in pert:
        field2d = perturbation.parse_field_file(pert["field_file"])
    elif config.flow is not None:
        field2d = perturbation.VectorFieldFourier.from_shear(config.flow.spec)
    else:
        raise ConfigError("perturb needs perturb.field_file or a [flow] section")
    try:
        field2d.validate()
        result = perturbation.effective_speed_expansion(field2d, p, d, delta, beta=beta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    payload = {
        "alpha1": result.alpha1, "alpha2": result.alpha2,
        "H_approx": result.H_approx, "truncation_K": result.truncation_K,
        "margin": result.diophantine_margin,
        "diophantine_ok": bool(result.diophantine_margin >= C) if C > 0 else None,
    }
    if pert.get("cross_check", False) and config.flow is not None:
        try:
            hs, he, err = perturbation.cross_check_shear(
                config.flow.spec, p, d, delta, grid_n=config.grid_n, tol=config.tol
            )
        except SolverError as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return 2
        payload.update({"H_solver": hs, "H_expansion": he, "cross_check_error": err})
    write_json(config.output_dir / "perturbation.json", payload)
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "select": cmd_select,
    "verify-inequalities": cmd_verify,
    "perturb": cmd_perturb,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shearflame",
        description="Turbulent flame speeds for the curvature G-equation "
                    "in periodic shear flows",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML config path")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--grid", type=int, default=None, help="grid size override")
        sp.add_argument("--tol", type=float, default=None, help="tolerance override")
    args = parser.parse_args(argv)
    try:
        config = load_config(
            args.config,
            out_override=args.out,
            seed_override=args.seed,
            grid_override=args.grid,
            tol_override=args.tol,
        )
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
