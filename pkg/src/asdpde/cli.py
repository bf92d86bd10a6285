"""Command-line front end.

Commands::

    asdpde check-skew        --config c.cfg [--out DIR] [--seed N]
    asdpde verify-asd        --config c.cfg [--out DIR] [--seed N]
    asdpde solve-stationary  --config c.cfg --out DIR [--seed N]
    asdpde solve-evolution   --config c.cfg --out DIR [--seed N]

Exit codes: 0 success, 1 property violated, 2 configuration error,
3 precondition violation, 4 runtime solve failure.

Solve commands write ``solution.csv`` / ``trajectory.csv``,
``report.json``, ``manifest.cfg`` and a rendered figure into the output
directory; all delimited and JSON outputs are byte-deterministic for a
fixed config and seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import asd
from .config import Config, ConfigError, dump_config, load_config
from .convex import FieldFunctional, PointwisePotential
from .evolution import (
    EvolutionProblem,
    InitialDataError,
    semigroup_report,
    solve_prox_stepping,
    solve_spacetime,
)
from .expressions import EvaluationError, ExpressionError
from .mesh import VectorFieldSpec, build_grid
from .operators import build_transport, green_residual
from .report import (
    ensure_dir,
    plot_solution,
    plot_trajectory,
    write_manifest,
    write_report_json,
    write_solution_csv,
    write_trajectory_csv,
)
from .solvers import SolveError
from .stationary import FeasibilityError, StationaryProblem, solve_stationary

__all__ = ["main"]

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_SOLVE = 4

SKEW_THRESHOLD = 1e-12


# --- config -> problem builders -------------------------------------------


def build_grid_from_config(config: Config):
    dim = config.get_int("grid", "dim", required=True)
    if dim not in (1, 2):
        raise ConfigError(f"[grid] dim must be 1 or 2, got {dim}")
    extents = [config.get_interval("grid", "extent_x", default=(0.0, 1.0))]
    counts = [config.get_int("grid", "nodes_x", required=True)]
    if dim == 2:
        extents.append(config.get_interval("grid", "extent_y", default=(0.0, 1.0)))
        counts.append(config.get_int("grid", "nodes_y", required=True))
    try:
        return build_grid(dim, extents, counts)
    except ValueError as exc:
        raise ConfigError(str(exc))


def build_vectorfield_from_config(config: Config, dim: int) -> VectorFieldSpec:
    texts = [config.get("vectorfield", "ax", required=True)]
    if dim == 2:
        texts.append(config.get("vectorfield", "ay", required=True))
    elif config.has("vectorfield", "ay"):
        raise ConfigError("[vectorfield] ay is illegal for 1-D grids")
    return VectorFieldSpec.from_strings(*texts)


def build_stationary_from_config(config: Config) -> StationaryProblem:
    grid = build_grid_from_config(config)
    a = build_vectorfield_from_config(config, grid.dim)
    return StationaryProblem(
        grid=grid,
        a=a,
        a0=config.get_expression("coefficients", "a0", default="0"),
        f=config.get_expression("coefficients", "f", default="0"),
        tau=config.get_expression("coefficients", "tau"),
        p=config.get_float("potential", "p", default=2.0),
        m=config.get_float("potential", "m", default=2.0),
        visc_p=config.get_float("potential", "visc_p", default=2.0),
        variant=config.get("problem", "variant", default="pure_transport"),
    )


def build_evolution_from_config(config: Config) -> EvolutionProblem:
    grid = build_grid_from_config(config)
    a = build_vectorfield_from_config(config, grid.dim)
    return EvolutionProblem(
        grid=grid,
        a=a,
        a0=config.get_expression("coefficients", "a0", default="0"),
        p=config.get_float("potential", "p", default=2.0),
        omega=config.get_float("problem", "omega", default=0.0),
        T=config.get_float("problem", "T", required=True),
        steps=config.get_int("problem", "steps", required=True),
        u0=config.get_expression("problem", "initial", required=True),
        variant=config.get("problem", "variant", default="pure_transport"),
    )


def build_lagrangian_from_config(config: Config):
    kind = config.get("lagrangian", "kind", required=True)
    dofs = config.get_int("lagrangian", "dofs", default=1)
    weights = config.get_vector("lagrangian", "weights", default=np.ones(dofs))
    if weights.shape[0] != dofs:
        raise ConfigError("[lagrangian] weights length must equal dofs")
    alpha = config.get_float("lagrangian", "alpha", default=1.0)
    p = config.get_float("lagrangian", "p", default=2.0)
    beta = config.get_float("lagrangian", "beta", default=0.0)
    lin = config.get_float("lagrangian", "lin", default=0.0)
    pot = PointwisePotential.power(alpha, p)
    if beta:
        pot = pot + PointwisePotential.quadratic(beta)
    if lin:
        pot = pot + PointwisePotential.linear(lin)
    phi = FieldFunctional(weights=weights, potential=pot)

    if kind == "basic":
        return asd.make_basic(phi), dofs
    if kind == "broken":
        return asd.make_broken_sign(phi), dofs
    if kind == "regularized":
        lam = config.get_float("lagrangian", "lam", default=0.5)
        return asd.regularize(asd.make_basic(phi), lam), dofs
    if kind == "antisym":
        A = config.get_matrix("lagrangian", "matrix")
        if A is None:
            raise ConfigError("[lagrangian] kind=antisym requires matrix")
        if A.shape != (dofs, dofs):
            raise ConfigError("[lagrangian] matrix shape must be dofs x dofs")
        W = np.diag(weights)
        if np.max(np.abs(W @ A + A.T @ W)) > 1e-12:
            raise ConfigError("[lagrangian] matrix is not skew in the w-pairing")
        return asd.compose_antisym(phi, A), dofs
    raise ConfigError(f"[lagrangian] unknown kind {kind!r}")


# --- manifest --------------------------------------------------------------


_DEFAULTS = {
    "coefficients": {"a0": "0", "f": "0"},
    "potential": {"p": "2.0", "m": "2.0", "visc_p": "2.0"},
    "problem": {"variant": "pure_transport", "omega": "0.0", "scheme": "prox"},
    "solver": {"tol": "1e-9", "max_iter": "5000"},
}


def resolved_config_text(config: Config, sections) -> str:
    merged = {name: dict(vals) for name, vals in config.sections.items()}
    for name in sections:
        defaults = _DEFAULTS.get(name, {})
        merged.setdefault(name, {})
        for key, val in defaults.items():
            merged[name].setdefault(key, val)
    return dump_config(Config(sections=merged))


def _write_common(out_dir, config: Config, sections, report: dict) -> None:
    if out_dir is None:
        return
    ensure_dir(out_dir)
    write_report_json(os.path.join(out_dir, "report.json"), report)
    write_manifest(
        os.path.join(out_dir, "manifest.cfg"),
        resolved_config_text(config, sections),
    )


# --- commands --------------------------------------------------------------


def cmd_check_skew(config: Config, out_dir, seed: int) -> int:
    grid = build_grid_from_config(config)
    a = build_vectorfield_from_config(config, grid.dim)
    debug = config.get_bool("solver", "debug_inconsistent_divergence")
    op = build_transport(grid, a, inconsistent_divergence=debug)
    rng = np.random.default_rng(seed)
    worst = 0.0
    pairs = 200
    for _ in range(pairs):
        u = rng.standard_normal(grid.n_nodes)
        v = rng.standard_normal(grid.n_nodes)
        worst = max(worst, green_residual(op, u, v))
    ok = worst <= SKEW_THRESHOLD
    print(f"max green residual over {pairs} pairs: {worst:.3e} "
          f"(threshold {SKEW_THRESHOLD:.1e}) -> {'ok' if ok else 'VIOLATED'}")
    _write_common(out_dir, config, ["grid", "vectorfield", "solver"], {
        "command": "check-skew",
        "max_green_residual": worst,
        "pairs": pairs,
        "threshold": SKEW_THRESHOLD,
        "seed": seed,
        "passed": ok,
    })
    return EXIT_OK if ok else EXIT_VIOLATED


def cmd_verify_asd(config: Config, out_dir, seed: int) -> int:
    L, dofs = build_lagrangian_from_config(config)
    radius = config.get_float("lagrangian", "radius", default=4.0)
    samples = config.get_int("lagrangian", "samples", default=401)
    bound = config.get_float("lagrangian", "bound", default=1e-3)
    if dofs > 3:
        raise ConfigError("[lagrangian] dofs must be <= 3 for brute force")
    probes = asd.default_probes(dofs, radius, seed=seed)
    residual = asd.asd_verify(L, radius, samples, dofs, probes=probes)
    ok = residual <= bound
    print(f"anti-selfduality residual: {residual:.3e} at {samples} "
          f"samples/axis (bound {bound:.1e}) -> {'ok' if ok else 'VIOLATED'}")
    _write_common(out_dir, config, ["lagrangian"], {
        "command": "verify-asd",
        "residual": residual,
        "samples_per_axis": samples,
        "box_radius": radius,
        "bound": bound,
        "seed": seed,
        "passed": ok,
    })
    return EXIT_OK if ok else EXIT_VIOLATED


def cmd_solve_stationary(config: Config, out_dir, seed: int) -> int:
    problem = build_stationary_from_config(config)
    tol = config.get_float("solver", "tol", default=1e-9)
    max_iter = config.get_int("solver", "max_iter", default=5000)
    u, cert = solve_stationary(problem, tol=tol, max_iter=max_iter)
    print(f"I(u) = {cert.I_total:.6e}  gap = {cert.fenchel_gap:.3e}  "
          f"outflow trace = {cert.outflow_trace_sq:.3e}  "
          f"converged = {cert.converged}")
    report = {"command": "solve-stationary", "seed": seed, **cert.as_dict()}
    _write_common(
        out_dir, config,
        ["grid", "vectorfield", "coefficients", "potential", "problem",
         "solver"],
        report,
    )
    if out_dir is not None:
        write_solution_csv(os.path.join(out_dir, "solution.csv"),
                           problem.grid, u)
        plot_solution(os.path.join(out_dir, "solution.png"), problem.grid, u)
    return EXIT_OK if cert.converged else EXIT_SOLVE


def cmd_solve_evolution(config: Config, out_dir, seed: int) -> int:
    problem = build_evolution_from_config(config)
    scheme = config.get("problem", "scheme", default="prox")
    tol = config.get_float("solver", "tol", default=1e-8)
    if scheme == "spacetime":
        traj, i_total = solve_spacetime(problem)
        summary = {"I_total": i_total}
    elif scheme == "prox":
        traj = solve_prox_stepping(problem, tol=tol)
        summary = {
            "max_step_certificate": traj.info["max_step_certificate"],
        }
    else:
        raise ConfigError(f"[problem] unknown scheme {scheme!r}")

    report = {
        "command": "solve-evolution",
        "scheme": scheme,
        "N": problem.steps,
        "dt": problem.dt,
        "omega": problem.omega,
        "seed": seed,
        **summary,
    }
    alt = config.get_expression("problem", "initial_alt")
    if alt is not None:
        report["semigroup"] = semigroup_report(
            problem, problem.u0, alt, scheme="prox", tol=tol
        )
    print(f"scheme = {scheme}  N = {problem.steps}  "
          + "  ".join(f"{k} = {v:.3e}" for k, v in summary.items()))
    _write_common(
        out_dir, config,
        ["grid", "vectorfield", "coefficients", "potential", "problem",
         "solver"],
        report,
    )
    if out_dir is not None:
        write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj)
        plot_trajectory(os.path.join(out_dir, "trajectory.png"),
                        problem.grid, traj)
    return EXIT_OK


_COMMANDS = {
    "check-skew": cmd_check_skew,
    "verify-asd": cmd_verify_asd,
    "solve-stationary": cmd_solve_stationary,
    "solve-evolution": cmd_solve_evolution,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="asdpde",
        description="Certified convex-variational PDE solvers",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cp = sub.add_parser(name)
        cp.add_argument("--config", required=True)
        cp.add_argument("--out", default=None)
        cp.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](config, args.out, args.seed)
    except (FeasibilityError, InitialDataError) as exc:
        print(f"precondition violation: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except SolveError as exc:
        print(f"solve failure: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except (ConfigError, ExpressionError, EvaluationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
