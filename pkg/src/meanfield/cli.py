"""Batch experiment driver.

Subcommands: solve, sweep, homotopy, path, blowup, degree, check.  Every config key
is also a flag (``--solver.tol 1e-12``); ``--config FILE`` loads a config
file and flags override it.  Exit codes: 0 success, 2 parameters on a wall,
3 non-convergence, 4 invariant-suite failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .blowup import MASS_RADII, mass_table, track_quantization, wall_approach_path
from .config import SCHEMA, ExperimentConfig, parse_path, parse_values
from .degree import (
    MultistartConfig,
    ToyCubicMap,
    count_degree,
    degree_formula,
    parity_certificate,
    truncate,
)
from .errors import BranchLost, ConfigurationError, MeanFieldError, WallError
from .io import read_field, write_field, write_table
from .operator import make_parameters, wall_distance
from .solver import ContinuationPath, SolverConfig, continue_path, homotopy_path, solve_multistart
from .surface import SpectralField, build_surface
from .weights import weight_function

log = logging.getLogger("meanfield")

EXIT_OK, EXIT_WALL, EXIT_NONCONV, EXIT_CHECK = 0, 2, 3, 4


# ------------------------------------------------------------- builders

def surface_from(cfg):
    return build_surface(cfg["surface.kind"], cfg["surface.resolution"])


def weight_from(cfg, surface):
    if cfg["h.preset"] == "file":
        header, values = read_field(cfg["h.file"])
        if header["kind"] != surface.kind or header["resolution"] != surface.resolution:
            raise ConfigurationError("weight file does not match the configured surface")
        return values
    return weight_function(surface.kind, cfg["h.preset"], cfg["h.amplitude"])


def solver_config_from(cfg):
    return SolverConfig(
        method=cfg["solver.method"], tol=cfg["solver.tol"], max_iter=cfg["solver.max_iter"],
        picard_iters=cfg["solver.picard_iters"], omega=cfg["solver.omega"],
        krylov_tol=cfg["solver.krylov_tol"], krylov_maxiter=cfg["solver.krylov_maxiter"],
        ls_max_halvings=cfg["solver.ls_max_halvings"], eps_wall=cfg["solver.eps_wall"],
        seed=cfg["seed"],
    )


def _out(cfg, name):
    d = Path(cfg["output.dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _peak_masses(surface, rec):
    table = mass_table(surface, rec.params, rec.u, radii=(0.1,))
    return table.mass(0.1, 1, 1), table.mass(0.1, 2, -1)


def _multistart(cfg, surface, params, sc):
    return solve_multistart(surface, params, sc, random_starts=cfg["multistart.random_starts"],
                            skip_trivial=cfg["multistart.nontrivial"],
                            max_tail=cfg["multistart.max_tail"])


# ------------------------------------------------------------- commands

def cmd_solve(cfg) -> int:
    surface = surface_from(cfg)
    sc = solver_config_from(cfg)
    rho1, rho2 = cfg["params.rho1"] * np.pi, cfg["params.rho2"] * np.pi
    params = make_parameters(surface, rho1, rho2, weight_from(cfg, surface))
    try:
        params.require_off_wall(sc.eps_wall)
    except WallError as exc:
        log.error("%s", exc)
        return EXIT_WALL
    found = _multistart(cfg, surface, params, sc)
    if not found:
        log.error("no seed converged at (%g, %g) pi", cfg["params.rho1"], cfg["params.rho2"])
        write_table(_out(cfg, "solve.csv"), SUMMARY_COLUMNS,
                    [[cfg["params.rho1"], cfg["params.rho2"], False, None, None, None, None, None, None]], cfg)
        return EXIT_NONCONV
    rec = found[0]
    write_field(_out(cfg, "solution.field"), surface, rec.u.values, rho1, rho2, cfg)
    write_table(_out(cfg, "solve.csv"), SUMMARY_COLUMNS, [_summary_row(cfg["params.rho1"], cfg["params.rho2"],
                                                                        surface, rec)], cfg)
    print(f"converged: |Psi| = {rec.residual:.3e}, |u| = {rec.u.norm():.6g}, energy = {rec.energy:.10g}")
    return EXIT_OK


SUMMARY_COLUMNS = ["rho1_over_pi", "rho2_over_pi", "converged", "residual", "energy",
                   "max_abs_u", "l2_norm", "m1_over_8pi", "m2_over_8pi"]


def _summary_row(r1, r2, surface, rec):
    m1, m2 = _peak_masses(surface, rec)
    return [r1, r2, True, rec.residual, rec.energy, float(np.max(np.abs(rec.u.values))),
            rec.u.norm(), m1, m2]


def cmd_sweep(cfg) -> int:
    surface = surface_from(cfg)
    sc = solver_config_from(cfg)
    h = weight_from(cfg, surface)
    base = make_parameters(surface, 0.0, 0.0, h)
    rows = []
    for r1 in parse_values(cfg["params.grid.rho1"]):
        for r2 in parse_values(cfg["params.grid.rho2"]):
            if min(wall_distance(r1 * np.pi), wall_distance(r2 * np.pi)) <= sc.eps_wall:
                log.info("skipping (%g, %g) pi: on a wall", r1, r2)
                continue
            params = base.with_couplings(r1 * np.pi, r2 * np.pi)
            found = _multistart(cfg, surface, params, sc)
            if found:
                rows.append(_summary_row(r1, r2, surface, found[0]))
            else:
                rows.append([r1, r2, False, None, None, None, None, None, None])
    write_table(_out(cfg, "sweep.csv"), SUMMARY_COLUMNS, rows, cfg)
    print(f"sweep: {len(rows)} points, {sum(1 for r in rows if r[2])} converged")
    return EXIT_OK


def _path_from(cfg, waypoints):
    return ContinuationPath(waypoints, initial_step=cfg["continuation.initial_step"] * np.pi,
                            min_step=cfg["continuation.min_step"] * np.pi, eps_wall=cfg["solver.eps_wall"],
                            allow_wall_crossing=cfg["continuation.allow_wall_crossing"])


def _branch_rows(records, origin, direction):
    rows = []
    for rec in records:
        rho = np.array([rec.params.rho1, rec.params.rho2])
        span = np.max(np.abs(direction))
        t = float(np.max(np.abs(rho - origin)) / span) if span else 0.0
        rows.append([t, rec.params.rho1 / np.pi, rec.params.rho2 / np.pi, rec.residual, rec.energy,
                     float(np.max(np.abs(rec.u.values))), rec.u.norm()])
    return rows


BRANCH_COLUMNS = ["t", "rho1_over_pi", "rho2_over_pi", "residual", "energy", "max_abs_u", "l2_norm"]


def _run_path(cfg, name, path) -> int:
    surface = surface_from(cfg)
    sc = solver_config_from(cfg)
    h = weight_from(cfg, surface)
    first = path.waypoints[0]
    start_params = make_parameters(surface, first[0], first[1], h)
    found = _multistart(cfg, surface, start_params, sc)
    if not found:
        return EXIT_NONCONV
    code = EXIT_OK
    try:
        records = continue_path(surface, start_params, path, sc, start=found[0])
    except BranchLost as exc:
        log.error("%s", exc)
        records, code = exc.last, EXIT_NONCONV
    origin = np.array(path.waypoints[0])
    direction = np.array(path.waypoints[-1]) - origin
    write_table(_out(cfg, name), BRANCH_COLUMNS, _branch_rows(records, origin, direction), cfg)
    print(f"{name}: {len(records)} accepted steps")
    return code


def cmd_homotopy(cfg) -> int:
    rho1, rho2 = cfg["params.rho1"] * np.pi, cfg["params.rho2"] * np.pi
    try:
        path = homotopy_path(rho1, rho2, initial_step=cfg["continuation.initial_step"] * np.pi,
                             min_step=cfg["continuation.min_step"] * np.pi, eps_wall=cfg["solver.eps_wall"])
    except WallError as exc:
        log.error("%s", exc)
        return EXIT_WALL
    return _run_path(cfg, "homotopy.csv", path)


def cmd_path(cfg) -> int:
    try:
        path = _path_from(cfg, [(a * np.pi, b * np.pi) for a, b in parse_path(cfg["params.path"])])
    except WallError as exc:
        log.error("%s", exc)
        return EXIT_WALL
    return _run_path(cfg, "path.csv", path)


BLOWUP_COLUMNS = ["rho1", "rho2", "peak_x", "peak_y", "r", "m1_over_8pi", "m2_over_8pi",
                  "lambda", "fit_residual"]


def cmd_blowup(cfg) -> int:
    surface = surface_from(cfg)
    sc = solver_config_from(cfg)
    h = weight_from(cfg, surface)
    start = (cfg["params.rho1"] * np.pi, cfg["params.rho2"] * np.pi)
    coord = cfg["blowup.coordinate"] - 1
    if coord not in (0, 1):
        raise ConfigurationError("blowup.coordinate must be 1 or 2")
    try:
        path = wall_approach_path(start, cfg["blowup.wall"], coord, eps_wall=sc.eps_wall,
                                  initial_step=cfg["continuation.initial_step"] * np.pi,
                                  min_step=cfg["continuation.min_step"] * np.pi)
    except WallError as exc:
        log.error("%s", exc)
        return EXIT_WALL
    radii = tuple(parse_values(cfg["blowup.radii"]))
    track = track_quantization(surface, h, path, sc, radii=radii, r_fit=cfg["blowup.r_fit"])
    rows = []
    for step in track.steps:
        lam = step.fit.lam if step.fit else None
        res = step.fit.residual if step.fit else None
        for row in step.table.rows:
            rows.append([step.params.rho1 / np.pi, step.params.rho2 / np.pi, row.center[0], row.center[1],
                         row.radius, row.m1_over_8pi, row.m2_over_8pi, lam, res])
    write_table(_out(cfg, "blowup.csv"), BLOWUP_COLUMNS, rows, cfg)
    if track.steps:
        last = track.final
        m1 = last.table.mass(0.1, 1, 1)
        print(f"blowup: {track.status}; final rho1 = {last.params.rho1 / np.pi:.6g} pi, "
              f"m1(0.1)/8pi = {m1 if m1 is not None else 'no peak'}")
    return EXIT_OK if track.status == "wall-guard" and track.steps else EXIT_NONCONV


def formula_table(k_max):
    return {f"chi={chi}": {str(k): degree_formula(k, chi) for k in range(k_max + 1)} for chi in (2, 0)}


def cmd_degree(cfg) -> int:
    table = formula_table(cfg["degree.k_max"])
    mconf = MultistartConfig(samples=cfg["degree.samples"], seed=cfg["seed"])
    r = cfg["degree.radius"]
    if cfg["degree.toy"] == "cubic":
        system = ToyCubicMap.from_eigenvalues(parse_values(cfg["degree.toy_eigs"]), seed=cfg["seed"])
    elif cfg["degree.toy"] == "":
        surface = surface_from(cfg)
        params = make_parameters(surface, cfg["params.rho1"] * np.pi, cfg["params.rho2"] * np.pi,
                                 weight_from(cfg, surface))
        try:
            params.require_off_wall(cfg["solver.eps_wall"])
        except WallError as exc:
            log.error("%s", exc)
            return EXIT_WALL
        system = truncate(surface, params, cfg["degree.n"])
    else:
        raise ConfigurationError(f"unknown toy map {cfg['degree.toy']!r}")
    report = count_degree(system, r, mconf)
    parity = parity_certificate(system, r, cfg["degree.parity_samples"], seed=cfg["seed"])
    payload = {
        "schema": "meanfield/1 degree",
        "config": cfg.values,
        "formula": table,
        "report": json.loads(report.to_json()),
        "parity": vars(parity),
    }
    _out(cfg, "degree.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for chi, row in table.items():
        print(f"degree formula {chi}: " + ", ".join(f"k={k}:{v}" for k, v in row.items()))
    print(f"counted degree {report.degree} from {report.distinct_zeros} zeros (heuristic); "
          f"formula {report.formula}; parity certificate {parity.status}")
    return EXIT_OK


def cmd_check(cfg) -> int:
    from .checks import run_checks

    results = run_checks(seed=cfg["seed"])
    write_table(_out(cfg, "check.csv"), ["check", "measured", "threshold", "passed"],
                [[r.name, r.measured, r.threshold, r.passed] for r in results], cfg)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  measured={r.measured:.3e}  threshold={r.threshold:.3e}")
    return EXIT_CHECK if failed else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "homotopy": cmd_homotopy,
    "path": cmd_path,
    "blowup": cmd_blowup,
    "degree": cmd_degree,
    "check": cmd_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="meanfield", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="config file of 'key = value' lines")
    parser.add_argument("--seed", type=int, dest="opt_seed")
    parser.add_argument("--out-dir", dest="opt_out_dir")
    parser.add_argument("-v", "--verbose", action="store_true")
    for key, (typ, _, help_) in SCHEMA.items():
        if key in ("seed", "output.dir"):
            continue
        parser.add_argument(f"--{key}", dest=key, default=None, help=help_)
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {k: getattr(args, k) for k in SCHEMA if getattr(args, k, None) is not None}
    if args.opt_seed is not None:
        overrides["seed"] = args.opt_seed
    if args.opt_out_dir is not None:
        overrides["output.dir"] = args.opt_out_dir
    return cfg.with_values(overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except WallError as exc:
        log.error("%s", exc)
        return EXIT_WALL
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_WALL
    except MeanFieldError as exc:
        log.error("%s", exc)
        return EXIT_NONCONV


if __name__ == "__main__":
    sys.exit(main())
