"""Command-line entry point: ``plateflow <subcommand> --config FILE --out DIR``.

Exit codes: 0 success, 2 invalid config or parameters, 3 solver failure.
All CSV floats are written with ``repr`` so repeated runs are bit-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import add_random, build_bases, assemble, state_from_config
from .base_flow import friedrichs_poincare_constant, stability_margin
from .config import ConfigError, RunConfig, parse_config, serialize, validate
from .diagnostics import (distance_to_stationary, energy_report, fit_decay, lyapunov,
                          max_monotone_epsilon, quasi_stability_check)
from .fluid_basis import VelocitySpace
from .integrator import IntegratorConfig, SolverError, format_csv, simulate, trajectory_csv
from .plate_forces import LIPSCHITZ_NORM, ForceModel
from .stationary import branch_table, buckling_threshold, solve_stationary

SCHEMA_VERSION = "plateflow-summary/1"
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3
TINY = 1e-280


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(out: Path, name: str, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "version": __version__, **payload}
    (out / name).write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def load(args) -> RunConfig:
    if args.config is None:
        return RunConfig()
    text = Path(args.config).read_text(encoding="utf-8")
    return parse_config(text)[0]


def config_echo(config: RunConfig) -> dict:
    return {"text": serialize(config)}


def stability_report(config: RunConfig, bases=None):
    bases = bases or build_bases(config)
    fams = [b.family for b in (bases.stream, bases.ext) if b is not None]
    space = VelocitySpace(fams)
    c_O = friedrichs_poincare_constant(space.mass, space.stiffness)
    return stability_margin(bases.flow, c_O)


def tail_fit(traj):
    t, e = traj.times, traj.E0
    half = t >= 0.5 * (t[0] + t[-1])
    sel = half & (e > TINY)
    if sel.sum() < 2:
        return None
    return fit_decay(t[sel], e[sel])


def run_simulation(config: RunConfig, seed: int, force_override=None, state=None):
    """Build, integrate and post-process one run; returns (system, traj, summary)."""
    bases = build_bases(config)
    system = assemble(bases.plate, bases.flow, bases.stream, bases.ext, config.forcing)
    model = force_override or ForceModel.from_config(config)
    force = model.bind(system.plate)
    init = state if state is not None else state_from_config(system, config, seed)
    integ = IntegratorConfig.from_config(config)
    traj = simulate(system, init, force, integ, t_final=config.t_final,
                    sample_every=config.output.sample_every)
    rep = stability_report(config, bases)
    summary = {"config": config_echo(config), "seed": seed, "stability": rep.to_dict(),
               "energy": energy_report(traj).summary(), "completed": traj.completed,
               "failure": traj.failure, "force_model": model.variant,
               "lipschitz_norm": LIPSCHITZ_NORM}
    fit = tail_fit(traj) if traj.completed else None
    if fit is not None:
        summary["decay_fit"] = fit.summary()
    if model.is_linear and not config.forcing.active and traj.completed:
        eps = max_monotone_epsilon(traj, system)
        summary["lyapunov"] = lyapunov(traj, system, eps).summary()
    if not model.is_linear and traj.completed:
        stat = solve_stationary(model, system.plate, seed=seed)
        if len(stat):
            summary["stationary_distance_final"] = distance_to_stationary(
                traj.state(len(traj) - 1), stat.betas(), system)
            summary["stationary_count"] = len(stat)
    return system, traj, summary


# subcommands ------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    config = load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system, traj, summary = run_simulation(config, args.seed)
    (out / "trajectory.csv").write_text(trajectory_csv(system, traj))
    if config.output.dump_states:
        cols = ["t"] + [f"alpha_{i + 1}" for i in range(system.nf)] + \
               [f"beta_{j + 1}" for j in range(system.n)] + [f"beta_dot_{j + 1}" for j in range(system.n)]
        rows = [[traj.times[i], *traj.alpha[i], *traj.beta[i], *traj.beta_dot[i]] for i in range(len(traj))]
        (out / "states.csv").write_text(format_csv(cols, [[float(v) for v in r] for r in rows]))
    status = EXIT_OK if traj.completed else EXIT_SOLVER
    summary["exit_status"] = status
    write_summary(out, "summary.json", summary)
    if status != EXIT_OK:
        print(f"solver failure: {traj.failure}", file=sys.stderr)
    return status


def cmd_modes(args) -> int:
    config = load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bases = build_bases(config)
    p = bases.plate
    x = np.linspace(p.a, p.b, args.points)
    vals = p.eval(x)
    cols = ["x"] + [f"xi_{j + 1}" for j in range(p.n)]
    (out / "modes.csv").write_text(format_csv(cols, [[float(x[i]), *map(float, vals[:, i])]
                                                    for i in range(len(x))]))
    (out / "eigenvalues.csv").write_text(format_csv(["j", "kappa"], [[j + 1, float(k)]
                                                                      for j, k in enumerate(p.eigenvalues)]))
    write_summary(out, "summary.json", {"config": config_echo(config), "kappa": p.eigenvalues,
                                        "exit_status": EXIT_OK})
    return EXIT_OK


def cmd_stationary(args) -> int:
    config = load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bases = build_bases(config, with_extension=False)
    model = ForceModel.from_config(config)
    gammas = [float(g) for g in args.gammas.split(",")] if args.gammas else [config.berger_gamma]
    rows = branch_table(model, bases.plate, gammas, seed=args.seed)
    (out / "branches.csv").write_text(format_csv(["Gamma", "amplitude", "residual"],
                                                 [list(r) for r in rows]))
    stat = solve_stationary(model, bases.plate, seed=args.seed)
    cols = ["index", "amplitude", "residual"] + [f"beta_{j + 1}" for j in range(bases.plate.n)]
    (out / "stationary.csv").write_text(format_csv(cols, [[i, p.amplitude, p.residual, *map(float, p.beta)]
                                                          for i, p in enumerate(stat.points)]))
    write_summary(out, "summary.json", {
        "config": config_echo(config), "mu1": buckling_threshold(bases.plate),
        "stationary_count": len(stat), "failures": [m for _, m in stat.failures],
        "exit_status": EXIT_OK})
    return EXIT_OK


def cmd_stability_check(args) -> int:
    config = load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = stability_report(config)
    cols = ["k", "nu", "sigma_min", "c_O", "margin", "satisfied", "branch"]
    row = [config.k, config.nu, rep.sigma_min, rep.c_O, rep.margin, rep.satisfied, rep.which_branch]
    (out / "stability.csv").write_text(format_csv(cols, [row]))
    write_summary(out, "summary.json", {"config": config_echo(config), "stability": rep.to_dict(),
                                        "exit_status": EXIT_OK})
    return EXIT_OK


def cmd_quasi_stability(args) -> int:
    config = load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bases = build_bases(config)
    system = assemble(bases.plate, bases.flow, bases.stream, bases.ext, config.forcing)
    s1 = state_from_config(system, config, args.seed)
    zero = dataclasses.replace(s1, alpha=np.zeros_like(s1.alpha), beta=np.zeros_like(s1.beta),
                               beta_dot=np.zeros_like(s1.beta_dot))
    dz = add_random(system, zero, args.z0, args.seed + 1)
    s2 = dataclasses.replace(s1, alpha=s1.alpha + dz.alpha, beta=s1.beta + dz.beta,
                             beta_dot=s1.beta_dot + dz.beta_dot)
    _, t1, sum1 = run_simulation(config, args.seed, state=s1)
    _, t2, _ = run_simulation(config, args.seed, state=s2)
    if not (t1.completed and t2.completed):
        write_summary(out, "summary.json", {"config": config_echo(config), "exit_status": EXIT_SOLVER,
                                            "failure": t1.failure or t2.failure})
        print(f"solver failure: {t1.failure or t2.failure}", file=sys.stderr)
        return EXIT_SOLVER
    rep = quasi_stability_check(t1, t2, system, with_integral=not args.no_integral)
    (out / "pareto.csv").write_text(format_csv(["gamma_star", "M_R"], rep.pareto_rows()))
    write_summary(out, "summary.json", {"config": config_echo(config), "quasi_stability": rep.summary(),
                                        "stability": sum1["stability"], "exit_status": EXIT_OK})
    return EXIT_OK


SWEEP_COLUMNS = ("k", "nu", "sigma", "margin", "satisfied", "gamma", "R2", "status")


def _sweep_point(config: RunConfig, seed: int, k: float, nu: float, sigma: float, run: bool):
    cfg = config.replace(k=k, nu=nu, drag_sigma=sigma, drag_matrix=None)
    try:
        problems = validate(cfg)
        if problems:
            return [k, nu, sigma, float("nan"), False, float("nan"), float("nan"), "invalid: " + problems[0]]
        rep = stability_report(cfg)
        gamma = r2 = float("nan")
        status = "ok"
        if run:
            _, traj, _ = run_simulation(cfg, seed)
            if not traj.completed:
                status = "solver failure"
            else:
                fit = tail_fit(traj)
                if fit is None:
                    status = "energy underflow"
                else:
                    gamma, r2 = fit.gamma, fit.r2
        return [k, nu, sigma, rep.margin, rep.satisfied, gamma, r2, status]
    except (SolverError, ValueError) as exc:
        return [k, nu, sigma, float("nan"), False, float("nan"), float("nan"), f"error: {exc}"]


def _floats(text, default):
    return [float(v) for v in text.split(",")] if text else [default]


def cmd_sweep(args) -> int:
    config = load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = list(itertools.product(_floats(args.k, config.k), _floats(args.nu, config.nu),
                                  _floats(args.sigma, config.drag_sigma)))
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        rows = list(pool.map(lambda p: _sweep_point(config, args.seed, *p, run=not args.no_run), grid))
    points = out / "points"
    points.mkdir(exist_ok=True)
    for i, row in enumerate(rows):
        (points / f"point_{i:04d}.csv").write_text(format_csv(SWEEP_COLUMNS, [row]))
    (out / "sweep.csv").write_text(format_csv(SWEEP_COLUMNS, rows))
    write_summary(out, "summary.json", {"config": config_echo(config), "points": len(rows),
                                        "exit_status": EXIT_OK})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plateflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (defaults used when omitted)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--seed", type=int, default=0, help="seed for random initial data")
        return p

    common(sub.add_parser("simulate", help="integrate one run and write its trajectory"))
    p = common(sub.add_parser("modes", help="tabulate the zero-mean plate modes"))
    p.add_argument("--points", type=int, default=201)
    p = common(sub.add_parser("stationary", help="stationary plate states and the branch table"))
    p.add_argument("--gammas", help="comma-separated Gamma values for the branch table")
    common(sub.add_parser("stability-check", help="evaluate the stability margin only"))
    p = common(sub.add_parser("quasi-stability", help="certificate for a pair of nearby runs"))
    p.add_argument("--z0", type=float, default=1e-3, help="initial separation in the energy norm")
    p.add_argument("--no-integral", action="store_true", help="drop the lower-order integral term")
    p = common(sub.add_parser("sweep", help="stability margin and decay rate over a parameter grid"))
    p.add_argument("--k", help="comma-separated k values")
    p.add_argument("--nu", help="comma-separated nu values")
    p.add_argument("--sigma", help="comma-separated drag_sigma values")
    p.add_argument("--no-run", action="store_true", help="margins only, no simulations")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "modes": cmd_modes,
    "stationary": cmd_stationary,
    "stability-check": cmd_stability_check,
    "quasi-stability": cmd_quasi_stability,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
