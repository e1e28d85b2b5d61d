"""Command-line interface.

Subcommands:

    run               integrate a configured problem and write CSV/snapshots
    check-anisotropy  verify the structural hypotheses of a surface-energy law
    potential-table   tabulate the regularized double well and derivatives
    fixedpoint        run the frozen-coefficient iteration and report contraction
    bihari            print the finite horizon of the quadratic comparison bound
    besov             quarter-Holder seminorm/norm of a CSV time series
    sweep             resolution or regularization refinement studies

Exit codes: 0 success, 1 usage or configuration problem, 2 runtime failure
(blow-up, solver stall, unstable step, non-convergence, horizon breach).
All output is deterministic: no timestamps, no machine identifiers.
"""

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import diagnostics
from .anisotropy import check_hypotheses, quadratic_form, taylor_cahn_matrix
from .config import load_config
from .dynamics import run as run_integrator
from .errors import (
    AchnsError,
    ConfigError,
    DimensionError,
    DomainError,
)
from .fixedpoint import picard
from .potential import PotentialSpec, f_eps, f_eps_prime, f_eps_second, f_log
from .snapshot import SnapshotSink, write_snapshot


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# --- run ---------------------------------------------------------------------

def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.output if args.output is not None else cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)

    grid = cfg.grid()
    problem = cfg.problem()
    u0, phi0 = cfg.initial_fields(grid)

    csv_path = os.path.join(out_dir, "energy.csv")
    snap_sink = None
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = diagnostics.EnergyCsvWriter(fh, grid, cfg.laws, cfg.model, cfg.spec)
        sinks = [writer]
        if cfg.snapshots == "all":
            snap_sink = SnapshotSink(out_dir, grid)
            sinks.append(snap_sink)
        summary = run_integrator(problem, u0, phi0, cfg.stepper(),
                                 sinks=sinks, cadence=cfg.cadence)

    reports = writer.reports
    m0, m1 = reports[0].mass_rho, reports[-1].mass_rho
    p0, p1 = reports[0].mass_rhophi, reports[-1].mass_rhophi
    drift_rho = abs(m1 - m0) / max(abs(m0), 1e-300)
    drift_rhophi = abs(p1 - p0) / max(abs(p0), abs(m0))

    print(f"grid: {grid.n_grid[0]} x {grid.n_grid[1]}")
    print(f"steps: {summary.n_steps}")
    print(f"final time: {_fmt(summary.final_state.t)}")
    print(f"initial energy: {_fmt(reports[0].e_total)}")
    print(f"final energy: {_fmt(reports[-1].e_total)}")
    print(f"mass drift rho: {_fmt(drift_rho)}")
    print(f"mass drift rho*phi: {_fmt(drift_rhophi)}")
    print(f"energy file: {csv_path}")
    if cfg.snapshots == "final":
        snap_path = os.path.join(out_dir, "state_final.bin")
        write_snapshot(snap_path, grid, summary.final_state)
        print(f"snapshot: {snap_path}")
    elif cfg.snapshots == "all" and snap_sink is not None:
        print(f"snapshots: {snap_sink.count} files in {out_dir}")
    return 0


# --- check-anisotropy --------------------------------------------------------

def _cmd_check_anisotropy(args) -> int:
    explicit = [v for v in (args.m11, args.m12, args.m22) if v is not None]
    if args.beta is not None and explicit:
        raise DomainError("--beta excludes explicit matrix entries")
    if explicit and len(explicit) != 3:
        raise DomainError("provide all three of --m11 --m12 --m22")
    if args.beta is not None:
        model = taylor_cahn_matrix(args.beta)
    elif explicit:
        model = quadratic_form([[args.m11, args.m12], [args.m12, args.m22]])
    else:
        model = load_config(args.config).model
    report = check_hypotheses(model)
    print(report)
    if report.all_hold():
        print("all hypotheses hold")
        return 0
    print("hypothesis check FAILED")
    return 1


# --- potential-table ---------------------------------------------------------

def _cmd_potential_table(args) -> int:
    if args.points < 2:
        raise DomainError("--points must be at least 2")
    if not args.hi > args.lo:
        raise DomainError("--to must exceed --from")
    cfg = load_config(args.config)
    spec = cfg.spec
    s = np.linspace(args.lo, args.hi, args.points)
    print("s,f_eps,f_eps_prime,f_eps_second")
    for si in s:
        print(f"{_fmt(si)},{_fmt(f_eps(spec, si))},"
              f"{_fmt(f_eps_prime(spec, si))},{_fmt(f_eps_second(spec, si))}")
    return 0


# --- fixedpoint --------------------------------------------------------------

def _cmd_fixedpoint(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.grid()
    problem = cfg.problem()
    u0, phi0 = cfg.initial_fields(grid)
    report = picard(problem, u0, phi0, cfg.stepper(),
                    t_tilde=args.t_tilde, tol=args.tol,
                    tol_r=args.tol_r, max_iter=args.max_iter)
    print("iterate,distance,r_eps")
    for i, (d, r) in enumerate(zip(report.distances, report.r_eps_history), 1):
        print(f"{i},{_fmt(d)},{_fmt(r)}")
    if report.converged:
        print(f"converged: yes after {report.iterations} iterations")
        return 0
    print(f"converged: no after {report.iterations} iterations")
    return 2


# --- bihari ------------------------------------------------------------------

def _cmd_bihari(args) -> int:
    bound = diagnostics.bihari_horizon(args.c1, args.g0, args.y0)
    print(f"t_star = {_fmt(bound.t_star)}")
    if args.check is not None:
        ok = diagnostics.bihari_check(bound, n_trials=args.check)
        if ok:
            print(f"check: pass ({args.check} trials)")
            return 0
        print("check: FAIL")
        return 2
    return 0


# --- besov -------------------------------------------------------------------

def _cmd_besov(args) -> int:
    data = np.genfromtxt(args.csv, delimiter=",", names=True)
    if data.dtype.names is None:
        raise DomainError(f"{args.csv} is not a CSV table with a header row")
    data = np.atleast_1d(data)
    if args.column not in data.dtype.names:
        raise DomainError(
            f"no column {args.column!r}; available: {', '.join(data.dtype.names)}"
        )
    series = np.asarray(data[args.column], dtype=float)
    if args.sample_dt is not None:
        sample_dt = args.sample_dt
    elif "t" in data.dtype.names:
        t = np.asarray(data["t"], dtype=float)
        gaps = np.diff(t)
        if gaps.size == 0 or gaps.max() - gaps.min() > 1e-9 * max(gaps.max(), 1e-300):
            raise DomainError(
                "time column is not uniformly spaced; pass --sample-dt"
            )
        sample_dt = float(gaps.mean())
    else:
        raise DomainError("no time column in the CSV; pass --sample-dt")
    p = math.inf if args.p == "inf" else 2.0
    semi = diagnostics.besov_seminorm(series, p, sample_dt)
    norm = diagnostics.besov_norm(series, p, sample_dt)
    print(f"seminorm = {_fmt(semi)}")
    print(f"norm = {_fmt(norm)}")
    return 0


# --- sweep -------------------------------------------------------------------

def _lift_modes(coarse, fine, coef):
    """Copy coarse-band coefficients into a fine-grid spectral array."""
    out = np.zeros(fine.n_grid, dtype=np.complex128)
    nc1, nc2 = coarse.n_grid
    nf1, nf2 = fine.n_grid
    for k1, k2 in coarse.mode_list:
        out[k1 % nf1, k2 % nf2] = coef[k1 % nc1, k2 % nc2]
    return out


def _run_final_state(cfg):
    grid = cfg.grid()
    problem = cfg.problem()
    u0, phi0 = cfg.initial_fields(grid)
    summary = run_integrator(problem, u0, phi0, cfg.stepper())
    return grid, summary.final_state


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if (args.modes is None) == (args.eps is None):
        raise DomainError("pass exactly one of --modes or --eps")

    if args.modes is not None:
        sizes = sorted({int(tok) for tok in args.modes.split(",") if tok.strip()})
        if len(sizes) < 2:
            raise DomainError("--modes needs at least two sizes")
        results = []
        for n in sizes:
            cfg_n = dataclasses.replace(cfg, n_grid=(n, n))
            results.append((n,) + _run_final_state(cfg_n))
        n_ref, g_ref, st_ref = results[-1]
        print(f"reference: n={n_ref}")
        for n, g, st in results[:-1]:
            du = np.stack([_lift_modes(g, g_ref, st.u[i]) for i in range(2)]) - st_ref.u
            dphi = _lift_modes(g, g_ref, st.phi) - st_ref.phi
            diff_u = g_ref.norm_l2_spectral(du)
            diff_phi = g_ref.norm_l2_spectral(dphi)
            print(f"n={n} diff_u={_fmt(diff_u)} diff_phi={_fmt(diff_phi)} "
                  f"diff_total={_fmt(diff_u + diff_phi)}")
        return 0

    eps_values = [float(tok) for tok in args.eps.split(",") if tok.strip()]
    if len(eps_values) < 2:
        raise DomainError("--eps needs at least two values")
    e0_unreg = None
    for eps in eps_values:
        spec = PotentialSpec(cfg.spec.lambda1, cfg.spec.lambda2, eps)
        cfg_e = dataclasses.replace(cfg, spec=spec)
        grid = cfg_e.grid()
        problem = cfg_e.problem()
        u0, phi0 = cfg_e.initial_fields(grid)
        reports = []

        def sink(state, g=grid, laws=cfg_e.laws, model=cfg_e.model, s=spec,
                 out=reports):
            out.append(diagnostics.energy_report(g, state, laws, model, s))

        run_integrator(problem, u0, phi0, cfg_e.stepper(), sinks=[sink])
        st0 = reports[0]
        e_max = max(r.e_total for r in reports)
        print(f"eps={eps:g} e0_eps={_fmt(st0.e_total)} e_max={_fmt(e_max)}")
        if e0_unreg is None:
            # unregularized initial energy: swap only the potential term;
            # the logarithmic well needs |phi| < 1, true for admissible data
            state0 = problem.initial_state(u0, phi0, cfg_e.stepper())
            phi_vals = grid.to_grid(state0.phi)
            e_pot_unreg = grid.quadrature(state0.rho.values * f_log(spec, phi_vals))
            e0_unreg = st0.e_kin + st0.e_surf + e_pot_unreg
    print(f"e0_unregularized = {_fmt(e0_unreg)}")
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="achns",
        description="Pseudo-spectral simulator for anisotropic two-phase "
                    "flow with variable density.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a configured problem")
    p.add_argument("--config", default=None, help="configuration file (default: built-in demo)")
    p.add_argument("--output", default=None, help="override the output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("check-anisotropy", help="verify surface-energy hypotheses")
    p.add_argument("--config", default=None)
    p.add_argument("--beta", type=float, default=None,
                   help="fourfold-family coefficient instead of a matrix")
    p.add_argument("--m11", type=float, default=None)
    p.add_argument("--m12", type=float, default=None)
    p.add_argument("--m22", type=float, default=None)
    p.set_defaults(func=_cmd_check_anisotropy)

    p = sub.add_parser("potential-table", help="tabulate the regularized double well")
    p.add_argument("--from", dest="lo", type=float, required=True)
    p.add_argument("--to", dest="hi", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_potential_table)

    p = sub.add_parser("fixedpoint", help="frozen-coefficient contraction study")
    p.add_argument("--t-tilde", dest="t_tilde", type=float, required=True,
                   help="short horizon (a multiple of dt)")
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--tol-r", dest="tol_r", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=20)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_fixedpoint)

    p = sub.add_parser("bihari", help="finite horizon of the quadratic comparison bound")
    p.add_argument("--c1", type=float, required=True)
    p.add_argument("--g0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--check", type=int, default=None,
                   help="verify against N integrated trials")
    p.set_defaults(func=_cmd_bihari)

    p = sub.add_parser("besov", help="quarter-Holder seminorm of a CSV column")
    p.add_argument("csv", help="CSV file with a header row")
    p.add_argument("--column", required=True)
    p.add_argument("--p", choices=["2", "inf"], required=True)
    p.add_argument("--sample-dt", dest="sample_dt", type=float, default=None)
    p.set_defaults(func=_cmd_besov)

    p = sub.add_parser("sweep", help="refinement studies")
    p.add_argument("--modes", default=None, help="comma-separated grid sizes")
    p.add_argument("--eps", default=None, help="comma-separated regularization widths")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ConfigError, DimensionError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    except AchnsError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
