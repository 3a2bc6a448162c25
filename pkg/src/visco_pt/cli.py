"""Command-line interface: scenario runs, sweeps, and verification.

Subcommands: ``run`` (single trajectory to CSV), ``lin`` (linearized run),
``sweep-tau`` (grid refinement against the ODE oracle), ``sweep-eps``
(linearization study), ``verify`` (selected checks to JSON), ``densities``
(density-convergence table). Exit codes: 0 on pass, 2 when a check fails
(stderr names the check and its worst residual), 1 on runtime errors.

All outputs are written atomically (temp file + rename) with
17-significant-digit decimals, so identical config and seed give
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional, Sequence

from . import __version__, analysis, kernels
from .config import ScenarioConfig, load_config
from .domain import Loading, State, TimeGrid, stored_energies, total_energy
from .errors import ViscoPTError
from .linearized import (
    LinState,
    LinTrajectory,
    lin_pairing,
    lin_pairing_delta,
    lin_stored,
    run_lin_evolution,
)
from .rheology import MATERIAL_POINT
from .stepper import Trajectory, run_evolution

CSV_HEADER = "t,F,F_vi,W_el,W_vi,load_work,E_total,diss_inc,delta,ineq_residual"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: str, data: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(data)
    os.replace(tmp, path)


def _dof_summary(state) -> tuple:
    if isinstance(state, LinState):
        if state.mode == MATERIAL_POINT:
            return float(state.u[0]), float(state.v[0])
        return float(state.u[-1]), float(state.v[-1] - state.v[0])
    if state.mode == MATERIAL_POINT:
        return state.F, state.F_vi
    return 1.0 + float(state.gamma[-1]), 1.0 + float(state.beta[-1] - state.beta[0])


def trajectory_csv(traj: Trajectory) -> str:
    """Ledger CSV for a finite-strain trajectory (cumulative bookkeeping)."""
    model, loading, grid = traj.model, traj.loading, traj.grid
    delta = traj.delta
    lines = [CSV_HEADER]
    e0 = traj.energy(0)
    work = 0.0
    for i, state in enumerate(traj.states):
        t = float(grid.times[i])
        if i > 0:
            work += loading.pairing_delta(
                traj.states[i - 1], t, float(grid.times[i - 1])
            )
        w_el, w_vi = stored_energies(model, state)
        e_total = total_energy(model, state, loading, t)[0]
        diss_inc = float(traj.diss_increments[i - 1]) if i > 0 else 0.0
        residual = (e0 - work) - (e_total + float(delta[i]))
        row = (t, *_dof_summary(state), w_el, w_vi, work, e_total, diss_inc,
               float(delta[i]), residual)
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def lin_trajectory_csv(traj: LinTrajectory) -> str:
    """Same schema as trajectory_csv plus a lin flag; the F and F_vi columns
    carry the u and v summaries."""
    quad, loading, grid = traj.quad, traj.loading, traj.grid
    delta = traj.delta
    lines = [CSV_HEADER + ",lin"]
    w_el0, w_vi0 = lin_stored(quad, traj.states[0])
    e0 = w_el0 + w_vi0 - lin_pairing(traj.states[0], loading, 0.0)
    work = 0.0
    for i, state in enumerate(traj.states):
        t = float(grid.times[i])
        if i > 0:
            work += lin_pairing_delta(
                traj.states[i - 1], loading, t, float(grid.times[i - 1])
            )
        w_el, w_vi = lin_stored(quad, state)
        e_total = w_el + w_vi - lin_pairing(state, loading, t)
        diss_inc = float(traj.diss_increments[i - 1]) if i > 0 else 0.0
        residual = (e0 - work) - (e_total + float(delta[i]))
        row = (t, *_dof_summary(state), w_el, w_vi, work, e_total, diss_inc,
               float(delta[i]), residual)
        lines.append(",".join(_fmt(v) for v in row) + ",1")
    return "\n".join(lines) + "\n"


def _json_dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _report_payload(config: ScenarioConfig, reports) -> dict:
    return {
        "tool": {
            "name": "visco-pt",
            "version": __version__,
            "kernel_backend": kernels.BACKEND,
        },
        "config": config.as_dict(),
        "checks": [r.as_dict() for r in reports],
        "pass": all(r.passed for r in reports),
    }


def _emit_failures(reports) -> int:
    failed = [r for r in reports if not r.passed]
    for r in failed:
        print(
            f"check failed: {r.check} (min residual {r.min_residual:.6e}, "
            f"tolerance {r.tolerance:.1e})",
            file=sys.stderr,
        )
    return 2 if failed else 0


# -- check orchestration -----------------------------------------------------------


def _run_checks(config: ScenarioConfig, names: Sequence[str]):
    settings = config.settings()
    model = config.model()
    loading = config.loading()
    grid = config.grid()
    traj: Optional[Trajectory] = None

    def trajectory() -> Trajectory:
        nonlocal traj
        if traj is None:
            traj = run_evolution(
                model, config.initial_state(), loading, grid, settings
            )
        return traj

    reports = []
    for name in names:
        if name == "energy_one":
            reports.append(analysis.check_energy_inequality(trajectory(), "one"))
        elif name == "energy_sharp":
            reports.append(
                analysis.check_energy_inequality(
                    trajectory(), "p_psi", m=config.de_giorgi_m, settings=settings
                )
            )
        elif name == "semistability":
            reports.append(
                analysis.semistability_sweep(
                    trajectory(),
                    stride=config.stride,
                    n_probes=config.n_probes,
                    amplitudes=config.amplitudes,
                    seed=config.seed,
                )
            )
        elif name == "monotonicity":
            reports.append(
                analysis.check_monotonicity(
                    config.initial_state(),
                    max(config.mono_tau_list),
                    config.mono_tau_list,
                    model,
                    loading,
                    settings,
                )
            )
        elif name == "tau_convergence":
            reports.append(
                analysis.tau_convergence(
                    model,
                    config.initial_state(),
                    loading,
                    config.t_final,
                    config.tau_list,
                    oracle="ode_rk4",
                    settings=settings,
                )
            )
        elif name == "epsilon_study":
            reports.append(
                analysis.epsilon_study(
                    model,
                    config.lin_initial(),
                    loading,
                    grid,
                    config.eps_list,
                    settings,
                )
            )
        elif name == "density_convergence":
            reports.append(analysis.density_convergence(model, config.eps_list))
        else:
            raise ViscoPTError(f"unknown check {name!r}")
    return reports


# -- subcommands --------------------------------------------------------------------


def _cmd_run(config: ScenarioConfig, out: str) -> int:
    traj = run_evolution(
        config.model(),
        config.initial_state(),
        config.loading(),
        config.grid(),
        config.settings(),
    )
    _atomic_write(os.path.join(out, "run.csv"), trajectory_csv(traj))
    return 0


def _cmd_lin(config: ScenarioConfig, out: str) -> int:
    quad = config.model().quadratic_limit()
    traj = run_lin_evolution(quad, config.lin_initial(), config.loading(), config.grid())
    _atomic_write(os.path.join(out, "lin.csv"), lin_trajectory_csv(traj))
    return 0


def _cmd_verify(config: ScenarioConfig, out: str) -> int:
    reports = _run_checks(config, config.checks)
    payload = _report_payload(config, reports)
    _atomic_write(os.path.join(out, "verify.json"), _json_dump(payload))
    return _emit_failures(reports)


def _cmd_sweep_tau(config: ScenarioConfig, out: str, tau_list) -> int:
    taus = sorted({float(t) for t in tau_list or config.tau_list}, reverse=True)
    model = config.model()
    loading = config.loading()
    settings = config.settings()
    state0 = config.initial_state()

    def run_one(tau: float) -> Trajectory:
        n = int(round(config.t_final / tau))
        return run_evolution(
            model, state0, loading, TimeGrid(config.t_final, n), settings
        )

    trajs = analysis._ordered_map(run_one, taus)
    for tau, traj in zip(taus, trajs):
        _atomic_write(os.path.join(out, f"tau_{_fmt(tau)}.csv"), trajectory_csv(traj))
    report = analysis.tau_convergence(
        model, state0, loading, config.t_final, taus, oracle="ode_rk4",
        settings=settings,
    )
    payload = _report_payload(config, [report])
    _atomic_write(os.path.join(out, "sweep_tau.json"), _json_dump(payload))
    return _emit_failures([report])


def _cmd_sweep_eps(config: ScenarioConfig, out: str, eps_list) -> int:
    eps = [float(e) for e in (eps_list or config.eps_list)]
    model = config.model()
    loading0 = config.loading()
    settings = config.settings()
    grid = config.grid()
    lin0 = config.lin_initial()
    quad = model.quadratic_limit()
    lin_traj = run_lin_evolution(quad, lin0, loading0, grid)
    _atomic_write(os.path.join(out, "eps_lin.csv"), lin_trajectory_csv(lin_traj))

    def run_one(e: float) -> Trajectory:
        loading_eps = Loading(
            f_coeffs=tuple(e * c for c in loading0.f_coeffs),
            g_coeffs=tuple(e * c for c in loading0.g_coeffs),
        )
        if model.mode == MATERIAL_POINT:
            init = State.material_point(
                1.0 + e * float(lin0.u[0]), 1.0 + e * float(lin0.v[0])
            )
        else:
            init = State.shear_column(lin0.mesh, e * lin0.u, e * lin0.v)
        return run_evolution(model, init, loading_eps, grid, settings)

    trajs = analysis._ordered_map(run_one, eps)
    for e, traj in zip(eps, trajs):
        _atomic_write(os.path.join(out, f"eps_{_fmt(e)}.csv"), trajectory_csv(traj))
    report = analysis.epsilon_study(model, lin0, loading0, grid, eps, settings)
    payload = _report_payload(config, [report])
    _atomic_write(os.path.join(out, "sweep_eps.json"), _json_dump(payload))
    return _emit_failures([report])


def _cmd_densities(config: ScenarioConfig, out: str) -> int:
    report = analysis.density_convergence(config.model(), config.eps_list)
    gaps = report.params["gaps"]
    lines = ["eps,gap_el,gap_vi,gap_psi"]
    for i, e in enumerate(report.params["epsilon_list"]):
        lines.append(
            ",".join(
                _fmt(v) for v in (e, gaps["el"][i], gaps["vi"][i], gaps["psi"][i])
            )
        )
    _atomic_write(os.path.join(out, "densities.csv"), "\n".join(lines) + "\n")
    payload = _report_payload(config, [report])
    _atomic_write(os.path.join(out, "densities.json"), _json_dump(payload))
    return _emit_failures([report])


# -- entry point ---------------------------------------------------------------------


def _parse_list(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    parts = text.replace(",", " ").split()
    return [float(p) for p in parts]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="visco-pt",
        description="Incremental-minimization solver for a finite-strain "
        "viscoelastic column, with a linearized companion and a "
        "verification harness.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "single finite-strain trajectory to run.csv"),
        ("lin", "linearized trajectory to lin.csv"),
        ("sweep-tau", "tau refinement with ODE-oracle rates"),
        ("sweep-eps", "linearization study across epsilon"),
        ("verify", "run the configured checks to verify.json"),
        ("densities", "rescaled-density convergence table"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        if name == "sweep-tau":
            p.add_argument("--tau-list", default=None, help="override tau values")
        if name == "sweep-eps":
            p.add_argument("--eps-list", default=None, help="override eps values")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            values = config.as_dict()
            values["seed"] = args.seed
            values = {
                k: tuple(v) if isinstance(v, list) else v for k, v in values.items()
            }
            config = ScenarioConfig(**values)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "run":
            return _cmd_run(config, args.out)
        if args.command == "lin":
            return _cmd_lin(config, args.out)
        if args.command == "verify":
            return _cmd_verify(config, args.out)
        if args.command == "sweep-tau":
            return _cmd_sweep_tau(config, args.out, _parse_list(args.tau_list))
        if args.command == "sweep-eps":
            return _cmd_sweep_eps(config, args.out, _parse_list(args.eps_list))
        if args.command == "densities":
            return _cmd_densities(config, args.out)
        raise ViscoPTError(f"unknown command {args.command!r}")
    except ViscoPTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
