import logging
import os

import numpy as np
import pandas as pd

import modules.charts as charts
from utils import evolution
from utils.data_utils import emit_snapshot
from utils.errors import EvolutionAborted
from utils.fields import TraceField
from utils.profiles import initial_profile
from utils.report import Check, Report, provenance

logger = logging.getLogger(__name__)


def write_trajectory(trajectory, output_dir, report, snapshots=5):
    """Trace snapshots, the last field and the diagnostics series"""
    states = trajectory.states
    picks = np.unique(np.linspace(0, len(states) - 1, max(2, snapshots)).round().astype(int))
    for index in picks:
        name = f"u_{index:05d}.csv"
        emit_snapshot(states[index].u, os.path.join(output_dir, name))
        report.artifacts.append(name)

    emit_snapshot(states[-1].w, os.path.join(output_dir, "w_final.csv"))
    emit_snapshot(trajectory.diagnostics, os.path.join(output_dir, "diagnostics.csv"))
    report.artifacts.extend(["w_final.csv", "diagnostics.csv"])

    if len(states) > 1:
        rates = evolution.time_derivative_l1(trajectory)
        frame = pd.DataFrame({"t": rates.index, "dudt_l1": rates.to_numpy()})
        emit_snapshot(frame, os.path.join(output_dir, "time_derivative.csv"))
        report.artifacts.append("time_derivative.csv")

    charts.write_figure(charts.profiles_figure(trajectory, snapshots), charts.figure_path(output_dir, "profiles"))
    charts.write_figure(charts.diagnostics_figure(trajectory.diagnostics),
                        charts.figure_path(output_dir, "diagnostics"))
    report.artifacts.extend(["profiles.html", "diagnostics.html"])


def run_evolve(config, output_dir, workers=1):
    """
    Evolve the configured initial data to time T

    Args:
        config (RunConfig): Parsed run configuration
        output_dir (str): Artifact directory
        workers (int): Unused; a single trajectory is sequential

    Returns:
        Report: Bounds and energy checks, or the failure with partial artifacts
    """
    solver_config = config.solver
    grid = solver_config.build_grid()
    u0 = TraceField(grid.x, initial_profile(config.initial_data, grid.x_nodes))
    report = Report(mode="evolve", provenance=provenance(config.echo, {"half_strip": grid.summary()}))

    try:
        trajectory = evolution.run(u0, solver_config, grid)
    except EvolutionAborted as e:
        report.error = str(e)
        write_trajectory(e.trajectory, output_dir, report, config.snapshots)
        return report

    write_trajectory(trajectory, output_dir, report, config.snapshots)
    report.merge(evolution.verify_bounds(trajectory))
    report.merge(evolution.verify_energy_inequality(trajectory))
    if solver_config.m > 1 and len(trajectory.states) >= 3:
        report.merge(evolution.verify_benilan(trajectory, solver_config.m))

    m = solver_config.m
    final_t = trajectory.final.t
    residual = evolution.energy_identity_residual(trajectory, 0.0, final_t, trajectory.rho, m)
    lyapunov = trajectory.diagnostics["lyapunov"].to_numpy()
    drop = (lyapunov[0] - lyapunov[-1]) / (m + 1.0)
    report.metrics.update({
        "final_time": final_t,
        "steps": len(trajectory.states) - 1,
        "energy_identity_residual": residual,
        "lyapunov_drop": drop,
        "mass_final": float(trajectory.diagnostics["mass"].iloc[-1]),
        "newton_iterations": int(trajectory.diagnostics["iterations"].sum()),
    })
    if drop > 0:
        report.add(Check("energy_identity", abs(residual) / drop, 0.05))
    logger.info(f"Evolution finished at t={final_t:.6g}, energy identity residual {residual:.3e}")
    return report
