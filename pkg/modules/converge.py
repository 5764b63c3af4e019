import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pandas as pd

import modules.charts as charts
from utils import evolution
from utils.data_utils import emit_snapshot
from utils.fields import TraceField
from utils.fractional_oracle import poisson_semigroup_solution
from utils.profiles import ProfileSpec, initial_profile
from utils.report import Check, Report, provenance

logger = logging.getLogger(__name__)

ENERGY_RESIDUAL_BOUND = 0.05


def linear_level(solver_config, profile, window):
    """
    One refinement level of the linear benchmark (m = 1, unit density)

    Returns:
        dict: spacing, epsilon, sup error against the Poisson semigroup on
            |x| <= window, and the relative energy-identity residual
    """
    grid = solver_config.build_grid()
    u0 = TraceField(grid.x, initial_profile(profile, grid.x_nodes))
    trajectory = evolution.run(u0, solver_config, grid)
    final = trajectory.final
    exact = poisson_semigroup_solution(u0, final.t)
    inside = np.abs(grid.x_nodes) <= window
    error = float(np.max(np.abs(final.u.values[inside] - exact.values[inside])))

    residual = evolution.energy_identity_residual(trajectory, 0.0, final.t, trajectory.rho, 1.0)
    lyapunov = trajectory.diagnostics["lyapunov"].to_numpy()
    drop = 0.5 * (lyapunov[0] - lyapunov[-1])
    logger.info(f"Level spacing={solver_config.spacing:g}, eps={solver_config.epsilon:g}: sup error {error:.3e}")
    return {
        "spacing": solver_config.spacing,
        "epsilon": solver_config.epsilon,
        "nx": grid.nx,
        "ny": grid.ny,
        "sup_error": error,
        "energy_residual": abs(residual) / drop if drop > 0 else 0.0,
    }


def convergence_table(solver_config, profile, levels=3, window=5.0, workers=1):
    """Joint halving of spacing and time step; one row per level"""
    base = replace(solver_config, m=1.0, rho_spec=ProfileSpec("one"))
    configs = [base.refined(2**level) for level in range(levels)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda c: linear_level(c, profile, window), configs))
    return pd.DataFrame(rows)


def convergence_checks(table, error_bound):
    report = Report()
    errors = table["sup_error"].to_numpy()
    residuals = table["energy_residual"].to_numpy()
    report.add(Check("coarse_error", errors[0], error_bound))
    ratio = float(np.max(errors[1:] / errors[:-1])) if errors.size > 1 else 0.0
    report.add(Check("error_decreasing", ratio, 1.0, passed=bool(errors.size < 2 or ratio < 1.0)))
    report.add(Check("energy_identity", residuals[0], ENERGY_RESIDUAL_BOUND))
    residual_ratio = float(np.max(residuals[1:] / residuals[:-1])) if residuals.size > 1 and residuals.min() > 0 else 0.0
    report.add(Check("energy_residual_decreasing", residual_ratio, 1.0,
                     passed=bool(residuals.size < 2 or residual_ratio < 1.0)))
    return report


def run_converge(config, output_dir, workers=1):
    """
    Mode handler: convergence table of the linear benchmark

    The configured solver sets the coarsest level; exponent and density are
    forced to the linear case so the Poisson semigroup is exact.
    """
    solver_config = config.solver
    if solver_config.m != 1.0 or config.density.kind != "one":
        logger.warning("converge runs the linear benchmark: using m = 1 and unit density")
    if config.initial_data.kind != "cauchy":
        logger.warning(f"converge benchmark data is 'cauchy'; running with '{config.initial_data.kind}' instead")
    table = convergence_table(solver_config, config.initial_data, config.levels, config.window, workers)

    report = Report(mode="converge", provenance=provenance(config.echo, {
        "levels": table[["spacing", "epsilon", "nx", "ny"]].to_dict(orient="list"),
    }))
    report.merge(convergence_checks(table, config.error_bound))
    report.metrics["table"] = table.to_dict(orient="list")

    emit_snapshot(table, os.path.join(output_dir, "convergence.csv"))
    charts.write_figure(charts.convergence_figure(table), charts.figure_path(output_dir, "convergence"))
    report.artifacts.extend(["convergence.csv", "convergence.html"])
    return report
