import logging
import os

import numpy as np

from utils.data_utils import emit_snapshot
from utils.elliptic import solve_auxiliary
from utils.errors import SolverFailureError
from utils.fields import TraceField
from utils.profiles import initial_profile
from utils.report import Check, Report, provenance

logger = logging.getLogger(__name__)


def run_aux_solve(config, output_dir, workers=1):
    """
    Solve one auxiliary problem with the configured initial profile as data

    Args:
        config (RunConfig): Parsed run configuration
        output_dir (str): Artifact directory
        workers (int): Unused

    Returns:
        Report: Residual and maximum-principle checks
    """
    solver_config = config.solver
    grid = solver_config.build_grid()
    g = TraceField(grid.x, initial_profile(config.initial_data, grid.x_nodes))
    rho = solver_config.density(grid)
    tolerances = solver_config.tolerances
    report = Report(mode="aux-solve", provenance=provenance(config.echo, {"half_strip": grid.summary()}))

    try:
        result = solve_auxiliary(g, solver_config.epsilon, rho, solver_config.m, grid, tolerances)
    except SolverFailureError as e:
        report.error = str(e)
        report.metrics["residual_trace"] = e.trace
        return report

    emit_snapshot(result.z, os.path.join(output_dir, "z.csv"))
    emit_snapshot(result.v, os.path.join(output_dir, "v.csv"))
    report.artifacts.extend(["z.csv", "v.csv"])

    g_sup = g.sup()
    bound = g_sup**solver_config.m
    target = tolerances.newton_tol * max(1.0, float(np.max(np.abs(rho.values * g.values))))
    report.add(Check("residual", result.residual, target))
    report.add(Check("positivity", -float(result.v.values.min()), tolerances.abs_slack))
    report.add(Check("sup_bound", float(result.v.values.max()) - bound, tolerances.slack(bound)))
    report.metrics.update({
        "iterations": result.iterations,
        "residual": result.residual,
        "j_value": result.j_value,
        "z_mass": result.z.integral(rho),
    })
    logger.info(f"Auxiliary solve converged in {result.iterations} iterations")
    return report
