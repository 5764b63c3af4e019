import logging
import os

import pandas as pd

import modules.charts as charts
from utils import uniqueness_probe as probe
from utils.data_utils import emit_snapshot
from utils.fields import TraceField
from utils.grid import build_line
from utils.profiles import unit_mass_bump
from utils.report import provenance

logger = logging.getLogger(__name__)

F_NODES = 401


def bump_data(R0, mass=1.0):
    """Smooth bump of the given mass, supported in [-R0, R0]"""
    line = build_line(R0, F_NODES)
    return TraceField(line, unit_mass_bump(line.nodes, R0, mass))


def barrier_template(settings):
    F = bump_data(settings.R0, settings.mass)
    return probe.make_barrier_problem(F, settings.R0, settings.R_list[0], settings.per_octave, settings.ntheta)


def run_probe(settings, workers=1, output_dir=None):
    """
    Barrier sweep over ``settings.R_list``

    Args:
        settings (ProbeSettings): R0, radii and resolution
        workers (int): Threads for the independent solves
        output_dir (str): When given, psi snapshots, the product table and a figure are written

    Returns:
        tuple: (Report, list of artifact names)
    """
    template = barrier_template(settings)
    solutions = probe.probe_sweep(template, settings.R_list, workers)
    report = probe.flux_decay_fit(template, settings.R_list, workers, solutions=solutions)
    report.provenance = {"grids": {"half_disk": solutions[-1][0].grid.summary()}}
    artifacts = []
    if output_dir:
        for problem, psi in solutions:
            name = f"psi_R{problem.R:g}.csv"
            emit_snapshot(psi, os.path.join(output_dir, name))
            artifacts.append(name)
        metrics = report.metrics
        table = pd.DataFrame({
            "R": metrics["R"],
            "s": metrics["s"],
            "product": metrics["products"],
            "s_times_R": metrics["s_times_R"],
            "gap": metrics["gaps"],
        })
        emit_snapshot(table, os.path.join(output_dir, "flux_decay.csv"))
        charts.write_figure(charts.flux_decay_figure(metrics), charts.figure_path(output_dir, "flux_decay"))
        artifacts.extend(["flux_decay.csv", "flux_decay.html"])
    logger.info(f"Barrier sweep over R={list(settings.R_list)}: products {report.metrics['products']}")
    return report, artifacts


def run_probe_barrier(config, output_dir, workers=1):
    """Mode handler: the flux-decay sweep with artifacts"""
    report, artifacts = run_probe(config.probe, workers, output_dir)
    report.mode = "probe-barrier"
    report.provenance = provenance(config.echo, report.provenance.get("grids"))
    report.artifacts.extend(artifacts)
    return report
