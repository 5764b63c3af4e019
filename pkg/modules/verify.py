"""Property and oracle suite behind ``fracpme verify``.

Two levels share the same checks: ``quick`` runs them on desk-scale grids,
``full`` on the acceptance-scale grids (minutes rather than seconds).
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from modules.converge import convergence_checks, convergence_table
from modules.probe_barrier import run_probe
from utils import evolution
from utils.config_utils import ProbeSettings
from utils.data_utils import emit_snapshot
from utils.elliptic import AuxiliarySolver, boundary_flux, harmonic_extension_R
from utils.evolution import SolverConfig
from utils.fields import TraceField
from utils.fractional_oracle import pv_fractional_laplacian, spectral_fractional_laplacian
from utils.grid import build_half_strip, build_line, levels_for_spacing
from utils.profiles import ProfileSpec, density_profile, initial_profile, smooth_bump
from utils.report import Check, Report, provenance

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-2


@dataclass(frozen=True)
class SuiteScale:
    oracle_half_width: float
    oracle_spacing: float
    extension_R: float
    extension_hx: float
    extension_h0: float
    extension_grade: float
    trials: int
    contraction_R: float
    contraction_spacing: float
    pair_T: float
    evolution_R: float
    evolution_spacing: float
    evolution_epsilon: float
    evolution_T: float
    refine_R: tuple
    refine_spacing: float
    linear_R: float
    linear_spacing: float
    linear_epsilon: float
    linear_levels: int
    linear_bound: float
    probe: ProbeSettings


SCALES = {
    "quick": SuiteScale(
        oracle_half_width=25.0, oracle_spacing=0.02,
        extension_R=20.0, extension_hx=0.05, extension_h0=0.025, extension_grade=1.1,
        trials=6, contraction_R=4.0, contraction_spacing=0.2, pair_T=0.2,
        evolution_R=8.0, evolution_spacing=0.2, evolution_epsilon=0.05, evolution_T=0.5,
        refine_R=(4.0, 8.0, 16.0), refine_spacing=0.25,
        linear_R=20.0, linear_spacing=0.2, linear_epsilon=0.1, linear_levels=2, linear_bound=5e-2,
        probe=ProbeSettings(R0=1.0, R_list=(4.0, 8.0, 16.0), per_octave=8, ntheta=17),
    ),
    "full": SuiteScale(
        oracle_half_width=50.0, oracle_spacing=0.01,
        extension_R=50.0, extension_hx=0.05, extension_h0=0.025, extension_grade=1.05,
        trials=20, contraction_R=8.0, contraction_spacing=0.1, pair_T=0.2,
        evolution_R=20.0, evolution_spacing=0.1, evolution_epsilon=0.02, evolution_T=1.0,
        refine_R=(10.0, 20.0, 40.0), refine_spacing=0.2,
        linear_R=50.0, linear_spacing=0.1, linear_epsilon=0.05, linear_levels=3, linear_bound=2e-2,
        probe=ProbeSettings(R0=1.0, R_list=(4.0, 8.0, 16.0), per_octave=16, ntheta=33),
    ),
}

ORACLE_PROFILES = {
    "cauchy": lambda x: 1.0 / (1.0 + x**2),
    "bump": lambda x: smooth_bump(x / 2.0),
    "shifted_bump": lambda x: 0.5 * smooth_bump((x - 0.5) / 3.0),
}


def _relative_error(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def oracle_suite(scale):
    """Half-Laplacian agreement: P.V. quadrature, Fourier symbol and extension flux"""
    report = Report()
    half = scale.oracle_half_width
    line = build_line(half, int(round(2 * half / scale.oracle_spacing)) + 1)
    center = np.flatnonzero(np.abs(line.nodes) <= 1.0)

    ny = levels_for_spacing(scale.extension_R, scale.extension_h0, scale.extension_grade)
    strip = build_half_strip(scale.extension_R, scale.extension_R,
                             int(round(2 * scale.extension_R / scale.extension_hx)) + 1, ny,
                             scale.extension_grade)
    strip_center = np.abs(strip.x_nodes) <= 1.0

    for name, profile in ORACLE_PROFILES.items():
        f = TraceField.from_function(line, profile)
        pv = pv_fractional_laplacian(f, center).values[center]
        spectral = spectral_fractional_laplacian(f, 2 * half).values[center]
        g = TraceField.from_function(strip.x, profile)
        flux = -boundary_flux(harmonic_extension_R(g, strip)).values[strip_center]
        pv_on_strip = np.interp(strip.x_nodes[strip_center], line.nodes[center], pv)

        report.add(Check(f"{name}.pv_vs_spectral", _relative_error(pv, spectral), ORACLE_TOL))
        report.add(Check(f"{name}.extension_vs_pv", _relative_error(flux, pv_on_strip), ORACLE_TOL))
        if name == "cauchy":
            x = line.nodes[center]
            exact = (1.0 - x**2) / (1.0 + x**2) ** 2
            report.add(Check("cauchy.pv_vs_closed_form", _relative_error(pv, exact), ORACLE_TOL))
    return report


def _random_data(rng, x, R):
    """Nonnegative smooth data: a few bumps with random centres, widths and heights"""
    values = np.zeros_like(x)
    for _ in range(3):
        center = rng.uniform(-0.5 * R, 0.5 * R)
        width = rng.uniform(0.3, 0.3 * R)
        values += rng.uniform(0.1, 2.0) * smooth_bump((x - center) / width)
    return values


def _trial_parameters(trial):
    """(m, epsilon, density kind) for one randomised trial; 12 trials cover every combination."""
    m = (1.0, 2.0, 3.0)[trial % 3]
    epsilon = (0.1, 0.01)[trial % 2]
    density = "one" if trial % 4 < 2 else "cauchy-decay"
    return m, epsilon, density


def contraction_suite(scale, rng, trials=None):
    """Elliptic contraction, ordering and maximum principle on random pairs"""
    report = Report()
    R = scale.contraction_R
    grid = build_half_strip(R, R, int(round(2 * R / scale.contraction_spacing)) + 1,
                            levels_for_spacing(R, scale.contraction_spacing, 1.1), 1.1)
    weights = grid.x.weights()

    worst_contraction = worst_order = worst_bound = worst_sign = 0.0
    for trial in range(trials or scale.trials):
        m, epsilon, density = _trial_parameters(trial)
        rho = TraceField(grid.x, density_profile(ProfileSpec(density), grid.x_nodes))
        solver = AuxiliarySolver(grid, rho, epsilon, m)

        g = TraceField(grid.x, _random_data(rng, grid.x_nodes, R))
        g_tilde = TraceField(grid.x, _random_data(rng, grid.x_nodes, R))
        g_upper = TraceField(grid.x, g.values + _random_data(rng, grid.x_nodes, R))
        result, result_tilde, result_upper = (solver.solve(d) for d in (g, g_tilde, g_upper))

        w = weights * rho.values
        scale_mass = float(np.dot(w, np.maximum(g.values, g_tilde.values)))
        lhs = float(np.dot(w, np.maximum(result.z.values - result_tilde.z.values, 0.0)))
        rhs = float(np.dot(w, np.maximum(g.values - g_tilde.values, 0.0)))
        worst_contraction = max(worst_contraction, (lhs - rhs) / max(scale_mass, 1e-300))
        worst_order = max(worst_order, float(np.max(result.z.values - result_upper.z.values)))
        for res, data in ((result, g), (result_tilde, g_tilde), (result_upper, g_upper)):
            worst_bound = max(worst_bound, float(res.v.values.max() - data.sup() ** m) / data.sup() ** m)
            worst_sign = max(worst_sign, -float(res.v.values.min()))

    report.add(Check("weighted_l1_contraction", worst_contraction, 1e-6))
    report.add(Check("ordering", worst_order, 1e-8))
    report.add(Check("sup_bound", worst_bound, 1e-6))
    report.add(Check("positivity", worst_sign, 1e-8))
    return report


def trajectory_contraction_suite(scale, rng, trials=None, workers=1):
    """
    Weighted L1 contraction along trajectories for random pairs of initial data

    Every trial draws two data sets; about half of the pairs are ordered
    (the second is the first plus more bumps) so ordering is checked too.

    Args:
        scale (SuiteScale): Grid and horizon of the pairs
        rng (np.random.Generator): Seeded generator
        trials (int): Number of pairs; the level default when None
        workers (int): Threads across trials

    Returns:
        Report: ``contraction`` and ``ordering`` as the worst fraction of the
            allowed slack used by any trial
    """
    R = scale.contraction_R
    cases = []
    for trial in range(trials or scale.trials):
        m, epsilon, density = _trial_parameters(trial)
        config = SolverConfig(R=R, T=scale.pair_T, m=m, epsilon=epsilon,
                              spacing=scale.contraction_spacing, rho_spec=ProfileSpec(density))
        x = config.build_grid().x
        first = _random_data(rng, x.nodes, R)
        if rng.random() < 0.5:
            second = first + _random_data(rng, x.nodes, R)
        else:
            second = _random_data(rng, x.nodes, R)
        cases.append((TraceField(x, first), TraceField(x, second), config))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        reports = list(pool.map(lambda case: evolution.verify_contraction(*case), cases))

    used = {"contraction": [], "ordering": []}
    for trial_report in reports:
        for check in trial_report.checks:
            used[check.name].append(check.value / check.threshold)

    report = Report(metrics={"trials": len(cases), "ordered_pairs": len(used["ordering"])})
    for name, fractions in used.items():
        report.add(Check(name, max(fractions, default=0.0), 1.0))
    return report


def _evolution_config(scale, m, rho_kind="cauchy-decay"):
    return SolverConfig(R=scale.evolution_R, T=scale.evolution_T, m=m, epsilon=scale.evolution_epsilon,
                        spacing=scale.evolution_spacing, rho_spec=ProfileSpec(rho_kind))


def evolution_suite(scale, workers=1):
    """Bounds, energy inequality, contraction and the Benilan estimate along trajectories"""
    report = Report()
    bump = ProfileSpec("bump", {"width": 2.0})
    two_bump = ProfileSpec("two-bump", {"separation": 4.0, "width": 1.5})

    def trajectory(m, profile):
        config = _evolution_config(scale, m)
        grid = config.build_grid()
        return evolution.run(TraceField(grid.x, initial_profile(profile, grid.x_nodes)), config, grid)

    cases = [(2.0, bump), (3.0, two_bump)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        trajectories = list(pool.map(lambda case: trajectory(*case), cases))

    for (m, profile), traj in zip(cases, trajectories):
        prefix = f"m{m:g}.{profile.kind}"
        report.merge(evolution.verify_bounds(traj), prefix)
        report.merge(evolution.verify_energy_inequality(traj), prefix)
        report.merge(evolution.verify_benilan(traj, m), prefix)

    config = _evolution_config(scale, 2.0)
    grid = config.build_grid()
    u0 = TraceField(grid.x, initial_profile(bump, grid.x_nodes))
    report.merge(evolution.verify_contraction(u0, TraceField(grid.x, 1.1 * u0.values), config, workers),
                 "bump_vs_scaled")
    return report


def refine_suite(scale, workers=1):
    """Monotone limit in R for the bump benchmark"""
    R_list = scale.refine_R
    config = SolverConfig(R=R_list[0], T=scale.evolution_T, m=2.0, epsilon=scale.evolution_epsilon,
                          spacing=scale.refine_spacing)
    grid = config.build_grid()
    u0 = TraceField(grid.x, initial_profile(ProfileSpec("bump", {"width": 2.0}), grid.x_nodes))
    return evolution.refine_in_R(u0, config, R_list, workers)


def linear_suite(scale, workers=1):
    """Linear-case oracle convergence and the energy identity"""
    config = SolverConfig(R=scale.linear_R, T=1.0, m=1.0, epsilon=scale.linear_epsilon,
                          spacing=scale.linear_spacing)
    table = convergence_table(config, ProfileSpec("cauchy"), scale.linear_levels, 5.0, workers)
    report = convergence_checks(table, scale.linear_bound)
    report.metrics["table"] = table.to_dict(orient="list")
    return report


def run_suite(level="quick", seed=0, workers=1, trials=None):
    """
    Every property check of the suite at the given level

    Args:
        level (str): "quick" or "full"
        seed (int): Seed of the randomised pairs
        workers (int): Threads for independent sub-runs
        trials (int): Randomised elliptic pairs; the level default when None

    Returns:
        Report: All checks, prefixed by suite
    """
    scale = SCALES[level]
    rng = np.random.default_rng(seed)
    report = Report(mode="verify")
    logger.info(f"Running the {level} verification suite (seed {seed})")
    report.merge(oracle_suite(scale), "oracle")
    report.merge(contraction_suite(scale, rng, trials), "elliptic")
    report.merge(trajectory_contraction_suite(scale, rng, trials, workers), "trajectory")
    report.merge(evolution_suite(scale, workers), "evolution")
    report.merge(refine_suite(scale, workers), "refine")
    report.merge(linear_suite(scale, workers), "linear")
    probe_report, _ = run_probe(scale.probe, workers)
    report.merge(probe_report, "barrier")
    return report


def run_verify(config, output_dir, workers=1):
    """Mode handler: the suite plus a CSV table of its checks"""
    report = run_suite(config.level, config.seed, workers, config.trials)
    report.provenance = provenance(config.echo, {"level": config.level})
    table = pd.DataFrame([
        {"name": check.name, "value": check.value, "threshold": check.threshold, "passed": check.passed}
        for check in report.checks
    ])
    emit_snapshot(table, os.path.join(output_dir, "checks.csv"))
    report.artifacts.append("checks.csv")
    return report
