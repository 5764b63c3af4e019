import numpy as np
import pytest

from modules.probe_barrier import bump_data
from utils import uniqueness_probe as probe
from utils.errors import InvalidArgumentError, PreconditionError
from utils.fields import PolarField, TraceField
from utils.grid import build_line


@pytest.fixture(scope="module")
def template():
    return probe.make_barrier_problem(bump_data(1.0), 1.0, 4.0, per_octave=8, ntheta=17)


@pytest.fixture(scope="module")
def sweep(template):
    return probe.probe_sweep(template, [4.0, 8.0, 16.0], workers=2)


def test_theta_is_the_scaled_logarithm():
    assert probe.theta(1.0) == 0.0
    assert probe.theta(np.e) == pytest.approx(-1.0 / np.pi)
    with pytest.raises(InvalidArgumentError):
        probe.theta(0.0)


def test_theta_flux_mass_matches_the_arctangent():
    assert probe.theta_flux_mass(1.0, 0.1) == pytest.approx(2.0 / np.pi * np.arctan(10.0), rel=1e-4)


def test_bump_data_has_unit_mass():
    assert bump_data(1.0).integral() == pytest.approx(1.0, rel=1e-6)


def test_problem_rejects_data_outside_the_support():
    line = build_line(2.0, 41)
    with pytest.raises(InvalidArgumentError):
        probe.make_barrier_problem(TraceField(line, np.ones(41)), 1.0, 4.0)


def test_radii_share_one_geometric_ladder(template):
    grid = template.grid
    assert grid.r_min == pytest.approx(1.0 / 64.0)
    assert template.per_octave == 8
    assert np.any(np.isclose(grid.r_nodes, 1.0))
    larger = template.with_radius(8.0)
    np.testing.assert_allclose(larger.grid.r_nodes[: grid.nr], grid.r_nodes)


def test_solution_is_positive_and_vanishes_on_the_arc(sweep):
    for _, psi in sweep:
        assert not np.any(psi.values[:, -1])
        assert psi.values[:, :-1].min() > 0.0


def test_discrete_flux_balances_the_mass(template, sweep):
    for p, psi in sweep:
        assert probe.sigma_flux_total(psi, p) == pytest.approx(-template.mass, rel=1e-8)


def test_arc_flux_points_outward(sweep):
    for _, psi in sweep:
        assert np.all(probe.sigma_flux(psi) < 0.0)


def test_log_barrier_dominates(sweep):
    for p, psi in sweep:
        assert probe.barrier_gap(p, psi) >= -1e-6


def test_barrier_needs_room_beyond_twice_the_support():
    p = probe.make_barrier_problem(bump_data(1.0), 1.0, 2.0, per_octave=8, ntheta=9)
    with pytest.raises(PreconditionError):
        probe.barrier_gap(p, probe.solve_barrier(p))


def test_solutions_increase_with_the_radius(sweep):
    for (_, small), (_, large) in zip(sweep, sweep[1:]):
        assert probe.monotone_gap(small, large) <= 1e-10


def test_zero_data_gives_zero_solution(template):
    silent = template.scaled(0.0)
    assert not np.any(probe.solve_barrier(silent).values)


def test_flux_decay_fit_reports_the_product_table(template, sweep):
    report = probe.flux_decay_fit(template, [4.0, 8.0, 16.0], solutions=sweep)
    checks = {check.name: check for check in report.checks}
    for name in ("s_times_R_growth_ratio", "flux_negative", "barrier_domination",
                 "monotone_in_R", "positivity", "flux_conservation"):
        assert checks[name].passed, name
    sr = report.metrics["s_times_R"]
    assert checks["s_times_R_growth_ratio"].value == pytest.approx(max(b / a for a, b in zip(sr, sr[1:])))
    assert checks["s_times_R_growth_ratio"].threshold == probe.SR_GROWTH_SLACK
    assert len(report.metrics["products"]) == 3
    assert report.metrics["mass_over_pi"] == pytest.approx(template.mass / np.pi)


def test_flux_decay_fit_needs_radii_beyond_twice_the_support(template):
    with pytest.raises(PreconditionError):
        probe.flux_decay_fit(template, [1.5, 4.0])


@pytest.mark.slow
def test_products_stay_within_a_factor_two():
    p = probe.make_barrier_problem(bump_data(1.0), 1.0, 4.0, per_octave=16, ntheta=33)
    report = probe.flux_decay_fit(p, [4.0, 8.0, 16.0])
    assert report.passed


def test_arc_flux_of_a_logarithmic_field(template):
    grid = template.grid
    r0 = grid.r_min
    psi = PolarField.from_function(grid, lambda r, t: np.log(grid.R / r) / np.log(grid.R / r0))
    expected = -1.0 / (grid.R * np.log(grid.R / r0))
    np.testing.assert_allclose(probe.sigma_flux(psi), expected, rtol=1e-10)


def test_problem_is_linear_in_the_data(template, sweep):
    base = sweep[0][1]
    scaled = probe.solve_barrier(template.scaled(10.0))
    np.testing.assert_allclose(probe.sigma_flux(scaled), 10.0 * probe.sigma_flux(base), rtol=1e-9)
