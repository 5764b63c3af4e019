import numpy as np
import pytest

from utils import evolution
from utils.elliptic import Tolerances
from utils.errors import EvolutionAborted, InvalidArgumentError
from utils.evolution import SolverConfig
from utils.fields import TraceField
from utils.profiles import ProfileSpec, initial_profile, smooth_bump


def small_config(**overrides):
    params = {"R": 2.0, "T": 0.2, "m": 2.0, "epsilon": 0.05, "spacing": 0.25}
    params.update(overrides)
    return SolverConfig(**params)


def bump_data(config, grid=None, width=1.0, amp=1.0):
    grid = grid or config.build_grid()
    return TraceField(grid.x, initial_profile(ProfileSpec("bump", {"width": width, "amp": amp}), grid.x_nodes))


@pytest.fixture(scope="module")
def m2_trajectory():
    config = small_config(rho_spec=ProfileSpec("cauchy-decay"))
    return evolution.run(bump_data(config), config)


def test_solver_config_defaults():
    config = SolverConfig(R=10.0)
    assert config.Y == 10.0
    assert config.grade == 1.1
    assert config.epsilon == 0.01
    assert config.nx == 201
    assert config.steps == 100


@pytest.mark.parametrize("overrides", [{"R": -1.0}, {"epsilon": 0.0}, {"m": 0.5}, {"T": -1.0}, {"nx": 2}])
def test_solver_config_validation(overrides):
    params = {"R": 2.0}
    params.update(overrides)
    with pytest.raises(InvalidArgumentError):
        SolverConfig(**params)


def test_refined_halves_spacing_and_step():
    config = small_config().refined(2)
    assert config.spacing == 0.125
    assert config.epsilon == 0.025
    assert config.nx == 33


def test_run_records_every_step(m2_trajectory):
    np.testing.assert_allclose(m2_trajectory.times, [0.0, 0.05, 0.1, 0.15, 0.2])
    assert list(m2_trajectory.diagnostics.columns) == ["t", "energy", "lyapunov", "mass", "iterations"]
    assert len(m2_trajectory.diagnostics) == 5
    assert m2_trajectory.u_matrix().shape == (5, 17)


def test_step_matches_run(m2_trajectory):
    first = m2_trajectory.states[0]
    following = evolution.step(first, m2_trajectory.config)
    np.testing.assert_allclose(following.u.values, m2_trajectory.states[1].u.values, atol=1e-12)
    assert following.t == pytest.approx(0.05)


def test_bounds_and_energy_inequality_hold(m2_trajectory):
    assert evolution.verify_bounds(m2_trajectory).passed
    assert evolution.verify_energy_inequality(m2_trajectory).passed


def test_benilan_estimate_holds(m2_trajectory):
    report = evolution.verify_benilan(m2_trajectory, 2.0)
    assert report.passed, report.checks[0]


def test_benilan_needs_three_times():
    config = small_config(T=0.05)
    traj = evolution.run(bump_data(config), config)
    with pytest.raises(InvalidArgumentError):
        evolution.verify_benilan(traj, 2.0)


def test_lyapunov_functional_decreases(m2_trajectory):
    lyapunov = m2_trajectory.diagnostics["lyapunov"].to_numpy()
    assert np.all(np.diff(lyapunov) <= 1e-12)


def test_energy_identity_residual_vanishes_on_an_empty_interval(m2_trajectory):
    rho = m2_trajectory.rho
    assert evolution.energy_identity_residual(m2_trajectory, 0.1, 0.1, rho, 2.0) == 0.0
    with pytest.raises(InvalidArgumentError):
        evolution.energy_identity_residual(m2_trajectory, 0.12, 0.2, rho, 2.0)


def test_time_derivative_series(m2_trajectory):
    rates = evolution.time_derivative_l1(m2_trajectory)
    assert len(rates) == 4
    assert rates.index[0] == pytest.approx(0.05)
    assert np.all(rates.to_numpy() >= 0)


def test_contraction_and_ordering_of_trajectories():
    config = small_config(m=3.0)
    u0 = bump_data(config)
    report = evolution.verify_contraction(u0, TraceField(u0.grid, 1.2 * u0.values), config, workers=2)
    names = [check.name for check in report.checks]
    assert names == ["contraction", "ordering"]
    assert report.passed


def test_negative_initial_data_is_rejected():
    config = small_config()
    grid = config.build_grid()
    with pytest.raises(InvalidArgumentError):
        evolution.run(TraceField(grid.x, -np.ones(grid.nx)), config, grid)


def test_failed_step_keeps_the_partial_trajectory():
    config = small_config(m=3.0, epsilon=0.5, T=1.0, tolerances=Tolerances(max_newton=1))
    with pytest.raises(EvolutionAborted) as excinfo:
        evolution.run(bump_data(config, width=1.5), config)
    partial = excinfo.value.trajectory
    assert len(partial.states) == 1
    assert partial.states[0].t == 0.0
    assert excinfo.value.trace


def test_refining_in_R_is_monotone():
    config = small_config(T=0.1)
    u0 = bump_data(config)
    report = evolution.refine_in_R(u0, config, [2.0, 4.0, 8.0], workers=2)
    checks = {check.name: check for check in report.checks}
    assert checks["monotone_in_R"].passed
    assert checks["cauchy_in_R"].passed
    assert checks["cauchy_in_R"].value < 1.0
    assert len(report.metrics["sup_differences"]) == 2


def test_refine_in_R_needs_increasing_radii():
    config = small_config()
    with pytest.raises(InvalidArgumentError):
        evolution.refine_in_R(bump_data(config), config, [4.0, 2.0])


@pytest.mark.slow
def test_linear_run_tracks_the_poisson_semigroup():
    from utils.fractional_oracle import poisson_semigroup_solution

    config = SolverConfig(R=50.0, T=1.0, m=1.0, epsilon=0.05, spacing=0.1)
    grid = config.build_grid()
    u0 = TraceField(grid.x, 1.0 / (1.0 + grid.x_nodes**2))
    final = evolution.run(u0, config, grid).final
    exact = poisson_semigroup_solution(u0, final.t)
    inside = np.abs(grid.x_nodes) <= 5.0
    assert np.max(np.abs(final.u.values[inside] - exact.values[inside])) <= 2e-2


def test_zero_state_is_stationary():
    config = small_config()
    grid = config.build_grid()
    traj = evolution.run(TraceField.zeros(grid.x), config, grid)
    assert not np.any(traj.u_matrix())
    assert traj.diagnostics["iterations"].sum() == 0


@pytest.mark.slow
def test_constant_data_drifts_little_on_a_wide_box():
    config = SolverConfig(R=100.0, T=1.0, m=1.0, epsilon=0.05, spacing=0.5)
    grid = config.build_grid()
    final = evolution.run(TraceField(grid.x, np.full(grid.nx, 2.0)), config, grid).final
    center = grid.nx // 2
    assert final.u.values[center] == pytest.approx(2.0, rel=2e-2)


def random_bumps(rng, x, R):
    values = np.zeros_like(x)
    for _ in range(3):
        center, width = rng.uniform(-0.5 * R, 0.5 * R), rng.uniform(0.3, 0.3 * R)
        values += rng.uniform(0.1, 2.0) * smooth_bump((x - center) / width)
    return values


@pytest.mark.parametrize("trial", range(10))
def test_random_trajectory_pairs_contract(trial):
    rng = np.random.default_rng(trial)
    m = (1.0, 2.0, 3.0)[trial % 3]
    epsilon = (0.1, 0.01)[trial % 2]
    rho = ProfileSpec("one" if trial % 4 < 2 else "cauchy-decay")
    config = SolverConfig(R=3.0, T=0.1, m=m, epsilon=epsilon, spacing=0.25, rho_spec=rho)
    x = config.build_grid().x
    u0 = TraceField(x, random_bumps(rng, x.nodes, 3.0))
    u0_tilde = TraceField(x, random_bumps(rng, x.nodes, 3.0))
    report = evolution.verify_contraction(u0, u0_tilde, config)
    assert report.passed


def test_refine_in_R_compares_with_the_poisson_kernel():
    config = SolverConfig(R=8.0, T=0.2, m=1.0, epsilon=0.05, spacing=0.25)
    u0 = bump_data(config, width=2.0)
    report = evolution.refine_in_R(u0, config, [8.0, 16.0, 32.0], oracle_bound=5e-2, window=2.0)
    checks = {check.name: check for check in report.checks}
    assert set(checks) == {"monotone_in_R", "cauchy_in_R", "oracle_error"}
    assert 0.0 < checks["oracle_error"].value <= 5e-2
    assert report.passed


def test_constant_data_drift_shrinks_with_the_box():
    drifts = []
    for R in (10.0, 20.0, 40.0):
        config = SolverConfig(R=R, T=0.5, m=1.0, epsilon=0.1, spacing=0.5)
        grid = config.build_grid()
        final = evolution.run(TraceField(grid.x, np.full(grid.nx, 2.0)), config, grid).final
        drifts.append(abs(final.u.values[grid.nx // 2] - 2.0) / 2.0)
    assert drifts[0] > drifts[1] > drifts[2]
    assert drifts[2] < 0.5 * drifts[0]
