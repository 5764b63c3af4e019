"""Implicit (Crandall-Liggett) time stepping of rho u_t + (-d^2/dx^2)^{1/2}[u^m] = 0.

Each step solves the auxiliary problem with the previous trace as data:
u^k = z, w^k = E_R((u^k)^m), t_k = k * epsilon. The ``verify_*`` functions
check the discrete properties the scheme is known to have and return
``Report`` objects.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import integrate

from utils.elliptic import AuxiliarySolver, Tolerances, grid_energy, odd_power
from utils.errors import EvolutionAborted, InvalidArgumentError, SolverFailureError
from utils.fields import ExtensionField, TraceField
from utils.fractional_oracle import poisson_extend
from utils.grid import build_half_strip, common_node_indices, levels_for_spacing, resize_half_strip
from utils.profiles import ProfileSpec, density_profile
from utils.report import Check, Report

logger = logging.getLogger(__name__)

FAR_FIELD_RATIO = 1e-2


@dataclass(frozen=True)
class SolverConfig:
    """
    Everything a trajectory needs besides its initial data

    ``nx`` and ``ny`` are derived from ``spacing`` (the x-spacing and the
    first y-spacing) when not given; ``Y`` defaults to ``R``.
    """

    R: float
    T: float = 1.0
    m: float = 1.0
    epsilon: float = 0.01
    Y: float | None = None
    nx: int | None = None
    ny: int | None = None
    grade: float = 1.1
    spacing: float = 0.1
    rho_spec: ProfileSpec = field(default_factory=lambda: ProfileSpec("one"))
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidArgumentError(f"R must be positive, got {self.R}")
        if not self.epsilon > 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if not self.m >= 1:
            raise InvalidArgumentError(f"m must be >= 1, got {self.m}")
        if not self.T >= 0:
            raise InvalidArgumentError(f"T must be nonnegative, got {self.T}")
        if not self.spacing > 0:
            raise InvalidArgumentError(f"spacing must be positive, got {self.spacing}")
        if not self.grade >= 1:
            raise InvalidArgumentError(f"grade must be >= 1, got {self.grade}")
        for name in ("nx", "ny"):
            count = getattr(self, name)
            if count is not None and count < 3:
                raise InvalidArgumentError(f"{name} must be >= 3, got {count}")
        if self.Y is None:
            object.__setattr__(self, "Y", float(self.R))
        if self.nx is None:
            object.__setattr__(self, "nx", int(round(2.0 * self.R / self.spacing)) + 1)
        if self.ny is None:
            object.__setattr__(self, "ny", levels_for_spacing(self.Y, self.spacing, self.grade))

    @property
    def steps(self):
        return int(math.ceil(self.T / self.epsilon - 1e-9))

    def build_grid(self):
        return build_half_strip(self.R, self.Y, self.nx, self.ny, self.grade)

    def density(self, grid):
        return TraceField(grid.x, density_profile(self.rho_spec, grid.x_nodes))

    def refined(self, factor=2):
        """Same problem with spacing and time step divided by ``factor``."""
        return replace(self, spacing=self.spacing / factor, epsilon=self.epsilon / factor, nx=None, ny=None)

    def describe(self):
        return {
            "R": self.R, "Y": self.Y, "nx": self.nx, "ny": self.ny, "grade": self.grade,
            "spacing": self.spacing, "epsilon": self.epsilon, "m": self.m, "T": self.T,
            "rho": self.rho_spec.describe(),
            "newton_tol": self.tolerances.newton_tol, "linear_tol": self.tolerances.linear_tol,
            "max_newton": self.tolerances.max_newton, "linear_solver": self.tolerances.linear_solver,
        }


@dataclass(frozen=True, eq=False)
class EvolutionState:
    t: float
    u: TraceField
    w: ExtensionField
    step_index: int = 0


@dataclass(eq=False)
class Trajectory:
    """Recorded states plus a diagnostics frame (t, energy, lyapunov, mass, iterations)."""

    states: list
    diagnostics: pd.DataFrame
    config: SolverConfig
    rho: TraceField

    @property
    def times(self):
        return np.array([state.t for state in self.states])

    @property
    def final(self):
        return self.states[-1]

    def u_matrix(self):
        return np.array([state.u.values for state in self.states])


def _lyapunov(u, rho, m):
    return float(np.dot(u.grid.weights() * rho.values, np.abs(u.values) ** (m + 1.0)))


def _diagnostics_row(state, rho, m, iterations):
    return {
        "t": state.t,
        "energy": grid_energy(state.w.grid, state.w.values),
        "lyapunov": _lyapunov(state.u, rho, m),
        "mass": state.u.integral(rho),
        "iterations": int(iterations),
    }


def _initial_state(u0, solver, m):
    w0 = solver.laplacian.extend(odd_power(u0.values, m))
    return EvolutionState(0.0, u0, ExtensionField(solver.grid, w0), 0)


def _check_initial_data(u0, grid):
    if u0.grid.n != grid.nx or not np.allclose(u0.grid.nodes, grid.x_nodes):
        raise InvalidArgumentError("u0 is not sampled on the solver grid")
    if np.any(u0.values < 0):
        raise InvalidArgumentError("u0 must be nonnegative")
    peak = u0.sup()
    edge = max(abs(u0.values[0]), abs(u0.values[-1]))
    if peak > 0 and edge / peak > FAR_FIELD_RATIO:
        logger.warning(f"u0 is {edge / peak:.2%} of its peak at x = +-R; expect truncation error")


def make_solver(config, grid=None):
    grid = grid or config.build_grid()
    return AuxiliarySolver(grid, config.density(grid), config.epsilon, config.m, config.tolerances)


def _advance(state, solver):
    result = solver.solve(state.u)
    new_state = EvolutionState(
        (state.step_index + 1) * solver.epsilon, result.z, result.v, state.step_index + 1
    )
    return new_state, result


def step(state, config, solver=None):
    """
    One implicit step u^{k-1} -> u^k

    Args:
        state (EvolutionState): Current state, u >= 0
        config (SolverConfig): Step size, exponent, density and tolerances
        solver (AuxiliarySolver): Reused solver for ``state.w.grid``

    Returns:
        EvolutionState: The next state at t + epsilon
    """
    if np.any(state.u.values < 0):
        raise InvalidArgumentError("state.u must be nonnegative")
    solver = solver or make_solver(config, state.w.grid)
    return _advance(state, solver)[0]


def run(u0, config, grid=None):
    """
    March from u0 to time T in ceil(T / epsilon) steps

    Args:
        u0 (TraceField): Nonnegative bounded initial data on the grid's x-nodes
        config (SolverConfig): Run parameters
        grid (HalfStripGrid): Grid to use instead of ``config.build_grid()``

    Returns:
        Trajectory: Every state and its diagnostics

    Raises:
        EvolutionAborted: A step failed; carries the partial trajectory
    """
    grid = grid or config.build_grid()
    _check_initial_data(u0, grid)
    solver = make_solver(config, grid)
    rho = solver.rho
    m = config.m

    state = _initial_state(u0, solver, m)
    states = [state]
    rows = [_diagnostics_row(state, rho, m, 0)]
    logger.info(f"Evolving {config.steps} steps on a {grid.nx} x {grid.ny} grid (m={m}, eps={config.epsilon})")

    for k in range(1, config.steps + 1):
        try:
            state, result = _advance(state, solver)
        except SolverFailureError as e:
            logger.error(f"Step {k} failed at t={k * config.epsilon:.6g}: {str(e)}")
            partial = Trajectory(states, pd.DataFrame(rows), config, rho)
            raise EvolutionAborted(f"step {k} failed: {str(e)}", partial, e.trace) from e
        states.append(state)
        rows.append(_diagnostics_row(state, rho, m, result.iterations))
        logger.debug(f"t={state.t:.6g}: {result.iterations} Newton iterations, residual {result.residual:.3e}")

    return Trajectory(states, pd.DataFrame(rows, columns=["t", "energy", "lyapunov", "mass", "iterations"]),
                      config, rho)


def _time_index(traj, t):
    times = traj.times
    index = int(np.argmin(np.abs(times - t)))
    if not math.isclose(times[index], t, rel_tol=0.0, abs_tol=1e-9 * max(1.0, abs(t))):
        raise InvalidArgumentError(f"t={t} is not a recorded time")
    return index


def energy_identity_residual(traj, tau, T, rho, m):
    """
    Signed residual of
    int_tau^T int |grad w|^2 dt + 1/(m+1) int rho u^{m+1}(T) - 1/(m+1) int rho u^{m+1}(tau)

    Args:
        traj (Trajectory): Recorded run
        tau (float): Start time, on the recorded lattice
        T (float): End time, on the recorded lattice, >= tau
        rho (TraceField): Density
        m (float): Exponent

    Returns:
        float: The residual (trapezoid rule in time)
    """
    start, end = _time_index(traj, tau), _time_index(traj, T)
    if start > end:
        raise InvalidArgumentError(f"tau={tau} is after T={T}")
    times = traj.times[start:end + 1]
    energy = traj.diagnostics["energy"].to_numpy()[start:end + 1]
    dissipated = float(integrate.trapezoid(energy, times)) if end > start else 0.0
    lyapunov_start = _lyapunov(traj.states[start].u, rho, m)
    lyapunov_end = _lyapunov(traj.states[end].u, rho, m)
    return dissipated + (lyapunov_end - lyapunov_start) / (m + 1.0)


def time_derivative_l1(traj):
    """Discrete int rho |u^k - u^{k-1}| / epsilon dx for k >= 1."""
    u = traj.u_matrix()
    weights = traj.states[0].u.grid.weights() * traj.rho.values
    rates = np.abs(np.diff(u, axis=0)) @ weights / traj.config.epsilon
    return pd.Series(rates, index=traj.times[1:], name="dudt_l1")


def verify_bounds(traj):
    """
    Positivity, L-infinity stability of u and w, Lyapunov monotonicity and
    trace coupling w = u^m along one trajectory

    Returns:
        Report: One check per property
    """
    m = traj.config.m
    tol = traj.config.tolerances
    u = traj.u_matrix()
    w_min = min(float(state.w.values.min()) for state in traj.states)
    w_max = max(float(state.w.values.max()) for state in traj.states)
    u0_sup = float(u[0].max())
    lyapunov = traj.diagnostics["lyapunov"].to_numpy()
    coupling = max(float(np.max(np.abs(state.w.values[0] - odd_power(state.u.values, m)))) for state in traj.states)

    report = Report()
    report.add(Check("positivity", -min(float(u.min()), w_min), tol.abs_slack))
    report.add(Check("u_sup_bound", float(u.max()) - u0_sup, tol.slack(u0_sup)))
    report.add(Check("w_sup_bound", w_max - u0_sup**m, tol.slack(u0_sup**m)))
    report.add(Check("lyapunov_monotone", float(np.max(np.diff(lyapunov), initial=0.0)), tol.slack(lyapunov[0])))
    report.add(Check("trace_coupling", coupling, tol.newton_tol * max(1.0, u0_sup**m)))
    return report


def verify_energy_inequality(traj):
    """
    Per step: 0 <= eps int |grad w^k|^2 <= 1/(m+1) int rho [(u^{k-1})^{m+1} - (u^k)^{m+1}]

    Returns:
        Report: Worst excess over all steps
    """
    m = traj.config.m
    eps = traj.config.epsilon
    energy = traj.diagnostics["energy"].to_numpy()
    lyapunov = traj.diagnostics["lyapunov"].to_numpy()
    excess = eps * energy[1:] - (lyapunov[:-1] - lyapunov[1:]) / (m + 1.0)
    worst = float(excess.max()) if excess.size else 0.0
    report = Report()
    report.add(Check("energy_inequality", worst, traj.config.tolerances.slack(lyapunov[0])))
    return report


def _run_pair(u0, u0_tilde, config, workers):
    with ThreadPoolExecutor(max_workers=max(1, min(2, workers))) as pool:
        return list(pool.map(lambda data: run(data, config), (u0, u0_tilde)))


def verify_contraction(u0, u0_tilde, config, workers=1):
    """
    Weighted L1 contraction sup_t int rho (u - u~)_+ <= int rho (u0 - u0~)_+

    When u0 <= u0~ everywhere the ordering u <= u~ is checked as well.

    Args:
        u0 (TraceField): First initial datum
        u0_tilde (TraceField): Second initial datum
        config (SolverConfig): Shared run parameters
        workers (int): Threads for the two runs

    Returns:
        Report: ``contraction`` (and ``ordering``) checks
    """
    traj, traj_tilde = _run_pair(u0, u0_tilde, config, workers)
    weights = traj.states[0].u.grid.weights() * traj.rho.values
    difference = traj.u_matrix() - traj_tilde.u_matrix()
    gaps = np.maximum(difference, 0.0) @ weights
    scale = float(np.dot(weights, np.maximum(u0.values, u0_tilde.values)))
    tol = config.tolerances.slack(scale)

    report = Report()
    report.add(Check("contraction", float(np.max(gaps) - gaps[0]), tol,
                     details={"initial_gap": float(gaps[0]), "final_gap": float(gaps[-1])}))
    if np.all(u0.values <= u0_tilde.values):
        report.add(Check("ordering", float(difference.max()), tol))
    return report


def verify_benilan(traj, m):
    """
    Forward-difference check of (m - 1) t w_t + m w >= 0 at every node and time

    Args:
        traj (Trajectory): Run with at least 3 recorded times
        m (float): Exponent

    Returns:
        Report: Worst violation against 1e-6 * sup w (the relative slack)
    """
    if len(traj.states) < 3:
        raise InvalidArgumentError("the estimate needs at least 3 recorded times")
    eps = traj.config.epsilon
    w = np.array([state.w.values for state in traj.states])
    times = traj.times[:-1, None, None]
    expression = (m - 1.0) * times * (w[1:] - w[:-1]) / eps + m * w[:-1]
    worst = float(-expression.min())
    w_sup = float(np.abs(w).max())
    report = Report()
    report.add(Check("benilan", worst, traj.config.tolerances.rel_slack * w_sup,
                     details={"w_sup": w_sup}))
    return report


def _restrict(u0, grid):
    return TraceField(grid.x, np.interp(grid.x_nodes, u0.x, u0.values))


def refine_in_R(u0, config, R_list, workers=1, oracle_bound=None, window=5.0):
    """
    Monotone limit in the truncation radius

    Every radius uses the grid of ``config`` resized to R (same x-spacing and
    y-ladder, so common nodes coincide). ``u0`` is interpolated onto each
    grid, constant beyond its own range.

    Args:
        u0 (TraceField): Initial data
        config (SolverConfig): Run parameters; its grid fixes the spacings
        R_list (list[float]): Increasing radii
        workers (int): Threads for the independent runs
        oracle_bound (float): When set (m = 1, unit density), also compare w
            at the largest R against the Poisson-kernel oracle on
            |x| <= window, y <= window
        window (float): Oracle comparison window

    Returns:
        Report: ``monotone_in_R``, ``cauchy_in_R`` and optionally ``oracle_error``
    """
    R_list = [float(R) for R in R_list]
    if any(b < a for a, b in zip(R_list, R_list[1:])):
        raise InvalidArgumentError("R_list must be increasing")
    base = config.build_grid()
    grids = [resize_half_strip(base, R) for R in R_list]
    logger.info(f"Refining in R over {R_list}")

    def _one(grid):
        return run(_restrict(u0, grid), config, grid)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        trajectories = list(pool.map(_one, grids))

    tol = config.tolerances
    worst = 0.0
    differences = []
    for small, large in zip(trajectories, trajectories[1:]):
        iy, ix = common_node_indices(small.states[0].w.grid, large.states[0].w.grid)
        sup_difference = 0.0
        for s_state, l_state in zip(small.states, large.states):
            restricted = l_state.w.values[np.ix_(iy, ix)]
            worst = max(worst, float(np.max(s_state.w.values - restricted)))
            sup_difference = max(sup_difference, float(np.max(np.abs(restricted - s_state.w.values))))
        differences.append(sup_difference)

    w_sup = max(float(np.abs(state.w.values).max()) for state in trajectories[0].states)
    report = Report(metrics={"R_list": R_list, "sup_differences": differences})
    report.add(Check("monotone_in_R", worst, tol.slack(w_sup)))

    ratios = [b / a if a > 0 else (0.0 if b == 0 else math.inf) for a, b in zip(differences, differences[1:])]
    ratio = max(ratios) if ratios else 0.0
    report.add(Check("cauchy_in_R", ratio, 1.0, passed=bool(ratio < 1.0 or not ratios),
                     details={"ratios": ratios}))

    if oracle_bound is not None:
        final = trajectories[-1].final
        grid = final.w.grid
        columns = np.abs(grid.x_nodes) <= window
        oracle_u0 = _restrict(u0, grid)
        error = 0.0
        for j, y in enumerate(grid.y_nodes):
            if y > window:
                break
            exact = poisson_extend(oracle_u0, final.t + y).values
            error = max(error, float(np.max(np.abs(final.w.values[j, columns] - exact[columns]))))
        report.add(Check("oracle_error", error, oracle_bound))
    return report
