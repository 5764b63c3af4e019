"""Elliptic building blocks on the half-strip.

* ``harmonic_extension_R``: the truncated extension E_R(g), harmonic inside,
  equal to g on the boundary line and zero on the sides and the top.
* ``solve_auxiliary``: the per-step problem
  Δv = 0 inside, -ε ∂_y v + ρ v^{1/m} = ρ g on the line, v = 0 elsewhere.

Both use one symmetric finite-volume 5-point stiffness matrix K. On the
boundary line the conormal derivative is the half-cell balance
-∂_y v ≈ (K v)_i / hx, which makes the discrete auxiliary problem the
Euler-Lagrange equation of the discrete functional J and keeps the discrete
comparison principle exact.
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from utils.errors import InvalidArgumentError, SolverFailureError, UnsupportedGridError
from utils.fields import ExtensionField, TraceField

logger = logging.getLogger(__name__)

LINEAR_SOLVERS = ("direct", "cg")
MAX_DAMPINGS = 3
PICARD_RELAXATION = 0.5


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerances and the slack allowed when checking discrete properties."""

    newton_tol: float = 1e-10
    linear_tol: float = 1e-10
    max_newton: int = 50
    linear_solver: str = "direct"
    abs_slack: float = 1e-8
    rel_slack: float = 1e-6

    def __post_init__(self):
        if self.linear_solver not in LINEAR_SOLVERS:
            raise InvalidArgumentError(f"unknown linear solver '{self.linear_solver}'")
        if self.newton_tol <= 0 or self.linear_tol <= 0 or self.max_newton < 1:
            raise InvalidArgumentError("tolerances must be positive")

    def slack(self, scale):
        return self.abs_slack + self.rel_slack * scale


class DiscreteLaplacian:
    """
    Finite-volume 5-point stiffness on a half-strip

    Edge weights are (dual-cell width) / (edge length): hbar_j / hx along x
    and hx / h_j along y, with half cells on the boundary line, the top and
    the two sides. ``stiffness`` acts on all nodes (flattened ``j * nx + i``);
    the blocks split them into free trace nodes B (y = 0, 0 < i < nx - 1)
    and interior nodes I. Every other node carries Dirichlet data.
    """

    def __init__(self, grid, linear_solver="direct", linear_tol=1e-10):
        self.grid = grid
        self.linear_solver = linear_solver
        self.linear_tol = linear_tol
        nx, ny = grid.nx, grid.ny
        self.x_weights, self.y_weights = edge_weights(grid)

        ids = np.arange(nx * ny).reshape(ny, nx)
        a_x, b_x = ids[:, :-1].ravel(), ids[:, 1:].ravel()
        c_x = np.repeat(self.x_weights, nx - 1)
        a_y, b_y = ids[:-1, :].ravel(), ids[1:, :].ravel()
        c_y = self.y_weights.ravel()
        a = np.concatenate((a_x, a_y))
        b = np.concatenate((b_x, b_y))
        c = np.concatenate((c_x, c_y))
        rows = np.concatenate((a, b, a, b))
        cols = np.concatenate((a, b, b, a))
        data = np.concatenate((c, c, -c, -c))
        self.stiffness = sparse.coo_matrix((data, (rows, cols)), shape=(nx * ny, nx * ny)).tocsr()

        self.free_trace = ids[0, 1:-1]
        self.interior = ids[1:-1, 1:-1].ravel()
        K = self.stiffness
        self.K_BB = K[self.free_trace][:, self.free_trace].tocsc()
        self.K_BI = K[self.free_trace][:, self.interior].tocsc()
        self.K_IB = K[self.interior][:, self.free_trace].tocsc()
        self.K_II = K[self.interior][:, self.interior].tocsc()

    @cached_property
    def _interior_lu(self):
        return spla.splu(self.K_II)

    def solve_interior(self, rhs):
        """Solve K_II x = rhs with the configured backend."""
        if not np.any(rhs):
            return np.zeros_like(rhs)
        if self.linear_solver == "direct":
            return self._interior_lu.solve(rhs)

        history = []
        rhs_norm = np.linalg.norm(rhs)

        def record(xk):
            history.append(float(np.linalg.norm(rhs - self.K_II @ xk) / rhs_norm))

        preconditioner = sparse.diags(1.0 / self.K_II.diagonal())
        solution, info = spla.cg(self.K_II, rhs, rtol=self.linear_tol, M=preconditioner,
                                 maxiter=10 * rhs.size, callback=record)
        if info != 0:
            logger.error(f"CG stopped after {len(history)} iterations (info={info})")
            raise SolverFailureError("conjugate gradient did not converge", history)
        return solution

    def extend(self, trace_values):
        """Field values with the given boundary-line row, harmonic inside, zero elsewhere."""
        values = np.zeros(self.grid.shape)
        values[0] = trace_values
        interior = self.solve_interior(-(self.K_IB @ trace_values[1:-1]))
        values[1:-1, 1:-1] = interior.reshape(self.grid.ny - 2, self.grid.nx - 2)
        return values


def edge_weights(grid):
    """Stiffness weights of the x-edges (per level) and the y-edges (per edge)."""
    hx = grid.hx
    hy = grid.hy
    x_weights = np.empty(grid.ny)
    x_weights[0] = 0.5 * hy[0]
    x_weights[1:-1] = 0.5 * (hy[:-1] + hy[1:])
    x_weights[-1] = 0.5 * hy[-1]
    column_width = np.full(grid.nx, hx)
    column_width[[0, -1]] = 0.5 * hx
    return x_weights / hx, column_width[None, :] / hy[:, None]


def grid_energy(grid, values):
    """Discrete Dirichlet energy v^T K v summed edge by edge."""
    x_weights, y_weights = edge_weights(grid)
    dx = np.diff(values, axis=1)
    dy = np.diff(values, axis=0)
    return float(np.sum(x_weights[:, None] * dx**2) + np.sum(y_weights * dy**2))


def _check_trace(g, grid, label="g"):
    if g.grid.n != grid.nx or not np.allclose(g.grid.nodes, grid.x_nodes):
        raise InvalidArgumentError(f"{label} is not sampled on the grid's x-nodes")


def harmonic_extension_R(g, grid, linear_solver="direct", linear_tol=1e-10):
    """
    Truncated harmonic extension E_R(g)

    Args:
        g (TraceField): Boundary data on the grid's x-nodes
        grid (HalfStripGrid): Truncated domain
        linear_solver (str): "direct" (sparse LU) or "cg" (Jacobi-preconditioned CG)
        linear_tol (float): Relative residual target of the CG backend

    Returns:
        ExtensionField: The extension
    """
    _check_trace(g, grid)
    laplacian = DiscreteLaplacian(grid, linear_solver, linear_tol)
    return ExtensionField(grid, laplacian.extend(g.values))


def dirichlet_energy(w):
    """Discrete integral of |grad w|^2 over the half-strip."""
    return grid_energy(w.grid, w.values)


def boundary_flux(w):
    """
    ∂w/∂y at y = 0 from the first three levels, exact for quadratics in y

    Args:
        w (ExtensionField): Field on a half-strip

    Returns:
        TraceField: The derivative along the boundary line
    """
    hy = w.grid.hy
    if w.grid.ny < 3:
        raise UnsupportedGridError("boundary flux needs at least 3 y-levels")
    h0, h1 = hy[0], hy[1]
    a0 = -(2.0 * h0 + h1) / (h0 * (h0 + h1))
    a1 = (h0 + h1) / (h0 * h1)
    a2 = -h0 / (h1 * (h0 + h1))
    values = w.values
    return TraceField(w.grid.x, a0 * values[0] + a1 * values[1] + a2 * values[2])


def odd_power(z, m):
    return z * np.abs(z) ** (m - 1)


def functional_J(v, g, rho, m, epsilon=1.0):
    """
    Discrete J(v) = 1/2 int |grad v|^2 + (1/eps) [m/(m+1) int rho s^{(m+1)/m} - int rho s g]

    ``s`` is the trace of v on the boundary line. With ``epsilon`` = 1 this is
    the unscaled functional; the auxiliary solution for step eps minimises the
    eps-scaled one.

    Args:
        v (ExtensionField): Candidate field, nonnegative on the boundary line
        g (TraceField): Data
        rho (TraceField): Density
        m (float): Exponent
        epsilon (float): Time step folded into the boundary terms

    Returns:
        float: J(v)
    """
    trace = v.values[0]
    if np.any(trace < 0):
        raise InvalidArgumentError("J needs a nonnegative trace")
    weights = v.grid.x.weights() * rho.values
    energy = grid_energy(v.grid, v.values)
    potential = (m / (m + 1.0)) * np.dot(weights, trace ** ((m + 1.0) / m)) - np.dot(weights, trace * g.values)
    return 0.5 * energy + potential / epsilon


@dataclass(frozen=True, eq=False)
class AuxiliarySolveResult:
    z: TraceField
    v: ExtensionField
    iterations: int
    residual: float
    j_value: float | None
    trace: tuple = ()


class AuxiliarySolver:
    """
    Reusable solver for the auxiliary problem on a fixed grid

    Holds the assembled stiffness, the interior factorisation and, when m = 1,
    the factorised Newton matrix, so a trajectory pays for them once.

    Args:
        grid (HalfStripGrid): Truncated domain
        rho (TraceField): Density, strictly positive
        epsilon (float): Time step, > 0
        m (float): Exponent, >= 1
        tolerances (Tolerances): Newton and linear tolerances
    """

    def __init__(self, grid, rho, epsilon, m, tolerances=None):
        if not epsilon > 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
        if not m >= 1:
            raise InvalidArgumentError(f"m must be >= 1, got {m}")
        _check_trace(rho, grid, "rho")
        if np.any(rho.values <= 0):
            raise InvalidArgumentError("rho must be strictly positive")
        self.grid = grid
        self.rho = rho
        self.epsilon = float(epsilon)
        self.m = float(m)
        self.tolerances = tolerances or Tolerances()
        self.laplacian = DiscreteLaplacian(grid, self.tolerances.linear_solver, self.tolerances.linear_tol)
        self.scale = self.epsilon / grid.hx
        self._rho_free = rho.values[1:-1]
        self._linear_lu = None

    def _residual(self, z, g_free):
        lap = self.laplacian
        a = odd_power(z, self.m)
        interior = lap.solve_interior(-(lap.K_IB @ a))
        flux = lap.K_BB @ a + lap.K_BI @ interior
        return self._rho_free * (z - g_free) + self.scale * flux, interior

    def _block(self, slope):
        lap = self.laplacian
        top = sparse.hstack([sparse.diags(self._rho_free) + self.scale * (lap.K_BB @ sparse.diags(slope)),
                             self.scale * lap.K_BI])
        bottom = sparse.hstack([lap.K_IB @ sparse.diags(slope), lap.K_II])
        return sparse.vstack([top, bottom]).tocsc()

    def _factor(self, slope):
        if self.m == 1.0:
            if self._linear_lu is None:
                self._linear_lu = spla.splu(self._block(slope))
            return self._linear_lu
        return spla.splu(self._block(slope))

    def _project(self, z, nonnegative):
        return np.maximum(z, 0.0) if nonnegative else z

    def solve(self, g):
        """
        Solve for data ``g``

        Args:
            g (TraceField): Data on the grid's x-nodes

        Returns:
            AuxiliarySolveResult: Converged trace, field and diagnostics
        """
        _check_trace(g, self.grid)
        m = self.m
        nb = self.grid.nx - 2
        g_free = g.values[1:-1]
        nonnegative = bool(np.all(g.values >= 0))
        target = self.tolerances.newton_tol * max(1.0, float(np.max(np.abs(self.rho.values * g.values))))
        delta = 1e-12 * (1.0 + g.sup())

        # Start from the data itself
        z = self._project(g_free.copy(), nonnegative)
        residual, interior = self._residual(z, g_free)
        norm = float(np.max(np.abs(residual)))
        history = [norm]
        iterations = 0

        while norm > target:
            if iterations >= self.tolerances.max_newton:
                logger.error(f"Auxiliary solve stalled at residual {norm:.3e} after {iterations} iterations")
                raise SolverFailureError(f"Newton did not converge (residual {norm:.3e})", history)
            iterations += 1

            # Linearise a = z|z|^(m-1); delta keeps the slope nonzero where z vanishes
            slope = m * np.maximum(np.abs(z), delta) ** (m - 1.0)
            rhs_interior = self.laplacian.K_IB @ odd_power(z, m) + self.laplacian.K_II @ interior
            # Coupled (trace, interior) system; only the trace update is kept
            update = self._factor(slope).solve(-np.concatenate((residual, rhs_interior)))[:nb]

            # Halve the step until the residual decreases
            accepted = False
            step = 1.0
            for _ in range(MAX_DAMPINGS + 1):
                trial = self._project(z + step * update, nonnegative)
                trial_residual, trial_interior = self._residual(trial, g_free)
                trial_norm = float(np.max(np.abs(trial_residual)))
                if trial_norm < norm:
                    accepted = True
                    break
                step *= 0.5

            if not accepted:
                # relaxed Picard step with the power lagged at the current iterate
                logger.debug(f"Newton damping failed at iteration {iterations}; relaxed Picard step")
                lagged = np.maximum(np.abs(z), delta) ** (m - 1.0)
                rhs = np.concatenate((self._rho_free * g_free, np.zeros(self.laplacian.K_II.shape[0])))
                picard = spla.splu(self._block(lagged)).solve(rhs)[:nb]
                trial = self._project((1.0 - PICARD_RELAXATION) * z + PICARD_RELAXATION * picard, nonnegative)
                trial_residual, trial_interior = self._residual(trial, g_free)
                trial_norm = float(np.max(np.abs(trial_residual)))

            z, residual, interior, norm = trial, trial_residual, trial_interior, trial_norm
            history.append(norm)
            logger.debug(f"Newton iteration {iterations}: residual {norm:.3e}")

        # Corners stay at zero; the field's trace row is z^m
        z_full = np.zeros(self.grid.nx)
        z_full[1:-1] = z
        values = np.zeros(self.grid.shape)
        values[0, 1:-1] = odd_power(z, m)
        values[1:-1, 1:-1] = interior.reshape(self.grid.ny - 2, nb)
        v = ExtensionField(self.grid, values)
        j_value = functional_J(v, g, self.rho, m, self.epsilon) if np.all(z >= 0) else None
        return AuxiliarySolveResult(TraceField(g.grid, z_full), v, iterations, norm, j_value, tuple(history))


def solve_auxiliary(g, epsilon, rho, m, grid, opts=None):
    """
    One-shot auxiliary solve; see ``AuxiliarySolver`` for repeated solves.

    Args:
        g (TraceField): Data
        epsilon (float): Time step
        rho (TraceField): Density
        m (float): Exponent
        grid (HalfStripGrid): Truncated domain
        opts (Tolerances): Solver tolerances

    Returns:
        AuxiliarySolveResult: The solution pair and diagnostics
    """
    return AuxiliarySolver(grid, rho, epsilon, m, opts).solve(g)
