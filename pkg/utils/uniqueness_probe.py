"""Barrier-flux probe on genuine half-disks.

Solves Δψ = 0 in the half-disk of radius R, -∂ψ/∂y = F on the flat boundary,
ψ = 0 on the arc, and compares ψ with the logarithmic barrier
Z(r) = M (Θ(r) - Θ(R)) / (Θ(R0) - Θ(R)), Θ(r) = -(1/π) log r.

The discretisation is a conservative finite-volume scheme on a polar grid
with geometric radii. Radial edge weights Δθ / log(r_{i+1}/r_i) make it exact
for fields a + b log r, so Z is discretely harmonic and the comparison
Z >= ψ holds at the discrete level. The origin is cut out at r_min with a
zero-flux condition; the mass of F on [-r_min, r_min] is given to the two
innermost boundary cells.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, sparse
from scipy.sparse import linalg as spla

from utils.errors import InvalidArgumentError, PreconditionError, UnsupportedGridError
from utils.fields import PolarField, TraceField
from utils.grid import build_half_disk, common_node_indices
from utils.report import Check, Report

logger = logging.getLogger(__name__)

INNER_OCTAVES = 6
PRODUCT_BAND = 2.0
# s(R)·R may grow by this factor between radii (discretisation error)
SR_GROWTH_SLACK = 1.01
GAP_TOL = 1e-6


def theta(r):
    """Fundamental solution -(1/pi) log r of the half-plane problem."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise InvalidArgumentError("theta needs r > 0")
    value = -np.log(r) / np.pi
    return float(value) if value.ndim == 0 else value


def theta_flux_mass(a, eta, n=4001):
    """
    Boundary mass of -∂Θ/∂y over [-a, a], sampled at height ``eta``

    The y-derivative is a centred difference of ``theta``; the integral is
    the trapezoid rule on ``n`` points. Tends to 1 as a / eta grows.
    """
    if not (a > 0 and eta > 0):
        raise InvalidArgumentError("a and eta must be positive")
    x = np.linspace(-a, a, n)
    h = 1e-3 * eta
    below = theta(np.hypot(x, eta - h))
    above = theta(np.hypot(x, eta + h))
    return float(integrate.trapezoid((below - above) / (2.0 * h), x))


@dataclass(frozen=True, eq=False)
class BarrierProblem:
    """
    Data F supported in [-R0, R0] and the half-disk of radius R > R0

    ``F`` may be sampled on any line grid; it is treated as zero outside it.
    """

    F: TraceField
    R0: float
    R: float
    grid: object

    def __post_init__(self):
        if not 0 < self.R0 < self.R:
            raise InvalidArgumentError(f"need 0 < R0 < R, got R0={self.R0}, R={self.R}")
        if np.any(self.F.values < 0):
            raise InvalidArgumentError("F must be nonnegative")
        outside = np.abs(self.F.x) > self.R0 * (1.0 + 1e-9)
        if np.any(self.F.values[outside] != 0):
            raise InvalidArgumentError("F must vanish outside [-R0, R0]")
        if not math.isclose(self.grid.R, self.R):
            raise InvalidArgumentError("grid radius does not match R")

    @property
    def mass(self):
        return self.F.integral()

    @property
    def per_octave(self):
        return int(round((self.grid.nr - 1) / math.log2(self.R / self.grid.r_min)))

    def with_radius(self, R):
        """Same F, r_min, radial density and angles on a half-disk of radius R."""
        return make_barrier_problem(self.F, self.R0, R, self.per_octave, self.grid.ntheta, self.grid.r_min)

    def scaled(self, factor):
        return BarrierProblem(TraceField(self.F.grid, factor * self.F.values), self.R0, self.R, self.grid)


def make_barrier_problem(F, R0, R, per_octave=16, ntheta=33, r_min=None):
    """
    Build a problem whose radii form one geometric ladder through r_min, R0 and R

    Args:
        F (TraceField): Nonnegative data supported in [-R0, R0]
        R0 (float): Support radius
        R (float): Outer radius
        per_octave (int): Radii per doubling
        ntheta (int): Angles on [0, pi]
        r_min (float): Inner radius; defaults to R0 / 64

    Returns:
        BarrierProblem: The problem
    """
    r_min = R0 * 2.0**-INNER_OCTAVES if r_min is None else r_min
    nr = int(round(per_octave * math.log2(R / r_min))) + 1
    return BarrierProblem(F, float(R0), float(R), build_half_disk(R, nr, ntheta, r_min))


def _boundary_masses(F, lower, upper):
    """Integrals of F over [lower_i, upper_i] (theta = 0) and [-upper_i, -lower_i] (theta = pi)."""
    cumulative = integrate.cumulative_trapezoid(F.values, F.x, initial=0.0)

    def primitive(x):
        return np.interp(x, F.x, cumulative)

    right = primitive(upper) - primitive(lower)
    left = primitive(-lower) - primitive(-upper)
    return right, left


def _polar_system(problem):
    grid = problem.grid
    r = grid.r_nodes
    nr, nt = grid.nr, grid.ntheta
    dtheta = np.pi / (nt - 1)
    free = nr - 1

    # Dual cells: faces at geometric midpoints, half cells on the two boundary rays
    faces = np.sqrt(r[:-1] * r[1:])
    lower = np.concatenate(([r[0]], faces[:-1]))
    upper = faces
    radial_span = np.log(upper / lower)
    angle_span = np.full(nt, dtheta)
    angle_span[[0, -1]] = 0.5 * dtheta

    # Unknowns exclude the arc ring, which is Dirichlet zero
    ids = np.arange(nt * free).reshape(nt, free)
    # Radial weights exact for a + b log r
    radial_coef = angle_span[:, None] / np.log(r[1:] / r[:-1])[None, :]
    a_r, b_r = ids[:, :-1].ravel(), ids[:, 1:].ravel()
    c_r = radial_coef[:, :-1].ravel()
    a_t, b_t = ids[:-1, :].ravel(), ids[1:, :].ravel()
    c_t = np.tile(radial_span / dtheta, nt - 1)
    a = np.concatenate((a_r, a_t))
    b = np.concatenate((b_r, b_t))
    c = np.concatenate((c_r, c_t))
    rows = np.concatenate((a, b, a, b, ids[:, -1]))
    cols = np.concatenate((a, b, b, a, ids[:, -1]))
    # the last free ring also couples to the Dirichlet arc
    data = np.concatenate((c, c, -c, -c, radial_coef[:, -1]))
    stiffness = sparse.coo_matrix((data, (rows, cols)), shape=(nt * free, nt * free)).tocsc()

    # Neumann data enters as the mass of F over each boundary segment
    segment_lower = np.concatenate(([0.0], faces[:-1]))
    right, left = _boundary_masses(problem.F, segment_lower, upper)
    load = np.zeros((nt, free))
    load[0] = right
    load[-1] = left
    return stiffness, load.ravel(), radial_coef[:, -1]


def solve_barrier(p):
    """
    Solve Δψ = 0, -∂ψ/∂y = F on the flat boundary, ψ = 0 on the arc

    Args:
        p (BarrierProblem): The problem

    Returns:
        PolarField: ψ_R, zero on the arc
    """
    grid = p.grid
    values = np.zeros(grid.shape)
    stiffness, load, _ = _polar_system(p)
    if np.any(load):
        values[:, :-1] = spla.spsolve(stiffness, load).reshape(grid.ntheta, grid.nr - 1)
    logger.debug(f"Barrier solve R={p.R}: max psi {values.max():.6g}")
    return PolarField(grid, values)


def sigma_flux(psi):
    """
    Outward derivative ∂ψ/∂r on the arc, one value per angle

    Second-order one-sided difference in s = log r, divided by R.
    """
    grid = psi.grid
    if grid.nr < 3:
        raise UnsupportedGridError("arc flux needs at least 3 radii")
    s = np.log(grid.r_nodes[-3:])
    d1 = s[2] - s[1]
    d2 = s[1] - s[0]
    values = psi.values
    ds = ((2.0 * d1 + d2) / (d1 * (d1 + d2)) * values[:, -1]
          - (d1 + d2) / (d1 * d2) * values[:, -2]
          + d1 / (d2 * (d1 + d2)) * values[:, -3])
    return ds / grid.R


def sigma_flux_total(psi, p):
    """Discrete outward flux through the arc; equals minus the mass of F."""
    _, _, arc_coef = _polar_system(p)
    return float(-np.dot(arc_coef, psi.values[:, -2]))


def barrier_supersolution(p, M):
    """Z(r) = M (Θ(r) - Θ(R)) / (Θ(R0) - Θ(R)) on the polar grid."""
    grid = p.grid
    profile = M * (theta(grid.r_nodes) - theta(p.R)) / (theta(p.R0) - theta(p.R))
    return PolarField(grid, np.broadcast_to(profile, grid.shape))


def ring_maximum(psi, radius):
    """Largest value of ψ on the ring of nodes nearest ``radius``."""
    index = int(np.argmin(np.abs(psi.grid.r_nodes - radius)))
    return float(psi.values[:, index].max())


def barrier_gap(p, psi, M=None):
    """
    Smallest Z - ψ over the annulus R0 <= r <= R

    Args:
        p (BarrierProblem): The problem, R > 2 R0
        psi (PolarField): Its solution
        M (float): Barrier height; defaults to the maximum of ψ on the R0 ring

    Returns:
        float: The gap; nonnegative certifies Z >= ψ
    """
    if not p.R > 2.0 * p.R0:
        raise PreconditionError(f"the barrier needs R > 2 R0, got R={p.R}, R0={p.R0}")
    M = ring_maximum(psi, p.R0) if M is None else M
    Z = barrier_supersolution(p, M)
    annulus = p.grid.r_nodes >= p.R0 * (1.0 - 1e-9)
    return float(np.min(Z.values[:, annulus] - psi.values[:, annulus]))


def monotone_gap(psi_small, psi_large):
    """max(ψ_small - ψ_large) over the nodes of the smaller half-disk."""
    ik, ir = common_node_indices(psi_small.grid, psi_large.grid)
    return float(np.max(psi_small.values - psi_large.values[np.ix_(ik, ir)]))


def r_min_sensitivity(p):
    """max |ψ - ψ'| on common nodes, ψ' solved with the inner radius halved."""
    halved = make_barrier_problem(p.F, p.R0, p.R, p.per_octave, p.grid.ntheta, 0.5 * p.grid.r_min)
    psi = solve_barrier(p)
    psi_halved = solve_barrier(halved)
    ik, ir = common_node_indices(psi.grid, psi_halved.grid)
    return float(np.max(np.abs(psi.values - psi_halved.values[np.ix_(ik, ir)])))


def probe_sweep(p_template, R_list, workers=1):
    """Solve the template's data on each radius; results follow ``R_list`` order."""
    problems = [p_template.with_radius(R) for R in R_list]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        fields = list(pool.map(solve_barrier, problems))
    return list(zip(problems, fields))


def flux_decay_fit(p_template, R_list, workers=1, solutions=None):
    """
    Flux decay on the arc across an R sweep

    For each R, s(R) = max |∂ψ_R/∂ν| on the arc and the product
    s(R) R log(R / R0) are tabulated. Flux conservation pins the mean of
    |∂ψ_R/∂ν| to mass / (pi R), so s(R) R stays bounded and settles at
    mass / pi while the product grows like log R; both are reported.

    Checks: products within a factor 2, s(R) R not increasing, strict
    flux negativity, Z >= ψ_R (M from the largest R), ψ monotone in R,
    positivity and discrete flux conservation.

    Args:
        p_template (BarrierProblem): F, R0 and grid resolution
        R_list (list[float]): Increasing radii, each > 2 R0
        workers (int): Threads for the independent solves
        solutions (list): Precomputed ``probe_sweep`` output

    Returns:
        Report: Checks plus the product table in ``metrics``
    """
    R_list = [float(R) for R in R_list]
    R0 = p_template.R0
    if any(R <= 2.0 * R0 for R in R_list):
        raise PreconditionError(f"every R must exceed 2 R0 = {2.0 * R0}")
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise InvalidArgumentError("R_list must be increasing")
    solutions = solutions or probe_sweep(p_template, R_list, workers)
    mass = p_template.mass
    M = ring_maximum(solutions[-1][1], R0)

    fluxes = [sigma_flux(psi) for _, psi in solutions]
    s = np.array([float(np.max(np.abs(flux))) for flux in fluxes])
    radii = np.array(R_list)
    logs = np.log(radii / R0)
    products = s * radii * logs
    s_times_R = s * radii
    gaps = [barrier_gap(p, psi, M) for p, psi in solutions]
    totals = [sigma_flux_total(psi, p) for p, psi in solutions]
    monotone = [monotone_gap(a[1], b[1]) for a, b in zip(solutions, solutions[1:])]
    interior_min = min(float(psi.values[:, :-1].min()) for _, psi in solutions)

    report = Report(metrics={
        "R": radii.tolist(),
        "s": s.tolist(),
        "products": products.tolist(),
        "s_times_R": s_times_R.tolist(),
        "remainder_rate": (np.pi * s_times_R).tolist(),
        "gaps": gaps,
        "M": M,
        "fitted_M": float(products.max()),
        "mass_over_pi": mass / np.pi,
        "product_log_slope": float(np.polyfit(logs, products, 1)[0]) if len(R_list) > 1 else 0.0,
        "r_min_sensitivity": r_min_sensitivity(solutions[0][0]),
    })

    band = float(products.max() / products.min()) if products.min() > 0 else math.inf
    report.add(Check("products_band", band, PRODUCT_BAND))
    growth = max((b / a for a, b in zip(s_times_R, s_times_R[1:]) if a > 0), default=0.0)
    report.add(Check("s_times_R_growth_ratio", growth, SR_GROWTH_SLACK))
    worst_flux = max(float(flux.max()) for flux in fluxes)
    report.add(Check("flux_negative", worst_flux, 0.0, passed=bool(worst_flux < 0)))
    report.add(Check("barrier_domination", -min(gaps), GAP_TOL * max(1.0, M)))
    report.add(Check("monotone_in_R", max(monotone, default=0.0), 1e-10 * max(1.0, M)))
    report.add(Check("positivity", -interior_min, 0.0, passed=bool(interior_min > 0)))
    conservation = max(abs(total + mass) for total in totals)
    report.add(Check("flux_conservation", conservation, 1e-8 * max(1.0, mass)))
    return report
