"""Discrete geometries: the line, the Cartesian half-strip and the polar half-disk.

All grids are immutable; their node arrays are read-only so a grid can be
shared between threads and between solves.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from utils.errors import InvalidArgumentError, UnsupportedGridError

logger = logging.getLogger(__name__)

NODE_TOL = 1e-9


def _frozen(values):
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


def _check_increasing(nodes, label):
    if not np.all(np.diff(nodes) > 0):
        raise InvalidArgumentError(f"{label} must be strictly increasing")


@dataclass(frozen=True, eq=False)
class LineGrid:
    """Nodes x_0 < ... < x_{n-1} on the boundary line."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise InvalidArgumentError("a line grid needs at least 3 nodes")
        _check_increasing(nodes, "line nodes")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self):
        return self.nodes.size

    @property
    def spacing(self):
        return np.diff(self.nodes)

    @property
    def h(self):
        """Uniform spacing; raises UnsupportedGridError on a graded grid."""
        if not self.is_uniform():
            raise UnsupportedGridError("operation requires a uniform line grid")
        return (self.nodes[-1] - self.nodes[0]) / (self.n - 1)

    @property
    def R(self):
        return max(abs(self.nodes[0]), abs(self.nodes[-1]))

    def is_uniform(self, rtol=1e-9):
        spacing = self.spacing
        return bool(np.allclose(spacing, spacing.mean(), rtol=rtol, atol=0.0))

    def weights(self):
        """Trapezoid quadrature weights."""
        spacing = self.spacing
        w = np.zeros(self.n)
        w[:-1] += 0.5 * spacing
        w[1:] += 0.5 * spacing
        return w

    def summary(self):
        return {"n": int(self.n), "x_min": float(self.nodes[0]), "x_max": float(self.nodes[-1])}


@dataclass(frozen=True, eq=False)
class HalfStripGrid:
    """Tensor grid on [-R, R] x [0, Y]; field arrays are indexed ``[j, i]`` (y, x)."""

    x: LineGrid
    y_nodes: np.ndarray
    R: float
    Y: float
    grade: float = 1.0

    def __post_init__(self):
        y_nodes = _frozen(self.y_nodes)
        if y_nodes.size < 3:
            raise InvalidArgumentError("a half-strip needs at least 3 y-levels")
        if y_nodes[0] != 0.0:
            raise InvalidArgumentError("the first y-level must be exactly 0")
        _check_increasing(y_nodes, "y nodes")
        object.__setattr__(self, "y_nodes", y_nodes)

    @property
    def x_nodes(self):
        return self.x.nodes

    @property
    def nx(self):
        return self.x.n

    @property
    def ny(self):
        return self.y_nodes.size

    @property
    def hx(self):
        return self.x.h

    @property
    def hy(self):
        return np.diff(self.y_nodes)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def mesh(self):
        return np.meshgrid(self.x_nodes, self.y_nodes)

    def summary(self):
        return {
            "R": float(self.R),
            "Y": float(self.y_nodes[-1]),
            "nx": int(self.nx),
            "ny": int(self.ny),
            "hx": float(self.hx),
            "h0": float(self.hy[0]),
            "grade": float(self.grade),
        }


@dataclass(frozen=True, eq=False)
class HalfDiskGrid:
    """Polar grid on the half-disk; field arrays are indexed ``[k, i]`` (theta, r)."""

    r_nodes: np.ndarray
    theta_nodes: np.ndarray
    R: float

    def __post_init__(self):
        r_nodes = _frozen(self.r_nodes)
        theta_nodes = _frozen(self.theta_nodes)
        if r_nodes.size < 3 or theta_nodes.size < 3:
            raise InvalidArgumentError("a half-disk needs at least 3 radii and 3 angles")
        if r_nodes[0] <= 0:
            raise InvalidArgumentError("the innermost radius must be positive")
        _check_increasing(r_nodes, "radii")
        _check_increasing(theta_nodes, "angles")
        if theta_nodes[0] != 0.0 or theta_nodes[-1] != np.pi:
            raise InvalidArgumentError("angles must start at 0 and end at pi")
        object.__setattr__(self, "r_nodes", r_nodes)
        object.__setattr__(self, "theta_nodes", theta_nodes)

    @property
    def r_min(self):
        return float(self.r_nodes[0])

    @property
    def nr(self):
        return self.r_nodes.size

    @property
    def ntheta(self):
        return self.theta_nodes.size

    @property
    def shape(self):
        return (self.ntheta, self.nr)

    def summary(self):
        return {
            "R": float(self.R),
            "r_min": self.r_min,
            "nr": int(self.nr),
            "ntheta": int(self.ntheta),
        }


def build_line(R, n):
    """
    Uniform symmetric grid on [-R, R]

    Args:
        R (float): Half-width
        n (int): Number of nodes, at least 3

    Returns:
        LineGrid: The grid
    """
    if not R > 0:
        raise InvalidArgumentError(f"R must be positive, got {R}")
    if int(n) != n or n < 3:
        raise InvalidArgumentError(f"n must be an integer >= 3, got {n}")
    n = int(n)
    nodes = np.linspace(-R, R, n)
    if n % 2 == 1:
        nodes[n // 2] = 0.0
    return LineGrid(nodes)


def graded_levels(Y, ny, grade):
    """Levels 0 = y_0 < ... < y_{ny-1} = Y whose spacings grow by ``grade``."""
    if grade == 1.0:
        levels = np.linspace(0.0, Y, ny)
    else:
        h0 = Y * (grade - 1.0) / (grade ** (ny - 1) - 1.0)
        k = np.arange(ny)
        levels = h0 * (grade**k - 1.0) / (grade - 1.0)
    levels[0] = 0.0
    levels[-1] = Y
    return levels


def build_half_strip(R, Y, nx, ny, grade=1.1):
    """
    Cartesian truncation [-R, R] x [0, Y] of the half-plane

    Args:
        R (float): Half-width in x
        Y (float): Height
        nx (int): Number of x-nodes
        ny (int): Number of y-levels
        grade (float): Ratio between consecutive y-spacings, >= 1

    Returns:
        HalfStripGrid: The grid
    """
    if not (R > 0 and Y > 0):
        raise InvalidArgumentError(f"R and Y must be positive, got R={R}, Y={Y}")
    if int(ny) != ny or ny < 3:
        raise InvalidArgumentError(f"ny must be an integer >= 3, got {ny}")
    if not grade >= 1.0:
        raise InvalidArgumentError(f"grade must be >= 1, got {grade}")
    x = build_line(R, nx)
    return HalfStripGrid(x, graded_levels(float(Y), int(ny), float(grade)), float(R), float(Y), float(grade))


def levels_for_spacing(Y, h0, grade):
    """Number of y-levels so that the first spacing is about ``h0``."""
    if grade == 1.0:
        return max(3, int(math.ceil(Y / h0)) + 1)
    return max(3, int(math.ceil(math.log(1.0 + Y * (grade - 1.0) / h0) / math.log(grade))) + 1)


def resize_half_strip(base, R):
    """
    Half-strip of half-width ``R`` sharing nodes with ``base``

    The x-spacing and the y-ladder of ``base`` are kept (the ladder is
    continued geometrically, or cut), and the height keeps the ratio Y/R.
    Common nodes of the two grids coincide exactly, which is what the
    monotone-in-R comparisons rely on.

    Args:
        base (HalfStripGrid): Reference grid
        R (float): New half-width; must be a multiple of the x-spacing

    Returns:
        HalfStripGrid: The resized grid
    """
    hx = base.hx
    half = R / hx
    if not math.isclose(half, round(half), rel_tol=0.0, abs_tol=1e-6) or round(half) < 1:
        raise UnsupportedGridError(f"R={R} is not a multiple of the x-spacing {hx}")
    half = int(round(half))
    x_nodes = hx * np.arange(-half, half + 1)
    x_nodes[half] = 0.0

    target = R * base.y_nodes[-1] / base.R
    levels = list(base.y_nodes)
    last_step = levels[-1] - levels[-2]
    while levels[-1] < target * (1.0 - NODE_TOL):
        last_step *= base.grade
        levels.append(levels[-1] + last_step)
    levels = np.asarray(levels)
    cut = int(np.searchsorted(levels, target * (1.0 - NODE_TOL))) + 1
    levels = levels[: max(cut, 3)]
    return HalfStripGrid(LineGrid(x_nodes), levels, float(R), float(levels[-1]), base.grade)


def common_node_indices(small, large):
    """
    Locate the nodes of ``small`` inside ``large``

    Returns:
        tuple: (iy, ix) index arrays into ``large`` along y and x
    """
    def _match(inner, outer):
        idx = np.searchsorted(outer, inner - NODE_TOL)
        idx = np.clip(idx, 0, outer.size - 1)
        if not np.allclose(outer[idx], inner, rtol=0.0, atol=NODE_TOL * max(1.0, abs(outer[-1]))):
            raise UnsupportedGridError("grids are not nested")
        return idx

    if isinstance(small, HalfDiskGrid):
        return _match(small.theta_nodes, large.theta_nodes), _match(small.r_nodes, large.r_nodes)
    return _match(small.y_nodes, large.y_nodes), _match(small.x_nodes, large.x_nodes)


def build_half_disk(R, nr, ntheta, r_min):
    """
    Polar half-disk with geometric radii from ``r_min`` to ``R``

    Args:
        R (float): Outer radius
        nr (int): Number of radii
        ntheta (int): Number of angles on [0, pi]
        r_min (float): Innermost radius, 0 < r_min < R

    Returns:
        HalfDiskGrid: The grid
    """
    if not 0 < r_min < R:
        raise InvalidArgumentError(f"need 0 < r_min < R, got r_min={r_min}, R={R}")
    if int(nr) != nr or nr < 3 or int(ntheta) != ntheta or ntheta < 3:
        raise InvalidArgumentError(f"nr and ntheta must be integers >= 3, got {nr}, {ntheta}")
    exponents = np.arange(int(nr)) / (int(nr) - 1)
    r_nodes = r_min * (R / r_min) ** exponents
    r_nodes[0] = r_min
    r_nodes[-1] = R
    theta_nodes = np.linspace(0.0, np.pi, int(ntheta))
    theta_nodes[-1] = np.pi
    return HalfDiskGrid(r_nodes, theta_nodes, float(R))
