"""Reference evaluators for the half-Laplacian and the linear evolution.

These work directly on the boundary line and are independent of the
extension solver in ``utils.elliptic``, so they serve as oracles for it.
Data are extended by their end values beyond the grid; the tail integrals
of that constant extension are taken in closed form.
"""
import logging

import numpy as np
from scipy import fft

from utils.errors import InvalidArgumentError, UnsupportedGridError
from utils.fields import TraceField

logger = logging.getLogger(__name__)

ROW_CHUNK = 256


def pv_fractional_laplacian(f, indices=None):
    """
    Principal-value quadrature of (1/pi) P.V. int (f(x) - f(y)) / |x - y|^2 dy

    The integrand is folded onto s = |x - y| > 0 as
    (2 f(x) - f(x + s) - f(x - s)) / s^2, whose limit at s = 0 is -f''(x);
    the fold is integrated with the trapezoid rule in s.

    Args:
        f (TraceField): Samples on a uniform grid
        indices (array-like): Nodes to evaluate at; all nodes when None

    Returns:
        TraceField: The half-Laplacian (zero at nodes not requested)
    """
    grid = f.grid
    if not grid.is_uniform():
        raise UnsupportedGridError("P.V. quadrature needs a uniform grid")
    h = grid.h
    n = grid.n
    values = f.values
    idx = np.arange(n) if indices is None else np.asarray(indices, dtype=int)
    center = values[idx]

    def shifted(k):
        return values[np.clip(idx + k, 0, n - 1)], values[np.clip(idx - k, 0, n - 1)]

    right, left = shifted(1)
    # s = 0 limit of the folded integrand
    acc = 0.5 * h * (2.0 * center - right - left) / h**2

    span = n - 1
    for k in range(1, span + 1):
        right, left = shifted(k)
        weight = 0.5 * h if k == span else h
        acc += weight * (2.0 * center - right - left) / (k * h) ** 2

    # constant extension beyond the last fold distance
    acc += (2.0 * center - values[0] - values[-1]) / (span * h)

    out = np.zeros(n)
    out[idx] = acc / np.pi
    return TraceField(grid, out)


def _periodic_samples(f, period):
    grid = f.grid
    if not grid.is_uniform():
        raise UnsupportedGridError("spectral evaluation needs a uniform grid")
    h = grid.h
    if np.isclose(grid.n * h, period, rtol=1e-9):
        return f.values, False
    if np.isclose((grid.n - 1) * h, period, rtol=1e-9):
        return f.values[:-1], True
    raise InvalidArgumentError(f"grid of {grid.n} nodes with spacing {h} does not tile period {period}")


def spectral_fractional_laplacian(f, period):
    """
    Half-Laplacian of periodic samples through the symbol |k|

    The grid either tiles one period exactly or carries the repeated end
    point as its last node. The Nyquist mode (even sample counts) keeps its
    |k| multiplier.

    Args:
        f (TraceField): Samples on a uniform grid
        period (float): Period of the data

    Returns:
        TraceField: The half-Laplacian
    """
    if not period > 0:
        raise InvalidArgumentError(f"period must be positive, got {period}")
    samples, duplicated = _periodic_samples(f, period)
    count = samples.size
    wavenumbers = 2.0 * np.pi * np.abs(fft.rfftfreq(count, d=period / count))
    result = fft.irfft(fft.rfft(samples) * wavenumbers, n=count)
    if duplicated:
        result = np.append(result, result[0])
    return TraceField(f.grid, result)


def _dual_edges(nodes):
    midpoints = 0.5 * (nodes[1:] + nodes[:-1])
    return np.concatenate(([-np.inf], midpoints)), np.concatenate((midpoints, [np.inf]))


def poisson_weights(nodes, height, rows=None):
    """
    Cell integrals of the half-plane Poisson kernel height / (pi (x^2 + height^2))

    Row i holds the kernel mass of each dual cell seen from node i; the two
    end cells reach to infinity, so every row sums to 1.
    """
    lower, upper = _dual_edges(nodes)
    targets = nodes if rows is None else nodes[rows]
    offset = targets[:, None]
    return (np.arctan((upper[None, :] - offset) / height) - np.arctan((lower[None, :] - offset) / height)) / np.pi


def poisson_extend(u0, y):
    """
    Harmonic extension of boundary data to height y

    Args:
        u0 (TraceField): Bounded boundary data
        y (float): Height, >= 0

    Returns:
        TraceField: Values of the extension at height y
    """
    if y < 0:
        raise InvalidArgumentError(f"height must be nonnegative, got y={y}")
    if y == 0:
        return TraceField(u0.grid, u0.values)
    nodes = u0.grid.nodes
    out = np.empty(nodes.size)
    for start in range(0, nodes.size, ROW_CHUNK):
        rows = np.arange(start, min(start + ROW_CHUNK, nodes.size))
        out[rows] = poisson_weights(nodes, y, rows) @ u0.values
    return TraceField(u0.grid, out)


def poisson_semigroup_solution(u0, t):
    """
    Exact solution at time t of u_t + (-d^2/dx^2)^{1/2} u = 0 with unit density

    Args:
        u0 (TraceField): Initial data
        t (float): Time, >= 0

    Returns:
        TraceField: u(., t)
    """
    if t < 0:
        raise InvalidArgumentError(f"time must be nonnegative, got t={t}")
    return poisson_extend(u0, t)
