"""Sampled functions on the grids of ``utils.grid``."""
from dataclasses import dataclass

import numpy as np

from utils.errors import InvalidArgumentError
from utils.grid import HalfDiskGrid, HalfStripGrid, LineGrid


def _frozen_samples(values, shape, label):
    array = np.array(values, dtype=float)
    if array.shape != shape:
        raise InvalidArgumentError(f"{label} has shape {array.shape}, grid expects {shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{label} contains non-finite values")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class TraceField:
    """Samples on the boundary line: u, g, z, u0, F or rho."""

    grid: LineGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_samples(self.values, (self.grid.n,), "trace values"))

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.nodes))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n))

    @property
    def x(self):
        return self.grid.nodes

    def integral(self, weight=None):
        """Trapezoid integral of the samples, optionally times a weight trace."""
        values = self.values if weight is None else self.values * _as_array(weight)
        return float(np.dot(self.grid.weights(), values))

    def sup(self):
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class ExtensionField:
    """Samples on a half-strip, indexed ``[j, i]`` with j the y-level."""

    grid: HalfStripGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_samples(self.values, self.grid.shape, "field values"))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    def trace(self):
        return TraceField(self.grid.x, self.values[0])


@dataclass(frozen=True, eq=False)
class PolarField:
    """Samples on a half-disk, indexed ``[k, i]`` with k the angle."""

    grid: HalfDiskGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_samples(self.values, self.grid.shape, "polar values"))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid, fn):
        r, theta = np.meshgrid(grid.r_nodes, grid.theta_nodes)
        return cls(grid, fn(r, theta))


def _as_array(weight):
    return weight.values if isinstance(weight, TraceField) else np.asarray(weight, dtype=float)
