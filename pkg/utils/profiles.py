"""Named initial-data and density profiles."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

INITIAL_KINDS = ("bump", "cauchy", "constant", "two-bump", "file")
DENSITY_KINDS = ("one", "cauchy-decay", "power-decay", "file")


@dataclass(frozen=True)
class ProfileSpec:
    """A named profile with its parameters; ``path`` is used by the file kind."""

    kind: str
    params: dict = field(default_factory=dict)
    path: str | None = None

    def param(self, name, default):
        return float(self.params.get(name, default))

    def describe(self):
        described = {"kind": self.kind, **{k: float(v) for k, v in sorted(self.params.items())}}
        if self.path is not None:
            described["path"] = self.path
        return described


def smooth_bump(s):
    """exp(1 - 1/(1 - s^2)) on |s| < 1, zero elsewhere; peak value 1 at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def bump_mass():
    """Integral of ``smooth_bump`` over the line."""
    value, _ = integrate.quad(lambda s: math.exp(1.0 - 1.0 / (1.0 - s * s)), -1.0, 1.0)
    return value


def unit_mass_bump(x, R0, mass=1.0):
    """Bump supported in [-R0, R0] with integral ``mass``."""
    return mass * smooth_bump(np.asarray(x) / R0) / (R0 * bump_mass())


def _from_file(spec, x):
    from utils.data_utils import load_profile

    nodes, values = load_profile(spec.path)
    return np.interp(x, nodes, values)


def initial_profile(spec, x):
    """
    Sample initial data at ``x``

    Args:
        spec (ProfileSpec): bump | cauchy | constant | two-bump | file
        x (np.ndarray): Sample points

    Returns:
        np.ndarray: Nonnegative samples
    """
    x = np.asarray(x, dtype=float)
    amp = spec.param("amp", 1.0)
    if spec.kind == "bump":
        values = amp * smooth_bump((x - spec.param("center", 0.0)) / spec.param("width", 1.0))
    elif spec.kind == "cauchy":
        values = amp / (1.0 + (x / spec.param("scale", 1.0)) ** 2)
    elif spec.kind == "constant":
        values = np.full_like(x, spec.param("value", 1.0))
    elif spec.kind == "two-bump":
        half = 0.5 * spec.param("separation", 3.0)
        width = spec.param("width", 1.0)
        values = amp * (smooth_bump((x - half) / width) + smooth_bump((x + half) / width))
    elif spec.kind == "file":
        values = _from_file(spec, x)
    else:
        raise InvalidArgumentError(f"unknown initial profile '{spec.kind}'")
    if np.any(values < 0):
        raise InvalidArgumentError(f"initial profile '{spec.kind}' takes negative values")
    return values


def density_profile(spec, x):
    """
    Sample a density at ``x``

    Args:
        spec (ProfileSpec): one | cauchy-decay | power-decay | file
        x (np.ndarray): Sample points

    Returns:
        np.ndarray: Strictly positive samples
    """
    x = np.asarray(x, dtype=float)
    if spec.kind == "one":
        values = np.ones_like(x)
    elif spec.kind == "cauchy-decay":
        values = 1.0 / (1.0 + (x / spec.param("rho_scale", 1.0)) ** 2)
    elif spec.kind == "power-decay":
        values = (1.0 + x**2) ** (-0.5 * spec.param("alpha", 2.0))
    elif spec.kind == "file":
        values = _from_file(spec, x)
    else:
        raise InvalidArgumentError(f"unknown density profile '{spec.kind}'")
    if np.any(values <= 0):
        raise InvalidArgumentError(f"density '{spec.kind}' is not strictly positive on the grid")
    return values
