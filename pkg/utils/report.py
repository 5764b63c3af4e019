"""Pass/fail checks and the machine-readable run report."""
import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


def _plain(value):
    """Convert numpy scalars and arrays to JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    return value


@dataclass
class Check:
    """A measured value compared against a threshold (``value <= threshold`` passes)."""

    name: str
    value: float
    threshold: float
    passed: bool = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.value = float(self.value)
        self.threshold = float(self.threshold)
        if self.passed is None:
            self.passed = bool(self.value <= self.threshold)

    def to_dict(self):
        return _plain({
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "passed": self.passed,
            "details": self.details,
        })


@dataclass
class Report:
    """Checks, metrics and provenance of one run; passes iff every check passes."""

    mode: str = ""
    checks: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    error: str | None = None

    @property
    def passed(self):
        return self.error is None and all(check.passed for check in self.checks)

    def add(self, check):
        self.checks.append(check)
        if not check.passed:
            logger.warning(f"Check failed: {check.name} = {check.value:.6g} (threshold {check.threshold:.6g})")
        return check

    def merge(self, other, prefix=""):
        """Fold another report's checks and metrics into this one."""
        for check in other.checks:
            if prefix:
                check.name = f"{prefix}.{check.name}"
            self.checks.append(check)
        for key, value in other.metrics.items():
            self.metrics[f"{prefix}.{key}" if prefix else key] = value
        return self

    def to_dict(self):
        return _plain({
            "mode": self.mode,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
            "metrics": self.metrics,
            "provenance": self.provenance,
            "artifacts": sorted(self.artifacts),
            "error": self.error,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path):
        try:
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(self.to_json())
        except OSError as e:
            raise OSError(f"Error writing report {path}: {str(e)}") from e
        return path


def package_versions():
    """Installed versions of the numerical stack, for the provenance block."""
    from importlib import metadata

    versions = {}
    for name in ("fracpme", "numpy", "scipy", "pandas", "plotly"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def provenance(echo, grids=None):
    """Config echo, grid summary and versions; no timestamps or host data."""
    return {"config": echo, "grids": grids or {}, "versions": package_versions()}
