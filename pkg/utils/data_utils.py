import logging
import os

import numpy as np
import pandas as pd

from utils.errors import InvalidArgumentError
from utils.fields import ExtensionField, PolarField, TraceField

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
DIAGNOSTIC_COLUMNS = ["t", "energy", "lyapunov", "mass", "iterations"]


def ensure_output_dir(path):
    """Create the run's output directory if it doesn't exist"""
    if not os.path.exists(path):
        os.makedirs(path)
    return path


def snapshot_frame(item):
    """
    Tabulate a field, trace or diagnostics series for CSV output

    Args:
        item: TraceField, ExtensionField, PolarField or a DataFrame

    Returns:
        pd.DataFrame: Rows in node order
    """
    if isinstance(item, TraceField):
        return pd.DataFrame({"x": item.x, "u": item.values})
    if isinstance(item, ExtensionField):
        x, y = item.grid.mesh()
        return pd.DataFrame({"x": x.ravel(), "y": y.ravel(), "w": item.values.ravel()})
    if isinstance(item, PolarField):
        r, theta = np.meshgrid(item.grid.r_nodes, item.grid.theta_nodes)
        return pd.DataFrame({"r": r.ravel(), "theta": theta.ravel(), "psi": item.values.ravel()})
    if isinstance(item, pd.DataFrame):
        return item
    raise InvalidArgumentError(f"cannot write a snapshot of {type(item).__name__}")


def emit_snapshot(item, path):
    """
    Write a snapshot CSV with a header row and round-trippable floats

    Args:
        item: TraceField ("x,u"), ExtensionField ("x,y,w"), PolarField
            ("r,theta,psi") or a diagnostics DataFrame
        path (str): Target file

    Returns:
        str: The path written
    """
    frame = snapshot_frame(item)
    try:
        directory = os.path.dirname(path)
        if directory:
            ensure_output_dir(directory)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise OSError(f"Error writing snapshot {path}: {str(e)}") from e
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def load_snapshot(path):
    """Read a snapshot back with exact float parsing"""
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except OSError as e:
        raise OSError(f"Error reading snapshot {path}: {str(e)}") from e


def load_profile(path):
    """
    Load an externally supplied profile

    Args:
        path (str): CSV with columns x,value

    Returns:
        tuple: (x, value) arrays sorted by x
    """
    if not os.path.exists(path):
        raise InvalidArgumentError(f"profile file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    if not {"x", "value"}.issubset(frame.columns):
        raise InvalidArgumentError(f"profile file {path} needs columns x,value")
    frame = frame.sort_values("x")
    return frame["x"].to_numpy(dtype=float), frame["value"].to_numpy(dtype=float)
