"""Input validation helpers shared by the estimators and functions."""
import math

import numpy as np


def check_delta(delta):
    delta = float(delta)
    if not (0.0 < delta <= 1.0):
        raise ValueError(f"delta must lie in (0, 1] (got {delta})")
    return delta


def check_positive(value, name, strict=True):
    value = float(value)
    if not math.isfinite(value) or (value <= 0 if strict else value < 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be finite and {bound} (got {value})")
    return value


def check_schedule(deltas):
    """Strictly decreasing sequence in (0, 1]."""
    arr = np.asarray(list(deltas), dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("delta schedule must be a non-empty 1-D sequence")
    for d in arr:
        check_delta(d)
    if np.any(np.diff(arr) >= 0):
        raise ValueError("delta schedule must be strictly decreasing")
    return arr


def check_field_values(values, grid):
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite values")
    return values
