"""Input validation shared by the functional ops and the estimator wrappers."""
from __future__ import annotations

import numpy as np

FLOAT_DTYPES = (np.float32, np.float64)


def check_nhwc(x, name="x"):
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"{name} must be NHWC with 4 dimensions, got shape {x.shape}")
    if any(d < 1 for d in x.shape):
        raise ValueError(f"{name} has an empty dimension: {x.shape}")
    if x.dtype not in FLOAT_DTYPES:
        x = x.astype(np.float64)
    return np.ascontiguousarray(x)


def check_kernel(w, dtype, ndim, name="w"):
    w = np.asarray(w)
    if w.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimensions, got shape {w.shape}")
    return np.ascontiguousarray(w, dtype=dtype)
