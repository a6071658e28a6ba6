"""Independent finite-difference oracle for gradient checks.

Central differences with h=1e-5 on f64; relative error uses the
denominator max(1, |analytic| + |numeric|).
"""

from __future__ import annotations

import numpy as np

H = 1e-5
TOLERANCE = 1e-5


def finite_difference(f, arr: np.ndarray, h: float = H) -> np.ndarray:
    """Numeric gradient of scalar-valued ``f`` wrt every entry of ``arr``.

    ``f`` is called with no arguments and must read ``arr`` afresh each
    time; entries are perturbed in place and restored.
    """
    grad = np.zeros_like(arr)
    flat = arr.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(1.0, np.abs(analytic) + np.abs(numeric))
    return float((np.abs(analytic - numeric) / denom).max())
