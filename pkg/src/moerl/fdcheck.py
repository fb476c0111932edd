"""Central finite-difference gradient oracle.

Independent of the tape: callers hand over a plain function of raw numpy
arrays returning a float, and this module estimates its gradient numerically.
Used by the test suite and the gradcheck CLI to cross-check every analytic
adjoint against a second route.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def central_difference(
    f: Callable[[Sequence[np.ndarray]], float],
    arrays: Sequence[np.ndarray],
    h: float = 1e-5,
) -> list[np.ndarray]:
    """d f / d arrays[k], elementwise, via (f(x+h) - f(x-h)) / 2h."""
    work = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for k, arr in enumerate(work):
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(work)
            flat[i] = orig - h
            down = f(work)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def scale_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst absolute difference relative to the numeric gradient's scale.

    Normalizing by the per-tensor max magnitude (floored at 1) keeps the check
    meaningful when individual entries are tiny.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(1.0, float(np.abs(numeric).max(initial=0.0)))
    return float(np.abs(analytic - numeric).max(initial=0.0)) / denom


def compare_gradients(
    f: Callable[[Sequence[np.ndarray]], float],
    arrays: Sequence[np.ndarray],
    analytic: Sequence[np.ndarray],
    h: float = 1e-5,
) -> float:
    """Worst scale-relative error over all checked arrays."""
    numeric = central_difference(f, arrays, h=h)
    return max(scale_relative_error(a, n) for a, n in zip(analytic, numeric))
