"""Angle helpers shared by the dynamics, sensing and filtering code."""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap angle(s) to the half-open interval (-pi, pi].

    Works on scalars and arrays. ``pi`` maps to itself and ``-pi`` maps to ``pi``.
    """
    w = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), TWO_PI)
    if np.ndim(w) == 0:
        return float(w)
    return w
