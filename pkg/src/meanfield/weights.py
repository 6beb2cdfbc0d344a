"""Analytic weight presets h > 0 for both surfaces."""

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * np.pi


def weight_function(kind: str, preset: str, amplitude: float = 1.0):
    """Callable h(a, b) of intrinsic coordinates, or None for h = 1.

    torus  single-peak  exp(A (cos 2 pi x + cos 2 pi y) / 2)   max at (0, 0)
           two-peak     exp(A cos 2 pi x cos 2 pi y)           maxima (0, 0), (1/2, 1/2)
    sphere single-peak  exp(A cos theta)                       max at the north pole
           two-peak     exp(A (cos^2 theta + cos theta / 4))   unequal maxima at both poles
    """
    A = float(amplitude)
    if preset == "constant":
        return None
    table = {
        ("torus", "single-peak"): lambda x, y: np.exp(0.5 * A * (np.cos(TWO_PI * x) + np.cos(TWO_PI * y))),
        ("torus", "two-peak"): lambda x, y: np.exp(A * np.cos(TWO_PI * x) * np.cos(TWO_PI * y)),
        ("sphere", "single-peak"): lambda t, p: np.exp(A * np.cos(t)),
        ("sphere", "two-peak"): lambda t, p: np.exp(A * (np.cos(t) ** 2 + 0.25 * np.cos(t))),
    }
    try:
        return table[(kind, preset)]
    except KeyError:
        raise ConfigurationError(f"unknown weight preset {preset!r} for {kind}") from None
