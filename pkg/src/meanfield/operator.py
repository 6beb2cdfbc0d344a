"""The mean field nonlinearity, the fixed-point map T and Psi = Id - T.

All nonlinear terms are evaluated on the 2x oversampled grid of the surface
and projected back onto the retained spectrum; every output is gauge-fixed to
zero mean.  The exponentials are shifted by their maximum before evaluation,
the shift cancelling in the normalized densities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BlowUpSuspected, ConfigurationError, WallError
from .surface import SpectralField, SurfaceDiscretization

EIGHT_PI = 8.0 * np.pi
# beyond this |u| the exponentials leave double range even after shifting
MAX_EXPONENT = 700.0


def window_index(rho: float) -> int:
    return int(np.floor(rho / EIGHT_PI))


def wall_distance(rho: float) -> float:
    """Distance from ``rho`` to the nearest wall 8*pi*k with k >= 1."""
    k = max(1, int(np.rint(rho / EIGHT_PI)))
    return abs(rho - EIGHT_PI * k)


@dataclass(frozen=True, eq=False)
class Parameters:
    """Couplings (rho1, rho2) and the positive weight h.

    ``h_fine`` holds the weight on the oversampled grid; it is the quantity the
    nonlinearity actually uses.
    """

    rho1: float
    rho2: float
    h: SpectralField
    h_fine: np.ndarray

    @property
    def windows(self) -> tuple[int, int]:
        return window_index(self.rho1), window_index(self.rho2)

    @property
    def wall_distance(self) -> float:
        return min(wall_distance(self.rho1), wall_distance(self.rho2))

    @property
    def diagonal(self) -> bool:
        return self.rho1 == self.rho2

    def with_couplings(self, rho1: float, rho2: float) -> "Parameters":
        _check_couplings(rho1, rho2)
        return Parameters(float(rho1), float(rho2), self.h, self.h_fine)

    def require_off_wall(self, eps_wall: float) -> None:
        if self.wall_distance <= eps_wall:
            raise WallError(
                f"(rho1, rho2) = ({self.rho1 / np.pi:g}pi, {self.rho2 / np.pi:g}pi) lies within "
                f"{eps_wall:.3g} of a wall 8*pi*k"
            )


def _check_couplings(rho1, rho2):
    if not (np.isfinite(rho1) and np.isfinite(rho2)) or rho1 < 0 or rho2 < 0:
        raise ConfigurationError(f"couplings must be finite and non-negative, got {rho1}, {rho2}")


def make_parameters(surface: SurfaceDiscretization, rho1: float, rho2: float,
                    h: SpectralField | Callable | np.ndarray | None = None) -> Parameters:
    """Bundle couplings with a weight.

    ``h`` may be None (h = 1), a callable of the surface's intrinsic
    coordinates (sampled exactly on both grids), a base-grid array, or a
    SpectralField (interpolated spectrally to the fine grid).
    """
    _check_couplings(rho1, rho2)
    if h is None:
        h_field = SpectralField.from_values(surface, np.ones(surface.grid_shape))
        h_fine = np.ones(surface.fine_shape)
    elif callable(h):
        h_field = SpectralField.from_function(surface, h)
        fn = surface.fine_nodes
        h_fine = np.asarray(h(fn[:, 0], fn[:, 1]), dtype=float).reshape(surface.fine_shape)
    else:
        h_field = h if isinstance(h, SpectralField) else SpectralField.from_values(surface, h)
        h_fine = surface.synthesize_fine(h_field.coeffs)
    if np.any(h_field.values <= 0) or np.any(h_fine <= 0) or not np.all(np.isfinite(h_fine)):
        raise ConfigurationError("weight h must be positive at every node")
    h_fine.setflags(write=False)
    return Parameters(float(rho1), float(rho2), h_field, h_fine)


@dataclass
class SolutionRecord:
    u: SpectralField
    params: Parameters
    residual: float
    energy: float
    iterations: dict = field(default_factory=dict)
    masses: object = None
    converged: bool = True
    tolerance: float = 0.0


def _shifted_density(surface, h_fine, s):
    """Normalized density h e^s / int(h e^s) on the fine grid and log int(h e^s)."""
    top = np.max(s)
    e = h_fine * np.exp(s - top)
    z = np.sum(surface.fine_weights * e)
    return e / z, np.log(z) + top


def _fine_state(surface, params, coeffs):
    uf = surface.synthesize_fine(coeffs)
    peak = np.max(np.abs(uf))
    if not np.isfinite(peak) or peak > MAX_EXPONENT:
        loc = surface.fine_nodes[int(np.argmax(np.abs(np.nan_to_num(uf, nan=np.inf))))]
        raise BlowUpSuspected(f"max|u| = {peak:.4g} exceeds exponential range",
                              max_abs_u=float(peak), location=tuple(loc))
    dp, logp = _shifted_density(surface, params.h_fine, uf)
    dm, logm = _shifted_density(surface, params.h_fine, -uf)
    return uf, dp, dm, logp, logm


def rhs_coeffs(surface, params, coeffs):
    """Coefficients of the mean field right-hand side, mode 0 projected out."""
    _, dp, dm, _, _ = _fine_state(surface, params, coeffs)
    f = params.rho1 * (dp - 1.0) - params.rho2 * (dm - 1.0)
    out = surface.analyze_fine(f)
    out[0] = 0.0
    return out


def T_coeffs(surface, params, coeffs):
    out = rhs_coeffs(surface, params, coeffs)
    out[1:] /= surface.eigenvalues[1:]
    return out


def psi_coeffs(surface, params, coeffs):
    out = np.asarray(coeffs, dtype=float) - T_coeffs(surface, params, coeffs)
    out[0] = 0.0
    return out


class Linearization:
    """Frozen fine-grid state at u, for repeated Jacobian-vector products."""

    def __init__(self, surface, params, coeffs):
        self.surface = surface
        self.params = params
        _, self.dp, self.dm, _, _ = _fine_state(surface, params, coeffs)

    def dT(self, w):
        s = self.surface
        wf = s.synthesize_fine(w)
        fw = s.fine_weights
        gp = self.dp * (wf - np.sum(fw * self.dp * wf))
        gm = self.dm * (wf - np.sum(fw * self.dm * wf))
        out = s.analyze_fine(self.params.rho1 * gp + self.params.rho2 * gm)
        out[0] = 0.0
        out[1:] /= s.eigenvalues[1:]
        return out

    def __call__(self, w):
        """Jacobian of Psi applied to coefficient vector ``w``."""
        out = np.asarray(w, dtype=float) - self.dT(w)
        out[0] = 0.0
        return out


def nonlinear_rhs(surface, params: Parameters, u: SpectralField) -> SpectralField:
    """rho1 (h e^u / int h e^u - 1) - rho2 (h e^-u / int h e^-u - 1)."""
    return SpectralField.from_coeffs(surface, rhs_coeffs(surface, params, u.coeffs), mean_zero=True)


def eval_T(surface, params: Parameters, u: SpectralField) -> SpectralField:
    """The fixed-point map T(u) = (-Laplacian)^-1 nonlinear_rhs(u)."""
    return SpectralField.from_coeffs(surface, T_coeffs(surface, params, u.coeffs), mean_zero=True)


def eval_psi(surface, params: Parameters, u: SpectralField) -> SpectralField:
    return SpectralField.from_coeffs(surface, psi_coeffs(surface, params, u.coeffs), mean_zero=True)


def jacobian_action(surface, params: Parameters, u: SpectralField, w: SpectralField) -> SpectralField:
    lin = Linearization(surface, params, u.coeffs)
    return SpectralField.from_coeffs(surface, lin(w.coeffs), mean_zero=True)


def residual_norm(surface, params, u: SpectralField) -> float:
    return float(np.linalg.norm(psi_coeffs(surface, params, u.coeffs)))


def energy_coeffs(surface, params, coeffs) -> float:
    _, _, _, logp, logm = _fine_state(surface, params, coeffs)
    dirichlet = 0.5 * float(np.sum(surface.eigenvalues * np.asarray(coeffs) ** 2))
    return dirichlet - params.rho1 * logp - params.rho2 * logm


def energy(surface, params: Parameters, u: SpectralField) -> float:
    """J(u) = 1/2 int |grad u|^2 - rho1 log int h e^u - rho2 log int h e^-u."""
    return energy_coeffs(surface, params, u.coeffs)
