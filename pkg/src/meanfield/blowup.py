"""Concentration diagnostics: local masses, peak detection, bubble fits.

Everything here reads base-grid values, so it applies equally to solver
output and to synthetic fields sampled directly on the grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchLost, ConfigurationError, MeanFieldError
from .operator import EIGHT_PI, Parameters, make_parameters
from .solver import ContinuationPath, SolverConfig, bubble_profile, continue_path, grid_spacing
from .surface import SpectralField

log = logging.getLogger(__name__)

MASS_RADII = (0.05, 0.1, 0.2)
PEAK_HEIGHT = 5.0
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def diameter(surface) -> float:
    return np.sqrt(0.5) if surface.kind == "torus" else np.pi * surface.scale


def _grid_densities(surface, params, values):
    w = surface.weights.ravel()
    h = params.h.values.ravel()
    out = []
    for s in (values.ravel(), -values.ravel()):
        e = h * np.exp(s - s.max())
        out.append(e / np.sum(w * e))
    return out


def local_mass(surface, params: Parameters, u: SpectralField, p, r: float):
    """(rho1 int_B h e^u / int h e^u, rho2 int_B h e^-u / int h e^-u) over B = B_r(p)."""
    if not 0 < r <= diameter(surface):
        raise ConfigurationError(f"radius {r} outside (0, {diameter(surface):.4g}]")
    dp, dm = _grid_densities(surface, params, u.values)
    w = surface.weights.ravel()
    inside = surface.distances(p, surface.nodes) <= r
    return (params.rho1 * float(np.sum((w * dp)[inside])),
            params.rho2 * float(np.sum((w * dm)[inside])))


@dataclass
class MassRow:
    center: tuple
    sign: int
    radius: float
    m1_over_8pi: float
    m2_over_8pi: float


@dataclass
class LocalMassTable:
    rows: list = field(default_factory=list)

    @property
    def peaks(self):
        return sorted({(r.center, r.sign) for r in self.rows}, key=lambda cs: self.rows.index(
            next(r for r in self.rows if (r.center, r.sign) == cs)))

    def mass(self, radius, which=1, sign=1):
        """Largest m_which / 8 pi at ``radius`` over peaks of the given sign, or None."""
        vals = [getattr(r, f"m{which}_over_8pi") for r in self.rows
                if r.sign == sign and np.isclose(r.radius, radius)]
        return max(vals) if vals else None


def detect_peaks(surface, u: SpectralField, height=PEAK_HEIGHT, sign=1):
    """Nodes where sign*u exceeds its mean by ``height`` and is maximal among neighbours."""
    v = sign * u.values.ravel()
    v = v - np.sum(surface.weights.ravel() * v)
    cand = np.flatnonzero(v > height)
    cand = cand[np.argsort(-v[cand], kind="stable")]
    reach = 1.5 * grid_spacing(surface)
    peaks = []
    for idx in cand:
        near = surface.distances(surface.nodes[idx], surface.nodes) <= reach
        if v[idx] >= v[near].max():
            peaks.append(int(idx))
    return peaks


def mass_table(surface, params: Parameters, u: SpectralField, radii=MASS_RADII, height=PEAK_HEIGHT):
    table = LocalMassTable()
    for sign in (1, -1):
        for idx in detect_peaks(surface, u, height, sign):
            p = surface.nodes[idx]
            for r in radii:
                m1, m2 = local_mass(surface, params, u, p, r)
                table.rows.append(MassRow(tuple(float(x) for x in p), sign, float(r),
                                          m1 / EIGHT_PI, m2 / EIGHT_PI))
    return table


@dataclass
class BubbleFit:
    center: tuple
    lam: float
    residual: float
    r_fit: float
    offset: float = 0.0


def _golden_section(f, a, b, tol):
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_bubble(surface, u: SpectralField, r_fit: float = 0.1, log_lam_range=(np.log(10.0), np.log(1e8)),
               tol=1e-10) -> BubbleFit:
    """Least-squares fit of c + U_{lam,p} on the ball of radius ``r_fit`` about argmax u.

    The residual is the misfit relative to the centered norm of u on the ball.
    """
    v = u.values.ravel()
    idx = int(np.argmax(v))
    p = surface.nodes[idx]
    d = surface.distances(p, surface.nodes)
    ball = d <= r_fit
    db, vb = d[ball], v[ball]
    # ties are allowed (symmetric rings of nodes), a flat ball is not
    if vb.size < 3 or not v[idx] - vb.min() > 1e-12 * max(1.0, abs(v[idx])):
        raise MeanFieldError("field has no strict maximum to fit a bubble to")

    def misfit(loglam):
        U = bubble_profile(np.exp(loglam), db)
        diff = vb - U
        return float(np.sum((diff - diff.mean()) ** 2))

    loglam = _golden_section(misfit, *log_lam_range, tol)
    U = bubble_profile(np.exp(loglam), db)
    c = float(np.mean(vb - U))
    # centered norm: the offset c absorbs log(4 lam), which would swamp ||u - c||
    scale = np.linalg.norm(vb - vb.mean())
    resid = np.linalg.norm(vb - c - U) / scale if scale > 0 else np.inf
    return BubbleFit(tuple(float(x) for x in p), float(np.exp(loglam)), float(resid), float(r_fit), c)


@dataclass
class QuantizationStep:
    params: Parameters
    table: LocalMassTable
    fit: BubbleFit | None
    residual: float
    max_u: float


@dataclass
class QuantizationTrack:
    steps: list
    status: str          # "wall-guard" or "branch-lost"
    diagnostic: str = ""

    @property
    def final(self) -> QuantizationStep:
        return self.steps[-1]


def wall_approach_path(start, target_k=1, coordinate=0, eps_wall=None, **kwargs) -> ContinuationPath:
    """Straight path from ``start`` toward the wall rho_coordinate = 8 pi target_k.

    The endpoint sits just outside the wall guard, on the side of ``start``.
    """
    from .solver import EPS_WALL
    eps = EPS_WALL if eps_wall is None else eps_wall
    wall = EIGHT_PI * target_k
    end = list(map(float, start))
    side = np.sign(start[coordinate] - wall)
    if side == 0:
        raise ConfigurationError("start lies on the wall")
    end[coordinate] = wall + side * eps * (1.0 + 1e-6)
    return ContinuationPath([tuple(map(float, start)), tuple(end)], eps_wall=eps, **kwargs)


def track_quantization(surface, h, path: ContinuationPath, config: SolverConfig = SolverConfig(),
                       radii=MASS_RADII, r_fit=0.1, u0=None) -> QuantizationTrack:
    """Follow a branch toward a wall and record masses and bubble fits per step."""
    if len(path.waypoints) != 2:
        raise ConfigurationError("quantization paths are single segments")
    a, b = np.asarray(path.waypoints[0]), np.asarray(path.waypoints[1])
    moving = np.flatnonzero(a != b)
    if moving.size != 1:
        raise ConfigurationError("exactly one coupling may vary along a quantization path")
    status, diagnostic = "wall-guard", ""
    try:
        records = continue_path(surface, h, path, config, u0=u0)
    except BranchLost as exc:
        records = exc.last or []
        status, diagnostic = "branch-lost", str(exc)
        log.warning("quantization track ended early: %s", exc)
    steps = []
    for rec in records:
        table = mass_table(surface, rec.params, rec.u, radii)
        try:
            fit = fit_bubble(surface, rec.u, r_fit)
        except MeanFieldError:
            fit = None
        steps.append(QuantizationStep(rec.params, table, fit, rec.residual,
                                      float(np.max(np.abs(rec.u.values)))))
    if not steps:
        diagnostic = diagnostic or "no converged waypoint"
    return QuantizationTrack(steps, status, diagnostic)
