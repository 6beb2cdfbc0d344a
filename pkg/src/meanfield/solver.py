"""Fixed-point and Newton-Krylov solvers, multistart seeding and continuation."""

from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import BlowUpSuspected, BranchLost, ConfigurationError, NonConvergence, WallError
from .operator import (
    EIGHT_PI,
    Linearization,
    Parameters,
    SolutionRecord,
    T_coeffs,
    energy_coeffs,
    make_parameters,
    psi_coeffs,
    residual_norm,
    wall_distance,
    window_index,
)
from .surface import SpectralField

log = logging.getLogger(__name__)

EPS_WALL = 1e-3 * EIGHT_PI


class ResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    method: str = "newton"
    tol: float = 1e-10
    max_iter: int = 60
    picard_iters: int = 20
    omega: float = 0.5
    krylov_tol: float = 0.1
    krylov_maxiter: int = 400
    ls_max_halvings: int = 20
    eps_wall: float = EPS_WALL
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("newton", "picard"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if not self.tol > 0:
            raise ConfigurationError("tolerance must be positive")
        if not 0 < self.omega <= 1:
            raise ConfigurationError("Picard damping must lie in (0, 1]")
        if self.max_iter < 1 or self.picard_iters < 0 or self.ls_max_halvings < 0:
            raise ConfigurationError("iteration counts must be non-negative")


def picard_step(surface, params: Parameters, u: SpectralField, omega: float) -> SpectralField:
    """(1 - omega) u + omega T(u)."""
    if not 0 < omega <= 1:
        raise ConfigurationError("omega must lie in (0, 1]")
    c = u.coeffs.copy()
    c[0] = 0.0
    new = (1.0 - omega) * c + omega * T_coeffs(surface, params, c)
    return SpectralField.from_coeffs(surface, new, mean_zero=True)


def _forcing(config, rnorm):
    return min(config.krylov_tol, np.sqrt(rnorm))


def _krylov_solve(jac, rhs, eta, maxiter):
    """Solve jac(x) = rhs on the nonconstant modes; returns (x, relres, iters)."""
    n = rhs.size
    count = [0]

    def matvec(v):
        count[0] += 1
        full = np.concatenate(([0.0], v))
        return jac(full)[1:]

    op = LinearOperator((n - 1, n - 1), matvec=matvec, dtype=float)
    b = rhs[1:]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0.0, 0
    restart = min(n - 1, 80)
    x, info = gmres(op, b, rtol=eta, atol=0.0, restart=restart,
                    maxiter=max(1, maxiter // restart))
    full = np.concatenate(([0.0], x))
    relres = np.linalg.norm(jac(full)[1:] - b) / bnorm
    if info < 0 or not np.all(np.isfinite(x)):
        raise NonConvergence("Krylov breakdown", residual=relres, iterations=count[0])
    return full, relres, count[0]


def newton_direction(surface, params, u: SpectralField, config: SolverConfig):
    """Inexact Newton direction and its relative linear residual."""
    c = u.coeffs.copy()
    c[0] = 0.0
    r = psi_coeffs(surface, params, c)
    rnorm = np.linalg.norm(r)
    if rnorm == 0.0:
        return SpectralField.zeros(surface), 0.0
    lin = Linearization(surface, params, c)
    delta, relres, _ = _krylov_solve(lin, -r, _forcing(config, rnorm), config.krylov_maxiter)
    return SpectralField.from_coeffs(surface, delta, mean_zero=True), relres


def _newton_update(residual, jac_at, x, r, config):
    """One damped inexact Newton step on ``residual``; returns (x_new, r_new, stats)."""
    rnorm = np.linalg.norm(r)
    eta = _forcing(config, rnorm)
    delta, relres, iters = _krylov_solve(jac_at(x), -r, eta, config.krylov_maxiter)
    if relres > max(eta, 1e-14) * 1.0001 and relres > 0.9:
        raise NonConvergence(f"Krylov stagnation (relative residual {relres:.3g})",
                             residual=rnorm, iterations=iters)
    t = 1.0
    for _ in range(config.ls_max_halvings + 1):
        trial = x + t * delta
        try:
            rt = residual(trial)
        except BlowUpSuspected:
            rt = None
        if rt is not None and np.linalg.norm(rt) < (1.0 - 1e-4 * t) * rnorm:
            return trial, rt, {"krylov": iters, "damping": t, "relres": relres}
        t *= 0.5
    raise NonConvergence("line search failed to decrease the residual",
                         residual=rnorm, iterations=iters)


def newton_step(surface, params, u: SpectralField, config: SolverConfig) -> SpectralField:
    """Accepted (line-searched) Newton update for Psi at u."""
    c = u.coeffs.copy()
    c[0] = 0.0
    r = psi_coeffs(surface, params, c)
    if np.linalg.norm(r) == 0.0:
        return SpectralField.zeros(surface)
    new, _, _ = _newton_update(lambda x: psi_coeffs(surface, params, x),
                               lambda x: Linearization(surface, params, x), c, r, config)
    return SpectralField.from_coeffs(surface, new - c, mean_zero=True)


def _picard_phase(surface, params, c, r, iters, omega, tol):
    steps = 0
    for _ in range(iters):
        rnorm = np.linalg.norm(r)
        if rnorm <= tol:
            break
        w = omega
        while w >= omega / 64:
            trial = c - w * r  # (1-w) c + w T(c)
            try:
                rt = psi_coeffs(surface, params, trial)
            except BlowUpSuspected:
                rt = None
            if rt is not None and np.linalg.norm(rt) < rnorm:
                c, r = trial, rt
                steps += 1
                break
            w *= 0.5
        else:
            break
    return c, r, steps


def solve(surface, params: Parameters, u0: SpectralField | None, config: SolverConfig = SolverConfig()):
    """Find a zero of Psi starting from ``u0``.

    Newton mode runs up to ``picard_iters`` damped Picard steps (only accepted
    when they lower the residual) followed by line-searched Newton-Krylov.
    Raises NonConvergence or BlowUpSuspected on failure.
    """
    params.require_off_wall(config.eps_wall)
    c = np.zeros(surface.n_modes) if u0 is None else u0.coeffs.copy()
    c[0] = 0.0
    r = psi_coeffs(surface, params, c)
    stats = {"picard": 0, "newton": 0, "krylov": 0}

    if config.method == "picard":
        omega = config.omega
        for _ in range(config.max_iter):
            if np.linalg.norm(r) <= config.tol:
                break
            trial = c - omega * r
            rt = psi_coeffs(surface, params, trial)
            if np.linalg.norm(rt) > np.linalg.norm(r) and omega > 1e-3:
                omega *= 0.5
                continue
            c, r = trial, rt
            stats["picard"] += 1
    else:
        c, r, stats["picard"] = _picard_phase(surface, params, c, r, config.picard_iters,
                                              config.omega, config.tol)
        residual = lambda x: psi_coeffs(surface, params, x)
        jac_at = lambda x: Linearization(surface, params, x)
        while np.linalg.norm(r) > config.tol and stats["newton"] < config.max_iter:
            try:
                c, r, info = _newton_update(residual, jac_at, c, r, config)
            except NonConvergence as exc:
                exc.iterations = stats["newton"]
                exc.last = SpectralField.from_coeffs(surface, c, mean_zero=True)
                raise
            stats["newton"] += 1
            stats["krylov"] += info["krylov"]

    u = SpectralField.from_coeffs(surface, c, mean_zero=True)
    rnorm = residual_norm(surface, params, u)
    if not rnorm <= config.tol:
        raise NonConvergence(f"residual {rnorm:.3e} above tolerance after "
                             f"{stats['picard']} Picard / {stats['newton']} Newton steps",
                             residual=rnorm, iterations=stats["picard"] + stats["newton"], last=u)
    return SolutionRecord(u=u, params=params, residual=rnorm,
                          energy=energy_coeffs(surface, params, c),
                          iterations=stats, tolerance=config.tol)


# ---------------------------------------------------------------- seeding

def bubble_profile(lam, d):
    return np.log(4.0 * lam / (1.0 + lam * d**2) ** 2)


def grid_spacing(surface) -> float:
    if surface.kind == "torus":
        return 1.0 / surface.resolution
    return np.pi * surface.scale / surface.resolution


def bubble_seed(surface, lam: float, p, sign: int = 1) -> SpectralField:
    """Mean-zero bubble log(4 lam / (1 + lam d(p, y)^2)^2), times ``sign``."""
    if not lam > 0:
        raise ConfigurationError("bubble scale must be positive")
    if sign not in (1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    if 1.0 / np.sqrt(lam) < grid_spacing(surface):
        warnings.warn(f"bubble with lambda={lam:g} is narrower than one grid cell",
                      ResolutionWarning, stacklevel=2)
    d = surface.distances(p, surface.nodes).reshape(surface.grid_shape)
    return SpectralField.from_values(surface, sign * bubble_profile(lam, d), mean_zero=True)


def _local_maxima(surface, values, radius):
    """Flat indices of grid maxima, highest first, separated by ``radius``."""
    flat = np.asarray(values).ravel()
    order = np.argsort(-flat, kind="stable")
    chosen = []
    for idx in order:
        if len(chosen) >= 16:
            break
        d = surface.distances(surface.nodes[idx], surface.nodes)
        if flat[idx] < flat[d <= radius].max():
            continue
        if chosen and surface.distances(surface.nodes[idx], surface.nodes[chosen]).min() <= radius:
            continue
        chosen.append(int(idx))
    return chosen


def seed_points(surface, h: SpectralField, count: int):
    """``count`` nodes: maxima of h by height, padded by farthest-point sampling."""
    radius = 0.1 * (0.5 if surface.kind == "torus" else np.pi * surface.scale)
    spread = np.ptp(h.values)
    picks = _local_maxima(surface, h.values, radius) if spread > 1e-12 else [0]
    picks = picks[:count]
    while len(picks) < count:
        d = np.min([surface.distances(surface.nodes[i], surface.nodes) for i in picks], axis=0)
        picks.append(int(np.argmax(d)))
    return [surface.nodes[i].copy() for i in picks]


def multistart_seeds(surface, params: Parameters, lams=(1e2, 1e3)):
    """Zero plus bubble sums placed at the maxima of h."""
    k1, k2 = params.windows
    seeds = [SpectralField.zeros(surface)]
    if k1 + k2 == 0:
        return seeds
    pts = seed_points(surface, params.h, k1 + k2)
    for lam in lams:
        for orient in (1, -1):
            total = SpectralField.zeros(surface)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ResolutionWarning)
                for i, p in enumerate(pts):
                    sign = orient if i < k1 else -orient
                    total = total + bubble_seed(surface, lam, p, sign)
            seeds.append(SpectralField.from_coeffs(surface, total.coeffs, mean_zero=True))
    return seeds


def random_low_mode_seeds(surface, count, seed=0, modes=15, amplitudes=(1.0, 2.0, 3.0, 4.0)):
    """Seeded random fields on the lowest nonconstant modes with prescribed L2 norms."""
    rng = np.random.default_rng(seed)
    m = min(modes, surface.n_modes - 1)
    seeds = []
    for i in range(count):
        c = np.zeros(surface.n_modes)
        c[1:m + 1] = rng.normal(size=m)
        c *= amplitudes[i % len(amplitudes)] / np.linalg.norm(c)
        seeds.append(SpectralField.from_coeffs(surface, c, mean_zero=True))
    return seeds


def solve_multistart(surface, params: Parameters, config: SolverConfig = SolverConfig(),
                     seeds=None, stop_at_first=True, distinct_tol=1e-6, random_starts=0,
                     skip_trivial=False, max_tail=None):
    """Run ``solve`` from each seed; return the distinct converged records.

    The default seed list is ``multistart_seeds`` followed by ``random_starts``
    low-mode random fields drawn from ``config.seed``.  With ``skip_trivial``
    the solution u = 0 (always a zero of Psi on the diagonal rho1 = rho2) is
    discarded and the search continues.  With ``max_tail`` a solution whose
    ``spectral_tail`` exceeds it is treated as unresolved and discarded.
    """
    if seeds is None:
        seeds = multistart_seeds(surface, params)
        seeds += random_low_mode_seeds(surface, random_starts, config.seed)
    params.require_off_wall(config.eps_wall)
    found = []
    for i, seed in enumerate(seeds):
        try:
            rec = solve(surface, params, seed, config)
        except (NonConvergence, BlowUpSuspected) as exc:
            log.info("seed %d failed: %s", i, exc)
            continue
        if skip_trivial and rec.u.norm() <= 1e-6:
            continue
        if max_tail is not None and rec.u.norm() > 1e-6 and spectral_tail(surface, rec.u) > max_tail:
            log.info("seed %d: unresolved solution (tail %.2e)", i, spectral_tail(surface, rec.u))
            continue
        rec.iterations["seed"] = i
        if all(np.linalg.norm(rec.u.coeffs - f.u.coeffs) > distinct_tol for f in found):
            found.append(rec)
        if stop_at_first:
            break
    return found


def spectral_tail(surface, u: SpectralField, fraction=0.1) -> float:
    """Share of the L2 norm carried by the top ``fraction`` of modes (resolution gauge)."""
    total = u.norm()
    if total == 0:
        return 0.0
    start = int(np.floor((1.0 - fraction) * surface.n_modes))
    return float(np.linalg.norm(u.coeffs[start:]) / total)


# ----------------------------------------------------------- continuation

@dataclass
class ContinuationPath:
    """Piecewise-linear path of couplings, marched with adaptive steps.

    Steps are measured in coupling units (the largest change of either rho).
    ``allow_wall_crossing`` permits segments that cross a wall; the marcher
    then steps over the excluded band of width ``eps_wall``.
    """

    waypoints: list
    initial_step: float = 0.5 * np.pi
    min_step: float = 0.01 * np.pi
    eps_wall: float = EPS_WALL
    allow_wall_crossing: bool = False

    def __post_init__(self):
        self.waypoints = [(float(a), float(b)) for a, b in self.waypoints]
        if len(self.waypoints) < 1:
            raise ConfigurationError("path needs at least one waypoint")
        if not 0 < self.min_step <= self.initial_step:
            raise ConfigurationError("step bounds must satisfy 0 < min_step <= initial_step")
        self.validate()

    def validate(self):
        for rho in self.waypoints:
            if min(wall_distance(rho[0]), wall_distance(rho[1])) <= self.eps_wall:
                raise WallError(f"waypoint ({rho[0] / np.pi:g}pi, {rho[1] / np.pi:g}pi) is on a wall")
        if self.allow_wall_crossing:
            return
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if (window_index(a[0]), window_index(a[1])) != (window_index(b[0]), window_index(b[1])):
                raise WallError(f"segment ({a[0] / np.pi:g}pi, {a[1] / np.pi:g}pi) -> "
                                f"({b[0] / np.pi:g}pi, {b[1] / np.pi:g}pi) crosses a wall")


def homotopy_path(rho1: float, rho2: float, **kwargs) -> ContinuationPath:
    """The straight path from (rho1, rho2) to the diagonal point (rho, rho), rho = mean."""
    rho = 0.5 * (rho1 + rho2)
    return ContinuationPath([(rho1, rho2), (rho, rho)], **kwargs)


def homotopy_point(rho1, rho2, t):
    rho = 0.5 * (rho1 + rho2)
    return ((1 - t) * rho1 + t * rho, (1 - t) * rho2 + t * rho)


def _off_wall(rho, eps):
    return min(wall_distance(rho[0]), wall_distance(rho[1])) > eps


def continue_path(surface, h, path: ContinuationPath, config: SolverConfig = SolverConfig(),
                  u0: SpectralField | None = None, start: SolutionRecord | None = None):
    """Track a solution branch along ``path``.

    Every accepted step yields one SolutionRecord; each solve is seeded from
    its predecessor with Newton only (no Picard phase).  Failed steps are
    halved down to ``path.min_step``, after which BranchLost is raised with the
    records accumulated so far in ``exc.last``.
    """
    path.validate()
    corrector = dataclasses.replace(config, picard_iters=0, eps_wall=path.eps_wall)
    first = path.waypoints[0]
    params = make_parameters(surface, first[0], first[1], h) if not isinstance(h, Parameters) \
        else h.with_couplings(*first)
    if start is None:
        start = solve(surface, params, u0, config)
    records = [start]
    for a, b in zip(path.waypoints, path.waypoints[1:]):
        a, b = np.asarray(a), np.asarray(b)
        span = float(np.max(np.abs(b - a)))
        if span == 0:
            continue
        t, step = 0.0, path.initial_step
        while t < 1.0:
            t_next = min(1.0, t + step / span)
            rho = a + t_next * (b - a)
            while not _off_wall(rho, path.eps_wall) and t_next < 1.0:
                t_next = min(1.0, t_next + path.eps_wall / span)
                rho = a + t_next * (b - a)
            prev = records[-1]
            trial_params = prev.params.with_couplings(*rho)
            try:
                rec = solve(surface, trial_params, prev.u, corrector)
            except (NonConvergence, BlowUpSuspected) as exc:
                step *= 0.5
                log.info("continuation step failed at (%g, %g)pi: %s; step -> %g pi",
                         rho[0] / np.pi, rho[1] / np.pi, exc, step / np.pi)
                if step < path.min_step:
                    raise BranchLost(f"branch lost near ({rho[0] / np.pi:g}pi, {rho[1] / np.pi:g}pi)",
                                     residual=getattr(exc, "residual", np.nan),
                                     last=records) from exc
                continue
            records.append(rec)
            t = t_next
            step = min(path.initial_step, 2.0 * step)
    return records
