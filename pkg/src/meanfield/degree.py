"""Degree-counting formula, Galerkin truncation of Psi, zero counting and parity."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np

from .errors import BlowUpSuspected, ConfigurationError, DegenerateZero, RadiusError
from .operator import Parameters, T_coeffs

MAX_GALERKIN_DIM = 12


def degree_formula(k: int, chi: int) -> int:
    """(1/k!) (-chi + 1)(-chi + 2) ... (-chi + k); equal to 1 for k = 0."""
    if int(k) != k or k < 0:
        raise ConfigurationError(f"window index must be a non-negative integer, got {k}")
    if int(chi) != chi or chi > 2 or chi % 2:
        raise ConfigurationError(f"Euler characteristic must be an even integer <= 2, got {chi}")
    prod = 1
    for j in range(1, int(k) + 1):
        prod *= j - int(chi)
    value = Fraction(prod, factorial(int(k)))
    assert value.denominator == 1
    return int(value)


class GalerkinSystem:
    """F(c) = c - P_n T(u_c) on the first n nonconstant modes of the surface."""

    def __init__(self, surface, params: Parameters, n: int):
        if not 1 <= n <= surface.n_modes - 1:
            raise ConfigurationError(f"Galerkin dimension must lie in [1, {surface.n_modes - 1}]")
        self.surface = surface
        self.params = params
        self.dimension = int(n)
        self.modes = np.arange(1, n + 1)

    def embed(self, c):
        full = np.zeros(self.surface.n_modes)
        full[self.modes] = c
        return full

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        return c - T_coeffs(self.surface, self.params, self.embed(c))[self.modes]

    def describe(self):
        p = self.params
        return {"kind": "galerkin", "surface": list(self.surface.descriptor()), "n": self.dimension,
                "rho1_over_pi": p.rho1 / np.pi, "rho2_over_pi": p.rho2 / np.pi,
                "windows": list(p.windows), "chi": self.surface.euler_characteristic}


def truncate(surface, params: Parameters, n: int) -> GalerkinSystem:
    return GalerkinSystem(surface, params, n)


class ToyCubicMap:
    """Odd map F(c) = c - A c + |c|^2 c with A symmetric."""

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
            raise ConfigurationError("toy map matrix must be square and symmetric")
        self.A = A
        self.dimension = A.shape[0]

    @classmethod
    def from_eigenvalues(cls, eigs, seed=0):
        eigs = np.asarray(eigs, dtype=float)
        q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(eigs.size, eigs.size)))
        return cls(q @ np.diag(eigs) @ q.T)

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        return c - self.A @ c + (c @ c) * c

    def describe(self):
        return {"kind": "toy-cubic", "n": self.dimension, "A": self.A.tolist()}


def fd_jacobian(F, c, rel_step=1e-6):
    """Dense central-difference Jacobian with step rel_step * max(1, |c|)."""
    c = np.asarray(c, dtype=float)
    step = rel_step * max(1.0, float(np.linalg.norm(c)))
    J = np.empty((c.size, c.size))
    for j in range(c.size):
        e = np.zeros(c.size)
        e[j] = step
        J[:, j] = (F(c + e) - F(c - e)) / (2.0 * step)
    return J


def jacobian_sign(J):
    sign, logdet = np.linalg.slogdet(J)  # LU-based
    return int(sign), float(np.exp(logdet)) if sign != 0 else 0.0


def newton_zero(F, c0, tol=1e-12, max_iter=60):
    """Damped Newton with FD Jacobian; returns the zero or None."""
    try:
        return _newton_zero(F, c0, tol, max_iter)
    except BlowUpSuspected:
        return None


def _newton_zero(F, c0, tol, max_iter):
    c = np.asarray(c0, dtype=float).copy()
    f = F(c)
    fn = np.linalg.norm(f)
    for _ in range(max_iter):
        if fn <= tol:
            return c
        try:
            delta = np.linalg.solve(fd_jacobian(F, c), -f)
        except np.linalg.LinAlgError:
            return None
        t = 1.0
        while t > 1e-6:
            trial = c + t * delta
            ft = F(trial)
            if np.linalg.norm(ft) < (1.0 - 1e-4 * t) * fn:
                break
            t *= 0.5
        else:
            return None
        c, f, fn = trial, ft, np.linalg.norm(ft)
        if not np.all(np.isfinite(c)) or np.linalg.norm(c) > 1e6:
            return None
    return c if fn <= tol else None


@dataclass(frozen=True)
class MultistartConfig:
    samples: int = 500
    radius_fractions: tuple = (0.25, 0.5, 0.75)
    dedup: float = 1e-6
    seed: int = 0
    boundary_samples: int = 200
    zero_tol: float = 1e-10

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigurationError("multistart needs at least one sample")


@dataclass
class DegreeReport:
    dimension: int
    radius: float
    zeros: list
    signs: list
    degree: int
    formula: int | None
    heuristic: bool = True
    samples: int = 0
    distinct_zeros: int = 0
    seed: int = 0
    boundary_min_norm: float = float("nan")
    system: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def formula_prediction(system):
    """Known degree where it is known: both couplings subcritical, or one coupling zero."""
    if not isinstance(system, GalerkinSystem):
        return None
    k1, k2 = system.params.windows
    chi = system.surface.euler_characteristic
    if k1 == 0 and k2 == 0:
        return 1
    if system.params.rho2 == 0:
        return degree_formula(k1, chi)
    if system.params.rho1 == 0:
        return degree_formula(k2, chi)
    return None


def _start_points(n, r, config):
    rng = np.random.default_rng(config.seed)
    starts = [np.zeros(n)]
    half = (config.samples + 1) // 2
    for i in range(half):
        g = rng.normal(size=n)
        g *= config.radius_fractions[i % len(config.radius_fractions)] * r / np.linalg.norm(g)
        starts.extend([g, -g])
    return starts[: config.samples + 1]


def count_degree(system, r: float, config: MultistartConfig = MultistartConfig()) -> DegreeReport:
    """Estimate deg(F, B_r(0), 0) as the signed count of located zeros.

    The count is exact only if every zero in the ball was found, hence the
    report is always flagged heuristic.
    """
    n = system.dimension
    if n > MAX_GALERKIN_DIM:
        raise ConfigurationError(f"degree counting is limited to n <= {MAX_GALERKIN_DIM}")
    if not r > 0:
        raise ConfigurationError("ball radius must be positive")
    rng = np.random.default_rng(config.seed + 1)
    bmin = np.inf
    for _ in range(config.boundary_samples):
        g = rng.normal(size=n)
        bmin = min(bmin, float(np.linalg.norm(system(r * g / np.linalg.norm(g)))))
    if bmin < 1e-6:
        raise RadiusError(f"|F| = {bmin:.3g} on the sphere |c| = {r}; enlarge or shrink the ball")

    zeros = []
    for c0 in _start_points(n, r, config):
        z = newton_zero(system, c0, tol=min(1e-12, config.zero_tol))
        if z is None:
            continue
        if abs(np.linalg.norm(z) - r) < 1e-6:
            raise RadiusError(f"zero at distance {np.linalg.norm(z):.8g} from the origin, "
                              f"too close to the sphere of radius {r}")
        if np.linalg.norm(z) > r:
            continue
        if all(np.linalg.norm(z - y) > config.dedup for y in zeros):
            zeros.append(z)
    zeros.sort(key=lambda z: (round(float(np.linalg.norm(z)), 8), tuple(np.round(z, 8))))
    signs = []
    for z in zeros:
        if np.linalg.norm(system(z)) > config.zero_tol:
            raise DegenerateZero(f"located zero fails |F| <= {config.zero_tol}")
        sign, det = jacobian_sign(fd_jacobian(system, z))
        if abs(det) < 1e-12:
            raise DegenerateZero(f"|det DF| = {det:.3g} at zero {z}")
        signs.append(sign)
    return DegreeReport(
        dimension=n, radius=float(r), zeros=[z.tolist() for z in zeros], signs=signs,
        degree=int(sum(signs)), formula=formula_prediction(system), heuristic=True,
        samples=config.samples, distinct_zeros=len(zeros), seed=config.seed,
        boundary_min_norm=bmin, system=system.describe(),
    )


@dataclass
class ParityCertificate:
    status: str           # "pass", "fail" or "inconclusive"
    max_oddness_defect: float
    min_boundary_norm: float
    samples: int
    radius: float

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def parity_certificate(system, r: float, samples: int, seed: int = 0,
                       odd_tol=1e-10, min_norm=1e-6) -> ParityCertificate:
    """Check oddness and nonvanishing of F on random antipodal pairs of |c| = r."""
    if samples < 1:
        raise ConfigurationError("a parity certificate needs at least one sample")
    rng = np.random.default_rng(seed)
    odd, low = 0.0, np.inf
    for _ in range(samples):
        g = rng.normal(size=system.dimension)
        c = r * g / np.linalg.norm(g)
        fp, fm = system(c), system(-c)
        odd = max(odd, float(np.linalg.norm(fp + fm)))
        low = min(low, float(np.linalg.norm(fp)), float(np.linalg.norm(fm)))
    if odd > odd_tol:
        status = "fail"
    elif low < min_norm:
        status = "inconclusive"
    else:
        status = "pass"
    return ParityCertificate(status, odd, low, int(samples), float(r))
