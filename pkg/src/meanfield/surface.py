"""Spectral discretizations of the unit-area flat torus and round sphere.

Both surfaces expose the same small interface: a base collocation grid with
quadrature weights summing to one, a 2x oversampled grid for nonlinear terms,
a real orthonormal eigenbasis of the Laplace-Beltrami operator ordered by
eigenvalue, and transforms between grid values and basis coefficients.

Coefficients are taken with respect to the normalized area measure, so for
band-limited fields ``integrate(f * g) == coeffs_f @ coeffs_g`` and mode 0 is
the constant function 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SQRT2 = np.sqrt(2.0)


class SurfaceDiscretization:
    """Common interface of the torus and sphere discretizations.

    Subclasses fill in the grids, weights, eigenvalues and the four transforms.
    Instances are treated as immutable: all arrays are flagged read-only.
    """

    kind: str
    resolution: int
    scale: float
    euler_characteristic: int
    injectivity_radius: float

    grid_shape: tuple[int, int]
    fine_shape: tuple[int, int]
    weights: np.ndarray
    fine_weights: np.ndarray
    eigenvalues: np.ndarray
    nodes: np.ndarray        # (n_nodes, 2) intrinsic coordinates
    fine_nodes: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def n_nodes(self) -> int:
        return self.weights.size

    def descriptor(self) -> tuple[str, int, float]:
        return (self.kind, self.resolution, self.scale)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def analyze_fine(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def synthesize_fine(self, coeffs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distances(self, p, nodes: np.ndarray) -> np.ndarray:
        """Geodesic distance from the point ``p`` to every row of ``nodes``."""
        raise NotImplementedError

    def node_point(self, index) -> np.ndarray:
        """Intrinsic coordinates of a base-grid node given a flat or 2-D index."""
        if not np.isscalar(index):
            index = np.ravel_multi_index(tuple(index), self.grid_shape)
        return self.nodes[int(index)].copy()

    def _freeze(self) -> None:
        for name, value in vars(self).items():
            if isinstance(value, np.ndarray):
                value.setflags(write=False)


class TorusSurface(SurfaceDiscretization):
    """Unit square torus sampled on an N x N uniform grid.

    The retained spectrum is the set of wavevectors with ``|kx|, |ky| < N/2``;
    Nyquist modes are dropped so that every retained mode is a smooth function
    with an unambiguous continuation to the oversampled grid.
    """

    def __init__(self, n: int):
        if n < 8 or n % 2:
            raise ConfigurationError(f"torus resolution must be even and >= 8, got {n}")
        self.kind = "torus"
        self.resolution = n
        self.scale = 1.0
        self.euler_characteristic = 0
        self.injectivity_radius = 0.5
        self.grid_shape = (n, n)
        self.fine_shape = (2 * n, 2 * n)
        self.weights = np.full(self.grid_shape, 1.0 / n**2)
        self.fine_weights = np.full(self.fine_shape, 1.0 / (2 * n) ** 2)
        self.nodes = _torus_nodes(n)
        self.fine_nodes = _torus_nodes(2 * n)

        kmax = n // 2 - 1
        kx, ky = np.meshgrid(np.arange(-kmax, kmax + 1), np.arange(0, kmax + 1), indexing="ij")
        kx, ky = kx.ravel(), ky.ravel()
        half = (ky > 0) | ((ky == 0) & (kx > 0))
        kx, ky = kx[half], ky[half]
        ksq = kx**2 + ky**2
        order = np.lexsort((kx, ky, ksq))
        kx, ky, ksq = kx[order], ky[order], ksq[order]
        npair = kx.size
        # mode 0 is the constant; then (cos, sin) per wavevector
        self.kx, self.ky = kx, ky
        self.cos_index = 1 + 2 * np.arange(npair)
        self.sin_index = self.cos_index + 1
        eig = np.zeros(1 + 2 * npair)
        eig[self.cos_index] = eig[self.sin_index] = 4.0 * np.pi**2 * ksq
        self.eigenvalues = eig
        self._freeze()

    def _gather(self, values: np.ndarray, m: int) -> np.ndarray:
        spec = np.fft.rfft2(values) / m**2
        sel = spec[self.kx % m, self.ky]
        coeffs = np.empty(self.n_modes)
        coeffs[0] = spec[0, 0].real
        coeffs[self.cos_index] = SQRT2 * sel.real
        coeffs[self.sin_index] = -SQRT2 * sel.imag
        return coeffs

    def _scatter(self, coeffs: np.ndarray, m: int) -> np.ndarray:
        spec = np.zeros((m, m // 2 + 1), dtype=complex)
        amp = (coeffs[self.cos_index] - 1j * coeffs[self.sin_index]) * (m**2 / SQRT2)
        spec[self.kx % m, self.ky] = amp
        axis = self.ky == 0
        spec[(-self.kx[axis]) % m, 0] = np.conj(amp[axis])
        spec[0, 0] = coeffs[0] * m**2
        return np.fft.irfft2(spec, s=(m, m))

    def analyze(self, values):
        return self._gather(np.asarray(values, dtype=float), self.resolution)

    def synthesize(self, coeffs):
        return self._scatter(np.asarray(coeffs, dtype=float), self.resolution)

    def analyze_fine(self, values):
        return self._gather(np.asarray(values, dtype=float), 2 * self.resolution)

    def synthesize_fine(self, coeffs):
        return self._scatter(np.asarray(coeffs, dtype=float), 2 * self.resolution)

    def distances(self, p, nodes):
        p = np.asarray(p, dtype=float)
        nodes = np.atleast_2d(nodes)
        shifts = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)
        delta = nodes[:, None, :] - p[None, None, :] + shifts[None, :, :]
        return np.sqrt((delta**2).sum(axis=-1)).min(axis=1)


def _torus_nodes(n: int) -> np.ndarray:
    x = np.arange(n) / n
    gx, gy = np.meshgrid(x, x, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def _normalized_legendre(lmax: int, x: np.ndarray) -> np.ndarray:
    """Associated Legendre functions orthonormal for the measure dx/2.

    Returns ``q`` with shape ``(lmax+1, len(x), lmax+1)`` indexed ``[m, j, l]``;
    entries with ``l < m`` are zero.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x**2, 0.0, None))
    q = np.zeros((lmax + 1, x.size, lmax + 1))
    pmm = np.full(x.size, np.sqrt(0.5))
    for m in range(lmax + 1):
        if m > 0:
            pmm = np.sqrt((2 * m + 1) / (2 * m)) * s * pmm
        q[m, :, m] = pmm
        if m + 1 <= lmax:
            q[m, :, m + 1] = np.sqrt(2 * m + 3) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            q[m, :, l] = a * (x * q[m, :, l - 1] - b * q[m, :, l - 2])
    return q * SQRT2


class SphereSurface(SurfaceDiscretization):
    """Round sphere of unit area with real spherical harmonics of degree < L.

    The base grid has L Gauss-Legendre colatitudes and 2L longitudes, which
    integrates products of two retained harmonics exactly; the fine grid doubles
    both counts.
    """

    def __init__(self, bandwidth: int):
        if bandwidth < 4:
            raise ConfigurationError(f"sphere bandwidth must be >= 4, got {bandwidth}")
        L = bandwidth
        self.kind = "sphere"
        self.resolution = L
        self.scale = 1.0 / np.sqrt(4.0 * np.pi)
        self.euler_characteristic = 2
        self.injectivity_radius = np.pi * self.scale
        self.grid_shape = (L, 2 * L)
        self.fine_shape = (2 * L, 4 * L)

        ells = np.repeat(np.arange(L), 2 * np.arange(L) + 1)
        self.degrees = ells
        self.eigenvalues = ells * (ells + 1) / self.scale**2

        m_idx, l_idx = np.meshgrid(np.arange(L), np.arange(L), indexing="ij")
        self._valid = l_idx >= m_idx
        self._cos_flat = np.where(self._valid, l_idx**2 + np.maximum(2 * m_idx - 1, 0), 0)
        self._sin_flat = np.where(self._valid & (m_idx > 0), l_idx**2 + 2 * m_idx, 0)
        self._has_sin = self._valid & (m_idx > 0)

        self._base = self._grid_tables(L, 2 * L)
        self._fine = self._grid_tables(2 * L, 4 * L)
        self.weights = self._base["weights"]
        self.fine_weights = self._fine["weights"]
        self.nodes = self._base["nodes"]
        self.fine_nodes = self._fine["nodes"]
        self._freeze()
        for table in (self._base, self._fine):
            for value in table.values():
                value.setflags(write=False)

    def _grid_tables(self, nlat: int, nlon: int) -> dict:
        L = self.resolution
        x, wl = np.polynomial.legendre.leggauss(nlat)
        x, wl = x[::-1], wl[::-1]  # colatitude increasing from the north pole
        theta = np.arccos(x)
        phi = 2.0 * np.pi * np.arange(nlon) / nlon
        q = _normalized_legendre(L - 1, x)
        weights = np.outer(wl / 2.0, np.full(nlon, 1.0 / nlon))
        gt, gp = np.meshgrid(theta, phi, indexing="ij")
        return {
            "legendre": q,
            "weighted": q * (wl / 2.0)[None, :, None],
            "weights": weights,
            "nodes": np.stack([gt.ravel(), gp.ravel()], axis=1),
            "nlon": np.array(nlon),
        }

    def _to_coeffs(self, values: np.ndarray, table: dict) -> np.ndarray:
        L = self.resolution
        nlon = int(table["nlon"])
        g = np.fft.rfft(np.asarray(values, dtype=float), axis=1)[:, :L] / nlon
        a = np.einsum("mjl,jm->ml", table["weighted"], g.real)
        b = -np.einsum("mjl,jm->ml", table["weighted"], g.imag)
        a[1:] *= SQRT2
        b[1:] *= SQRT2
        coeffs = np.empty(self.n_modes)
        coeffs[self._cos_flat[self._valid]] = a[self._valid]
        coeffs[self._sin_flat[self._has_sin]] = b[self._has_sin]
        return coeffs

    def _to_values(self, coeffs: np.ndarray, table: dict) -> np.ndarray:
        L = self.resolution
        nlon = int(table["nlon"])
        coeffs = np.asarray(coeffs, dtype=float)
        a = np.where(self._valid, coeffs[self._cos_flat], 0.0)
        b = np.where(self._has_sin, coeffs[self._sin_flat], 0.0)
        am = np.einsum("mjl,ml->jm", table["legendre"], a)
        bm = np.einsum("mjl,ml->jm", table["legendre"], b)
        spec = np.zeros((am.shape[0], nlon // 2 + 1), dtype=complex)
        spec[:, 0] = am[:, 0] * nlon
        spec[:, 1:L] = (am[:, 1:] - 1j * bm[:, 1:]) * (nlon / SQRT2)
        return np.fft.irfft(spec, n=nlon, axis=1)

    def analyze(self, values):
        return self._to_coeffs(values, self._base)

    def synthesize(self, coeffs):
        return self._to_values(coeffs, self._base)

    def analyze_fine(self, values):
        return self._to_coeffs(values, self._fine)

    def synthesize_fine(self, coeffs):
        return self._to_values(coeffs, self._fine)

    def distances(self, p, nodes):
        p = np.asarray(p, dtype=float)
        nodes = np.atleast_2d(nodes)
        dots = _unit_vectors(nodes) @ _unit_vectors(p[None, :])[0]
        return self.scale * np.arccos(np.clip(dots, -1.0, 1.0))


def _unit_vectors(points: np.ndarray) -> np.ndarray:
    theta, phi = points[:, 0], points[:, 1]
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=1)


def build_surface(kind: str, resolution: int) -> SurfaceDiscretization:
    """Construct a torus (``resolution`` = N) or sphere (``resolution`` = L)."""
    if kind == "torus":
        return TorusSurface(int(resolution))
    if kind == "sphere":
        return SphereSurface(int(resolution))
    raise ConfigurationError(f"unknown surface kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A real field held as base-grid values and basis coefficients.

    ``values`` are what the grid diagnostics (masses, peaks, fits) read;
    ``coeffs`` drive every spectral operation.  For band-limited fields the two
    agree to round-off.  Fields built from raw grid samples keep the samples
    verbatim, so the pair is only consistent up to the retained spectrum.
    """

    values: np.ndarray
    coeffs: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        self.values.setflags(write=False)
        self.coeffs.setflags(write=False)

    @classmethod
    def from_coeffs(cls, surface, coeffs, mean_zero=False):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (surface.n_modes,):
            raise ValueError(f"expected {surface.n_modes} coefficients, got shape {coeffs.shape}")
        if mean_zero:
            coeffs[0] = 0.0
        return cls(surface.synthesize(coeffs), coeffs, mean_zero)

    @classmethod
    def from_values(cls, surface, values, mean_zero=False):
        values = np.array(values, dtype=float).reshape(surface.grid_shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        if mean_zero:
            values = values - np.sum(surface.weights * values)
        coeffs = surface.analyze(values)
        if mean_zero:
            coeffs[0] = 0.0
        return cls(values, coeffs, mean_zero)

    @classmethod
    def from_function(cls, surface, func, mean_zero=False):
        """Sample ``func(a, b)`` on the base grid (torus: x, y; sphere: theta, phi)."""
        a, b = surface.nodes[:, 0], surface.nodes[:, 1]
        return cls.from_values(surface, np.asarray(func(a, b), dtype=float), mean_zero)

    @classmethod
    def zeros(cls, surface):
        return cls.from_coeffs(surface, np.zeros(surface.n_modes), mean_zero=True)

    def __neg__(self):
        return SpectralField(-self.values, -self.coeffs, self.mean_zero)

    def __add__(self, other):
        return SpectralField(self.values + other.values, self.coeffs + other.coeffs,
                             self.mean_zero and other.mean_zero)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return SpectralField(scalar * self.values, scalar * self.coeffs, self.mean_zero)

    __rmul__ = __mul__

    def norm(self) -> float:
        """L2 norm over the retained spectrum (Parseval)."""
        return float(np.linalg.norm(self.coeffs))


def laplacian(surface, u: SpectralField) -> SpectralField:
    """Laplace-Beltrami operator; returns the mean-zero field with coefficients -mu_k c_k."""
    _check_finite(u)
    return SpectralField.from_coeffs(surface, -surface.eigenvalues * u.coeffs, mean_zero=True)


def inv_laplacian(surface, f: SpectralField) -> SpectralField:
    """Mean-zero solution v of ``-laplacian(v) = f - mean(f)``."""
    _check_finite(f)
    coeffs = np.zeros(surface.n_modes)
    coeffs[1:] = f.coeffs[1:] / surface.eigenvalues[1:]
    return SpectralField.from_coeffs(surface, coeffs, mean_zero=True)


def integrate(surface, f) -> float:
    values = f.values if isinstance(f, SpectralField) else np.asarray(f)
    return float(np.sum(surface.weights * values.reshape(surface.grid_shape)))


def geodesic_distance(surface, p, y) -> float:
    return float(surface.distances(p, np.asarray(y, dtype=float)[None, :])[0])


def _check_finite(u: SpectralField) -> None:
    if not np.all(np.isfinite(u.coeffs)):
        raise ValueError("field has non-finite coefficients")
