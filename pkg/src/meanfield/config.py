"""Flat dotted key-value experiment configuration.

A config file is a sequence of ``key = value`` lines; blank lines and ``#``
comments are ignored.  Couplings and continuation steps are given in units of
pi, so walls sit at multiples of 8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

SCHEMA_VERSION = "meanfield/1"

# key: (type, default, help)
SCHEMA = {
    "seed": (int, 0, "master random seed"),
    "output.dir": (str, "out", "directory for output files"),
    "surface.kind": (str, "torus", "torus or sphere"),
    "surface.resolution": (int, 32, "torus grid size N or sphere bandwidth L"),
    "h.preset": (str, "constant", "constant, single-peak, two-peak or file"),
    "h.amplitude": (float, 1.0, "amplitude A of the analytic weight presets"),
    "h.file": (str, "", "field file holding tabulated weight values"),
    "params.rho1": (float, 4.0, "rho1 in units of pi"),
    "params.rho2": (float, 4.0, "rho2 in units of pi"),
    "params.path": (str, "", "continuation waypoints 'r1,r2; r1,r2; ...' in units of pi"),
    "params.grid.rho1": (str, "9:15:3", "sweep values: 'a,b,c' or 'start:stop:step' (inclusive)"),
    "params.grid.rho2": (str, "9:15:3", "sweep values for rho2"),
    "solver.method": (str, "newton", "newton or picard"),
    "solver.tol": (float, 1e-10, "L2 residual tolerance"),
    "solver.max_iter": (int, 60, "maximum Newton (or Picard) iterations"),
    "solver.picard_iters": (int, 20, "Picard iterations before Newton"),
    "solver.omega": (float, 0.5, "Picard damping"),
    "solver.krylov_tol": (float, 0.1, "cap on the Krylov forcing term"),
    "solver.krylov_maxiter": (int, 400, "maximum Krylov iterations per Newton step"),
    "solver.ls_max_halvings": (int, 20, "line-search halvings before failure"),
    "solver.eps_wall": (float, 1e-3 * 8 * np.pi, "wall guard (absolute coupling units)"),
    "multistart.random_starts": (int, 8, "seeded low-mode random starts after the bubble seeds"),
    "multistart.nontrivial": (bool, False, "discard the trivial solution u = 0"),
    "multistart.max_tail": (float, 1e-4, "discard solutions whose top-decile spectral share exceeds this"),
    "continuation.initial_step": (float, 0.5, "initial step in units of pi"),
    "continuation.min_step": (float, 0.01, "minimum step in units of pi"),
    "continuation.allow_wall_crossing": (bool, False, "permit path segments crossing walls"),
    "blowup.wall": (int, 1, "target wall index k (rho = 8 pi k)"),
    "blowup.coordinate": (int, 1, "which coupling approaches the wall (1 or 2)"),
    "blowup.radii": (str, "0.05,0.1,0.2", "mass radii"),
    "blowup.r_fit": (float, 0.1, "bubble fit radius"),
    "degree.n": (int, 4, "Galerkin dimension"),
    "degree.radius": (float, 5.0, "degree ball radius"),
    "degree.samples": (int, 500, "multistart samples"),
    "degree.parity_samples": (int, 100, "antipodal pairs for the parity certificate"),
    "degree.toy": (str, "", "'' for the Galerkin system or 'cubic' for the toy odd map"),
    "degree.toy_eigs": (str, "2,0.5,0.5,0.5", "eigenvalues of the toy map matrix"),
    "degree.k_max": (int, 10, "largest window index in the formula table"),
}


def _coerce(key, raw):
    typ = SCHEMA[key][0]
    if isinstance(raw, str):
        raw = raw.strip()
        if typ is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ConfigurationError(f"{key}: expected a boolean, got {raw!r}")
            return low in ("true", "1", "yes")
    try:
        return typ(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from exc


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {k: v[1] for k, v in SCHEMA.items()})

    def __post_init__(self):
        full = {k: v[1] for k, v in SCHEMA.items()}
        for key, value in self.values.items():
            if key not in SCHEMA:
                raise ConfigurationError(f"unknown config key {key!r}")
            full[key] = _coerce(key, value)
        self.values = full

    def __getitem__(self, key):
        return self.values[key]

    def updated(self, **changes) -> "ExperimentConfig":
        vals = dict(self.values)
        for key, value in changes.items():
            vals[key.replace("__", ".")] = value
        return ExperimentConfig(vals)

    def with_values(self, mapping) -> "ExperimentConfig":
        vals = dict(self.values)
        vals.update(mapping)
        return ExperimentConfig(vals)

    def emit(self) -> str:
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in SCHEMA)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        vals = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            vals[key] = value
        return cls(vals)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        cfg = cls.parse(Path(path).read_text())
        if cfg["h.preset"] == "file" and not Path(cfg["h.file"]).exists():
            raise ConfigurationError(f"weight file {cfg['h.file']!r} does not exist")
        return cfg

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.emit() == other.emit()


def parse_values(spec: str) -> list[float]:
    """'a,b,c' or inclusive 'start:stop:step'."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"range {spec!r} must be start:stop:step")
        start, stop, step = map(float, parts)
        if step <= 0:
            raise ConfigurationError("range step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(x) for x in spec.split(",") if x.strip()]


def parse_path(spec: str) -> list[tuple[float, float]]:
    points = []
    for chunk in spec.split(";"):
        if chunk.strip():
            a, b = (float(x) for x in chunk.split(","))
            points.append((a, b))
    if not points:
        raise ConfigurationError("empty continuation path")
    return points
