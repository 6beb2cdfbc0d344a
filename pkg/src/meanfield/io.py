"""Plain-text field files and commented CSV tables.

Every file starts with a schema line and the full experiment config as
``#`` comments, so outputs are self-describing and diff-able.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION
from .errors import ConfigurationError

FIELD_MAGIC = f"# {SCHEMA_VERSION} field"
TABLE_MAGIC = f"# {SCHEMA_VERSION} table"


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _config_lines(config):
    if config is None:
        return ""
    return "".join(f"# config: {line}\n" for line in config.emit().splitlines())


def write_field(path, surface, values, rho1, rho2, config=None):
    values = np.asarray(values, dtype=float).reshape(surface.grid_shape)
    head = [
        FIELD_MAGIC,
        f"# kind = {surface.kind}",
        f"# resolution = {surface.resolution}",
        f"# rho1_over_pi = {_fmt(rho1 / np.pi)}",
        f"# rho2_over_pi = {_fmt(rho2 / np.pi)}",
        f"# shape = {values.shape[0]} {values.shape[1]}",
    ]
    body = "".join(" ".join(_fmt(v) for v in row) + "\n" for row in values)
    Path(path).write_text("\n".join(head) + "\n" + _config_lines(config) + body)


def read_field(path):
    """Return (header dict, values array) from a field file."""
    header, rows = {}, []
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != FIELD_MAGIC:
        raise ConfigurationError(f"{path}: not a field file")
    for line in lines[1:]:
        if line.startswith("# config:"):
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        elif line.strip():
            rows.append([float(x) for x in line.split()])
    values = np.array(rows)
    shape = tuple(int(x) for x in header.get("shape", "").split())
    if values.shape != shape:
        raise ConfigurationError(f"{path}: body shape {values.shape} does not match header {shape}")
    header["resolution"] = int(header["resolution"])
    return header, values


def write_table(path, columns, rows, config=None):
    buf = io.StringIO()
    buf.write(TABLE_MAGIC + "\n")
    buf.write(_config_lines(config))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    Path(path).write_text(buf.getvalue())


def read_table(path):
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, [row for row in reader]
