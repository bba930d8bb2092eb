"""Field files: raw little-endian float64 plus a JSON sidecar, and CSV export.

``phi.f64`` holds the values in C order of the array shape (time-major for
space-time fields, then spatial axes x1, x2, ...).  ``phi.meta.json`` holds
``{"dim", "n", "nt", "layout": "time-major"}`` with ``nt = 0`` for spatial
fields.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .grid import TorusGrid

_DTYPE = np.dtype("<f8")


def _meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def write_field(path, values, grid: TorusGrid) -> Path:
    path = Path(path)
    values = np.asarray(values, dtype=float)
    if values.shape == grid.spatial_shape:
        nt = 0
    elif values.shape == grid.shape:
        nt = grid.nt
    else:
        raise ConfigurationError(f"field shape {values.shape} does not fit grid {grid}")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(values, dtype=_DTYPE).tofile(path)
    meta = {"dim": grid.dim, "n": grid.n, "nt": nt, "layout": "time-major"}
    _meta_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_field(path):
    """Return ``(values, meta)``; shape is restored from the sidecar."""
    path = Path(path)
    meta_file = _meta_path(path)
    if not meta_file.exists():
        raise ConfigurationError(f"missing sidecar {meta_file}")
    try:
        meta = json.loads(meta_file.read_text())
        dim, n, nt = int(meta["dim"]), int(meta["n"]), int(meta["nt"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigurationError(f"{meta_file}: bad descriptor ({exc})") from exc
    if meta.get("layout", "time-major") != "time-major":
        raise ConfigurationError(f"{meta_file}: unsupported layout {meta['layout']!r}")
    shape = ((nt,) if nt else ()) + (n,) * dim
    data = np.fromfile(path, dtype=_DTYPE)
    if data.size != int(np.prod(shape)):
        raise ConfigurationError(
            f"{path}: {data.size} values, descriptor implies {int(np.prod(shape))}"
        )
    return data.reshape(shape).astype(float), meta


def write_csv(path, values, grid: TorusGrid) -> Path:
    """One node per row: index columns (j for time, then i1..id), then value."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    spacetime = values.ndim == grid.dim + 1
    header = (["j"] if spacetime else []) + [f"i{k + 1}" for k in range(grid.dim)] + ["value"]
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for idx in np.ndindex(values.shape):
            w.writerow(list(idx) + [f"{values[idx]:.17g}"])
    return path


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return path
