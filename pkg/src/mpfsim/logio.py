"""Reading and writing trajectory logs.

The CSV starts with one comment line ``# mpfsim-log v1 {json meta}``,
followed by the fixed header and one row per sample. Values are written with
17 significant digits so a read-back log equals the one written. Rotation
histories do not fit the fixed header; they go to an optional ``.npz``
sidecar next to the CSV.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .simulation import COLUMNS, LOG_VERSION, TrajectoryLog

MAGIC = "# mpfsim-log"


def sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".frames.npz")


def write_csv(log: TrajectoryLog, path, sidecar: bool = True) -> Path:
    """Write ``log`` to ``path``; with ``sidecar`` also save its extras."""
    path = Path(path)
    data = np.column_stack([log.columns[c] for c in COLUMNS])
    meta = json.dumps(log.meta, sort_keys=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"{MAGIC} v{LOG_VERSION} {meta}\n")
        fh.write(",".join(COLUMNS) + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")
    if sidecar and log.extras:
        np.savez_compressed(sidecar_path(path), **log.extras)
    return path


def read_csv(path, sidecar: bool = True) -> TrajectoryLog:
    """Parse a log written by :func:`write_csv`.

    Raises
    ------
    ValueError
        On a missing version line, an unsupported version, or a header that
        differs from the fixed column list.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        header = fh.readline().rstrip("\n").split(",")
        if not first.startswith(MAGIC):
            raise ValueError(f"{path}: not an mpfsim log (missing '{MAGIC}' line)")
        version, _, meta_txt = first[len(MAGIC):].strip().partition(" ")
        if version != f"v{LOG_VERSION}":
            raise ValueError(f"{path}: unsupported log version {version!r}")
        if header != COLUMNS:
            raise ValueError(f"{path}: unexpected header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(COLUMNS):
        raise ValueError(f"{path}: expected {len(COLUMNS)} columns, got {data.shape[1]}")
    meta = json.loads(meta_txt) if meta_txt else {}
    columns = {c: data[:, i].copy() for i, c in enumerate(COLUMNS)}
    extras = {}
    side = sidecar_path(path)
    if sidecar and side.exists():
        with np.load(side) as z:
            extras = {k: z[k] for k in z.files}
    return TrajectoryLog(columns, meta, extras)
