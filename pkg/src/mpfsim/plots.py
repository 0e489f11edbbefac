"""Static figures of a trajectory log (matplotlib, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .simulation import TrajectoryLog  # noqa: E402

PLOT_NAMES = ("trajectory", "relative", "error_norm", "psi", "sdot", "wref2", "wref3")


def relative_position(log: TrajectoryLog) -> np.ndarray:
    """Vehicle position relative to the target, in target axes when known."""
    rel = log.p - log.p_t
    if "R_T" in log.extras:
        rel = np.einsum("kji,kj->ki", log.extras["R_T"], rel)
    return rel


def _trajectory(log, ax_3d, ax_xy, ax_xz):
    p, pt, pd = log.p, log.p_t, log.p_t + log.p_d
    ax_3d.plot(*p.T, lw=0.8, label="vehicle")
    ax_3d.plot(*pt.T, lw=0.8, label="target")
    ax_3d.plot(*pd.T, lw=0.5, alpha=0.6, label="virtual point")
    ax_3d.set_xlabel("x [m]")
    ax_3d.set_ylabel("y [m]")
    ax_3d.set_zlabel("z [m]")
    ax_3d.legend(loc="upper left", fontsize="small")
    for ax, j, ylabel in ((ax_xy, 1, "y [m]"), (ax_xz, 2, "z [m]")):
        ax.plot(p[:, 0], p[:, j], lw=0.8)
        ax.plot(pt[:, 0], pt[:, j], lw=0.8)
        ax.set_xlabel("x [m]")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
    ax_xy.set_aspect("equal", adjustable="datalim")


def _series(log, column, ylabel, logy=False):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    t = log["t"]
    y = log[column]
    if logy:
        ax.semilogy(t, np.maximum(y, 1e-12), lw=0.8)
    else:
        ax.plot(t, y, lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def emit_plots(log: TrajectoryLog, out_dir, prefix: str = "") -> list[Path]:
    """Write the seven PNG figures into ``out_dir`` and return their paths."""
    out = Path(out_dir)
    figs = {}

    fig = plt.figure(figsize=(15, 5))
    _trajectory(log, fig.add_subplot(1, 3, 1, projection="3d"), fig.add_subplot(1, 3, 2),
                fig.add_subplot(1, 3, 3))
    fig.subplots_adjust(left=0.02, right=0.98, wspace=0.3)
    figs["trajectory"] = fig

    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    rel = relative_position(log)
    ax.plot(rel[:, 0], rel[:, 1], lw=0.6)
    ax.plot(rel[-1, 0], rel[-1, 1], "o", ms=4)
    ax.set_xlabel("x rel. target [m]")
    ax.set_ylabel("y rel. target [m]")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    figs["relative"] = fig

    figs["error_norm"] = _series(log, "ep_norm", "|position error| [m]", logy=True)
    figs["psi"] = _series(log, "psi", "error function", logy=True)
    figs["sdot"] = _series(log, "sdot", "sdot [m/s]")
    figs["wref2"] = _series(log, "wref2", "rate ref. about w2 [rad/s]")
    figs["wref3"] = _series(log, "wref3", "rate ref. about w3 [rad/s]")

    paths = []
    for name in PLOT_NAMES:
        path = out / f"{prefix}{name}.png"
        figs[name].savefig(path, dpi=110)
        plt.close(figs[name])
        paths.append(path)
    return paths


def emit_outputs(log: TrajectoryLog, out_dir, formats=("csv", "png"), stem: str = "log") -> list[Path]:
    """Write the CSV log and/or the figures into ``out_dir``.

    Raises
    ------
    OSError
        If ``out_dir`` cannot be created or written to.
    """
    from .logio import write_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    unknown = set(formats) - {"csv", "png"}
    if unknown:
        raise ValueError(f"unknown output formats: {sorted(unknown)}")
    written = []
    if "csv" in formats:
        written.append(write_csv(log, out / f"{stem}.csv"))
    if "png" in formats:
        written.extend(emit_plots(log, out))
    return written
