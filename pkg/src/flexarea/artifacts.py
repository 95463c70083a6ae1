"""Rendering and report emission for estimation runs.

Figures are SVG: vector output is byte-deterministic once the hash salt is
pinned and the date metadata is dropped, which makes them diff-able in CI.
The heatmap applies a log scale to 1 + DFC for display only; stored grid
values stay linear in [0, 1].
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("svg")
matplotlib.rcParams["svg.hashsalt"] = "flexarea"

import numpy as np
from matplotlib.colors import LogNorm
from matplotlib.figure import Figure

from .errors import ContractError
from .fagrid import FaGrid
from .opf import OpfBoundaryPoint, boundary_polygon


def _axis_step(axis: np.ndarray) -> float:
    return float(axis[1] - axis[0]) if len(axis) > 1 else 1.0


def render_fa_figure(path: str | Path, grid: FaGrid | None = None,
                     boundary: list[OpfBoundaryPoint] | None = None) -> Path:
    """Write the FA as a deterministic SVG: heatmap or boundary polygon."""
    path = Path(path)
    fig = Figure(figsize=(7.0, 5.6))
    ax = fig.add_subplot(111)

    if grid is not None:
        if grid.values.size == 0:
            raise ContractError("cannot render an empty grid")
        dp, dq = _axis_step(grid.p_axis), _axis_step(grid.q_axis)
        p0, p1 = float(grid.p_axis[0]), float(grid.p_axis[-1])
        q0, q1 = float(grid.q_axis[0]), float(grid.q_axis[-1])
        extent = (p0 - dp / 2, p1 + dp / 2, q0 - dq / 2, q1 + dq / 2)
        im = ax.imshow(
            1.0 + grid.values.T, origin="lower", extent=extent, aspect="auto",
            norm=LogNorm(vmin=1.0, vmax=2.0), cmap="viridis",
            interpolation="nearest",
        )
        fig.colorbar(im, ax=ax, label="1 + DFC (log scale)")
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
        ax.set_title("Flexibility area")
    elif boundary is not None:
        ring = boundary_polygon(boundary)
        if len(ring) < 3:
            raise ContractError("boundary rendering needs at least 3 converged points")
        ax.plot(ring[:, 0], ring[:, 1], "-", color="tab:blue", lw=1.5)
        ax.plot(ring[:-1, 0], ring[:-1, 1], "o", color="tab:blue", ms=3)
        ax.set_title("Flexibility area boundary")
        ax.grid(True, lw=0.3)
    else:
        raise ContractError("render_fa_figure needs a grid or boundary points")

    ax.set_xlabel("P at PCC [MW]")
    ax.set_ylabel("Q at PCC [MVAr]")
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def write_boundary_csv(points: list[OpfBoundaryPoint], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["objective_id", "alpha", "w_p", "w_q",
                         "p_pcc_mw", "q_pcc_mvar", "converged"])
        for pt in points:
            writer.writerow([
                pt.objective_id, repr(float(pt.alpha)),
                repr(float(pt.w_p)), repr(float(pt.w_q)),
                repr(float(pt.p_pcc_mw)), repr(float(pt.q_pcc_mvar)),
                int(pt.converged),
            ])
    return path


def write_report(path: str | Path, report: dict, config: dict,
                 extra_lines: list[str] | None = None) -> Path:
    """Key-value run summary followed by the full configuration echo."""
    path = Path(path)
    lines = [f"{key}: {value}" for key, value in report.items()]
    lines.extend(extra_lines or [])
    lines.append("")
    lines.append("# configuration")
    lines.extend(f"{key}: {value}" for key, value in sorted(config.items()))
    path.write_text("\n".join(lines) + "\n")
    return path
