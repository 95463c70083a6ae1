"""2-D density grid over PCC (P, Q) with the operations the estimators share.

Cell values hold the density of feasible combinations (DFC). Axes store
cell centers with uniform spacing; combination requires identical axes.
All operations return new grids; values are never mutated in place.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, RuntimeFailure

_AX_TOL = 1e-9


@dataclass(frozen=True)
class FaGrid:
    p_axis: np.ndarray  # MW, cell centers, strictly increasing, uniform
    q_axis: np.ndarray  # MVAr
    values: np.ndarray  # shape (len(p_axis), len(q_axis)), >= 0

    def __post_init__(self):
        if self.values.shape != (len(self.p_axis), len(self.q_axis)):
            raise ContractError("value array dimensions must match the axes")
        for ax in (self.p_axis, self.q_axis):
            if len(ax) > 1:
                steps = np.diff(ax)
                if np.any(steps <= 0) or np.ptp(steps) > 1e-6 * steps[0]:
                    raise ContractError("axes must be strictly increasing and uniform")
        if np.any(self.values < 0):
            raise ContractError("cell values must be non-negative")

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0]) if len(self.p_axis) > 1 else 0.0

    @property
    def dq(self) -> float:
        return float(self.q_axis[1] - self.q_axis[0]) if len(self.q_axis) > 1 else 0.0

    def support(self) -> np.ndarray:
        return self.values > 0


def _same_axes(a: FaGrid, b: FaGrid) -> bool:
    return (
        len(a.p_axis) == len(b.p_axis)
        and len(a.q_axis) == len(b.q_axis)
        and np.allclose(a.p_axis, b.p_axis, atol=_AX_TOL)
        and np.allclose(a.q_axis, b.q_axis, atol=_AX_TOL)
    )


def min_combine(grids: list[FaGrid]) -> FaGrid:
    """Element-wise minimum across grids sharing identical axes."""
    if not grids:
        raise ContractError("min_combine needs at least one grid")
    first = grids[0]
    vals = first.values.copy()
    for g in grids[1:]:
        if not _same_axes(first, g):
            raise ContractError("min_combine requires identical axes")
        np.minimum(vals, g.values, out=vals)
    return FaGrid(first.p_axis, first.q_axis, vals)


def normalize(grid: FaGrid) -> FaGrid:
    """Scale values so that the maximum cell equals 1."""
    peak = float(grid.values.max())
    if peak <= 0:
        raise RuntimeFailure("empty flexibility area: all cells are zero")
    return FaGrid(grid.p_axis, grid.q_axis, grid.values / peak)


def bilinear_upsample(grid: FaGrid, factor: int) -> FaGrid:
    """Increase axis density by ``factor`` over the same span.

    Output axes have (n-1)*factor + 1 points, so the original nodes (and
    in particular the corners) are preserved exactly.
    """
    if factor < 2:
        raise ContractError("upsample factor must be >= 2")
    if len(grid.p_axis) < 2 or len(grid.q_axis) < 2:
        raise ContractError("upsampling needs at least 2 points per axis")

    def fine(ax: np.ndarray) -> np.ndarray:
        n = (len(ax) - 1) * factor + 1
        return np.linspace(ax[0], ax[-1], n)

    pf, qf = fine(grid.p_axis), fine(grid.q_axis)
    # separable bilinear interpolation: rows first, then columns
    mid = np.empty((len(grid.p_axis), len(qf)))
    for i in range(len(grid.p_axis)):
        mid[i] = np.interp(qf, grid.q_axis, grid.values[i])
    out = np.empty((len(pf), len(qf)))
    for j in range(len(qf)):
        out[:, j] = np.interp(pf, grid.p_axis, mid[:, j])
    return FaGrid(pf, qf, out)


def write_csv(grid: FaGrid, path: str | Path) -> Path:
    """Long-format rows ``p_mw,q_mvar,dfc``, one per cell, P-major order."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p_mw", "q_mvar", "dfc"])
        for i, p in enumerate(grid.p_axis):
            for j, q in enumerate(grid.q_axis):
                writer.writerow([repr(float(p)), repr(float(q)), repr(float(grid.values[i, j]))])
    return path


def read_csv(path: str | Path) -> FaGrid:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["p_mw", "q_mvar", "dfc"]:
            raise ContractError(f"unexpected CSV header {header}")
        rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    p_axis = np.array(sorted({r[0] for r in rows}))
    q_axis = np.array(sorted({r[1] for r in rows}))
    values = np.zeros((len(p_axis), len(q_axis)))
    pi = {v: i for i, v in enumerate(p_axis)}
    qi = {v: i for i, v in enumerate(q_axis)}
    for p, q, d in rows:
        values[pi[p], qi[q]] = d
    return FaGrid(p_axis, q_axis, values)
