"""
Point-sensor measurement operators ``y = C x + noise``.

``C`` is kept as a list of state indices (row selection); products with a
basis are plain gathers ``Phi[indices]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, OperatorError, ParameterError, ShapeError
from .grid import FieldGrid, Snapshot

PLACEMENTS = ("random_points", "surface_line", "vertical_dam_line", "explicit")


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    grid: FieldGrid
    indices: np.ndarray
    placement: str = "explicit"
    seed: int | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or idx.size < 1:
            raise OperatorError("operator needs at least one sensor")
        if not np.issubdtype(idx.dtype, np.integer):
            raise OperatorError("sensor indices must be integers")
        if idx.min() < 0 or idx.max() >= self.grid.n:
            raise OperatorError(f"sensor index outside [0, {self.grid.n})")
        if np.unique(idx).size != idx.size:
            raise OperatorError("sensor indices must be distinct")
        if self.placement not in PLACEMENTS:
            raise OperatorError(f"unknown placement {self.placement!r}")
        idx = idx.astype(np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def p(self) -> int:
        return self.indices.size

    def __len__(self):
        return self.p

    def matrix(self) -> np.ndarray:
        """Dense ``p x n`` selection matrix (for tests and small problems)."""
        C = np.zeros((self.p, self.grid.n))
        C[np.arange(self.p), self.indices] = 1.0
        return C

    def cells(self) -> np.ndarray:
        """``(column, layer)`` of every sensor."""
        return self.grid.cells[self.indices]


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian noise plus optional gross corruption of a fraction of sensors."""

    gaussian_sigma: float = 0.0
    corruption_fraction: float = 0.0
    corruption_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ParameterError("gaussian_sigma must be >= 0")
        if not 0.0 <= self.corruption_fraction <= 1.0:
            raise ParameterError("corruption_fraction must lie in [0, 1]")
        if self.corruption_scale < 0:
            raise ParameterError("corruption_scale must be >= 0")


def even_spacing(count: int, p: int) -> np.ndarray:
    """Positions ``floor(j * count / p)`` for ``j = 0..p-1``."""
    return (np.arange(p) * count) // p


def random_points(grid: FieldGrid, p: int, seed: int) -> MeasurementOperator:
    """``p`` distinct wet cells drawn uniformly without replacement (sorted)."""
    if not 1 <= p <= grid.n:
        raise ParameterError(f"p={p} outside [1, n={grid.n}]")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(grid.n, size=p, replace=False))
    return MeasurementOperator(grid, idx, "random_points", seed)


def surface_line(grid: FieldGrid, p: int) -> MeasurementOperator:
    """``p`` evenly spaced sensors along the surface layer, upstream first."""
    line = grid.layer_indices(0)
    if not 1 <= p <= line.size:
        raise ParameterError(f"p={p} outside [1, {line.size}] surface cells")
    return MeasurementOperator(grid, line[even_spacing(line.size, p)], "surface_line")


def vertical_dam_line(grid: FieldGrid, p: int) -> MeasurementOperator:
    """``p`` evenly spaced sensors down the dam-end column, surface first."""
    line = grid.column_indices(grid.nx - 1)
    if not 1 <= p <= line.size:
        raise ParameterError(f"p={p} outside [1, {line.size}] cells of the dam column")
    return MeasurementOperator(grid, line[even_spacing(line.size, p)], "vertical_dam_line")


def explicit(grid: FieldGrid, cells) -> MeasurementOperator:
    """Operator from ``(column, layer)`` pairs; dry or out-of-grid cells are rejected."""
    idx = []
    for c in cells:
        try:
            column, layer = (int(v) for v in c)
        except (TypeError, ValueError):
            raise FormatError(f"sensor entry {c!r} is not a (column, layer) pair") from None
        try:
            idx.append(grid.index(column, layer))
        except ParameterError as exc:
            raise OperatorError(str(exc)) from None
    return MeasurementOperator(grid, np.array(idx, dtype=np.int64), "explicit")


def load_operator(path, grid: FieldGrid) -> MeasurementOperator:
    """Read a JSON list of ``[column, layer]`` pairs."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, list):
        raise FormatError(f"{path}: expected a JSON list of [column, layer] pairs")
    return explicit(grid, doc)


def save_operator(op: MeasurementOperator, path) -> None:
    Path(path).write_text(json.dumps(op.cells().tolist()) + "\n", encoding="utf-8")


def make_operator(grid: FieldGrid, placement: str, p: int, seed: int | None = None) -> MeasurementOperator:
    if placement == "random_points":
        return random_points(grid, p, seed)
    if placement == "surface_line":
        return surface_line(grid, p)
    if placement == "vertical_dam_line":
        return vertical_dam_line(grid, p)
    raise ParameterError(f"cannot build a {placement!r} operator from a count")


def n_corrupted(fraction: float, p: int) -> int:
    # ceil with a guard against 0.1 * 30 = 3.0000000000000004
    return min(p, math.ceil(fraction * p - 1e-9))


def apply(op: MeasurementOperator, x, noise: NoiseModel | None = None, return_corrupted: bool = False):
    """Sensor readings of field ``x``.

    Gaussian noise is added first; then ``ceil(fraction * p)`` seeded sensors
    are replaced by uniform draws in ``[-corruption_scale, corruption_scale]``.

    Returns
    -------
    y : ndarray, shape (p,)
    corrupted : ndarray of int, optional
        Sorted positions (into ``y``) of the replaced entries, when
        ``return_corrupted`` is set.
    """
    if isinstance(x, Snapshot):
        if not x.grid.same_as(op.grid):
            raise ShapeError("snapshot and operator are on different grids")
        x = x.values
    x = np.asarray(x, dtype=float)
    if x.shape != (op.grid.n,):
        raise ShapeError(f"field has length {x.size}, grid has n={op.grid.n}")
    y = x[op.indices].copy()
    corrupted = np.empty(0, dtype=np.int64)
    if noise is not None:
        rng = np.random.default_rng(noise.seed)
        if noise.gaussian_sigma > 0:
            y += rng.normal(0.0, noise.gaussian_sigma, size=op.p)
        m = n_corrupted(noise.corruption_fraction, op.p)
        if m > 0:
            corrupted = np.sort(rng.choice(op.p, size=m, replace=False))
            y[corrupted] = rng.uniform(-noise.corruption_scale, noise.corruption_scale, size=m)
    if return_corrupted:
        return y, corrupted
    return y
