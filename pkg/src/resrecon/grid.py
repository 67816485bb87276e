"""
Gridded scalar fields on a longitudinal x depth reservoir section.

A :class:`FieldGrid` holds an ``(nz, nx)`` wet mask. Only wet cells carry
state. The state vector is ordered layer by layer from the surface down,
upstream to dam inside each layer, so on an all-wet grid it is simply the
row-major flattening of the dense ``(nz, nx)`` array.

Snapshots are stored as columns of an ``n x r`` matrix inside a
:class:`SnapshotLibrary`, optionally with the empirical mean removed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ParameterError, ShapeError, StateError

#: value written for dry cells in dense exports
DRY_SENTINEL = np.nan


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Structured 2-D grid with a wet-cell mask.

    Parameters
    ----------
    nx, nz : int
        Number of longitudinal columns and depth layers.
    dx, dz : float
        Column width and layer thickness in meters.
    wet_mask : array_like of bool, shape (nz, nx)
        ``wet_mask[layer, column]``; layer 0 is the surface. Wet cells of each
        column must form a contiguous run starting at the surface.
    surface_elevation : float
        Elevation of the free surface in meters.
    """

    nx: int
    nz: int
    dx: float
    dz: float
    wet_mask: np.ndarray
    surface_elevation: float = 556.87
    cells: np.ndarray = field(init=False, repr=False)
    index_map: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ParameterError(f"grid needs nx, nz >= 1, got {self.nx}, {self.nz}")
        if not (self.dx > 0 and self.dz > 0):
            raise ParameterError("dx and dz must be positive")
        mask = np.asarray(self.wet_mask, dtype=bool)
        if mask.shape != (self.nz, self.nx):
            raise ShapeError(f"wet_mask has shape {mask.shape}, expected {(self.nz, self.nx)}")
        for i in range(self.nx):
            col = mask[:, i]
            depth = int(col.sum())
            if not col[:depth].all():
                raise ParameterError(f"column {i}: wet cells must be contiguous from the surface")
        if not mask.any():
            raise ParameterError("grid has no wet cells")

        # layer-major over wet cells (surface layer first, upstream to dam
        # within a layer), stored as (column, layer) pairs
        layers, cols = np.nonzero(mask)
        cells = np.column_stack([cols, layers]).astype(np.int64)
        index_map = np.full((self.nz, self.nx), -1, dtype=np.int64)
        index_map[layers, cols] = np.arange(len(cells))

        object.__setattr__(self, "wet_mask", _frozen(mask))
        object.__setattr__(self, "cells", _frozen(cells))
        object.__setattr__(self, "index_map", _frozen(index_map))

    @classmethod
    def triangular(cls, nx=60, nz=30, dx=3000.0, dz=2.0, surface_elevation=556.87):
        """Default section: one wet layer upstream, full depth at the dam (last column)."""
        depth = np.maximum(1, np.ceil(nz * (np.arange(nx) + 1) / nx)).astype(int)
        mask = np.arange(nz)[:, None] < depth[None, :]
        return cls(nx, nz, dx, dz, mask, surface_elevation)

    @property
    def n(self) -> int:
        return len(self.cells)

    @property
    def column(self) -> np.ndarray:
        """Column index of every state entry."""
        return self.cells[:, 0]

    @property
    def layer(self) -> np.ndarray:
        """Layer index of every state entry."""
        return self.cells[:, 1]

    @property
    def depth(self) -> np.ndarray:
        """Mid-layer depth below the surface (m) of every state entry."""
        return (self.layer + 0.5) * self.dz

    @property
    def distance(self) -> np.ndarray:
        """Mid-column distance from the upstream end (m) of every state entry."""
        return (self.column + 0.5) * self.dx

    @property
    def length(self) -> float:
        return self.nx * self.dx

    @property
    def water_depth(self) -> float:
        return self.nz * self.dz

    def index(self, column: int, layer: int) -> int:
        """State index of wet cell ``(column, layer)``; raises for dry or out-of-range cells."""
        if not (0 <= column < self.nx and 0 <= layer < self.nz):
            raise ParameterError(f"cell ({column}, {layer}) outside the grid")
        k = int(self.index_map[layer, column])
        if k < 0:
            raise ParameterError(f"cell ({column}, {layer}) is dry")
        return k

    def column_indices(self, column: int) -> np.ndarray:
        """State indices of a column, surface to bottom."""
        idx = self.index_map[:, column]
        return idx[idx >= 0]

    def layer_indices(self, layer: int) -> np.ndarray:
        """State indices of a layer, upstream to dam."""
        idx = self.index_map[layer, :]
        return idx[idx >= 0]

    def to_dense(self, values) -> np.ndarray:
        """Scatter a state vector into an ``(nz, nx)`` array, dry cells set to NaN."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n,):
            raise ShapeError(f"state vector has length {values.size}, grid has n={self.n}")
        out = np.full((self.nz, self.nx), DRY_SENTINEL)
        out[self.layer, self.column] = values
        return out

    def from_dense(self, arr) -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (self.nz, self.nx):
            raise ShapeError(f"dense array has shape {arr.shape}, expected {(self.nz, self.nx)}")
        return arr[self.layer, self.column].copy()

    def same_as(self, other: "FieldGrid") -> bool:
        return (
            self is other
            or (
                self.nx == other.nx
                and self.nz == other.nz
                and self.dx == other.dx
                and self.dz == other.dz
                and np.array_equal(self.wet_mask, other.wet_mask)
            )
        )

    def to_json(self) -> dict:
        return {
            "nx": self.nx,
            "nz": self.nz,
            "dx_m": self.dx,
            "dz_m": self.dz,
            "surface_elevation_m": self.surface_elevation,
            "wet_mask": self.wet_mask.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FieldGrid":
        required = {"nx", "nz", "dx_m", "dz_m", "wet_mask"}
        missing = required - set(doc)
        if missing:
            raise FormatError(f"grid spec missing keys: {sorted(missing)}")
        unknown = set(doc) - required - {"surface_elevation_m"}
        if unknown:
            raise FormatError(f"grid spec has unknown keys: {sorted(unknown)}")
        mask = doc["wet_mask"]
        if not (isinstance(mask, list) and all(isinstance(row, list) for row in mask)):
            raise FormatError("wet_mask must be an array of arrays of booleans")
        if any(not isinstance(v, bool) for row in mask for v in row):
            raise FormatError("wet_mask entries must be booleans")
        if len(mask) != doc["nz"] or any(len(row) != doc["nx"] for row in mask):
            raise ShapeError(f"wet_mask must be {doc['nz']} rows of {doc['nx']} booleans")
        return cls(
            int(doc["nx"]),
            int(doc["nz"]),
            float(doc["dx_m"]),
            float(doc["dz_m"]),
            np.array(mask, dtype=bool),
            float(doc.get("surface_elevation_m", 556.87)),
        )


def load_grid(path) -> FieldGrid:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: grid spec must be a JSON object")
    return FieldGrid.from_json(doc)


def save_grid(grid: FieldGrid, path) -> None:
    Path(path).write_text(json.dumps(grid.to_json()) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class Snapshot:
    """A field state on the wet cells of ``grid``."""

    grid: FieldGrid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ShapeError(f"snapshot has {v.size} values, grid has n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise DataError(f"snapshot {self.label!r} has non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    def to_dense(self) -> np.ndarray:
        return self.grid.to_dense(self.values)


def snapshot_to_grid(s: Snapshot, grid: FieldGrid | None = None) -> np.ndarray:
    """Dense ``(nz, nx)`` array of a snapshot, ``NaN`` on dry cells."""
    grid = s.grid if grid is None else grid
    return grid.to_dense(s.values)


@dataclass(frozen=True, eq=False)
class SnapshotLibrary:
    """Snapshot matrix ``(n, r)`` with optional stored mean.

    When ``centered`` is true the stored columns are fluctuations about
    ``mean``.
    """

    grid: FieldGrid
    matrix: np.ndarray
    labels: tuple = ()
    mean: np.ndarray | None = None
    centered: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != self.grid.n or m.shape[1] < 1:
            raise ShapeError(f"library matrix has shape {m.shape}, expected ({self.grid.n}, r>=1)")
        if not np.all(np.isfinite(m)):
            raise DataError("library contains non-finite values")
        labels = tuple(self.labels) if self.labels else tuple(str(i) for i in range(m.shape[1]))
        if len(labels) != m.shape[1]:
            raise ShapeError(f"{len(labels)} labels for {m.shape[1]} snapshots")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "labels", labels)
        if self.mean is not None:
            mu = np.asarray(self.mean, dtype=float)
            if mu.shape != (self.grid.n,):
                raise ShapeError("mean has wrong length")
            object.__setattr__(self, "mean", _frozen(mu))
        if self.centered and self.mean is None:
            raise StateError("centered library requires a mean")

    @classmethod
    def from_snapshots(cls, snapshots) -> "SnapshotLibrary":
        snapshots = list(snapshots)
        if not snapshots:
            raise ShapeError("need at least one snapshot")
        grid = snapshots[0].grid
        for s in snapshots[1:]:
            if not grid.same_as(s.grid):
                raise ShapeError("snapshots live on different grids")
        matrix = np.column_stack([s.values for s in snapshots])
        return cls(grid, matrix, tuple(s.label for s in snapshots))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def r(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.r

    def snapshot(self, i: int) -> Snapshot:
        return Snapshot(self.grid, self.matrix[:, i], self.labels[i])

    def __iter__(self):
        return (self.snapshot(i) for i in range(self.r))

    def subset(self, columns) -> "SnapshotLibrary":
        """Uncentered library holding the given columns."""
        if self.centered:
            raise StateError("subset() expects an uncentered library")
        columns = list(columns)
        return SnapshotLibrary(self.grid, self.matrix[:, columns], tuple(self.labels[i] for i in columns))

    def energy(self) -> float:
        """Mean L2 norm of the stored columns (fluctuation norm when centered)."""
        return float(np.mean(np.linalg.norm(self.matrix, axis=0)))


def center_library(lib: SnapshotLibrary) -> SnapshotLibrary:
    """Subtract the column-wise mean; the result carries the mean for later use."""
    if lib.centered:
        raise StateError("library is already centered")
    mean = lib.matrix.mean(axis=1)
    return SnapshotLibrary(lib.grid, lib.matrix - mean[:, None], lib.labels, mean, True)


def uncenter_library(lib: SnapshotLibrary) -> SnapshotLibrary:
    if not lib.centered:
        raise StateError("library is not centered")
    return SnapshotLibrary(lib.grid, lib.matrix + lib.mean[:, None], lib.labels)


def load_snapshots(path, grid_spec) -> SnapshotLibrary:
    """Read a snapshot CSV against a grid.

    Parameters
    ----------
    path : path-like
        CSV with header ``label,v0,...,v{n-1}`` and one snapshot per row.
    grid_spec : path-like or FieldGrid
        Grid JSON document, or an already-built grid.
    """
    grid = grid_spec if isinstance(grid_spec, FieldGrid) else load_grid(grid_spec)
    n = grid.n
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if not header or header[0] != "label":
            raise FormatError(f"{path}: row 1: header must start with 'label'")
        names = header[1:]
        for j, name in enumerate(names):
            if name != f"v{j}":
                raise FormatError(f"{path}: row 1, column {j + 2}: expected 'v{j}', got {name!r}")
        if len(names) != n:
            raise ShapeError(f"{path}: row 1: header has {len(names)} values, grid has n={n}")

        labels, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            vals = row[1:]
            if len(vals) != n:
                raise ShapeError(f"{path}: row {lineno}: {len(vals)} values, grid has n={n}")
            parsed = np.empty(n)
            for j, tok in enumerate(vals):
                try:
                    parsed[j] = float(tok)
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column {j + 2}: not a number ({tok!r})") from None
                if not math.isfinite(parsed[j]):
                    raise DataError(f"{path}: row {lineno}, column {j + 2}: non-finite value {tok!r}")
            labels.append(row[0])
            rows.append(parsed)
    if not rows:
        raise FormatError(f"{path}: no snapshot rows")
    return SnapshotLibrary(grid, np.column_stack(rows), tuple(labels))


def export_snapshots(lib: SnapshotLibrary, path) -> None:
    """Write the stored columns as snapshot CSV rows with round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"v{j}" for j in range(lib.n)])
        for i in range(lib.r):
            w.writerow([lib.labels[i]] + [repr(float(v)) for v in lib.matrix[:, i]])


def write_dense_csv(arr: np.ndarray, path) -> None:
    """Write a dense ``(nz, nx)`` field, one row per layer, ``NaN`` for dry cells."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer"] + [f"c{i}" for i in range(arr.shape[1])])
        for j, row in enumerate(arr):
            w.writerow([j] + ["NaN" if math.isnan(v) else repr(float(v)) for v in row])


def read_dense_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]])
