"""
Reconstruction error metrics and depth-band error summaries.

``error1`` is the relative L2 error of the full field. ``error2`` takes
mean-subtracted fields and normalizes by the norm of the full field
``x_fluct + mean``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .grid import FieldGrid, Snapshot

#: band edges (m) of the six 10 m depth intervals
DEFAULT_BAND_EDGES = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)

#: operand convention of error2, written into exported metadata
ERROR2_CONVENTION = "error2 = ||x_fluct - xhat_fluct|| / ||x_fluct + mean||, x_fluct = x - mean"

_STAT_KEYS = ("count", "min", "q1", "median", "q3", "max", "mean")


def _vec(x, grid=None):
    if isinstance(x, Snapshot):
        if grid is not None and not grid.same_as(x.grid):
            raise ShapeError("snapshots are on different grids")
        return x.values, x.grid
    return np.asarray(x, dtype=float), grid


def _pair(x, xhat):
    xv, g = _vec(x)
    hv, _ = _vec(xhat, g)
    if xv.shape != hv.shape:
        raise ShapeError(f"length mismatch: {xv.size} vs {hv.size}")
    return xv, hv


def error1(x, xhat) -> float:
    """``||x - xhat||_2 / ||x||_2``."""
    xv, hv = _pair(x, xhat)
    denom = np.linalg.norm(xv)
    if denom == 0:
        raise ZeroDivisionError("error1 undefined for a zero reference field")
    return float(np.linalg.norm(xv - hv) / denom)


def error2(x_fluct, xhat_fluct, mean) -> float:
    """``||x_fluct - xhat_fluct||_2 / ||x_fluct + mean||_2``."""
    xv, hv = _pair(x_fluct, xhat_fluct)
    _, mv = _pair(x_fluct, mean)
    denom = np.linalg.norm(xv + mv)
    if denom == 0:
        raise ZeroDivisionError("error2 undefined: x_fluct + mean is zero")
    return float(np.linalg.norm(xv - hv) / denom)


def error_map(x, xhat) -> np.ndarray:
    """Per-wet-cell absolute error ``|x - xhat|``."""
    xv, hv = _pair(x, xhat)
    return np.abs(xv - hv)


def _check_edges(edges, grid: FieldGrid) -> np.ndarray:
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ParameterError("need at least two band edges")
    if np.any(np.diff(edges) <= 0):
        raise ParameterError("band edges must be strictly increasing")
    depth = grid.depth
    if depth.min() < edges[0] or depth.max() >= edges[-1]:
        raise ParameterError(
            f"band edges [{edges[0]}, {edges[-1]}) do not cover cell mid-depths "
            f"[{depth.min()}, {depth.max()}]"
        )
    return edges


def band_labels(edges) -> list[str]:
    return [f"{a:g}-{b:g}" for a, b in zip(edges[:-1], edges[1:])]


def assign_bands(grid: FieldGrid, edges=DEFAULT_BAND_EDGES) -> np.ndarray:
    """Band number of every wet cell, by mid-depth in half-open ``[a, b)``."""
    edges = _check_edges(edges, grid)
    return np.searchsorted(edges, grid.depth, side="right") - 1


def _summary(v: np.ndarray) -> dict:
    if v.size == 0:
        return {"count": 0, **{k: float("nan") for k in _STAT_KEYS[1:]}}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {
        "count": int(v.size),
        "min": float(v.min()),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "max": float(v.max()),
        "mean": float(v.mean()),
    }


def depth_band_stats(emap, grid: FieldGrid, band_edges=DEFAULT_BAND_EDGES) -> dict:
    """Summary statistics of a per-cell error map in each depth band.

    Returns an ordered ``{"a-b": {count, min, q1, median, q3, max, mean}}``.
    Empty bands get ``count=0`` and NaN statistics.
    """
    emap = np.asarray(emap, dtype=float)
    if emap.shape != (grid.n,):
        raise ShapeError(f"error map has length {emap.size}, grid has n={grid.n}")
    edges = _check_edges(band_edges, grid)
    band = assign_bands(grid, edges)
    return {label: _summary(emap[band == b]) for b, label in enumerate(band_labels(edges))}


@dataclass
class ErrorReport:
    error1: float
    error2: float
    cell_abs_error: np.ndarray
    depth_band_stats: dict = field(default_factory=dict)


def error_report(x: Snapshot, xhat: Snapshot, mean, band_edges=None) -> ErrorReport:
    """All metrics of one reconstruction against its ground truth."""
    xv, hv = _pair(x, xhat)
    _, mv = _pair(x, mean)
    emap = np.abs(xv - hv)
    stats = {}
    if band_edges is not None:
        stats = depth_band_stats(emap, x.grid, band_edges)
    return ErrorReport(error1(xv, hv), error2(xv - mv, hv - mv, mv), emap, stats)


def write_band_stats_csv(rows, path) -> None:
    """``rows``: iterable of ``(key dict, stats dict)``; one CSV row per band."""
    rows = list(rows)
    keys = list(rows[0][0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys + ["band", *_STAT_KEYS])
        for key, stats in rows:
            for band, s in stats.items():
                w.writerow([key[k] for k in keys] + [band] + [_fmt(s[c]) for c in _STAT_KEYS])


def band_stats_json(stats: dict) -> str:
    return json.dumps(stats, sort_keys=False, allow_nan=True)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))
