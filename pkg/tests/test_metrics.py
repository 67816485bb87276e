import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from resrecon.errors import ParameterError, ShapeError
from resrecon.grid import Snapshot
from resrecon.metrics import (
    DEFAULT_BAND_EDGES,
    assign_bands,
    depth_band_stats,
    error1,
    error2,
    error_map,
    error_report,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_error1_examples():
    assert error1([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert error1([1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.sqrt(2), abs=1e-12)
    assert error1([3.0, 4.0], [0.0, 0.0]) == pytest.approx(1.0, abs=1e-12)


def test_error2_examples():
    assert error2([1.0, 2.0], [1.0, 2.0], [5.0, 5.0]) == 0.0
    assert error2([1.0, 0.0], [0.0, 0.0], [1.0, 0.0]) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite))
def test_error2_zero_mean_is_error1(a, b):
    if np.linalg.norm(a) == 0:
        return
    assert error2(a, b, np.zeros(5)) == pytest.approx(error1(a, b), rel=1e-12, abs=0)


def test_zero_reference():
    with pytest.raises(ZeroDivisionError):
        error1([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ZeroDivisionError):
        error2([1.0, 0.0], [0.0, 0.0], [-1.0, 0.0])


def test_length_mismatch():
    with pytest.raises(ShapeError):
        error1([1.0, 2.0], [1.0])


@settings(max_examples=50, deadline=None)
@given(arrays(float, 7, elements=finite), arrays(float, 7, elements=finite))
def test_error_map_norm_is_numerator(a, b):
    assert np.linalg.norm(error_map(a, b)) == np.linalg.norm(a - b)
    assert np.all(error_map(a, b) >= 0)


def test_error_map_single_cell():
    x = np.arange(5.0)
    xh = x.copy()
    xh[3] += 0.25
    m = error_map(x, xh)
    assert m[3] == 0.25 and np.count_nonzero(m) == 1
    assert np.all(error_map(x, x) == 0)


def test_default_bands_partition(grid):
    bands = assign_bands(grid)
    assert bands.min() == 0 and bands.max() == 5
    stats = depth_band_stats(np.ones(grid.n), grid)
    assert list(stats) == ["0-10", "10-20", "20-30", "30-40", "40-50", "50-60"]
    assert sum(s["count"] for s in stats.values()) == grid.n


def test_band_membership_half_open(grid):
    bands = assign_bands(grid)
    z = grid.depth
    for b, (lo, hi) in enumerate(zip(DEFAULT_BAND_EDGES[:-1], DEFAULT_BAND_EDGES[1:])):
        assert np.all((z[bands == b] >= lo) & (z[bands == b] < hi))


def test_single_band(grid):
    stats = depth_band_stats(np.arange(grid.n, dtype=float), grid, [0.0, 60.0])
    s = stats["0-60"]
    assert s["count"] == grid.n
    assert s["min"] == 0.0 and s["max"] == grid.n - 1
    assert s["mean"] == pytest.approx((grid.n - 1) / 2)


def test_constant_field_medians(grid):
    stats = depth_band_stats(np.full(grid.n, 0.7), grid)
    assert all(s["median"] == 0.7 for s in stats.values())


def test_edges_must_cover(grid):
    with pytest.raises(ParameterError):
        depth_band_stats(np.ones(grid.n), grid, [0.0, 10.0, 30.0])
    with pytest.raises(ParameterError):
        depth_band_stats(np.ones(grid.n), grid, [0.0, 20.0, 10.0, 60.0])
    with pytest.raises(ShapeError):
        depth_band_stats(np.ones(3), grid)


def test_empty_band_gets_nan(grid):
    stats = depth_band_stats(np.ones(grid.n), grid, [0.0, 60.0, 70.0])
    assert stats["60-70"]["count"] == 0
    assert np.isnan(stats["60-70"]["median"])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_report_consistency(grid, seed):
    rng = np.random.default_rng(seed)
    x = Snapshot(grid, rng.normal(10, 2, grid.n))
    xh = Snapshot(grid, x.values + rng.normal(0, 0.3, grid.n))
    mean = rng.normal(10, 1, grid.n)
    rep = error_report(x, xh, mean, band_edges=DEFAULT_BAND_EDGES)
    assert rep.error1 >= 0 and rep.error2 >= 0
    assert rep.error1 == pytest.approx(rep.error2, rel=1e-12)
    assert sum(s["count"] for s in rep.depth_band_stats.values()) == grid.n
    assert all(np.isfinite(v) for s in rep.depth_band_stats.values() for v in s.values())
