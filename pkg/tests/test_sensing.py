import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resrecon.errors import FormatError, OperatorError, ParameterError, ShapeError
from resrecon.sensing import (
    MeasurementOperator,
    NoiseModel,
    apply,
    even_spacing,
    explicit,
    load_operator,
    make_operator,
    n_corrupted,
    random_points,
    save_operator,
    surface_line,
    vertical_dam_line,
)


def test_random_points_default_grid(grid):
    op = random_points(grid, 10, seed=4)
    assert op.p == 10
    assert len(set(op.indices.tolist())) == 10
    cols, layers = op.cells().T
    assert np.all(grid.wet_mask[layers, cols])


def test_random_points_exhaustive(small_grid):
    for seed in (0, 1, 99):
        assert np.array_equal(random_points(small_grid, small_grid.n, seed).indices, np.arange(small_grid.n))


def test_random_points_deterministic(grid):
    assert np.array_equal(random_points(grid, 30, 5).indices, random_points(grid, 30, 5).indices)
    assert not np.array_equal(random_points(grid, 30, 5).indices, random_points(grid, 30, 6).indices)


def test_p_too_large(grid):
    with pytest.raises(ParameterError):
        random_points(grid, grid.n + 1, 0)
    with pytest.raises(ParameterError):
        surface_line(grid, 61)
    with pytest.raises(ParameterError):
        vertical_dam_line(grid, 31)


def test_even_spacing_rule():
    assert even_spacing(60, 3).tolist() == [0, 20, 40]
    assert even_spacing(30, 1).tolist() == [0]
    assert even_spacing(7, 7).tolist() == list(range(7))


def test_surface_line(grid):
    assert surface_line(grid, 60).cells()[:, 0].tolist() == list(range(60))
    assert surface_line(grid, 1).cells().tolist() == [[0, 0]]
    op = surface_line(grid, 3)
    assert op.cells().tolist() == [[0, 0], [20, 0], [40, 0]]


def test_vertical_dam_line(grid):
    full = vertical_dam_line(grid, 30)
    assert np.all(full.cells()[:, 0] == 59)
    assert full.cells()[:, 1].tolist() == list(range(30))
    assert vertical_dam_line(grid, 1).cells().tolist() == [[59, 0]]
    assert vertical_dam_line(grid, 3).cells()[:, 1].tolist() == [0, 10, 20]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(1, 30))
def test_lines_stay_on_their_line(grid, ps, pv):
    assert np.all(surface_line(grid, ps).cells()[:, 1] == 0)
    assert np.all(vertical_dam_line(grid, pv).cells()[:, 0] == grid.nx - 1)


def test_explicit_rejects_dry_and_duplicates(grid):
    with pytest.raises(OperatorError):
        explicit(grid, [[0, 5]])
    with pytest.raises(OperatorError):
        explicit(grid, [[59, 3], [59, 3]])
    with pytest.raises(FormatError):
        explicit(grid, [[1, 2, 3]])


def test_operator_file_round_trip(tmp_path, grid):
    op = random_points(grid, 12, 3)
    save_operator(op, tmp_path / "s.json")
    again = load_operator(tmp_path / "s.json", grid)
    assert np.array_equal(np.sort(again.indices), np.sort(op.indices))
    (tmp_path / "bad.json").write_text(json.dumps({"cells": []}))
    with pytest.raises(FormatError):
        load_operator(tmp_path / "bad.json", grid)


def test_make_operator(grid):
    assert make_operator(grid, "surface_line", 4).placement == "surface_line"
    with pytest.raises(ParameterError):
        make_operator(grid, "explicit", 4)


def test_matrix_is_row_selection(small_grid):
    op = MeasurementOperator(small_grid, np.array([1, 4]), "explicit")
    C = op.matrix()
    x = np.arange(small_grid.n, dtype=float)
    assert np.array_equal(C @ x, x[[1, 4]])


def test_noiseless_apply(grid):
    x = np.linspace(0, 1, grid.n)
    op = random_points(grid, 20, 1)
    assert np.array_equal(apply(op, x, NoiseModel()), x[op.indices])
    assert np.array_equal(apply(op, x), x[op.indices])


def test_full_corruption_zero_scale(grid):
    op = random_points(grid, 20, 1)
    y = apply(op, np.ones(grid.n), NoiseModel(0.0, 1.0, 0.0, 3))
    assert np.all(y == 0.0)


def test_noise_std():
    from resrecon.grid import FieldGrid

    big = FieldGrid(50, 20, 1.0, 1.0, np.ones((20, 50), dtype=bool))
    op = random_points(big, 1000, 2)
    y = apply(op, np.zeros(big.n), NoiseModel(0.1, seed=8))
    assert abs(np.std(y) - 0.1) <= 0.005


def test_corruption_count_and_determinism(grid):
    op = random_points(grid, 30, 2)
    noise = NoiseModel(0.0, 0.1, 50.0, 9)
    x = np.full(grid.n, 10.0)
    y, bad = apply(op, x, noise, return_corrupted=True)
    assert bad.size == 3 == n_corrupted(0.1, 30)
    assert np.all(np.abs(y[bad]) <= 50.0)
    assert np.all(np.delete(y, bad) == 10.0)
    y2, bad2 = apply(op, x, noise, return_corrupted=True)
    assert np.array_equal(y, y2) and np.array_equal(bad, bad2)


def test_n_corrupted_ceil():
    assert n_corrupted(0.1, 10) == 1
    assert n_corrupted(0.1, 11) == 2
    assert n_corrupted(0.0, 50) == 0


def test_noise_validation():
    with pytest.raises(ParameterError):
        NoiseModel(-1.0)
    with pytest.raises(ParameterError):
        NoiseModel(0.0, 1.5)


def test_apply_shape(grid):
    with pytest.raises(ShapeError):
        apply(random_points(grid, 3, 0), np.zeros(5))
