import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resrecon.errors import ParameterError
from resrecon.grid import center_library
from resrecon.pod import compute_pod
from resrecon.synth import (
    INTAKE_DEPTHS,
    StratificationParams,
    draw_params,
    generate_library,
    generate_snapshot,
    seasonal_params,
    vertical_profile,
)


def test_isothermal_field(grid):
    p = StratificationParams(
        t_surface=10.0, t_bottom=10.0, longitudinal_gradient=0.0, intake_strength=0.0, perturbation_amplitude=0.0
    )
    assert np.all(generate_snapshot(grid, p).values == 10.0)


def test_logistic_midpoint():
    p = StratificationParams(t_surface=20.0, t_bottom=5.0, thermocline_depth=10.0, thermocline_width=2.0)
    assert vertical_profile(10.0, p) == pytest.approx(12.5, abs=1e-12)


def test_deterministic(grid):
    p = StratificationParams(seed=7)
    a, b = generate_snapshot(grid, p), generate_snapshot(grid, p)
    assert np.array_equal(a.values, b.values)


def test_perturbation_small_and_seeded(grid):
    base = StratificationParams(perturbation_amplitude=0.0)
    clean = generate_snapshot(grid, base).values
    d1 = generate_snapshot(grid, base.replace(perturbation_amplitude=0.1, seed=1)).values - clean
    d2 = generate_snapshot(grid, base.replace(perturbation_amplitude=0.1, seed=2)).values - clean
    assert np.max(np.abs(d1)) <= 0.1 + 1e-12
    assert not np.allclose(d1, d2)


def test_intake_cools_its_depth(grid):
    col = grid.column_indices(grid.nx - 1)
    z = grid.depth[col]
    p = StratificationParams(perturbation_amplitude=0.0)
    on = generate_snapshot(grid, p.replace(intake_depth=45.0)).values[col]
    off = generate_snapshot(grid, p.replace(intake_strength=0.0)).values[col]
    cooling = off - on
    assert z[np.argmax(cooling)] == pytest.approx(45.0, abs=grid.dz)
    assert cooling.max() == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("bad", [-1.0, 61.0])
def test_intake_outside_column(grid, bad):
    with pytest.raises(ParameterError):
        generate_snapshot(grid, StratificationParams(intake_depth=bad))


@pytest.mark.parametrize(
    "kw",
    [
        {"t_surface": 5.0, "t_bottom": 6.0},
        {"thermocline_width": 0.0},
        {"intake_strength": -1.0},
        {"perturbation_amplitude": -0.1},
    ],
)
def test_param_validation(kw):
    with pytest.raises(ParameterError):
        StratificationParams(**kw)


def test_single_snapshot_library(grid):
    p = StratificationParams()
    lib = generate_library(grid, p, 1)
    assert np.array_equal(lib.matrix[:, 0], generate_snapshot(grid, p).values)


def test_zero_spread_rank_one(grid):
    lib = generate_library(grid, StratificationParams(), 5)
    assert np.all(lib.matrix == lib.matrix[:, :1])
    assert np.linalg.matrix_rank(lib.matrix) == 1


def test_thermocline_spread_energy(centered):
    # measured 0.9995 for seeds 0..4; 95 % is the contract
    basis = compute_pod(centered, 2)
    assert basis.energy_fractions[1] >= 0.95


def test_library_deterministic(grid):
    spread = {"thermocline_depth": (8.0, 16.0), "t_surface": (18.0, 24.0)}
    a = generate_library(grid, StratificationParams(), 4, spread, seed=11)
    b = generate_library(grid, StratificationParams(), 4, spread, seed=11)
    assert np.array_equal(a.matrix, b.matrix)
    assert a.labels == ("train-000", "train-001", "train-002", "train-003")


def test_unknown_spread_key(grid):
    with pytest.raises(ParameterError):
        generate_library(grid, StratificationParams(), 2, {"seed": (0, 3)})


@settings(max_examples=40, deadline=None)
@given(st.floats(120.0, 300.0))
def test_seasonal_params_in_range(day):
    base = StratificationParams(t_surface=22.0, t_bottom=6.0, thermocline_depth=20.0)
    p = seasonal_params(base, day)
    assert base.t_bottom <= p.t_surface <= base.t_surface
    assert 10.0 <= p.thermocline_depth <= 30.0


def test_seasonal_out_of_season():
    with pytest.raises(ParameterError):
        seasonal_params(StratificationParams(), 30.0)


def test_draw_intake_choices():
    rng = np.random.default_rng(0)
    seen = {draw_params(StratificationParams(), {"intake_choices": INTAKE_DEPTHS}, rng).intake_depth for _ in range(60)}
    assert seen == set(INTAKE_DEPTHS)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 60.0), st.floats(6.0, 25.0), st.floats(0.5, 5.0))
def test_monotone_column_without_intake(tc, ts, w):
    # warm on top: with no intake bump each column cools with depth
    from resrecon.grid import FieldGrid

    g = FieldGrid.triangular(nx=6, nz=10, dz=6.0)
    p = StratificationParams(t_surface=ts, t_bottom=5.0, thermocline_depth=tc, thermocline_width=w, intake_strength=0.0)
    v = generate_snapshot(g, p).values
    col = v[g.column_indices(g.nx - 1)]
    assert np.all(np.diff(col) <= 1e-12)
