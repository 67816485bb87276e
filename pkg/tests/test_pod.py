import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resrecon.errors import ParameterError, ShapeError, StateError, UnderdeterminedError
from resrecon.grid import FieldGrid, Snapshot, SnapshotLibrary, center_library
from resrecon.pod import compute_pod, gappy_reconstruct
from resrecon.sensing import MeasurementOperator, random_points


def all_wet(nx, nz):
    return FieldGrid(nx, nz, 1.0, 1.0, np.ones((nz, nx), dtype=bool))


def test_hand_svd_two_by_two():
    g = all_wet(2, 1)
    lib = center_library(SnapshotLibrary(g, np.array([[1.0, 0.0], [0.0, 1.0]])))
    assert np.allclose(lib.matrix, [[0.5, -0.5], [-0.5, 0.5]])
    b = compute_pod(lib, 1)
    assert b.k == 1
    mode = b.modes[:, 0]
    assert np.allclose(np.abs(mode), [2**-0.5, 2**-0.5], atol=1e-14)
    assert mode[0] * mode[1] < 0


def test_rank_one_truncates():
    g = all_wet(3, 1)
    m = np.outer([1.0, 2.0, 3.0], [1.0, -1.0, 2.0])
    b = compute_pod(center_library(SnapshotLibrary(g, m + 5.0)), 2)
    assert (b.k, b.requested_k) == (1, 2)


def test_uncentered_rejected(library):
    with pytest.raises(StateError):
        compute_pod(library, 2)


def test_k_out_of_range(centered):
    with pytest.raises(ParameterError):
        compute_pod(centered, 0)
    with pytest.raises(ParameterError):
        compute_pod(centered, centered.r + 1)


@st.composite
def centered_libs(draw):
    n = draw(st.integers(2, 30))
    r = draw(st.integers(2, 30))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    rank = draw(st.integers(1, min(n, r)))
    m = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, r)) + 3.0
    return center_library(SnapshotLibrary(all_wet(n, 1), m))


@settings(max_examples=60, deadline=None)
@given(centered_libs(), st.integers(1, 30))
def test_pod_invariants(lib, k):
    b = compute_pod(lib, min(k, lib.n, lib.r))
    assert np.max(np.abs(b.modes.T @ b.modes - np.eye(b.k))) <= 1e-10
    assert np.all(np.diff(b.singular_values) <= 0)
    assert np.all(np.diff(b.energy_fractions) >= 0)
    assert b.energy_fractions[-1] <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(centered_libs())
def test_snapshot_and_svd_routes_agree(lib):
    # draws cover both n > r (Gram route) and n <= r (direct SVD)
    k = min(lib.n, lib.r)
    b = compute_pod(lib, k)
    s_ref = np.linalg.svd(lib.matrix, compute_uv=False)[: b.k]
    assert np.allclose(b.singular_values, s_ref, rtol=1e-6, atol=1e-9 * s_ref[0])


def test_sign_convention(centered):
    b = compute_pod(centered, 3)
    for j in range(b.k):
        col = b.modes[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_projection_idempotent(centered):
    b = compute_pod(centered, 2)
    x = centered.mean + centered.matrix[:, 4]
    once = b.project(x)
    assert np.allclose(b.project(once), once, atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_exact_recovery_in_span(grid, centered, k):
    b = compute_pod(centered, k)
    rng = np.random.default_rng(k)
    x = b.mean + b.modes @ rng.normal(0, 5, size=k)
    op = random_points(grid, 2 * k, seed=k)
    res = gappy_reconstruct(b, op, x[op.indices], truth=Snapshot(grid, x))
    assert res.ridge == 0.0
    assert res.report.error1 <= 1e-10


def test_underdetermined_without_ridge():
    g = all_wet(2, 1)
    lib = center_library(SnapshotLibrary(g, np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 2.0]])))
    b = compute_pod(lib, 2)
    op = MeasurementOperator(g, np.array([0]), "explicit")
    with pytest.raises(UnderdeterminedError):
        gappy_reconstruct(b, op, [3.0], regularize=False)
    res = gappy_reconstruct(b, op, [3.0])
    assert res.ridge > 0
    assert np.all(np.isfinite(res.field.values))


def test_ridge_on_ill_conditioned(centered, grid):
    b = compute_pod(centered, 3)
    # three adjacent upstream surface cells: modes barely differ there
    op = MeasurementOperator(grid, np.array([0, 1, 2]), "explicit")
    res = gappy_reconstruct(b, op, b.mean[[0, 1, 2]])
    assert res.info["cond"] > 1e8
    assert res.ridge == pytest.approx(1e-8 * np.linalg.norm(b.modes[[0, 1, 2]], 2) ** 2)
    assert np.all(np.isfinite(res.field.values))


def test_shape_checks(centered, grid):
    b = compute_pod(centered, 2)
    op = random_points(grid, 5, 0)
    with pytest.raises(ShapeError):
        gappy_reconstruct(b, op, np.zeros(4))
    other = FieldGrid.triangular(nx=10, nz=5)
    with pytest.raises(ShapeError):
        gappy_reconstruct(b, random_points(other, 5, 0), np.zeros(5))


def test_truncate(centered):
    b = compute_pod(centered, 4)
    t = b.truncate(2)
    assert t.k == 2
    assert np.array_equal(t.modes, b.modes[:, :2])
    assert b.truncate(10).k == b.k
