"""
Proper orthogonal decomposition and Gappy-POD reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StateError, ParameterError, UnderdeterminedError, ShapeError
from .grid import FieldGrid, Snapshot, SnapshotLibrary

#: singular values below this fraction of the largest are treated as zero
RANK_RTOL = 1e-12
#: condition number of the sampled basis above which a ridge is added
COND_LIMIT = 1e8
#: ridge weight relative to ||C Phi||_2^2
RIDGE_SCALE = 1e-8


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Truncated orthonormal POD modes of a centered library.

    Attributes
    ----------
    modes : ndarray, shape (n, k)
        Orthonormal modes, most energetic first.
    singular_values : ndarray, shape (k,)
    mean : ndarray, shape (n,)
        Library mean the modes fluctuate about.
    energy_fractions : ndarray, shape (k,)
        Cumulative share of the total (untruncated) squared singular values.
    requested_k : int
        Number of modes asked for; ``k`` may be smaller after rank truncation.
    """

    grid: FieldGrid
    modes: np.ndarray
    singular_values: np.ndarray
    mean: np.ndarray
    energy_fractions: np.ndarray
    requested_k: int
    method: str = "svd"

    @property
    def k(self) -> int:
        return self.modes.shape[1]

    def truncate(self, k: int) -> "PodBasis":
        """Leading ``min(k, self.k)`` modes as a new basis."""
        if k < 1:
            raise ParameterError("k must be >= 1")
        kk = min(k, self.k)
        return PodBasis(
            self.grid,
            self.modes[:, :kk],
            self.singular_values[:kk],
            self.mean,
            self.energy_fractions[:kk],
            k,
            self.method,
        )

    def project(self, x) -> np.ndarray:
        """Orthogonal projection of a full field onto ``mean + span(modes)``."""
        x = np.asarray(getattr(x, "values", x), dtype=float)
        return self.mean + self.modes @ (self.modes.T @ (x - self.mean))


def _fix_signs(u: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every mode is made positive
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def compute_pod(lib: SnapshotLibrary, k: int) -> PodBasis:
    """Leading ``k`` left singular vectors of a centered snapshot matrix.

    Uses the snapshot method (eigendecomposition of the ``r x r`` Gram matrix)
    when ``n > r`` and a thin SVD otherwise. The Gram route is followed by a
    QR/SVD refinement of the retained subspace so the modes are orthonormal
    to machine precision.

    If ``k`` exceeds the numerical rank the basis is truncated to that rank;
    ``basis.k`` reports the effective count.
    """
    if not lib.centered:
        raise StateError("compute_pod needs a centered library (see center_library)")
    X = lib.matrix
    n, r = X.shape
    if not 1 <= k <= min(n, r):
        raise ParameterError(f"k={k} outside [1, min(n, r)={min(n, r)}]")

    if n > r:
        method = "snapshot"
        gram = X.T @ X
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        total = float(np.sum(np.clip(evals, 0.0, None)))
        # Gram eigenvalues resolve sigma only down to ~sqrt(eps) of the largest
        keep = evals > max(evals[0], 0.0) * max(RANK_RTOL**2, 1e2 * np.finfo(float).eps)
        kk = int(min(k, keep.sum()))
        if kk == 0:
            raise StateError("library has zero fluctuation energy")
        q, rr = np.linalg.qr(X @ evecs[:, :kk])
        ur, s, _ = np.linalg.svd(rr)
        u = q @ ur
    else:
        method = "svd"
        u, s, _ = np.linalg.svd(X, full_matrices=False)
        total = float(np.sum(s**2))
        kk = 0
        if s[0] > 0:
            kk = int(min(k, np.sum(s > RANK_RTOL * s[0])))
        if kk == 0:
            raise StateError("library has zero fluctuation energy")
        u, s = u[:, :kk], s[:kk]

    keep = s > RANK_RTOL * s[0]
    u, s = u[:, keep], s[keep]
    energy = np.cumsum(s**2) / total
    return PodBasis(lib.grid, _fix_signs(u), s, lib.mean.copy(), energy, k, method)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    """Output of a field reconstruction.

    Attributes
    ----------
    field : Snapshot
        Estimated full field (mean included).
    coefficients : ndarray
        Mode amplitudes (Gappy POD) or dictionary coefficients (sparse).
    residual_norm : float
        ``||y - C x_hat||_2`` at the sensors.
    ridge : float
        Tikhonov weight used by the Gappy-POD solve (0 when none).
    outliers : ndarray or None
        Per-sensor outlier estimates of the robust sparse solve.
    report : ErrorReport or None
        Error metrics, filled when a ground-truth field was supplied.
    info : dict
        Solver bookkeeping (lambda, iterations, convergence, ...).
    """

    field: Snapshot
    coefficients: np.ndarray
    residual_norm: float
    ridge: float = 0.0
    outliers: np.ndarray | None = None
    report: object = None
    info: dict = field(default_factory=dict)


def gappy_reconstruct(basis: PodBasis, op, y, truth=None, regularize: bool = True, band_edges=None):
    """Least-squares fit of POD amplitudes to point measurements.

    Solves ``min_a ||(y - C mean) - (C Phi) a||_2``. When ``cond(C Phi)``
    exceeds ``1e8`` (or there are fewer sensors than modes) a ridge
    ``mu = 1e-8 ||C Phi||_2^2`` is added and recorded in the result.

    Parameters
    ----------
    basis : PodBasis
    op : MeasurementOperator
    y : array_like, shape (p,)
    truth : Snapshot, optional
        Ground-truth field; when given, ``result.report`` holds error metrics.
    regularize : bool
        Allow the ridge. With ``regularize=False`` and ``p < k`` an
        :class:`UnderdeterminedError` is raised.
    """
    from .metrics import error_report

    if not basis.grid.same_as(op.grid):
        raise ShapeError("operator and basis are defined on different grids")
    y = np.asarray(y, dtype=float)
    idx = op.indices
    p, k = len(idx), basis.k
    if y.shape != (p,):
        raise ShapeError(f"y has length {y.size}, operator has p={p}")
    if p < k and not regularize:
        raise UnderdeterminedError(f"{p} sensors cannot determine {k} POD amplitudes")

    A = basis.modes[idx, :]
    b = y - basis.mean[idx]
    sv = np.linalg.svd(A, compute_uv=False)
    smin = sv[-1] if p >= k else 0.0
    cond = np.inf if smin == 0 else sv[0] / smin
    mu = 0.0
    if cond > COND_LIMIT and regularize:
        mu = RIDGE_SCALE * sv[0] ** 2
        a = np.linalg.solve(A.T @ A + mu * np.eye(k), A.T @ b)
    else:
        a, *_ = np.linalg.lstsq(A, b, rcond=None)
    xhat = basis.mean + basis.modes @ a
    resid = float(np.linalg.norm(y - xhat[idx]))
    field_ = Snapshot(basis.grid, xhat, "gappy_pod")
    report = None
    if truth is not None:
        report = error_report(truth, field_, basis.mean, band_edges=band_edges)
    return ReconstructionResult(field_, a, resid, mu, None, report, {"cond": float(cond)})
