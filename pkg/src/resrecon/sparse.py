"""
Sparse-representation reconstruction (basis pursuit denoising).

The constrained problem

    min ||s||_1  subject to  ||y - D s||_2 <= eps

is solved through its penalized form ``0.5 ||y - D s||^2 + lam ||s||_1``
with FISTA, bisecting on ``lam`` until the residual sits in
``[eps (1 - rtol), eps]``. The support and signs found that way are then
polished: on a fixed support the lasso path is affine in ``lam``, so the
``lam`` giving a residual of exactly ``eps`` has a closed form, and the
polished point is kept only if it satisfies the optimality conditions.

``eps = 0`` (and any ``eps`` below the least-squares residual) is handled
by ADMM on the equality-constrained basis pursuit problem. There a
residual below ``1e-9 ||y||`` counts as zero, since projecting ``y`` onto
the range of an ill-conditioned dictionary leaves roundoff of that size.

Before solving, ``y`` is scaled to unit norm and the dictionary by its
largest column norm, which makes every tolerance scale free without
changing the minimizer. Per-column unit normalization is available through
``SolverOptions.normalize_columns``; it turns the objective into a weighted
L1 norm ``sum_j ||d_j|| |s_j|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, ShapeError, StateError
from .grid import FieldGrid, Snapshot, SnapshotLibrary
from .pod import PodBasis, ReconstructionResult

KINDS = ("raw_snapshots", "pod_modes")

#: singular values of the (scaled) dictionary below this fraction of the largest count as zero
RANK_RTOL = 1e-10
#: residual (relative to ||y||) accepted as zero when epsilon is 0
BP_RESIDUAL_FLOOR = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of :func:`bpdn_solve` / :func:`robust_solve`.

    ``max_iter`` bounds the iterations of a whole solve, summed over every
    step of the ``lam`` bisection; ``tol`` is the relative iterate change
    that ends one inner solve.
    ``weight_e`` scales the identity columns of the robust formulation
    relative to the unit-norm dictionary columns; the outlier penalty is
    effectively ``||e||_1 / weight_e``.
    """

    max_iter: int = 50000
    tol: float = 1e-10
    residual_rtol: float = 1e-3
    optimality_tol: float = 1e-4
    max_bisect: int = 200
    polish: bool = True
    polish_every: int = 20
    admm_rho: float = 1.0
    weight_e: float = 1.0
    normalize_columns: bool = False

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class SparseSolution:
    s: np.ndarray
    e: np.ndarray | None
    residual_norm: float
    l1_norm: float
    iterations: int
    epsilon: float
    converged: bool
    lam: float = 0.0
    info: dict = field(default_factory=dict)


def choose_epsilon(sigma: float, p: int) -> float:
    """Expected norm ``sigma * sqrt(p)`` of a ``p``-vector of N(0, sigma^2) noise."""
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    return float(sigma * np.sqrt(p)) if sigma > 0 else 0.0


def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _support_lasso(D, y, lam, x, kkt_tol=1e-9):
    """Exact lasso minimizer on the support/signs of ``x``, or None if not optimal."""
    S = np.flatnonzero(x)
    if S.size == 0 or S.size > D.shape[0]:
        return None
    DS = D[:, S]
    sgn = np.sign(x[S])
    G = DS.T @ DS
    if np.linalg.cond(G) > 1e12:
        return None
    u = np.linalg.solve(G, DS.T @ y - lam * sgn)
    if np.any(np.sign(u) != sgn):
        return None
    out = np.zeros_like(x)
    out[S] = u
    corr = D.T @ (y - D @ out)
    if np.max(np.abs(corr)) > lam * (1 + kkt_tol) + 1e-14:
        return None
    return out


def _lasso_fista(D, y, lam, x0, L, opts: SolverOptions, budget=None):
    """FISTA with adaptive restart; returns (x, iterations, converged)."""
    budget = opts.max_iter if budget is None else budget
    x = x0.copy()
    z = x.copy()
    t = 1.0
    for it in range(1, budget + 1):
        grad = D.T @ (D @ z - y)
        x_new = _soft(z - grad / L, lam / L)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        step = x_new - x
        if np.dot(z - x_new, step) > 0:
            # momentum is pointing uphill
            t_new = 1.0
            z = x_new.copy()
        else:
            z = x_new + ((t - 1.0) / t_new) * step
        change = np.linalg.norm(step) / max(np.linalg.norm(x_new), 1e-300)
        x, t = x_new, t_new
        if opts.polish and it % opts.polish_every == 0:
            exact = _support_lasso(D, y, lam, x)
            if exact is not None:
                return exact, it, True
        if change < opts.tol:
            return x, it, True
    return x, budget, False


def _residual(D, y, x):
    return float(np.linalg.norm(y - D @ x))


def _basis_pursuit(D, y, opts: SolverOptions):
    """``min ||s||_1 s.t. D s = P y`` (P: projection on range(D)) by ADMM."""
    m = D.shape[1]
    Dp = np.linalg.pinv(D, rcond=RANK_RTOL)
    q = Dp @ y
    P = np.eye(m) - Dp @ D
    target = D @ q
    rho = opts.admm_rho
    z = np.zeros(m)
    u = np.zeros(m)
    best = q
    iters, converged = opts.max_iter, False
    for it in range(1, opts.max_iter + 1):
        x = P @ (z - u) + q
        z_new = _soft(x + u, 1.0 / rho)
        u = u + x - z_new
        change = np.linalg.norm(z_new - z) / max(np.linalg.norm(z_new), 1e-300)
        z = z_new
        if opts.polish and it % opts.polish_every == 0:
            # rho * u is a subgradient of ||z||_1 lying in range(D^T)
            exact = _bp_polish(D, target, z, duals=(Dp.T @ (rho * u),))
            if exact is not None:
                best, iters, converged = exact, it, True
                break
        if change < opts.tol and np.linalg.norm(x - z) < opts.tol * max(np.linalg.norm(z), 1.0):
            iters, converged = it, True
            best = _bp_polish(D, target, z, certify=False)
            if best is None:
                best = x
            break
    else:
        best = x
    return best, iters, converged


def _bp_polish(D, target, z, certify=True, duals=()):
    """Vertex on the support of ``z``.

    With ``certify`` the vertex is returned only when some dual-feasible
    ``nu`` (``||D^T nu||_inf <= 1``) closes the duality gap
    ``||s||_1 - target . nu``; candidates are the minimum-norm sign
    certificate and any ``duals`` supplied by the caller.
    """
    scale = np.max(np.abs(z))
    if scale == 0:
        return None
    tried = set()
    for thresh in (1e-9, 1e-7, 1e-5):
        S = np.flatnonzero(np.abs(z) > thresh * scale)
        key = tuple(S)
        if key in tried:
            continue
        tried.add(key)
        out = _bp_vertex(D, target, S)
        if out is None:
            continue
        if not certify:
            if np.abs(out).sum() <= np.abs(z).sum() * (1 + 1e-9):
                return out
            continue
        l1 = np.abs(out).sum()
        sgn = np.sign(out[S])
        nu0, *_ = np.linalg.lstsq(D[:, S].T, sgn, rcond=None)
        for nu in (nu0, *duals):
            bound = np.max(np.abs(D.T @ nu))
            if bound == 0:
                continue
            lower = float(target @ nu) / max(bound, 1.0)
            if l1 - lower <= 1e-9 * max(l1, 1e-300):
                return out
    return None


def _bp_vertex(D, target, S):
    DS = D[:, S]
    if S.size == 0 or S.size > D.shape[0] or np.linalg.matrix_rank(DS, rtol=RANK_RTOL) < S.size:
        return None
    uS, *_ = np.linalg.lstsq(DS, target, rcond=None)
    if np.linalg.norm(DS @ uS - target) > 1e-10 * max(np.linalg.norm(target), 1e-300):
        return None
    out = np.zeros(D.shape[1])
    out[S] = uS
    return out


def _polish_to_epsilon(D, y, eps, x):
    """Exact BPDN point on the support/signs of ``x`` with residual ``eps``."""
    S = np.flatnonzero(x)
    if S.size == 0 or S.size > D.shape[0]:
        return None
    DS = D[:, S]
    sgn = np.sign(x[S])
    G = DS.T @ DS
    if np.linalg.cond(G) > 1e12:
        return None
    a = np.linalg.solve(G, DS.T @ y)
    b = np.linalg.solve(G, sgn)
    r0 = y - DS @ a
    w = DS @ b
    slack = eps**2 - r0 @ r0
    ww = w @ w
    if slack < 0 or ww == 0:
        return None
    lam = np.sqrt(slack / ww)
    u = a - lam * b
    if np.any(np.sign(u) != sgn):
        return None
    out = np.zeros_like(x)
    out[S] = u
    corr = D.T @ (y - D @ out)
    if np.max(np.abs(corr)) > lam * (1 + 1e-9) + 1e-14:
        return None
    return out, lam


def _solve_unit(D, y, eps, opts: SolverOptions):
    """BPDN on unit-norm columns and ``||y|| = 1``; returns (x, lam, iters, converged, info)."""
    m = D.shape[1]
    ls, *_ = np.linalg.lstsq(D, y, rcond=RANK_RTOL)
    r_min = _residual(D, y, ls)
    if eps <= r_min * (1 + 1e-12):
        x, iters, ok = _basis_pursuit(D, y, opts)
        # residuals under 1e-9 ||y|| are roundoff in the range projection
        feasible = _residual(D, y, x) <= eps * (1 + 1e-6) + BP_RESIDUAL_FLOOR
        return x, 0.0, iters, ok and feasible, {"branch": "basis_pursuit", "ls_residual": r_min}

    L = float(np.linalg.norm(D, 2) ** 2)
    lam_hi = float(np.max(np.abs(D.T @ y)))
    x_hi = np.zeros(m)
    total = 0
    all_ok = True
    # walk down until the residual drops below eps
    lam_lo, x_lo = lam_hi, x_hi
    x = x_hi
    for _ in range(60):
        lam_lo *= 0.1
        x, it, ok = _lasso_fista(D, y, lam_lo, x, L, opts, opts.max_iter - total)
        total += it
        all_ok &= ok
        if _residual(D, y, x) <= eps:
            x_lo = x
            break
        lam_hi, x_hi = lam_lo, x
        if total >= opts.max_iter:
            return x, lam_lo, total, False, {"branch": "lasso", "reason": "iteration budget spent"}
    else:
        return x, lam_lo, total, False, {"branch": "lasso", "reason": "no feasible lambda"}

    state = [lam_lo, x_lo, lam_hi, x_hi, total, all_ok]

    def bisect(rtol):
        lam_lo, x_lo, lam_hi, x_hi, total, all_ok = state
        for _ in range(opts.max_bisect):
            if eps * (1 - rtol) <= _residual(D, y, x_lo) <= eps:
                break
            if lam_hi / lam_lo - 1 < 1e-14:
                break
            if total >= opts.max_iter:
                all_ok = False
                break
            lam = np.sqrt(lam_lo * lam_hi)
            x, it, ok = _lasso_fista(D, y, lam, x_lo, L, opts, opts.max_iter - total)
            total += it
            all_ok &= ok
            if _residual(D, y, x) <= eps:
                lam_lo, x_lo = lam, x
            else:
                lam_hi, x_hi = lam, x
        state[:] = [lam_lo, x_lo, lam_hi, x_hi, total, all_ok]

    def polish():
        # the support at eps matches one side of the final bracket
        for x in (state[1], state[3]):
            pol = _polish_to_epsilon(D, y, eps, x)
            if pol is not None:
                return pol
        return None

    bisect(opts.residual_rtol)
    info = {"branch": "lasso", "polished": False}
    x_best, lam = state[1], state[0]
    if opts.polish:
        pol = polish()
        if pol is None:
            # a support change lies inside the bracket; narrow it and retry
            bisect(1e-10)
            x_best, lam = state[1], state[0]
            pol = polish()
        if pol is not None:
            x_best, lam = pol
            info["polished"] = True
    total, all_ok = state[4], state[5]
    feasible = _residual(D, y, x_best) <= eps * (1 + 1e-6)
    return x_best, float(lam), total, all_ok and feasible, info


def _unit_problem(D, y, opts: SolverOptions):
    """Validate and return (D, y, column scales); zero columns get scale 0."""
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    if D.ndim != 2 or y.shape != (D.shape[0],):
        raise ShapeError(f"dictionary {D.shape} and measurement {y.shape} disagree")
    if not np.all(np.isfinite(D)) or not np.all(np.isfinite(y)):
        raise ParameterError("non-finite entries in dictionary or measurements")
    norms = np.linalg.norm(D, axis=0)
    if not np.any(norms > 0):
        raise ParameterError("dictionary is identically zero")
    if opts.normalize_columns:
        return D, y, norms
    return D, y, np.where(norms > 0, norms.max(), 0.0)


def _finish(D, y, coef, e, lam, iters, eps, converged, info):
    fit = D @ coef + (e if e is not None else 0.0)
    resid = float(np.linalg.norm(y - fit))
    l1 = float(np.abs(coef).sum() + (np.abs(e).sum() if e is not None else 0.0))
    return SparseSolution(coef, e, resid, l1, iters, float(eps), bool(converged), float(lam), info)


def bpdn_solve(dict_measured, y, epsilon: float, opts: SolverOptions | None = None) -> SparseSolution:
    """Basis pursuit denoising ``min ||s||_1 s.t. ||y - D s||_2 <= epsilon``.

    Parameters
    ----------
    dict_measured : ndarray, shape (p, m)
        Dictionary sampled at the sensors (``C Psi``).
    y : ndarray, shape (p,)
    epsilon : float
        Residual tolerance, >= 0.
    opts : SolverOptions, optional

    Returns
    -------
    SparseSolution
        ``converged`` is False when the iteration limit was hit or when no
        ``s`` reaches the requested residual; ``s`` is then the best iterate
        (the least-residual, minimum-L1 point in the infeasible case).
    """
    opts = opts or SolverOptions()
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    D, y, norms = _unit_problem(dict_measured, y, opts)
    m = D.shape[1]
    ynorm = float(np.linalg.norm(y))
    if epsilon >= ynorm:
        return _finish(D, y, np.zeros(m), None, 0.0, 0, epsilon, True, {"branch": "zero"})
    live = norms > 0
    Dn = D[:, live] / norms[live]
    x, lam, iters, ok, info = _solve_unit(Dn, y / ynorm, epsilon / ynorm, opts)
    coef = np.zeros(m)
    coef[live] = x * ynorm / norms[live]
    return _finish(D, y, coef, None, lam * ynorm, iters, epsilon, ok, info)


def robust_solve(dict_measured, y, epsilon: float, opts: SolverOptions | None = None) -> SparseSolution:
    """BPDN over the augmented dictionary ``[D | weight_e I]``.

    Jointly minimizes ``||s||_1 + ||e||_1 / weight_e`` subject to
    ``||y - D s - e||_2 <= epsilon`` (``D`` scaled to unit largest column), so gross
    errors on a few sensors are absorbed by the sparse vector ``e``.
    With ``weight_e = 0`` the outlier columns are suppressed and the call is
    exactly :func:`bpdn_solve`.

    L1 ties between ``s`` and ``e`` (e.g. a dictionary column equal to a
    unit vector) resolve to the minimum-L2 split, an even split at the
    default weight.
    """
    opts = opts or SolverOptions()
    if opts.weight_e < 0:
        raise ParameterError("weight_e must be >= 0")
    if opts.weight_e == 0:
        sol = bpdn_solve(dict_measured, y, epsilon, opts)
        return replace(sol, e=np.zeros(len(np.asarray(y))))
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    D, y, norms = _unit_problem(dict_measured, y, opts)
    p, m = D.shape
    ynorm = float(np.linalg.norm(y))
    if epsilon >= ynorm:
        return _finish(D, y, np.zeros(m), np.zeros(p), 0.0, 0, epsilon, True, {"branch": "zero"})
    live = norms > 0
    A = np.hstack([D[:, live] / norms[live], opts.weight_e * np.eye(p)])
    x, lam, iters, ok, info = _solve_unit(A, y / ynorm, epsilon / ynorm, opts)
    nl = int(live.sum())
    coef = np.zeros(m)
    coef[live] = x[:nl] * ynorm / norms[live]
    e = opts.weight_e * x[nl:] * ynorm
    return _finish(D, y, coef, e, lam * ynorm, iters, epsilon, ok, info)


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Atoms whose sparse combinations (plus ``mean``) approximate a field."""

    grid: FieldGrid
    kind: str
    atoms: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}")
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] != self.grid.n:
            raise ShapeError(f"atoms have shape {atoms.shape}, grid has n={self.grid.n}")
        if not np.all(np.isfinite(atoms)):
            raise ParameterError("atoms must be finite")
        if np.any(np.linalg.norm(atoms, axis=0) == 0):
            raise ParameterError("dictionary atoms must have nonzero norm")
        if self.kind == "pod_modes":
            gram = atoms.T @ atoms
            if np.max(np.abs(gram - np.eye(atoms.shape[1]))) > 1e-8:
                raise ParameterError("pod_modes atoms must be orthonormal")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_library(cls, lib: SnapshotLibrary) -> "Dictionary":
        """Raw training fluctuations as atoms."""
        if not lib.centered:
            raise StateError("build the dictionary from a centered library")
        return cls(lib.grid, "raw_snapshots", lib.matrix, lib.mean)

    @classmethod
    def from_pod(cls, basis: PodBasis) -> "Dictionary":
        return cls(basis.grid, "pod_modes", basis.modes, basis.mean)

    @property
    def m(self) -> int:
        return self.atoms.shape[1]

    @property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.atoms, axis=0)

    def measured(self, op) -> np.ndarray:
        return self.atoms[op.indices, :]


def assemble(dictionary: Dictionary, sol, rescale: bool = False, library_energy: float | None = None) -> Snapshot:
    """Full field ``mean + atoms @ s``.

    With ``rescale`` the fluctuation is scaled to have L2 norm
    ``library_energy`` (mean norm of the centered training columns).
    """
    s = np.asarray(getattr(sol, "s", sol), dtype=float)
    if s.shape != (dictionary.m,):
        raise ShapeError(f"{s.size} coefficients for {dictionary.m} atoms")
    if rescale and library_energy is None:
        raise ParameterError("rescale needs library_energy")
    f = dictionary.atoms @ s
    if rescale:
        nf = np.linalg.norm(f)
        if nf > 0:
            f = f * (library_energy / nf)
    return Snapshot(dictionary.grid, dictionary.mean + f, dictionary.kind)


def sparse_reconstruct(
    dictionary: Dictionary,
    op,
    y,
    epsilon: float,
    robust: bool = False,
    opts: SolverOptions | None = None,
    rescale: bool = False,
    library_energy: float | None = None,
    truth: Snapshot | None = None,
    band_edges=None,
) -> ReconstructionResult:
    """Sparse reconstruction of a full field from sensor readings ``y``."""
    from .metrics import error_report

    if not dictionary.grid.same_as(op.grid):
        raise ShapeError("operator and dictionary are defined on different grids")
    y = np.asarray(y, dtype=float)
    b = y - dictionary.mean[op.indices]
    D = dictionary.measured(op)
    solve = robust_solve if robust else bpdn_solve
    sol = solve(D, b, epsilon, opts)
    xhat = assemble(dictionary, sol, rescale, library_energy)
    fit = xhat.values[op.indices] + (sol.e if sol.e is not None else 0.0)
    resid = float(np.linalg.norm(y - fit))
    report = None
    if truth is not None:
        report = error_report(truth, xhat, dictionary.mean, band_edges=band_edges)
    info = {
        "lambda": sol.lam,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "epsilon": sol.epsilon,
        "l1_norm": sol.l1_norm,
        **sol.info,
    }
    return ReconstructionResult(xhat, sol.s, resid, 0.0, sol.e, report, info)
