"""Dense pseudoinverse kernel with one-feature-append updates.

``pinv_direct`` computes a Moore-Penrose pseudoinverse from a singular value
decomposition and acts as the oracle.  ``stack_row_pinv_under`` and
``stack_row_pinv_over`` append one feature column to the design matrix and
update the pseudoinverse in closed form, one update per regime:

* under (n >= d+1): with P = A A^+, Q = b b^T/|b|^2 and
  z = b^T (I-P) b / |b|^2, the transposed-stack pseudoinverse is
  [(I-Q)(I + PQ/z)(A^+)^T,  (I-P)b / b^T(I-P)b].
* over (n <= d): with G = (A A^T)^-1 and u = b^T G / (1 + b^T G b), it is
  [(I - b u)^T (A^+)^T,  u^T].

Both updates refuse numerically singular inputs instead of producing junk;
callers fall back to ``pinv_direct``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "SingularUpdate",
    "InfeasibleSystem",
    "PinvState",
    "pinv_direct",
    "stack_row_pinv_under",
    "stack_row_pinv_over",
    "projection_quantities",
    "MSpectrum",
    "m_matrix_spectrum",
    "min_norm_solve",
    "cholesky_update",
    "dump_state_csv",
]

# Singular values below max_sv * RCOND_FACTOR * max(n, d) are truncated.
RCOND_FACTOR = 1e-12
# Appends with z below this are refused; 1/z terms would explode.
Z_THRESHOLD = 1e-10
# Relative floor for the rank-one Cholesky update pivot.
CHOL_PIVOT_REL = 1e-12
# Recompute from scratch this often to bound floating-point drift.
RECOMPUTE_EVERY = 64


class SingularUpdate(Exception):
    """An incremental update's hypotheses fail numerically."""


class InfeasibleSystem(Exception):
    """Right-hand side is not in the row space of the system matrix."""


@dataclass(frozen=True)
class PinvState:
    """A design matrix together with its cached pseudoinverse.

    ``matrix`` is the n x d design (rows are training points restricted to
    their first d features); ``pinv`` is d x n.  ``chol_gram`` caches the
    lower Cholesky factor of A A^T when A has full row rank (used by the
    over-regime append); it is None otherwise.  ``appends`` counts updates
    since the last direct factorization.
    """

    matrix: np.ndarray
    pinv: np.ndarray
    cond_estimate: float
    chol_gram: Optional[np.ndarray] = None
    appends: int = 0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    @property
    def regime(self) -> str:
        if self.d < self.n:
            return "under"
        if self.d > self.n:
            return "over"
        return "boundary"


def pinv_direct(matrix: np.ndarray) -> PinvState:
    """Pseudoinverse via SVD with relative singular-value truncation.

    Rank deficiency is reported through ``cond_estimate = inf`` rather than
    an exception.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected a nonempty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("design matrix entries must be finite")
    n, d = a.shape
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0:
        return PinvState(a, np.zeros((d, n)), math.inf)
    cutoff = s[0] * RCOND_FACTOR * max(n, d)
    kept = s > cutoff
    inv_s = np.where(kept, 1.0 / np.where(kept, s, 1.0), 0.0)
    pinv = (vt.T * inv_s) @ u.T
    rank = int(kept.sum())
    if rank < min(n, d):
        cond = math.inf
    else:
        cond = float(s[0] / s[kept][-1])
    chol = None
    if d >= n and rank == n:
        try:
            chol = np.linalg.cholesky(a @ a.T)
        except np.linalg.LinAlgError:
            chol = None
    return PinvState(a, pinv, cond, chol)


def _cond_from_singular_values(a: np.ndarray) -> float:
    s = np.linalg.svd(a, compute_uv=False)
    cutoff = s[0] * RCOND_FACTOR * max(a.shape)
    if s[-1] <= cutoff:
        return math.inf
    return float(s[0] / s[-1])


def _finish_append(new_matrix, new_pinv, chol, appends) -> PinvState:
    if appends >= RECOMPUTE_EVERY:
        return pinv_direct(new_matrix)
    cond = _cond_from_singular_values(new_matrix)
    if chol is None and new_matrix.shape[1] >= new_matrix.shape[0] and math.isfinite(cond):
        # an under-regime append can land exactly on the square boundary;
        # give the state a Gram factor so a subsequent over append works
        try:
            chol = np.linalg.cholesky(new_matrix @ new_matrix.T)
        except np.linalg.LinAlgError:
            chol = None
    return PinvState(new_matrix, new_pinv, cond, chol, appends)


def stack_row_pinv_under(state: PinvState, b: np.ndarray) -> PinvState:
    """Append feature column b to an underparametrized design (n >= d+1).

    Raises :class:`SingularUpdate` when b = 0, when the normalized rejection
    z = b^T(I-P)b/|b|^2 falls below ``Z_THRESHOLD``, or when the current
    state is rank deficient; the caller should fall back to ``pinv_direct``.
    """
    b = np.asarray(b, dtype=float)
    n, d = state.matrix.shape
    if b.shape != (n,):
        raise ValueError(f"b must have shape ({n},), got {b.shape}")
    if d + 1 > n:
        raise ValueError(f"under-regime append needs n >= d+1, got n={n}, d={d}")
    if not math.isfinite(state.cond_estimate):
        raise SingularUpdate("current state is rank deficient")
    bb = float(b @ b)
    if bb == 0.0:
        raise SingularUpdate("b is the zero vector")
    w = state.pinv.T  # (A^+)^T, n x d
    pb = state.matrix @ (state.pinv @ b)  # P b
    z = (bb - float(b @ pb)) / bb
    if z < Z_THRESHOLD:
        raise SingularUpdate(f"z={z:.3e} below threshold; b is numerically in col(A)")
    # (I-Q)(I + PQ/z)(A^+)^T, applied without forming the n x n projectors
    t1 = w + np.outer(pb, b @ w) / (z * bb)
    main = t1 - np.outer(b, b @ t1) / bb
    col = (b - pb) / (bb - float(b @ pb))
    stacked_pinv = np.hstack([main, col[:, None]])  # pinv of [A^T; b^T]
    new_matrix = np.hstack([state.matrix, b[:, None]])
    return _finish_append(new_matrix, stacked_pinv.T, None, state.appends + 1)


def stack_row_pinv_over(state: PinvState, b: np.ndarray) -> PinvState:
    """Append feature column b to a design with full row rank (n <= d)."""
    b = np.asarray(b, dtype=float)
    n, d = state.matrix.shape
    if b.shape != (n,):
        raise ValueError(f"b must have shape ({n},), got {b.shape}")
    if d < n:
        raise ValueError(f"over-regime append needs n <= d, got n={n}, d={d}")
    if state.chol_gram is None or not math.isfinite(state.cond_estimate):
        raise SingularUpdate("A A^T is numerically singular")
    gb = _chol_solve(state.chol_gram, b)
    r = 1.0 + float(b @ gb)
    u = gb / r
    w = state.pinv.T
    main = w - np.outer(u, b @ w)  # (I - b u)^T (A^+)^T
    stacked_pinv = np.hstack([main, u[:, None]])
    new_matrix = np.hstack([state.matrix, b[:, None]])
    trace = float(np.einsum("ij,ij->", new_matrix, new_matrix))
    chol = cholesky_update(state.chol_gram, b, pivot_floor=CHOL_PIVOT_REL * trace)
    return _finish_append(new_matrix, stacked_pinv.T, chol, state.appends + 1)


def _chol_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    y = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, y)


def cholesky_update(chol: np.ndarray, x: np.ndarray, pivot_floor: float = 0.0) -> np.ndarray:
    """Rank-one update: lower Cholesky factor of L L^T + x x^T.

    Standard sequence of Givens-like eliminations, O(n^2).  Raises
    :class:`SingularUpdate` when a pivot falls below ``pivot_floor``.
    """
    lower = np.array(chol, dtype=float)
    x = np.array(x, dtype=float)
    n = x.shape[0]
    for k in range(n):
        r = math.hypot(lower[k, k], x[k])
        if r <= pivot_floor:
            raise SingularUpdate(f"Cholesky pivot {r:.3e} below floor {pivot_floor:.3e}")
        c = r / lower[k, k]
        s = x[k] / lower[k, k]
        lower[k, k] = r
        if k + 1 < n:
            lower[k + 1 :, k] = (lower[k + 1 :, k] + s * x[k + 1 :]) / c
            x[k + 1 :] = c * x[k + 1 :] - s * lower[k + 1 :, k]
    return lower


def projection_quantities(state: PinvState, b: np.ndarray) -> dict:
    """Projection algebra for diagnostics.

    Under regime: {"P", "Q", "z"} with P = A A^+ and Q = b b^T / |b|^2.
    Over regime (and the square boundary): {"G", "u", "r", "w"} with
    G = (A A^T)^-1, r = 1 + b^T G b, u = b^T G / r and w = A^+ b.
    """
    b = np.asarray(b, dtype=float)
    if state.regime == "under":
        p = state.matrix @ state.pinv
        bb = float(b @ b)
        if bb == 0.0:
            raise SingularUpdate("b is the zero vector")
        q = np.outer(b, b) / bb
        z = float(b @ (b - p @ b)) / bb
        return {"P": p, "Q": q, "z": z}
    if state.chol_gram is None:
        raise SingularUpdate("A A^T is numerically singular")
    g = _chol_solve(state.chol_gram, np.eye(state.n))
    gb = g @ b
    r = 1.0 + float(b @ gb)
    return {"G": g, "u": gb / r, "r": r, "w": state.pinv @ b}


@dataclass(frozen=True)
class MSpectrum:
    """Nonzero spectrum of the under-append quadratic-form matrix."""

    eig_low: float
    eig_high: float
    residual_rank: int
    trace: float
    eigenvalues: np.ndarray


def m_matrix_spectrum(p: np.ndarray, q: np.ndarray, z: float, tol: float = 1e-8) -> MSpectrum:
    """Spectrum of M = Q - (PQ+QP)/z + (2/z - 1/z^2) QPQ + QPQPQ/z^2.

    For projectors P (rank d) and Q = b b^T/|b|^2 with z in (0, 1), M has
    rank at most two; its nonzero eigenvalues are 1 - 1/z and 1, and
    tr(M) = 2 - 1/z.  The quadratic form v^T M v is the exact drop
    |v|^2 - |(I-Q)(I + PQ/z) v|^2 behind the under-regime append.
    """
    if not 0.0 < z < 1.0:
        raise ValueError(f"z must lie in (0, 1), got {z}")
    pq = p @ q
    qpq = q @ pq
    m = q - (pq + pq.T) / z + (2.0 / z - 1.0 / z**2) * qpq + (qpq @ pq) / z**2
    eigs = np.linalg.eigvalsh(m)
    nonzero = eigs[np.abs(eigs) > tol]
    return MSpectrum(
        eig_low=float(eigs[0]),
        eig_high=float(eigs[-1]),
        residual_rank=int(nonzero.size),
        trace=float(np.trace(m)),
        eigenvalues=eigs,
    )


def min_norm_solve(matrix: np.ndarray, y: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Minimum-Euclidean-norm solution of B z = y.

    Uses an SVD-backed least-squares solve, then checks feasibility: the
    residual must satisfy |Bz - y| <= rtol * |y|, otherwise
    :class:`InfeasibleSystem` is raised.
    """
    b = np.asarray(matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    sol, *_ = np.linalg.lstsq(b, y, rcond=None)
    residual = float(np.linalg.norm(b @ sol - y))
    if residual > rtol * max(float(np.linalg.norm(y)), 1e-300):
        raise InfeasibleSystem(f"residual {residual:.3e} exceeds {rtol:.1e} * |y|")
    return sol


def dump_state_csv(state: PinvState, path) -> None:
    """Write the design matrix and its pseudoinverse as CSV for inspection."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={state.n} d={state.d} regime={state.regime}\n")
        fh.write(f"# cond_estimate={state.cond_estimate!r}\n")
        fh.write("# matrix rows\n")
        for row in state.matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
        fh.write("# pinv rows\n")
        for row in state.pinv:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
