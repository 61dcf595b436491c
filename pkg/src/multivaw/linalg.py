"""Dense SPD linear algebra and Kronecker/vec utilities shared by every learner.

All functions are pure and deterministic (LAPACK factorizations with a fixed
summation order); inputs are never mutated.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NotPositiveDefinite,
    RankDeficient,
)

#: Elementwise symmetry tolerance: |a_ij - a_ji| <= SYMMETRY_RTOL * max(1, |a_ij|).
SYMMETRY_RTOL = 1e-12

#: Slack allowed on the Loewner monotonicity check of regularization schedules.
LOEWNER_SLACK = 1e-10


def _as_square(A: np.ndarray, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def is_symmetric(A: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    """Elementwise symmetry test with the package-wide relative tolerance."""
    A = np.asarray(A, dtype=float)
    return bool(np.all(np.abs(A - A.T) <= rtol * np.maximum(1.0, np.abs(A))))


def spd_cholesky(A: np.ndarray, *, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of an SPD matrix.

    Positive definiteness is gated numerically: the factorization must succeed
    and every pivot (squared diagonal of the factor) must exceed
    ``dim * eps * max(diag(A))``.

    Raises
    ------
    NotPositiveDefinite
        If ``A`` is not symmetric, the factorization fails, or a pivot falls
        below the threshold.
    """
    A = _as_square(A, name)
    if not is_symmetric(A):
        raise NotPositiveDefinite(f"{name} is not symmetric")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name}: Cholesky failed ({exc})") from None
    pivots = np.diag(L) ** 2
    floor = A.shape[0] * np.finfo(float).eps * max(float(np.max(np.diag(A))), 0.0)
    if np.any(pivots <= floor):
        raise NotPositiveDefinite(
            f"{name}: pivot {pivots.min():.3e} at or below threshold {floor:.3e}"
        )
    return L


def as_spd(A: np.ndarray, *, name: str = "matrix") -> np.ndarray:
    """Validate the SPD contract (symmetry + Cholesky gate) and return float64 copy."""
    A = _as_square(A, name).copy()
    spd_cholesky(A, name=name)
    return A


def as_feature_matrix(X: np.ndarray, *, cols: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 feature matrix with finite entries.

    A zero-row matrix is legal (empty observation step).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"feature matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix has non-finite entries")
    if cols is not None and X.shape[1] != cols:
        raise DimensionMismatch(
            f"feature matrix has {X.shape[1]} columns, expected {cols}"
        )
    return X


def spd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for SPD ``A`` via Cholesky.

    Parameters
    ----------
    A : (d, d) SPD matrix.
    b : (d,) right-hand side.

    Returns
    -------
    x : (d,) solution with residual ``||A x - b|| <= 1e-9 (1 + ||b||)`` on
        well-conditioned inputs; deterministic for fixed input.
    """
    A = _as_square(A, "A")
    b = np.asarray(b, dtype=float)
    if b.shape != (A.shape[0],):
        raise DimensionMismatch(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    L = spd_cholesky(A, name="A")
    return scipy.linalg.cho_solve((L, True), b)


def spd_inverse(A: np.ndarray) -> np.ndarray:
    """Explicit inverse of an SPD matrix via Cholesky, symmetrized."""
    A = _as_square(A, "A")
    L = spd_cholesky(A, name="A")
    inv = scipy.linalg.cho_solve((L, True), np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def _woodbury_core(A_inv: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Inverse update sans the d x d validation; inputs must already satisfy contracts.

    The result is symmetric only up to rounding; learners re-symmetrize at
    their periodic refresh, the public wrapper immediately.
    """
    n = X.shape[0]
    if n == 0:
        return A_inv.copy()
    AXt = A_inv @ X.T
    M = X @ AXt
    M = 0.5 * (M + M.T)
    M.flat[:: n + 1] += 1.0
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"inner system: Cholesky failed ({exc})") from None
    pivots = L.diagonal() ** 2
    if pivots.min() <= n * np.finfo(float).eps * M.diagonal().max():
        raise NotPositiveDefinite("inner system is numerically singular")
    Z = scipy.linalg.cho_solve((L, True), AXt.T)
    return A_inv - AXt @ Z


def woodbury_update(A_inv: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Inverse of ``A + X^T X`` computed from ``A^{-1}``.

    Uses the low-rank inverse-update identity, so the cost scales as
    ``O(n d^2 + n^2 d + n^3)`` for ``X`` with ``n`` rows instead of the
    ``O(d^3)`` refactorization. The inner ``n x n`` system
    ``I + X A^{-1} X^T`` is SPD for any valid input; a factorization failure
    there signals corrupted state and raises NotPositiveDefinite.
    """
    A_inv = _as_square(A_inv, "A_inv")
    X = as_feature_matrix(X, cols=A_inv.shape[0])
    B = _woodbury_core(A_inv, X)
    return 0.5 * (B + B.T)


def kronecker(u: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result equals ``u[i, j] * V``."""
    u = np.asarray(u, dtype=float)
    V = np.asarray(V, dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(V))):
        raise ValueError("kronecker inputs must be finite")
    return np.kron(u, V)


def vec(M: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization of a matrix.

    The ordering is the one that makes ``vec(A B C) = kron(C^T, A) vec(B)``.
    """
    return np.asarray(M, dtype=float).ravel(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a length ``rows*cols`` vector columnwise."""
    v = np.asarray(v, dtype=float)
    if v.shape != (rows * cols,):
        raise DimensionMismatch(f"vector of length {v.size} cannot fill {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def symmetric_eigenvalues(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted in descending order."""
    A = _as_square(A, "matrix")
    if not is_symmetric(A):
        raise ValueError("matrix is not symmetric")
    try:
        w = np.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"symmetric eigensolver failed: {exc}") from None
    return w[::-1].copy()


def projection_onto_image(S: np.ndarray) -> np.ndarray:
    """Orthogonal projector ``S (S^T S)^{-1} S^T`` onto the column space of S.

    Raises
    ------
    RankDeficient
        If ``S^T S`` fails the SPD gate, i.e. S does not have full column rank.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise DimensionMismatch(f"S must be 2-D, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("S has non-finite entries")
    G = S.T @ S
    G = 0.5 * (G + G.T)
    try:
        L = spd_cholesky(G, name="S^T S")
    except NotPositiveDefinite as exc:
        raise RankDeficient(f"S does not have full column rank: {exc}") from None
    P = S @ scipy.linalg.cho_solve((L, True), S.T)
    return 0.5 * (P + P.T)


def trace_logdet_gap(A: np.ndarray, B: np.ndarray) -> float:
    """Gap ``sum_i log(lam_i(A)/lam_i(B)) - trace(A^{-1}(A - B))``.

    Nonnegative (up to rounding) whenever ``0 < B <= A`` in the Loewner order;
    exposed so the logarithmic-regret machinery can be audited numerically.
    """
    A = _as_square(A, "A")
    B = _as_square(B, "B")
    if A.shape != B.shape:
        raise DimensionMismatch(f"shape mismatch {A.shape} vs {B.shape}")
    wa = symmetric_eigenvalues(A)
    wb = symmetric_eigenvalues(B)
    if np.any(wa <= 0.0) or np.any(wb <= 0.0):
        raise NotPositiveDefinite("both matrices must be positive definite")
    log_sum = float(np.sum(np.log(wa / wb)))
    L = spd_cholesky(A, name="A")
    trace_term = float(np.trace(scipy.linalg.cho_solve((L, True), A - B)))
    return log_sum - trace_term


def is_loewner_nondecreasing(
    previous: np.ndarray, nxt: np.ndarray, slack: float = LOEWNER_SLACK
) -> bool:
    """Whether ``nxt - previous + slack I`` admits a Cholesky factorization."""
    previous = np.asarray(previous, dtype=float)
    nxt = np.asarray(nxt, dtype=float)
    if previous.shape != nxt.shape:
        raise DimensionMismatch(f"shape mismatch {previous.shape} vs {nxt.shape}")
    diff = nxt - previous + slack * np.eye(nxt.shape[0])
    try:
        np.linalg.cholesky(0.5 * (diff + diff.T))
    except np.linalg.LinAlgError:
        return False
    return True
