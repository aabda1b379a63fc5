"""Dense linear algebra for small matrices.

Everything here is a pure function of its inputs: Householder QR, extreme
singular values by power iteration, and the principal angle distance
between column spaces.

Example
-------
>>> import numpy as np
>>> from fedsubspace.linalg import principal_angle_distance
>>> round(principal_angle_distance(np.eye(4)[:, :2], np.eye(4)[:, 2:]), 12)
1.0
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import DimensionError, NoConvergenceError, RankDeficientError

FloatArray = NDArray[np.float64]

_RANK_TOL = 1e-12
_POWER_RTOL = 1e-12
_SINGULAR_TOL = 1e-14


def _as_matrix(A: ArrayLike) -> FloatArray:
    matrix = np.asarray(A, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {matrix.shape}")
    if matrix.size == 0:
        raise DimensionError("matrix must be nonempty")
    return matrix


def _iteration_cap(shape: tuple[int, ...]) -> int:
    return 10 * max(shape) + 1000


# -- Householder QR ---------------------------------------------------------


def _householder(A: FloatArray) -> tuple[list[FloatArray], FloatArray]:
    """Triangularize *A*; return the unit reflector vectors and ``R`` (n x k)."""
    n, k = A.shape
    if k > n:
        raise DimensionError(f"need at most as many columns as rows, got {n}x{k}")
    scale = float(np.max(np.linalg.norm(A, axis=0)))
    R = A.copy()
    reflectors: list[FloatArray] = []
    for j in range(k):
        x = R[j:, j]
        norm_x = float(np.linalg.norm(x))
        if norm_x <= _RANK_TOL * scale or norm_x == 0.0:
            raise RankDeficientError(f"column {j} is numerically dependent on the previous ones")
        v = x.copy()
        v[0] += math.copysign(norm_x, x[0])
        v /= np.linalg.norm(v)
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
        reflectors.append(v)
    return reflectors, R


def _apply_reflectors(reflectors: list[FloatArray], Q: FloatArray) -> FloatArray:
    for j in reversed(range(len(reflectors))):
        v = reflectors[j]
        Q[j:, :] -= 2.0 * np.outer(v, v @ Q[j:, :])
    return Q


def orthonormalize(A: ArrayLike) -> tuple[FloatArray, FloatArray]:
    """Thin QR factorization of a full-column-rank matrix.

    Parameters
    ----------
    A:
        An ``n x k`` matrix with ``k <= n``.

    Returns
    -------
    tuple
        ``(Q, R)`` with orthonormal ``Q`` (n x k) and upper-triangular ``R``
        (k x k) whose diagonal is nonnegative, which makes the pair unique.

    Raises
    ------
    RankDeficientError
        If a column norm during elimination drops below ``1e-12`` times the
        largest column norm of *A*.
    """
    matrix = _as_matrix(A)
    n, k = matrix.shape
    reflectors, R = _householder(matrix)
    Q = _apply_reflectors(reflectors, np.eye(n, k))
    signs = np.where(np.diag(R[:k, :k]) < 0.0, -1.0, 1.0)
    Q *= signs
    R_thin = np.triu(R[:k, :]) * signs[:, None]
    return Q, R_thin


def orthogonal_complement(A: ArrayLike) -> FloatArray:
    """Orthonormal basis (n x (n-k)) of the orthogonal complement of col(A)."""
    matrix = _as_matrix(A)
    n, k = matrix.shape
    reflectors, _ = _householder(matrix)
    full_q = _apply_reflectors(reflectors, np.eye(n))
    return np.ascontiguousarray(full_q[:, k:])


# -- extreme singular values ------------------------------------------------


def _dominant_eigenvalue(gram: FloatArray, max_iter: int) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    n = gram.shape[0]
    x = np.full(n, 1.0 / math.sqrt(n))
    if not np.any(gram @ x):
        # all-ones start lies in the nullspace
        norms = np.linalg.norm(gram, axis=0)
        j = int(np.argmax(norms))
        if norms[j] == 0.0:
            return 0.0
        x = gram[:, j] / norms[j]
    lam = _power_iterate(gram, x, max_iter)
    if n > 1:
        # the all-ones vector may itself be an eigenvector of a smaller eigenvalue
        ramp = np.arange(1.0, n + 1.0)
        lam = max(lam, _power_iterate(gram, ramp / np.linalg.norm(ramp), max_iter))
    return lam


def _power_iterate(gram: FloatArray, x: FloatArray, max_iter: int) -> float:
    """Rayleigh quotient of *gram* after power iteration from unit *x*.

    The iteration matrix is squared after every step, so the number of steps
    grows only logarithmically as the top eigenvalues cluster.
    """
    power = gram / np.max(np.abs(gram))
    lam = float(x @ gram @ x)
    for _ in range(max_iter):
        y = power @ x
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            norms = np.linalg.norm(power, axis=0)
            j = int(np.argmax(norms))
            y = power[:, j]
            norm_y = float(norms[j])
        x = y / norm_y
        lam_next = float(x @ gram @ x)
        if abs(lam_next - lam) <= _POWER_RTOL * abs(lam_next):
            return max(lam_next, 0.0)
        lam = lam_next
        power = power @ power
        power /= np.max(np.abs(power))
    raise NoConvergenceError(max_iter, "power iteration on the Gram matrix")


def _small_gram(matrix: FloatArray) -> FloatArray:
    rows, cols = matrix.shape
    return matrix.T @ matrix if cols <= rows else matrix @ matrix.T


def spectral_norm(A: ArrayLike) -> float:
    """Largest singular value of *A*.

    Runs power iteration on the Gram matrix of the smaller side, starting
    from the normalized all-ones vector, until the Rayleigh quotient changes
    by less than ``1e-12`` relatively.

    Raises
    ------
    NoConvergenceError
        If ``10 * max(rows, cols) + 1000`` iterations do not reach tolerance.
    """
    matrix = _as_matrix(A)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    if not np.any(matrix):
        return 0.0
    gram = _small_gram(matrix)
    return math.sqrt(_dominant_eigenvalue(gram, _iteration_cap(matrix.shape)))


def min_singular_value(A: ArrayLike) -> float:
    """Smallest of the ``min(rows, cols)`` singular values of *A*.

    Works on the small Gram matrix: returns ``0.0`` when the Gram is singular
    to ``1e-14`` relative to its largest diagonal entry, and otherwise runs
    power iteration on its inverse.
    """
    matrix = _as_matrix(A)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    gram = _small_gram(matrix)
    scale = float(np.max(np.diag(gram)))
    if scale == 0.0:
        return 0.0
    try:
        cholesky = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return 0.0
    if float(np.min(np.diag(cholesky))) ** 2 <= _SINGULAR_TOL * scale:
        return 0.0
    inverse = np.linalg.solve(gram, np.eye(gram.shape[0]))
    inverse = 0.5 * (inverse + inverse.T)
    largest = _dominant_eigenvalue(inverse, _iteration_cap(matrix.shape))
    if largest <= 0.0:
        return 0.0
    return 1.0 / math.sqrt(largest)


# -- subspace distance ------------------------------------------------------


def projection_residual_norm(B_hat: ArrayLike, A: ArrayLike) -> float:
    """Return ``||(I - B_hat B_hat^T) A||_2`` for an orthonormal ``B_hat``."""
    basis = _as_matrix(B_hat)
    matrix = _as_matrix(A)
    if basis.shape[0] != matrix.shape[0]:
        raise DimensionError(f"row mismatch: {basis.shape} vs {matrix.shape}")
    return spectral_norm(matrix - basis @ (basis.T @ matrix))


def principal_angle_distance(B1: ArrayLike, B2: ArrayLike) -> float:
    """Sine of the largest principal angle between ``col(B1)`` and ``col(B2)``.

    Both arguments are orthonormalized first, so the value only depends on
    the two column spaces. The result lies in ``[0, 1]``.
    """
    first = _as_matrix(B1)
    second = _as_matrix(B2)
    if first.shape != second.shape:
        raise DimensionError(f"shape mismatch: {first.shape} vs {second.shape}")
    Q1, _ = orthonormalize(first)
    Q2, _ = orthonormalize(second)
    value = projection_residual_norm(Q1, Q2)
    return min(1.0, max(0.0, value))
