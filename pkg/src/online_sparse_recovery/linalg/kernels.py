"""
Dense linear-algebra kernels shared by the online and batch solvers.

Vectors are 1-D float64 numpy arrays, symmetric matrices are full-square
float64 arrays kept exactly symmetric by mirroring the upper triangle, and
diagonal weights are stored as the 1-D array of their diagonal.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as scilin

from online_sparse_recovery.errors import (
    DimensionMismatchError,
    NonFiniteValueError,
    NotPositiveDefiniteError,
    SingularUpdateError,
)


logger = logging.getLogger(__name__)

# absolute floor for the relative CG residual test, so b = 0 is well defined
RESIDUAL_FLOOR = 1e-30
SHERMAN_MORRISON_THRESHOLD = 1e-12
CG_MAX_ITER_FACTOR = 4

LinearOperator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CgReport:
    """Outcome of a conjugate gradient solve."""
    solution: np.ndarray
    iterations: int
    final_residual_norm: float
    converged: bool


def as_dense_vector(values, name: str = "vector") -> np.ndarray:
    """
    Validate and copy values into a finite 1-D float64 vector.

    Raises:
        DimensionMismatchError: If the input is not one-dimensional or is empty
        NonFiniteValueError: If any entry is NaN or infinite
    """
    vector = np.array(values, dtype=np.float64)
    if vector.ndim != 1 or vector.size == 0:
        raise DimensionMismatchError(f"{name} must be a non-empty 1-D vector, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise NonFiniteValueError(f"{name} contains non-finite entries")
    return vector


def as_symmetric_matrix(values, name: str = "matrix") -> np.ndarray:
    """
    Validate a square finite matrix and return an exactly symmetric copy.

    The upper triangle is mirrored onto the lower one; inputs that are not
    symmetric up to rounding are rejected rather than silently repaired.

    Raises:
        DimensionMismatchError: If the matrix is not square
        NonFiniteValueError: If any entry is NaN or infinite
        ValueError: If the matrix is visibly asymmetric
    """
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionMismatchError(f"{name} must be a non-empty square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteValueError(f"{name} contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError(f"{name} is not symmetric")
    return mirror_upper(matrix)


def as_diagonal_weights(values, name: str = "weights") -> np.ndarray:
    """
    Validate the diagonal of a weight matrix.

    Raises:
        ValueError: If any weight is not strictly positive
    """
    diag = as_dense_vector(values, name)
    if np.any(diag <= 0.0):
        raise ValueError(f"{name} must be strictly positive")
    return diag


def mirror_upper(matrix: np.ndarray) -> np.ndarray:
    """Return a copy whose lower triangle is the transpose of the upper triangle."""
    upper = np.triu(matrix)
    return upper + np.triu(matrix, 1).T


def _check_same_dim(expected: int, vector: np.ndarray, name: str) -> None:
    if vector.shape[0] != expected:
        raise DimensionMismatchError(f"{name} has dimension {vector.shape[0]}, expected {expected}")


def rank1_update(Q, a) -> np.ndarray:
    """
    Accumulate an outer product into a symmetric matrix.

    Args:
        Q: Symmetric n×n matrix
        a: Vector of dimension n

    Returns:
        np.ndarray: Q + a·aᵀ, exactly symmetric

    Raises:
        DimensionMismatchError: If Q.order != a.dim
    """
    Q = as_symmetric_matrix(Q, "Q")
    a = as_dense_vector(a, "a")
    _check_same_dim(Q.shape[0], a, "a")
    return mirror_upper(Q + np.outer(a, a))


def matrix_operator(A) -> LinearOperator:
    """Wrap an explicit matrix as a linear operator for `cg_solve`."""
    matrix = np.asarray(A, dtype=np.float64)
    return lambda v: matrix @ v


def weighted_system_operator(Q: np.ndarray, weights: np.ndarray, lam: float) -> LinearOperator:
    """Linear operator v -> (λ·diag(weights) + Q)·v without forming the sum."""
    scaled = lam * weights
    return lambda v: scaled * v + Q @ v


def _apply(apply_A: LinearOperator, v: np.ndarray, n: int) -> np.ndarray:
    result = np.asarray(apply_A(v), dtype=np.float64)
    if result.shape != (n,):
        raise DimensionMismatchError(f"operator returned shape {result.shape}, expected ({n},)")
    return result


def cg_solve(apply_A: LinearOperator,
             b,
             x0,
             eps: float = 1e-5,
             max_iter: Optional[int] = None) -> CgReport:
    """
    Solve A·x = b for a symmetric positive-definite operator with plain CG.

    The iteration starts from ``x0`` (warm start) and stops once
    ‖A·x − b‖₂ ≤ eps·max(‖b‖₂, RESIDUAL_FLOOR), checked on the true residual.
    No preconditioning is applied.

    Args:
        apply_A (LinearOperator): Callable computing A·v
        b: Right-hand side vector
        x0: Initial guess
        eps (float): Relative residual tolerance
        max_iter (int, optional): Iteration cap, defaults to 4n

    Returns:
        CgReport: Best iterate, CG update steps taken, its true residual norm
        and whether the tolerance was met. Exceeding ``max_iter`` is reported
        with ``converged=False`` rather than raised.

    Raises:
        DimensionMismatchError: If b, x0 and the operator disagree in dimension
        NonFiniteValueError: If NaN or infinity appears during the iteration
        NotPositiveDefiniteError: If a search direction has non-positive curvature
    """
    b = as_dense_vector(b, "b")
    x = as_dense_vector(x0, "x0")
    n = b.shape[0]
    _check_same_dim(n, x, "x0")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if max_iter is None:
        max_iter = CG_MAX_ITER_FACTOR * n
    if max_iter < 1:
        raise ValueError(f"max_iter must be positive, got {max_iter}")

    tolerance = eps * max(float(np.linalg.norm(b)), RESIDUAL_FLOOR)
    r = b - _apply(apply_A, x, n)
    r_norm = float(np.linalg.norm(r))
    if r_norm <= tolerance:
        return CgReport(solution=x, iterations=0, final_residual_norm=r_norm, converged=True)

    best_x, best_norm = x.copy(), r_norm
    p = r.copy()
    rs = float(r @ r)
    iterations = 0
    while iterations < max_iter:
        Ap = _apply(apply_A, p, n)
        curvature = float(p @ Ap)
        if not np.isfinite(curvature):
            raise NonFiniteValueError(f"non-finite curvature at CG iteration {iterations}")
        if curvature <= 0.0:
            raise NotPositiveDefiniteError(f"non-positive curvature {curvature:.3e} at CG iteration {iterations}")
        alpha = rs / curvature
        x += alpha * p
        r -= alpha * Ap
        iterations += 1
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
            raise NonFiniteValueError(f"non-finite iterate at CG iteration {iterations}")

        rs_new = float(r @ r)
        r_norm = float(np.sqrt(rs_new))
        if r_norm <= tolerance:
            # the recursive residual drifts; confirm on the true one and restart if needed
            r = b - _apply(apply_A, x, n)
            r_norm = float(np.linalg.norm(r))
            if r_norm <= tolerance:
                return CgReport(solution=x, iterations=iterations, final_residual_norm=r_norm, converged=True)
            p = r.copy()
            rs = float(r @ r)
        else:
            p = r + (rs_new / rs) * p
            rs = rs_new
        if r_norm < best_norm:
            best_x, best_norm = x.copy(), r_norm

    best_norm = float(np.linalg.norm(b - _apply(apply_A, best_x, n)))
    logger.debug("CG stopped after %d iterations with residual %.3e (tolerance %.3e)",
                 iterations, best_norm, tolerance)
    return CgReport(solution=best_x, iterations=iterations, final_residual_norm=best_norm, converged=False)


def sherman_morrison_update(A_inv, u, v) -> np.ndarray:
    """
    Update an inverse under a rank-1 modification.

    Computes (A + u·vᵀ)⁻¹ = A⁻¹ − (A⁻¹u·vᵀA⁻¹)/(1 + vᵀA⁻¹u).

    Args:
        A_inv: Inverse of some n×n matrix A
        u: Column vector of the update
        v: Row vector of the update

    Returns:
        np.ndarray: The updated inverse, mirrored to exact symmetry when
        u == v and A_inv is symmetric

    Raises:
        DimensionMismatchError: If shapes disagree
        SingularUpdateError: If |1 + vᵀA⁻¹u| < 1e-12·(1 + |vᵀA⁻¹u|)
    """
    A_inv = np.array(A_inv, dtype=np.float64)
    if A_inv.ndim != 2 or A_inv.shape[0] != A_inv.shape[1]:
        raise DimensionMismatchError(f"A_inv must be square, got shape {A_inv.shape}")
    if not np.all(np.isfinite(A_inv)):
        raise NonFiniteValueError("A_inv contains non-finite entries")
    u = as_dense_vector(u, "u")
    v = as_dense_vector(v, "v")
    n = A_inv.shape[0]
    _check_same_dim(n, u, "u")
    _check_same_dim(n, v, "v")

    A_inv_u = A_inv @ u
    v_A_inv = v @ A_inv
    gain = float(v @ A_inv_u)
    denominator = 1.0 + gain
    if abs(denominator) < SHERMAN_MORRISON_THRESHOLD * (1.0 + abs(gain)):
        raise SingularUpdateError(f"rank-1 update is singular (denominator {denominator:.3e})")

    result = A_inv - np.outer(A_inv_u, v_A_inv) / denominator
    if np.array_equal(u, v) and np.array_equal(A_inv, A_inv.T):
        result = mirror_upper(result)
    return result


def _cholesky(A: np.ndarray):
    try:
        return scilin.cho_factor(A, lower=True, check_finite=False)
    except scilin.LinAlgError as e:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {e}") from e


def direct_solve(A, b) -> np.ndarray:
    """
    Solve A·x = b for symmetric positive-definite A by Cholesky factorization.

    Raises:
        DimensionMismatchError: If A and b disagree in dimension
        NotPositiveDefiniteError: If the factorization meets a non-positive pivot
    """
    A = as_symmetric_matrix(A, "A")
    b = as_dense_vector(b, "b")
    _check_same_dim(A.shape[0], b, "b")
    return scilin.cho_solve(_cholesky(A), b, check_finite=False)


def direct_inverse(A) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via its Cholesky factor."""
    A = as_symmetric_matrix(A, "A")
    inverse = scilin.cho_solve(_cholesky(A), np.eye(A.shape[0]), check_finite=False)
    return mirror_upper(inverse)
