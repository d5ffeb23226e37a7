"""
Online reweighted least squares (ORLS) and its batch counterpart (IRLS).

Both minimize Σⱼ(yⱼ − aⱼᵀx)² + λ‖x‖₁ by replacing the ℓ1 norm with the
weighted quadratic xᵀWx, W(j) = 1/(|x(j)| + δ). ORLS absorbs one measurement
at a time and solves the accumulated system with warm-started CG; IRLS
alternates direct solves and weight refreshes over the full measurement set.
"""
import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as scilin
from pydantic import BaseModel, ConfigDict, Field, PositiveInt

from online_sparse_recovery.config import default_cg_eps, default_delta, default_lambda
from online_sparse_recovery.errors import DimensionMismatchError, NonFiniteValueError
from online_sparse_recovery.linalg.kernels import (
    CG_MAX_ITER_FACTOR,
    RESIDUAL_FLOOR,
    as_dense_vector,
    cg_solve,
    direct_solve,
    mirror_upper,
    rank1_update,
    weighted_system_operator,
)


logger = logging.getLogger(__name__)

IRLS_DEFAULT_OUTER = 30
IRLS_CHANGE_TOLERANCE = 1e-8


class OrlsParams(BaseModel):
    """
    Parameters shared by ORLS and IRLS.

    ``lam`` is exposed under the alias ``lambda`` for manifests and keyword
    construction from parsed files. Unset values fall back to the
    ``ORLS_LAMBDA``, ``ORLS_DELTA`` and ``ORLS_CG_EPS`` environment variables.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(default_factory=default_lambda, gt=0, allow_inf_nan=False, alias="lambda")
    delta: float = Field(default_factory=default_delta, gt=0, allow_inf_nan=False)
    cg_eps: float = Field(default_factory=default_cg_eps, gt=0, allow_inf_nan=False)
    cg_max_iter: Optional[PositiveInt] = None
    warm_start: bool = True

    def max_iter_for(self, dim: int) -> int:
        return self.cg_max_iter if self.cg_max_iter is not None else CG_MAX_ITER_FACTOR * dim


@dataclass(frozen=True, eq=False)
class MeasurementEvent:
    """One sequentially arriving measurement y = aᵀx* + ξ."""
    a: np.ndarray
    y: float
    t: int

    def __post_init__(self):
        object.__setattr__(self, "a", as_dense_vector(self.a, "a"))
        if not np.isfinite(self.y):
            raise NonFiniteValueError(f"measurement value at t={self.t} is not finite")
        object.__setattr__(self, "y", float(self.y))
        if self.t < 1:
            raise ValueError(f"arrival index must be positive, got {self.t}")


@dataclass(frozen=True, eq=False)
class OrlsState:
    """
    Recursive ORLS state for one signal.

    Q = Σ aⱼaⱼᵀ and b = Σ yⱼaⱼ over the t absorbed measurements, W the
    weights used for the latest solve and x the current estimate.
    """
    t: int
    Q: np.ndarray
    b: np.ndarray
    x: np.ndarray
    W: np.ndarray
    dim: int
    cg_iterations_history: Tuple[int, ...] = ()
    converged_history: Tuple[bool, ...] = ()

    @property
    def last_converged(self) -> bool:
        return self.converged_history[-1] if self.converged_history else True

    def system_residual(self, lam: float) -> float:
        """‖(λW + Q)·x − b‖₂ for the current estimate."""
        return float(np.linalg.norm(lam * self.W * self.x + self.Q @ self.x - self.b))


def weight_update(x, delta: float) -> np.ndarray:
    """
    Reweighting rule W(j) = 1/(|x(j)| + δ).

    Returns:
        np.ndarray: Diagonal of the weight matrix, every entry in (0, 1/δ]
    """
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError(f"delta must be positive and finite, got {delta}")
    x = as_dense_vector(x, "x")
    return 1.0 / (np.abs(x) + delta)


def orls_init(dim: int, params: OrlsParams) -> OrlsState:
    """Zero-information start: x = 0, hence W = (1/δ)·I."""
    if dim < 1:
        raise ValueError(f"dim must be at least 1, got {dim}")
    x = np.zeros(dim)
    return OrlsState(t=0, Q=np.zeros((dim, dim)), b=np.zeros(dim), x=x,
                     W=weight_update(x, params.delta), dim=dim)


def orls_step(state: OrlsState, ev: MeasurementEvent, params: OrlsParams) -> OrlsState:
    """
    Absorb one measurement and re-solve (λW' + Q')·x = b'.

    The weights are refreshed from the previous estimate before the solve,
    and CG starts from that estimate unless ``params.warm_start`` is off.
    A step whose CG hits the iteration cap keeps its best iterate and records
    ``converged=False``.

    Raises:
        DimensionMismatchError: If the sensing vector does not match the state
    """
    if ev.a.shape[0] != state.dim:
        raise DimensionMismatchError(f"sensing vector has dimension {ev.a.shape[0]}, solver expects {state.dim}")

    Q = rank1_update(state.Q, ev.a)
    b = state.b + ev.y * ev.a
    W = weight_update(state.x, params.delta)
    x0 = state.x if params.warm_start else np.zeros(state.dim)
    report = cg_solve(weighted_system_operator(Q, W, params.lam), b, x0,
                      eps=params.cg_eps, max_iter=params.max_iter_for(state.dim))
    if not report.converged:
        logger.debug("CG did not converge at t=%d after %d iterations (residual %.3e)",
                     state.t + 1, report.iterations, report.final_residual_norm)
    return replace(
        state,
        t=state.t + 1,
        Q=Q,
        b=b,
        x=report.solution,
        W=W,
        cg_iterations_history=state.cg_iterations_history + (report.iterations,),
        converged_history=state.converged_history + (report.converged,),
    )


def closed_form_solve(Q, b, W, lam: float) -> np.ndarray:
    """Exact solution (λW + Q)⁻¹·b of the weighted quadratic surrogate."""
    W = as_dense_vector(W, "W")
    Q = np.asarray(Q, dtype=np.float64)
    if Q.shape != (W.shape[0], W.shape[0]):
        raise DimensionMismatchError(f"Q has shape {Q.shape}, weights have dimension {W.shape[0]}")
    return direct_solve(Q + np.diag(lam * W), b)


def orls_run(events: Iterable[MeasurementEvent],
             dim: int,
             params: OrlsParams,
             on_step: Optional[Callable[[OrlsState], None]] = None) -> Tuple[OrlsState, List[np.ndarray]]:
    """
    Fold `orls_step` over events in arrival order.

    Args:
        events: Measurements in arrival order
        dim (int): Signal dimension
        params (OrlsParams): Solver parameters
        on_step (Callable, optional): Observer called with the state after
            every step. When given, estimates are streamed to it instead of
            being collected.

    Returns:
        Tuple[OrlsState, List[np.ndarray]]: Final state and the per-step
        estimates (empty when an observer is supplied)
    """
    state = orls_init(dim, params)
    estimates = []
    for ev in events:
        state = orls_step(state, ev, params)
        if on_step is not None:
            on_step(state)
        else:
            estimates.append(state.x)
    return state, estimates


def _stack_rows(A_rows: Sequence, y, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.array(A_rows, dtype=np.float64) if len(A_rows) else np.zeros((0, dim))
    if rows.ndim != 2 or rows.shape[1] != dim:
        raise DimensionMismatchError(f"sensing rows must have dimension {dim}")
    values = np.array(y, dtype=np.float64).reshape(-1)
    if values.shape[0] != rows.shape[0]:
        raise DimensionMismatchError(f"{rows.shape[0]} sensing rows but {values.shape[0]} measurements")
    if not (np.all(np.isfinite(rows)) and np.all(np.isfinite(values))):
        raise NonFiniteValueError("measurements contain non-finite entries")
    return rows, values


def irls_batch(A_rows: Sequence,
               y,
               dim: int,
               params: OrlsParams,
               n_outer: int = IRLS_DEFAULT_OUTER,
               on_iterate: Optional[Callable[[int, np.ndarray], None]] = None) -> np.ndarray:
    """
    Batch iteratively reweighted least squares over all measurements.

    Starting from x = 0 and W = (1/δ)·I, alternates a direct solve of
    (λW + Σaⱼaⱼᵀ)x = Σyⱼaⱼ with a weight refresh, for at most ``n_outer``
    rounds; exits early once ‖x_new − x_old‖₂ ≤ 1e-8·(1 + ‖x_old‖₂).

    Args:
        A_rows: Sensing vectors, one per measurement
        y: Measured values
        dim (int): Signal dimension
        params (OrlsParams): λ and δ
        n_outer (int): Maximum outer iterations
        on_iterate (Callable, optional): Called with (iteration, x) after each solve

    Returns:
        np.ndarray: Final estimate
    """
    if n_outer < 1:
        raise ValueError(f"n_outer must be at least 1, got {n_outer}")
    rows, values = _stack_rows(A_rows, y, dim)
    Q = mirror_upper(rows.T @ rows)
    b = rows.T @ values

    x = np.zeros(dim)
    W = weight_update(x, params.delta)
    for iteration in range(1, n_outer + 1):
        x_new = direct_solve(Q + np.diag(params.lam * W), b)
        W = weight_update(x_new, params.delta)
        change = float(np.linalg.norm(x_new - x))
        threshold = IRLS_CHANGE_TOLERANCE * (1.0 + float(np.linalg.norm(x)))
        x = x_new
        if on_iterate is not None:
            on_iterate(iteration, x)
        if change <= threshold:
            logger.debug("IRLS settled after %d outer iterations", iteration)
            break
    return x


def least_squares_solve(A_rows: Sequence, y, dim: int) -> np.ndarray:
    """Unregularized minimum-norm least-squares baseline."""
    rows, values = _stack_rows(A_rows, y, dim)
    if rows.shape[0] == 0:
        return np.zeros(dim)
    solution, *_ = scilin.lstsq(rows, values)
    return solution


def l1_objective(A_rows: Sequence, y, x, lam: float) -> float:
    """Σⱼ(yⱼ − aⱼᵀx)² + λ‖x‖₁."""
    x = as_dense_vector(x, "x")
    rows, values = _stack_rows(A_rows, y, x.shape[0])
    residual = values - rows @ x
    return float(residual @ residual + lam * np.sum(np.abs(x)))


def reweighted_objective(A_rows: Sequence, y, x, lam: float, delta: float) -> float:
    """
    Smoothed objective majorized by the weighted quadratic surrogate.

    Σⱼ(yⱼ − aⱼᵀx)² + λ·Σᵢ(2|xᵢ| − 2δ·ln(|xᵢ| + δ)). Each IRLS outer iterate
    does not increase it.
    """
    x = as_dense_vector(x, "x")
    rows, values = _stack_rows(A_rows, y, x.shape[0])
    residual = values - rows @ x
    magnitude = np.abs(x)
    penalty = np.sum(2.0 * magnitude - 2.0 * delta * np.log(magnitude + delta))
    return float(residual @ residual + lam * penalty)


def converged_within_tolerance(state: OrlsState, params: OrlsParams) -> bool:
    """Whether the state's linear-system residual meets the CG tolerance."""
    tolerance = params.cg_eps * max(float(np.linalg.norm(state.b)), RESIDUAL_FLOOR)
    return state.system_residual(params.lam) <= tolerance
