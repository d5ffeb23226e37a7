"""
Frozen-weight recursive inverse for the weighted least-squares system.

Sherman–Morrison keeps (λW + Σ aⱼaⱼᵀ)⁻¹ current in O(n²) per measurement
only while W stays fixed; a weight change is a diagonal modification that
needs `refresh`. The tracker is used as a reference path against the CG
solver, not as the mainline.
"""
import logging
from typing import Optional

import numpy as np

from online_sparse_recovery.linalg.kernels import (
    as_diagonal_weights,
    direct_inverse,
    mirror_upper,
    sherman_morrison_update,
)
from online_sparse_recovery.solvers.sparse_solvers import MeasurementEvent, OrlsParams, weight_update
from online_sparse_recovery.errors import DimensionMismatchError


logger = logging.getLogger(__name__)


class RecursiveInverseTracker:
    """
    Tracks (λW + Q)⁻¹ and b under rank-1 measurement updates with W frozen.

    Example:
        tracker = RecursiveInverseTracker(dim=8, params=OrlsParams(lam=1.0))
        for event in events:
            estimate = tracker.absorb(event)
    """

    def __init__(self, dim: int, params: OrlsParams, weights: Optional[np.ndarray] = None):
        if dim < 1:
            raise ValueError(f"dim must be at least 1, got {dim}")
        self.dim = dim
        self.params = params
        if weights is None:
            weights = weight_update(np.zeros(dim), params.delta)
        self.weights = as_diagonal_weights(weights)
        if self.weights.shape[0] != dim:
            raise DimensionMismatchError(f"weights have dimension {self.weights.shape[0]}, expected {dim}")
        self.Q = np.zeros((dim, dim))
        self.b = np.zeros(dim)
        self.t = 0
        self.inverse = np.diag(1.0 / (params.lam * self.weights))

    @property
    def estimate(self) -> np.ndarray:
        return self.inverse @ self.b

    def absorb(self, event: MeasurementEvent) -> np.ndarray:
        """Fold one measurement into the inverse and return the new estimate."""
        if event.a.shape[0] != self.dim:
            raise DimensionMismatchError(f"sensing vector has dimension {event.a.shape[0]}, expected {self.dim}")
        self.inverse = sherman_morrison_update(self.inverse, event.a, event.a)
        self.Q = mirror_upper(self.Q + np.outer(event.a, event.a))
        self.b = self.b + event.y * event.a
        self.t += 1
        return self.estimate

    def refresh(self, weights: np.ndarray) -> np.ndarray:
        """Replace the frozen weights and recompute the inverse directly."""
        weights = as_diagonal_weights(weights)
        if weights.shape[0] != self.dim:
            raise DimensionMismatchError(f"weights have dimension {weights.shape[0]}, expected {self.dim}")
        self.weights = weights
        self.inverse = direct_inverse(self.Q + np.diag(self.params.lam * weights))
        logger.debug("Recursive inverse refreshed at t=%d", self.t)
        return self.estimate
