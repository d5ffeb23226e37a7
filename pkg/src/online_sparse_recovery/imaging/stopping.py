"""
Stopping rules deciding when to stop acquiring measurements.

Each rule mode is a `StopCriterionBase` subclass, found through
`get_stop_criterion_registry()`.
"""
from abc import ABC, abstractmethod
from enum import Enum
from typing import Sequence

from pydantic import BaseModel, ConfigDict, Field, PositiveInt

from online_sparse_recovery.imaging.metrics import MetricsTrajectory


class StopMode(str, Enum):
    FIXED_COUNT = "fixed_count"
    ESTIMATE_PLATEAU = "estimate_plateau"
    METRIC_THRESHOLD = "metric_threshold"


# short names accepted by StopRule.parse
MODE_ALIASES = {
    "fixed": StopMode.FIXED_COUNT,
    "fixed_count": StopMode.FIXED_COUNT,
    "plateau": StopMode.ESTIMATE_PLATEAU,
    "estimate_plateau": StopMode.ESTIMATE_PLATEAU,
    "psnr": StopMode.METRIC_THRESHOLD,
    "metric_threshold": StopMode.METRIC_THRESHOLD,
}


class StopRule(BaseModel):
    """Stop-rule settings; the default is the reference-free plateau rule."""
    model_config = ConfigDict(frozen=True)

    mode: StopMode = StopMode.ESTIMATE_PLATEAU
    threshold: float = Field(default=1e-4, allow_inf_nan=False)
    patience: PositiveInt = 3

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        """
        Parse ``fixed:<count>``, ``plateau:<threshold>[:<patience>]`` or ``psnr:<dB>``.

        Raises:
            ValueError: For unknown modes or malformed numbers
        """
        parts = [part.strip() for part in text.strip().split(":")]
        mode = MODE_ALIASES.get(parts[0].lower())
        if mode is None:
            raise ValueError(f"Unknown stop rule {text!r}; use fixed:<count>, plateau:<threshold>[:<patience>] or psnr:<dB>")
        if len(parts) < 2 or (mode != StopMode.ESTIMATE_PLATEAU and len(parts) > 2) or len(parts) > 3:
            raise ValueError(f"Malformed stop rule {text!r}")
        settings = {"mode": mode, "threshold": float(parts[1])}
        if len(parts) == 3:
            settings["patience"] = int(parts[2])
        return cls(**settings)

    def to_text(self) -> str:
        if self.mode == StopMode.FIXED_COUNT:
            return f"fixed:{self.threshold:g}"
        if self.mode == StopMode.METRIC_THRESHOLD:
            return f"psnr:{self.threshold!r}"
        return f"plateau:{self.threshold!r}:{self.patience}"


class StopCriterionBase(ABC):
    """
    Abstract base class for stop criteria.

    Subclasses set the class attribute ``mode`` and decide from the
    trajectory so far and the relative estimate changes between evaluation
    points.
    """
    mode: StopMode = None

    @property
    @abstractmethod
    def description(self) -> str:
        """Description of the criterion."""
        pass

    @abstractmethod
    def is_met(self, rule: StopRule, trajectory: MetricsTrajectory, estimate_changes: Sequence[float]) -> bool:
        pass


class FixedCountCriterion(StopCriterionBase):
    """Stop once a fixed number of measurements has been absorbed."""

    mode = StopMode.FIXED_COUNT

    @property
    def description(self) -> str:
        return "Stop after a fixed number of measurements"

    def is_met(self, rule, trajectory, estimate_changes) -> bool:
        return trajectory.last is not None and trajectory.last.t >= rule.threshold


class EstimatePlateauCriterion(StopCriterionBase):
    """
    Stop when the relative estimate change stays at or below the threshold
    for ``patience`` consecutive evaluations. Needs no reference image.
    """

    mode = StopMode.ESTIMATE_PLATEAU

    @property
    def description(self) -> str:
        return "Stop when the estimate stops changing"

    def is_met(self, rule, trajectory, estimate_changes) -> bool:
        recent = list(estimate_changes)[-rule.patience:]
        return len(recent) == rule.patience and all(change <= rule.threshold for change in recent)


class MetricThresholdCriterion(StopCriterionBase):
    """Stop once PSNR against the reference reaches the threshold; simulation only."""

    mode = StopMode.METRIC_THRESHOLD

    @property
    def description(self) -> str:
        return "Stop when PSNR against the reference reaches a threshold"

    def is_met(self, rule, trajectory, estimate_changes) -> bool:
        return trajectory.last is not None and trajectory.last.psnr_db >= rule.threshold


def get_stop_criterion_registry():
    registry = {}
    for cls in StopCriterionBase.__subclasses__():
        if cls.mode is not None:
            registry[cls.mode] = cls
    return registry


STOP_CRITERION_CLASSES = get_stop_criterion_registry()


def should_stop(rule: StopRule, trajectory: MetricsTrajectory, estimates: Sequence[float] = ()) -> bool:
    """
    Apply a stop rule.

    Args:
        rule (StopRule): Rule settings
        trajectory (MetricsTrajectory): Evaluation points so far
        estimates: Relative estimate-change norms, one per evaluation point

    Returns:
        bool: True when acquisition should stop
    """
    criterion = STOP_CRITERION_CLASSES[rule.mode]()
    return criterion.is_met(rule, trajectory, estimates)
