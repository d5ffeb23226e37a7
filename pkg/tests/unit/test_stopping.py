import pytest
from pydantic import ValidationError

from online_sparse_recovery.imaging.metrics import MetricsRecord, MetricsTrajectory
from online_sparse_recovery.imaging.stopping import (
    STOP_CRITERION_CLASSES,
    EstimatePlateauCriterion,
    FixedCountCriterion,
    MetricThresholdCriterion,
    StopCriterionBase,
    StopMode,
    StopRule,
    get_stop_criterion_registry,
    should_stop,
)


def trajectory_with(*points):
    trajectory = MetricsTrajectory(patch_dim=64)
    for t, psnr_db in points:
        trajectory.append(MetricsRecord(t=t, pct_measurements=100.0 * t / 64, psnr_db=psnr_db,
                                        ssim=0.5, cg_iters_total=0))
    return trajectory


class TestStopRule:
    """Test stop-rule settings and parsing."""

    def test_default_is_plateau(self):
        """Test the reference-free default."""
        rule = StopRule()
        assert (rule.mode, rule.threshold, rule.patience) == (StopMode.ESTIMATE_PLATEAU, 1e-4, 3)

    @pytest.mark.parametrize("text, mode, threshold, patience", [
        ("fixed:16", StopMode.FIXED_COUNT, 16.0, 3),
        ("plateau:1e-4", StopMode.ESTIMATE_PLATEAU, 1e-4, 3),
        ("plateau:1e-3:5", StopMode.ESTIMATE_PLATEAU, 1e-3, 5),
        ("psnr:35", StopMode.METRIC_THRESHOLD, 35.0, 3),
    ])
    def test_parse(self, text, mode, threshold, patience):
        """Test the accepted textual forms."""
        rule = StopRule.parse(text)
        assert (rule.mode, rule.threshold, rule.patience) == (mode, threshold, patience)

    @pytest.mark.parametrize("text", ["never:1", "fixed", "fixed:1:2", "plateau:x", "plateau:1e-4:0", "psnr:inf"])
    def test_parse_rejects(self, text):
        """Test unknown modes, malformed numbers, zero patience and non-finite thresholds."""
        with pytest.raises(ValueError):
            StopRule.parse(text)

    def test_text_form_parses_back(self):
        """Test that to_text produces a parseable rule."""
        rule = StopRule(mode=StopMode.ESTIMATE_PLATEAU, threshold=2e-4, patience=4)
        assert StopRule.parse(rule.to_text()) == rule

    def test_zero_patience_rejected(self):
        """Test that patience must be at least one."""
        with pytest.raises(ValidationError):
            StopRule(patience=0)


class TestStopCriteria:
    """Test the criterion registry and decisions."""

    def test_base_is_abstract(self):
        """Test that the base criterion cannot be instantiated."""
        with pytest.raises(TypeError):
            StopCriterionBase()

    def test_registry_covers_every_mode(self):
        """Test that each mode maps to its criterion class."""
        registry = get_stop_criterion_registry()
        assert registry == {
            StopMode.FIXED_COUNT: FixedCountCriterion,
            StopMode.ESTIMATE_PLATEAU: EstimatePlateauCriterion,
            StopMode.METRIC_THRESHOLD: MetricThresholdCriterion,
        }
        assert STOP_CRITERION_CLASSES == registry
        assert all(cls().description for cls in registry.values())

    def test_fixed_count_reached(self):
        """Test fixed_count 10 at t = 10."""
        rule = StopRule(mode=StopMode.FIXED_COUNT, threshold=10)
        assert should_stop(rule, trajectory_with((10, 20.0)))
        assert not should_stop(rule, trajectory_with((9, 20.0)))

    def test_plateau_with_full_patience(self):
        """Test three qualifying changes with patience 3."""
        rule = StopRule(threshold=1e-4, patience=3)
        assert should_stop(rule, trajectory_with((1, 1.0)), [0.5, 1e-5, 1e-5, 1e-5])

    def test_plateau_needs_consecutive_evaluations(self):
        """Test that two qualifying changes are not enough for patience 3."""
        rule = StopRule(threshold=1e-4, patience=3)
        assert not should_stop(rule, trajectory_with((1, 1.0)), [1e-5, 1e-5])
        assert not should_stop(rule, trajectory_with((1, 1.0)), [1e-5, 1e-3, 1e-5, 1e-5])

    def test_metric_threshold(self):
        """Test that the latest PSNR is compared with the threshold."""
        rule = StopRule(mode=StopMode.METRIC_THRESHOLD, threshold=30.0)
        assert should_stop(rule, trajectory_with((1, 25.0), (2, 31.0)))
        assert not should_stop(rule, trajectory_with((1, 31.0), (2, 29.0)))

    def test_empty_trajectory_never_stops(self):
        """Test that no evaluation point means no decision to stop."""
        for mode in StopMode:
            assert not should_stop(StopRule(mode=mode, threshold=0.0), MetricsTrajectory(patch_dim=64))
