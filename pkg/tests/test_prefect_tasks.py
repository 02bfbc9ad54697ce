"""Tests for Prefect tasks configuration and behavior.

Tests verify:
- Retry configuration classes
- Timeout configuration classes
- Retry decisions
- Task execution through the underlying functions
"""

from unittest.mock import MagicMock

import pytest

from core.models import CoefficientSpec, DatasetSpec, ExperimentSpec


@pytest.fixture
def spec_dict():
    return ExperimentSpec(
        dataset=DatasetSpec(kind="gaussian"),
        n=60,
        p=6,
        coefficients=CoefficientSpec(scale_divisor=2.0, num_nonnull=2),
        knockoff_source="oracle",
        num_repeats=2,
        tag="tasks",
    ).model_dump()


# =============================================================================
# Tests for Retry Configuration
# =============================================================================


class TestRetryConfig:
    """Tests for RetryConfig dataclass."""

    def test_retry_config_is_frozen(self):
        """RetryConfig is immutable."""
        from orchestrators.prefect.tasks import RetryConfig

        config = RetryConfig()
        with pytest.raises(AttributeError):
            config.LOCAL_RETRIES = 10

    def test_trials_not_retried(self):
        """Seeded trials are never retried."""
        from orchestrators.prefect.tasks import RetryConfig

        assert RetryConfig.TRIAL_RETRIES == 0

    def test_local_retries(self):
        """Local operations have 3 retries configured."""
        from orchestrators.prefect.tasks import RetryConfig

        assert RetryConfig.LOCAL_RETRIES == 3
        assert RetryConfig.LOCAL_RETRY_DELAY == 0.1

    def test_compute_retries(self):
        """Aggregation has a single retry."""
        from orchestrators.prefect.tasks import RetryConfig

        assert RetryConfig.COMPUTE_RETRIES == 1


class TestTaskTimeouts:
    """Tests for TaskTimeouts dataclass."""

    def test_trial_timeout_covers_training(self):
        """Trial timeout allows hours of training."""
        from orchestrators.prefect.tasks import TaskTimeouts

        assert TaskTimeouts.TRIAL_TIMEOUT == 4 * 3600

    def test_local_timeout(self):
        """Report writing has a 2 minute timeout."""
        from orchestrators.prefect.tasks import TaskTimeouts

        assert TaskTimeouts.LOCAL_TIMEOUT == 120


# =============================================================================
# Tests for Retry Decisions
# =============================================================================


class TestShouldRetry:
    """Tests for should_retry and retry_condition."""

    def test_library_errors_not_retried(self):
        """Library errors are deterministic given the seed."""
        from core.errors import StageError
        from orchestrators.prefect.tasks import should_retry

        assert should_retry(StageError("train", RuntimeError("x")), 3) is False

    def test_value_error_not_retried(self):
        """ValueError should not trigger retry."""
        from orchestrators.prefect.tasks import should_retry

        assert should_retry(ValueError("test"), 3) is False

    def test_os_error_retried(self):
        """Filesystem errors are retried while retries remain."""
        from orchestrators.prefect.tasks import should_retry

        assert should_retry(OSError("disk busy"), 2) is True
        assert should_retry(OSError("disk busy"), 0) is False

    def test_retry_condition_reads_state(self):
        """retry_condition inspects the exception held by the state."""
        from orchestrators.prefect.tasks import retry_condition

        state = MagicMock()
        state.result.side_effect = KeyError("missing")
        assert retry_condition(None, None, state) is False

        state.result.side_effect = OSError("disk busy")
        assert retry_condition(None, None, state) is True


# =============================================================================
# Tests for Task Configuration
# =============================================================================


class TestTaskConfig:
    """Tests for task decorators."""

    def test_run_trial_task(self):
        """Trial task is named and not retried."""
        from orchestrators.prefect.tasks import RetryConfig, TaskTimeouts, run_trial_task

        assert run_trial_task.name == "run_trial"
        assert run_trial_task.retries == RetryConfig.TRIAL_RETRIES
        assert run_trial_task.timeout_seconds == TaskTimeouts.TRIAL_TIMEOUT

    def test_emit_report_task(self):
        """Report task retries like local operations."""
        from orchestrators.prefect.tasks import RetryConfig, TaskTimeouts, emit_report_task

        assert emit_report_task.retries == RetryConfig.LOCAL_RETRIES
        assert emit_report_task.timeout_seconds == TaskTimeouts.LOCAL_TIMEOUT

    def test_aggregate_task(self):
        """Aggregation task uses compute retries."""
        from orchestrators.prefect.tasks import RetryConfig, aggregate_trials_task

        assert aggregate_trials_task.retries == RetryConfig.COMPUTE_RETRIES


# =============================================================================
# Tests for Task Execution
# =============================================================================


class TestTaskExecution:
    """Tests for task bodies run outside a flow."""

    def test_get_logger_fallback(self):
        """_get_logger falls back to standard logger outside task context."""
        from orchestrators.prefect.tasks import _get_logger

        assert _get_logger().name == "orchestrators.prefect.tasks"

    def test_run_trial_task(self, spec_dict):
        """The trial task returns a serialized TrialResult."""
        from orchestrators.prefect.tasks import run_trial_task

        result = run_trial_task.fn(spec_dict, 0)
        assert result["status"] == "success"
        assert result["repeat_index"] == 0
        assert len(result["selection"]["w"]) == 6

    def test_run_trial_task_raises(self, spec_dict):
        """Trial failures propagate so the flow records them."""
        from core.errors import StageError
        from orchestrators.prefect.tasks import run_trial_task

        spec_dict["dataset"] = {"kind": "external", "x_path": "/nonexistent/x.csv"}
        with pytest.raises(StageError):
            run_trial_task.fn(spec_dict, 0)

    def test_aggregate_task(self, spec_dict):
        """Aggregation sorts and reduces serialized trials."""
        from orchestrators.prefect.tasks import aggregate_trials_task, run_trial_task

        trials = [run_trial_task.fn(spec_dict, i) for i in (1, 0)]
        report = aggregate_trials_task.fn(spec_dict, trials, 1.5)
        assert [t["repeat_index"] for t in report["trials"]] == [0, 1]
        assert report["total_seconds"] == 1.5
        assert report["aggregates"]["fdp"]["count"] == 2

    def test_alpha_sweep_task(self, spec_dict):
        """The sweep task returns one result per weight."""
        from core.variants import alpha_variants
        from orchestrators.prefect.tasks import alpha_sweep_trial_task

        variants = alpha_variants(ExperimentSpec.model_validate(spec_dict), (0.0, 1.0))
        results = alpha_sweep_trial_task.fn({k: v.model_dump() for k, v in variants.items()}, 0)
        assert set(results) == {"alpha=0", "alpha=1"}

    def test_emit_report_task(self, spec_dict, tmp_path):
        """One report writes a single experiment directory."""
        from orchestrators.prefect.tasks import (
            aggregate_trials_task,
            emit_report_task,
            run_trial_task,
        )

        report = aggregate_trials_task.fn(spec_dict, [run_trial_task.fn(spec_dict, 0)], 0.1)
        files = emit_report_task.fn({"experiment": report}, str(tmp_path), ["json", "markdown"])
        assert set(files) == {"summary", "markdown"}
        assert (tmp_path / "summary.json").exists()
