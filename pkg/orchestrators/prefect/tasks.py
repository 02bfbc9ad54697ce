"""Prefect tasks for knockoff experiments.

Tasks are atomic units of work in Prefect. They can be retried,
cached, and run concurrently.

This module provides:
- Tasks wrapping the trial, aggregation and report functions of `core`
- Retry configuration appropriate for each task type
- Timeout configurations for reliable execution

Trials are deterministic given their seed, so a failed trial is not
retried: the flow records it as an error row instead.
"""

import logging
from dataclasses import dataclass

from prefect import task
from prefect.logging import get_run_logger

from core.errors import KnockoffLabError


def _get_logger() -> logging.Logger:
    """Get logger for task execution.

    Returns Prefect run logger if in flow/task context,
    otherwise returns standard Python logger.
    """
    try:
        return get_run_logger()
    except Exception:
        return logging.getLogger("orchestrators.prefect.tasks")


# =============================================================================
# Retry Configuration
# =============================================================================


@dataclass(frozen=True)
class RetryConfig:
    """Retry configuration for different task types."""

    # Seeded trials reproduce the same failure on every attempt
    TRIAL_RETRIES = 0

    # File output: quick retries for transient filesystem issues
    LOCAL_RETRIES = 3
    LOCAL_RETRY_DELAY = 0.1  # 100ms
    LOCAL_RETRY_JITTER = 0.5

    # Aggregation: pure computation
    COMPUTE_RETRIES = 1
    COMPUTE_RETRY_DELAY = 0.1


@dataclass(frozen=True)
class TaskTimeouts:
    """Timeout configurations for different task types."""

    # One end-to-end trial including generator training
    TRIAL_TIMEOUT = 4 * 3600  # seconds

    # Report files and figures
    LOCAL_TIMEOUT = 120

    # Aggregation over trials
    COMPUTE_TIMEOUT = 60


# =============================================================================
# Non-Retryable Errors
# =============================================================================

# Errors that should not trigger retries (permanent failures)
NON_RETRYABLE_ERRORS = (
    ValueError,  # Bad input won't fix itself
    TypeError,  # Type errors are programming bugs
    KeyError,  # Missing keys indicate data issues
    KnockoffLabError,  # Library errors are deterministic given the seed
)


def should_retry(exc: Exception, retries: int) -> bool:
    """Determine if an exception should trigger a retry.

    Args:
        exc: The exception that was raised
        retries: Number of retries remaining

    Returns:
        True if should retry, False otherwise
    """
    if isinstance(exc, NON_RETRYABLE_ERRORS):
        return False
    return retries > 0


def retry_condition(task, task_run, state) -> bool:
    """Prefect retry hook: retry unless the raised exception is non-retryable."""
    try:
        state.result()
    except Exception as exc:
        return should_retry(exc, retries=1)
    return True


# =============================================================================
# Core Tasks
# =============================================================================


@task(
    name="run_trial",
    description="Run one seeded end-to-end knockoff trial",
    retries=RetryConfig.TRIAL_RETRIES,
    timeout_seconds=TaskTimeouts.TRIAL_TIMEOUT,
)
def run_trial_task(spec_dict: dict, repeat_index: int) -> dict:
    """Run one trial of an experiment.

    Args:
        spec_dict: Serialized ExperimentSpec
        repeat_index: Position on the seed ladder

    Returns:
        TrialResult as a dict

    Raises:
        StageError: The failing stage of the trial (non-retryable)
    """
    logger = _get_logger()

    from core.executor import run_trial
    from core.models import ExperimentSpec

    spec = ExperimentSpec.model_validate(spec_dict)
    logger.info(f"Running trial {repeat_index} of '{spec.tag}'")

    try:
        outcome = run_trial(spec, repeat_index)
    except Exception as e:
        logger.error(f"Trial {repeat_index} of '{spec.tag}' failed: {e}")
        raise

    result = outcome.result
    logger.info(
        f"Trial {repeat_index} completed in {result.runtime_seconds:.1f}s "
        f"({result.selection.score_text()})"
    )
    return result.model_dump()


@task(
    name="alpha_sweep_trial",
    description="Run one repeat of the DRP weight sweep",
    retries=RetryConfig.TRIAL_RETRIES,
    timeout_seconds=TaskTimeouts.TRIAL_TIMEOUT,
)
def alpha_sweep_trial_task(variant_dicts: dict[str, dict], repeat_index: int) -> dict:
    """Train once, then filter with every DRP weight.

    Args:
        variant_dicts: Variant name to serialized ExperimentSpec
        repeat_index: Position on the seed ladder

    Returns:
        Variant name to TrialResult dict
    """
    logger = _get_logger()

    from core.models import ExperimentSpec
    from core.variants import alpha_sweep_trial

    variants = {k: ExperimentSpec.model_validate(v) for k, v in variant_dicts.items()}
    logger.info(f"Running alpha sweep repeat {repeat_index} over {len(variants)} weights")
    results = alpha_sweep_trial(variants, repeat_index)
    return {name: r.model_dump() for name, r in results.items()}


@task(
    name="aggregate_trials",
    description="Aggregate trial results into an experiment report",
    retries=RetryConfig.COMPUTE_RETRIES,
    retry_delay_seconds=RetryConfig.COMPUTE_RETRY_DELAY,
    retry_condition_fn=retry_condition,
    timeout_seconds=TaskTimeouts.COMPUTE_TIMEOUT,
)
def aggregate_trials_task(spec_dict: dict, trial_dicts: list[dict], total_seconds: float) -> dict:
    """Reduce trial results (in repeat-index order) into a report.

    Args:
        spec_dict: Serialized ExperimentSpec
        trial_dicts: TrialResult dicts in any order
        total_seconds: Wall-clock time of the experiment

    Returns:
        ExperimentReport as a dict
    """
    logger = _get_logger()

    from core.comparator import build_report
    from core.models import ExperimentSpec, TrialResult

    spec = ExperimentSpec.model_validate(spec_dict)
    trials = [TrialResult.model_validate(t) for t in trial_dicts]
    report = build_report(spec, trials, total_seconds=total_seconds)

    logger.info(
        f"Aggregated '{spec.tag}': {len(report.successful)} successful, "
        f"{len(report.failures)} failed"
    )
    return report.model_dump()


@task(
    name="emit_report",
    description="Write report tables, summaries and figures",
    retries=RetryConfig.LOCAL_RETRIES,
    retry_delay_seconds=RetryConfig.LOCAL_RETRY_DELAY,
    retry_jitter_factor=RetryConfig.LOCAL_RETRY_JITTER,
    retry_condition_fn=retry_condition,
    timeout_seconds=TaskTimeouts.LOCAL_TIMEOUT,
)
def emit_report_task(report_dicts: dict[str, dict], output_dir: str, formats: list[str],
                     title: str = "Variants", axis: str = "variant") -> dict:
    """Write one report, or a variant comparison when several are given.

    Args:
        report_dicts: Variant name to ExperimentReport dict
        output_dir: Destination directory
        formats: Report formats to emit
        title: Title of a variant comparison
        axis: Column name of the variant axis

    Returns:
        Artifact name to written path
    """
    logger = _get_logger()

    from core.models import ExperimentReport
    from core.report import emit_report, emit_variants

    reports = {k: ExperimentReport.model_validate(v) for k, v in report_dicts.items()}
    if len(reports) == 1 and axis == "variant":
        files = emit_report(next(iter(reports.values())), output_dir, formats)
    else:
        files = emit_variants(reports, output_dir, title, axis, formats)
    logger.info(f"Wrote {len(files)} files to {output_dir}")
    return {k: str(v) for k, v in files.items()}


# =============================================================================
# Exports
# =============================================================================

__all__ = [
    # Configuration
    "RetryConfig",
    "TaskTimeouts",
    "NON_RETRYABLE_ERRORS",
    "should_retry",
    "retry_condition",
    # Tasks
    "run_trial_task",
    "alpha_sweep_trial_task",
    "aggregate_trials_task",
    "emit_report_task",
]
