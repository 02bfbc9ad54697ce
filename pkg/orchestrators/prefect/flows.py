"""Prefect flows for knockoff experiments.

Flows are the main orchestration unit in Prefect. They:
- Fan out seeded trials as concurrent tasks
- Convert failed trials into error rows and keep going
- Reduce completed trials in repeat-index order

Concurrency comes from the task runner: `run_*` helpers attach a
ThreadPoolTaskRunner sized by the requested worker count. Output is identical
for any worker count because every trial derives its own seeds.
"""

import logging
import time
from typing import Any

from prefect import flow
from prefect.futures import wait
from prefect.logging import get_run_logger
from prefect.task_runners import ThreadPoolTaskRunner

from .tasks import (
    aggregate_trials_task,
    alpha_sweep_trial_task,
    emit_report_task,
    run_trial_task,
)


def _get_logger() -> logging.Logger:
    """Get logger for flow execution.

    Returns Prefect run logger if in flow context,
    otherwise returns standard Python logger.
    """
    try:
        return get_run_logger()
    except Exception:
        return logging.getLogger("orchestrators.prefect.flows")


# =============================================================================
# Trial Fan-out
# =============================================================================


def _create_error_result(spec_dict: dict, repeat_index: int, error: Any) -> dict:
    """Create an error TrialResult dict for a failed trial.

    Args:
        spec_dict: Serialized ExperimentSpec of the trial
        repeat_index: Position on the seed ladder
        error: The exception (or failure payload) of the trial

    Returns:
        TrialResult dict with error status
    """
    from core.executor import error_result
    from core.models import ExperimentSpec

    spec = ExperimentSpec.model_validate(spec_dict)
    if not isinstance(error, BaseException):
        error = RuntimeError(str(error))
    return error_result(spec, repeat_index, error).model_dump()


def _process_trial_futures(
    spec_dict: dict,
    trial_futures: list[tuple[int, Any]],
    logger: logging.Logger,
) -> list[dict]:
    """Collect trial futures in repeat-index order.

    Handles partial failures by converting exceptions to error results.

    Args:
        spec_dict: Serialized ExperimentSpec
        trial_futures: List of (repeat_index, future) tuples
        logger: Logger instance

    Returns:
        List of TrialResult dicts
    """
    results = []

    for repeat_index, future in sorted(trial_futures, key=lambda item: item[0]):
        try:
            state = future.state

            if state.is_completed():
                results.append(future.result())
                logger.info(f"  ✓ Trial {repeat_index} completed")
            elif state.is_failed():
                error = state.result(raise_on_failure=False)
                logger.warning(f"  ✗ Trial {repeat_index} failed: {error}")
                results.append(_create_error_result(spec_dict, repeat_index, error))
            else:
                logger.warning(f"  ? Trial {repeat_index} in unexpected state: {state}")
                results.append(
                    _create_error_result(
                        spec_dict, repeat_index, RuntimeError(f"Unexpected state: {state}")
                    )
                )
        except Exception as e:
            logger.warning(f"  ✗ Trial {repeat_index} failed: {e}")
            results.append(_create_error_result(spec_dict, repeat_index, e))

    return results


def _run_trials(spec_dict: dict, logger: logging.Logger) -> dict:
    """Submit every repeat of one spec, then aggregate."""
    start_time = time.time()
    num_repeats = spec_dict["num_repeats"]

    trial_futures = []
    for repeat_index in range(num_repeats):
        trial_futures.append((repeat_index, run_trial_task.submit(spec_dict, repeat_index)))
    wait([f for _, f in trial_futures])

    trial_results = _process_trial_futures(spec_dict, trial_futures, logger)
    failed = sum(1 for r in trial_results if r.get("status") == "error")
    logger.info(f"  {num_repeats - failed} successful, {failed} failed")

    return aggregate_trials_task(spec_dict, trial_results, time.time() - start_time)


# =============================================================================
# Experiment Flow
# =============================================================================


@flow(
    name="knockoff-experiment",
    description="Repeated seeded knockoff trials aggregated into one report",
    retries=0,  # Don't retry the whole flow; failed trials become error rows
    log_prints=True,
)
def ExperimentFlow(  # noqa: N802
    spec_dict: dict,
    output_dir: str | None = None,
    formats: list[str] | None = None,
) -> dict:
    """Execute every repeat of an experiment and aggregate.

    Args:
        spec_dict: Serialized ExperimentSpec
        output_dir: Where to write report files (nothing written if None)
        formats: Report formats to emit

    Returns:
        ExperimentReport as a dict
    """
    logger = _get_logger()
    logger.info(
        f"Starting experiment '{spec_dict.get('tag')}' with "
        f"{spec_dict['num_repeats']} repeats"
    )

    report = _run_trials(spec_dict, logger)

    if output_dir is not None:
        emit_report_task({"experiment": report}, output_dir, formats or ["csv", "json"])

    logger.info(f"Experiment '{spec_dict.get('tag')}' complete")
    return report


# =============================================================================
# Variant Flows
# =============================================================================


@flow(
    name="knockoff-variants",
    description="Run one experiment per variant on a shared seed ladder",
    retries=0,
    log_prints=True,
)
def VariantsFlow(  # noqa: N802
    variant_dicts: dict[str, dict],
    title: str,
    axis: str = "variant",
    output_dir: str | None = None,
    formats: list[str] | None = None,
) -> dict:
    """Run each variant's trials and report them side by side.

    Args:
        variant_dicts: Variant name to serialized ExperimentSpec
        title: Title of the comparison
        axis: Column name of the variant axis
        output_dir: Where to write report files (nothing written if None)
        formats: Report formats to emit

    Returns:
        Variant name to ExperimentReport dict
    """
    logger = _get_logger()
    logger.info(f"Starting '{title}' over {len(variant_dicts)} variants")

    reports = {}
    for name, spec_dict in variant_dicts.items():
        logger.info(f"Variant {name}:")
        reports[name] = _run_trials(spec_dict, logger)

    if output_dir is not None:
        emit_report_task(reports, output_dir, formats or ["csv", "json"], title, axis)
    return reports


@flow(
    name="knockoff-alpha-sweep",
    description="FDR and power across DRP weights with one knockoff per repeat",
    retries=0,
    log_prints=True,
)
def AlphaSweepFlow(  # noqa: N802
    variant_dicts: dict[str, dict],
    output_dir: str | None = None,
    formats: list[str] | None = None,
) -> dict:
    """Train once per repeat and evaluate every DRP weight.

    Args:
        variant_dicts: "alpha=<a>" to serialized ExperimentSpec
        output_dir: Where to write report files (nothing written if None)
        formats: Report formats to emit

    Returns:
        Variant name to ExperimentReport dict
    """
    logger = _get_logger()
    start_time = time.time()
    first = next(iter(variant_dicts.values()))
    num_repeats = first["num_repeats"]
    logger.info(f"Starting alpha sweep over {len(variant_dicts)} weights, {num_repeats} repeats")

    futures = [
        (i, alpha_sweep_trial_task.submit(variant_dicts, i)) for i in range(num_repeats)
    ]
    wait([f for _, f in futures])

    per_variant: dict[str, list[dict]] = {name: [] for name in variant_dicts}
    for repeat_index, future in futures:
        state = future.state
        if state.is_completed():
            for name, result in future.result().items():
                per_variant[name].append(result)
        else:
            error = state.result(raise_on_failure=False)
            logger.warning(f"  ✗ Alpha sweep repeat {repeat_index} failed: {error}")
            for name, spec_dict in variant_dicts.items():
                per_variant[name].append(_create_error_result(spec_dict, repeat_index, error))

    elapsed = time.time() - start_time
    reports = {
        name: aggregate_trials_task(variant_dicts[name], trials, elapsed)
        for name, trials in per_variant.items()
    }
    if output_dir is not None:
        emit_report_task(reports, output_dir, formats or ["csv", "json"], "DRP weight sweep",
                         "alpha")
    return reports


# =============================================================================
# Runners
# =============================================================================


def _with_workers(flow_fn, workers: int):
    return flow_fn.with_options(task_runner=ThreadPoolTaskRunner(max_workers=workers))


def run_experiment_flow(
    spec_dict: dict,
    workers: int = 1,
    output_dir: str | None = None,
    formats: list[str] | None = None,
) -> dict:
    """Run the experiment flow with `workers` concurrent trials."""
    return _with_workers(ExperimentFlow, workers)(spec_dict, output_dir, formats)


def run_variants_flow(
    variant_dicts: dict[str, dict],
    title: str,
    axis: str = "variant",
    workers: int = 1,
    output_dir: str | None = None,
    formats: list[str] | None = None,
) -> dict:
    """Run the variants flow with `workers` concurrent trials."""
    return _with_workers(VariantsFlow, workers)(variant_dicts, title, axis, output_dir, formats)


def run_alpha_sweep_flow(
    variant_dicts: dict[str, dict],
    workers: int = 1,
    output_dir: str | None = None,
    formats: list[str] | None = None,
) -> dict:
    """Run the alpha sweep flow with `workers` concurrent repeats."""
    return _with_workers(AlphaSweepFlow, workers)(variant_dicts, output_dir, formats)


if __name__ == "__main__":
    from core.models import ExperimentSpec

    demo = ExperimentSpec(n=200, p=10, num_repeats=2, knockoff_source="oracle", tag="demo")
    result = run_experiment_flow(demo.model_dump(), workers=2)
    print(f"Demo FDR mean: {result['aggregates']['fdp']['mean']:.3f}")
