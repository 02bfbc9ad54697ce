"""Prefect orchestration of knockoff experiments.

This package fans out seeded trials as Prefect tasks and reduces them into
experiment reports, with built-in observability.

## Quick Start

1. Run ephemeral mode (no server needed):
   uv run python -m orchestrators.prefect.flows

2. (Optional) Start Prefect server for UI:
   uv run prefect server start
   # Access UI at http://localhost:4200

## Components

- tasks.py: Task implementations (trial, aggregation, report files)
- flows.py: Flow definitions (experiment, variants, alpha sweep)
- client.py: Client API returning validated reports
"""

from .client import SWEEPS, check_prefect_health, generate_flow_run_id, run_experiment, run_sweep
from .flows import (
    AlphaSweepFlow,
    ExperimentFlow,
    VariantsFlow,
    run_alpha_sweep_flow,
    run_experiment_flow,
    run_variants_flow,
)
from .tasks import (
    NON_RETRYABLE_ERRORS,
    RetryConfig,
    TaskTimeouts,
    aggregate_trials_task,
    alpha_sweep_trial_task,
    emit_report_task,
    retry_condition,
    run_trial_task,
    should_retry,
)

__all__ = [
    # Retry Configuration
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
    # Flows
    "ExperimentFlow",
    "VariantsFlow",
    "AlphaSweepFlow",
    "run_experiment_flow",
    "run_variants_flow",
    "run_alpha_sweep_flow",
    # Client
    "SWEEPS",
    "run_experiment",
    "run_sweep",
    "generate_flow_run_id",
    "check_prefect_health",
]
