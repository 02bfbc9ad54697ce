"""Prefect client for executing knockoff experiment flows.

Prefect 3.x supports ephemeral execution (no server required) by default.
For persistence and UI, start the Prefect server: prefect server start

Usage:
    from orchestrators.prefect.client import run_experiment
    report = run_experiment(spec, workers=4)
"""

import uuid
from pathlib import Path

from core.models import CoefficientSpec, ExperimentReport, ExperimentSpec
from core.variants import (
    ALPHA_GRID,
    ablation_variants,
    alpha_variants,
    beta_scale_variants,
    pi_variants,
    rho_variants,
)

from .flows import run_alpha_sweep_flow, run_experiment_flow, run_variants_flow

# Sweep name to (variant builder, comparison title, axis column)
SWEEPS = {
    "ablation": (ablation_variants, "Ablation", "variant"),
    "beta-scale": (beta_scale_variants, "Coefficient scale sweep", "scale_divisor"),
    "rho": (rho_variants, "Correlation base sweep", "rho_base"),
    "pi": (pi_variants, "Mixture weight sweep", "weights"),
}


def generate_flow_run_id(tag: str) -> str:
    """Generate a unique flow run ID.

    Args:
        tag: Experiment tag to include in the ID

    Returns:
        Unique flow run ID string
    """
    safe = tag.replace("/", "-").replace(" ", "-")
    return f"knockoff-{safe}-{uuid.uuid4().hex[:8]}"


def _out(output_dir: Path | None) -> str | None:
    return str(output_dir) if output_dir is not None else None


def run_experiment(
    spec: ExperimentSpec,
    workers: int = 1,
    output_dir: Path | None = None,
    formats: list[str] | None = None,
) -> ExperimentReport:
    """Run an experiment flow in ephemeral mode and return the validated report."""
    result = run_experiment_flow(spec.model_dump(), workers, _out(output_dir), formats)
    return ExperimentReport.model_validate(result)


def run_sweep(
    kind: str,
    base: ExperimentSpec,
    workers: int = 1,
    output_dir: Path | None = None,
    formats: list[str] | None = None,
) -> dict[str, ExperimentReport]:
    """Run an ablation or a parameter sweep.

    Args:
        kind: One of "ablation", "beta-scale", "rho", "pi", "alpha"
        base: Base experiment specification
        workers: Concurrent trials
        output_dir: Where to write the comparison (nothing written if None)
        formats: Report formats to emit

    Returns:
        Variant name to report
    """
    if kind == "alpha":
        variants = alpha_variants(base, ALPHA_GRID)
        dicts = {name: spec.model_dump() for name, spec in variants.items()}
        result = run_alpha_sweep_flow(dicts, workers, _out(output_dir), formats)
    else:
        if kind not in SWEEPS:
            valid = ", ".join([*SWEEPS, "alpha"])
            raise ValueError(f"Unknown sweep '{kind}'. Valid sweeps: {valid}")
        build, title, axis = SWEEPS[kind]
        dicts = {name: spec.model_dump() for name, spec in build(base).items()}
        result = run_variants_flow(dicts, title, axis, workers, _out(output_dir), formats)
    return {name: ExperimentReport.model_validate(r) for name, r in result.items()}


# =============================================================================
# Health Check
# =============================================================================


def check_prefect_health() -> dict:
    """Check Prefect health by running a two-trial oracle experiment.

    Returns:
        Dict with health status:
            - healthy: bool
            - mode: "ephemeral" or "unknown"
            - message: Status message
    """
    spec = ExperimentSpec(
        n=60,
        p=6,
        coefficients=CoefficientSpec(num_nonnull=3),
        num_repeats=2,
        knockoff_source="oracle",
        tag="health-check",
    )
    try:
        report = run_experiment(spec)
        return {
            "healthy": True,
            "mode": "ephemeral",
            "message": f"Prefect is healthy. {len(report.successful)}/2 trials succeeded",
        }
    except Exception as e:
        return {
            "healthy": False,
            "mode": "unknown",
            "message": f"Prefect health check failed: {e}",
        }
