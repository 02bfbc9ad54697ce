"""End-to-end execution of seeded knockoff trials."""

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .datagen import SyntheticDataset, generate_dataset, oracle_knockoff_independent
from .diagnostics import swap_property_suite
from .drp import apply_drp
from .errors import StageError
from .filter import run_filter
from .knockoff_model import generate_knockoff
from .models import (
    DrpConfig,
    ExperimentSpec,
    ProjectionConfig,
    SelectionResult,
    SwapMetricReport,
    TrainingLog,
    TrialResult,
)
from .seeding import content_digest, derive_seed, repeat_seed
from .sw_metrics import sliced_wasserstein_correlation
from .trainer import train

logger = logging.getLogger(__name__)

STAGES = ("data", "train", "knockoff", "drp", "filter", "diagnostics")


@dataclass
class KnockoffDraw:
    """Data and the (unperturbed) knockoff of one repeat."""

    seed: int
    dataset: SyntheticDataset
    knockoff: np.ndarray
    log: TrainingLog | None = None
    train_seconds: float = 0.0


@dataclass
class TrialOutcome:
    """Everything one trial produced, including the artifacts not kept in TrialResult."""

    result: TrialResult
    selection: SelectionResult
    swap_metrics: SwapMetricReport
    log: TrainingLog | None
    dataset: SyntheticDataset
    knockoff: np.ndarray
    extras: dict = field(default_factory=dict)


def _stage(name: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as e:
        logger.debug(f"Stage '{name}' raised {type(e).__name__}: {e}")
        raise StageError(name, e) from e


def knockoff_dependency(X: np.ndarray, X_tilde: np.ndarray, seed: int) -> float:
    """SWC between X and a knockoff with projections pinned by `seed`."""
    rows = X.shape[0] - X.shape[0] % 2
    cfg = ProjectionConfig(seed=seed)
    return float(sliced_wasserstein_correlation(X[:rows], np.asarray(X_tilde)[:rows], cfg))


def draw_knockoff(spec: ExperimentSpec, repeat_index: int) -> KnockoffDraw:
    """Generate the data of one repeat and its knockoff (trained or oracle).

    Raises:
        StageError: Tagged "data", "train" or "knockoff"
    """
    seed = repeat_seed(spec.base_seed, repeat_index)
    dataset = _stage(
        "data",
        generate_dataset,
        spec.dataset,
        spec.n,
        spec.p,
        spec.coefficients,
        spec.response,
        derive_seed(seed, "data"),
    )

    if spec.knockoff_source == "oracle":
        X_tilde = _stage(
            "knockoff", oracle_knockoff_independent, dataset.X, derive_seed(seed, "oracle")
        )
        return KnockoffDraw(seed=seed, dataset=dataset, knockoff=X_tilde)

    train_cfg = spec.effective_train_config().model_copy(
        update={"seed": derive_seed(seed, "train")}
    )
    trained = _stage("train", train, dataset.X, train_cfg, spec.net_config())
    X_tilde = _stage(
        "knockoff", generate_knockoff, trained.net, dataset.X, derive_seed(seed, "knockoff")
    )
    return KnockoffDraw(
        seed=seed,
        dataset=dataset,
        knockoff=X_tilde,
        log=trained.log,
        train_seconds=trained.log.total_seconds,
    )


def select_with_knockoff(
    spec: ExperimentSpec,
    repeat_index: int,
    draw: KnockoffDraw,
    drp_cfg: DrpConfig,
    started: float,
) -> TrialOutcome:
    """Perturb (when enabled), filter and diagnose a drawn knockoff.

    Raises:
        StageError: Tagged "drp", "filter" or "diagnostics"
    """
    seed, dataset = draw.seed, draw.dataset
    X_tilde = draw.knockoff
    metadata: dict = {"knockoff_source": spec.knockoff_source}
    extras: dict = {}
    if drp_cfg.enabled:
        drp_seed = drp_cfg.seed if drp_cfg.seed is not None else derive_seed(seed, "drp")
        outcome = _stage("drp", apply_drp, X_tilde, dataset.X, drp_cfg, seed=drp_seed)
        swc_seed = derive_seed(seed, "swc")
        extras["swc_generated"] = _stage(
            "drp", knockoff_dependency, dataset.X, X_tilde, swc_seed
        )
        extras["swc_perturbed"] = _stage(
            "drp", knockoff_dependency, dataset.X, outcome.knockoff, swc_seed
        )
        metadata.update(outcome.metadata())
        metadata.update(extras)
        X_tilde = outcome.knockoff

    selection = _stage(
        "filter",
        run_filter,
        dataset.X,
        X_tilde,
        dataset.Y,
        dataset.truth_mask,
        spec.selection,
        derive_seed(seed, "filter"),
        metadata,
        content_digest(spec.model_dump()),
    )
    swap_metrics = _stage(
        "diagnostics", swap_property_suite, dataset.X, X_tilde, derive_seed(seed, "diagnostics")
    )

    log = draw.log
    loss_log = None
    if log is not None and repeat_index == 0:
        loss_log = log.model_copy(update={"steps": []})
    result = TrialResult(
        repeat_index=repeat_index,
        seed=seed,
        selection=selection,
        swap_metrics=swap_metrics,
        nonnull_indices=np.flatnonzero(dataset.nonnull_mask).tolist(),
        best_epoch=log.best_epoch if log else None,
        stopping_epoch=log.stopping_epoch if log else None,
        train_seconds=draw.train_seconds,
        runtime_seconds=time.perf_counter() - started,
        loss_log=loss_log,
    )
    return TrialOutcome(
        result=result,
        selection=selection,
        swap_metrics=swap_metrics,
        log=log,
        dataset=dataset,
        knockoff=X_tilde,
        extras=extras,
    )


def run_trial(spec: ExperimentSpec, repeat_index: int) -> TrialOutcome:
    """Run one trial: data, training, knockoff, perturbation, selection, diagnostics.

    Every stochastic stage draws from a seed derived from
    (spec.base_seed, repeat_index), so a trial is reproducible on its own and
    unaffected by how many repeats the experiment runs.

    Raises:
        StageError: Wrapping the failure of the named stage
    """
    started = time.perf_counter()
    logger.info(f"Trial {repeat_index} on {spec.dataset.tag} (n={spec.n}, p={spec.p})")
    draw = draw_knockoff(spec, repeat_index)
    outcome = select_with_knockoff(spec, repeat_index, draw, spec.effective_drp_config(), started)
    result = outcome.result
    logger.info(
        f"Trial {repeat_index} done in {result.runtime_seconds:.1f}s: "
        f"{result.selection.score_text()}"
    )
    return outcome


def error_result(
    spec: ExperimentSpec, repeat_index: int, error: BaseException, runtime_seconds: float = 0.0
) -> TrialResult:
    """TrialResult recording a failure (stage taken from a StageError)."""
    stage = error.stage if isinstance(error, StageError) else None
    cause = error.cause if isinstance(error, StageError) else error
    return TrialResult(
        repeat_index=repeat_index,
        seed=repeat_seed(spec.base_seed, repeat_index),
        status="error",
        error=str(cause),
        stage=stage,
        runtime_seconds=runtime_seconds,
    )


def execute_trial(spec: ExperimentSpec, repeat_index: int) -> TrialResult:
    """Run one trial, converting any failure into an error result.

    Args:
        spec: Experiment specification
        repeat_index: Position on the seed ladder

    Returns:
        TrialResult with status "success" or "error"
    """
    start_time = time.perf_counter()
    try:
        return run_trial(spec, repeat_index).result
    except StageError as e:
        logger.warning(f"Trial {repeat_index} failed in stage '{e.stage}': {e.cause}")
        return error_result(spec, repeat_index, e, time.perf_counter() - start_time)


def run_experiment(
    spec: ExperimentSpec,
    on_trial: Callable[[TrialResult], None] | None = None,
):
    """Execute all repeats of an experiment in order and aggregate them.

    Failed trials are recorded and the experiment continues.

    Returns:
        ExperimentReport
    """
    from .comparator import build_report

    started = time.perf_counter()
    trials = []
    for index in range(spec.num_repeats):
        trial = execute_trial(spec, index)
        trials.append(trial)
        if on_trial is not None:
            on_trial(trial)
    return build_report(spec, trials, total_seconds=time.perf_counter() - started)
