"""Experiment variants: ablations and parameter sweeps over a base spec."""

import logging
import time

from .comparator import build_report
from .errors import InvalidArgumentError, StageError
from .executor import draw_knockoff, error_result, run_experiment, select_with_knockoff
from .models import (
    MIXTURE_WEIGHT_PRESETS,
    AblationFlags,
    ExperimentReport,
    ExperimentSpec,
    TrialResult,
)

logger = logging.getLogger(__name__)

ABLATION_VARIANTS = ("full", "no_rex", "K=1", "no_swapper_decor", "no_drp")
ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(11))
BETA_SCALE_GRID = (5.0, 10.0, 15.0, 20.0)
RHO_GRID = (0.6, 0.7, 0.8)


def _variant(base: ExperimentSpec, name: str, **updates) -> ExperimentSpec:
    spec = base.model_copy(deep=True, update={"tag": f"{base.tag}/{name}", **updates})
    return ExperimentSpec.model_validate(spec.model_dump())


def ablation_variants(base: ExperimentSpec) -> dict[str, ExperimentSpec]:
    """The five ablation variants, all on the base seed ladder."""
    flags = {
        "full": AblationFlags(),
        "no_rex": AblationFlags(disable_rex=True),
        "K=1": AblationFlags(k_override=1),
        "no_swapper_decor": AblationFlags(disable_swapper_decor=True),
        "no_drp": AblationFlags(disable_drp=True),
    }
    return {name: _variant(base, name, ablation=flags[name]) for name in ABLATION_VARIANTS}


def beta_scale_variants(base: ExperimentSpec, grid=BETA_SCALE_GRID) -> dict[str, ExperimentSpec]:
    return {
        f"c={c:g}": _variant(
            base,
            f"c={c:g}",
            coefficients=base.coefficients.model_copy(update={"scale_divisor": float(c)}),
        )
        for c in grid
    }


def rho_variants(base: ExperimentSpec, grid=RHO_GRID) -> dict[str, ExperimentSpec]:
    if base.dataset.kind != "mixture":
        raise InvalidArgumentError(f"rho sweep needs a mixture dataset, got {base.dataset.kind}")
    variants = {}
    for rho in grid:
        mixture = base.dataset.mixture.model_copy(update={"rho_base": float(rho)})
        dataset = base.dataset.model_copy(update={"mixture": mixture})
        variants[f"rho={rho:g}"] = _variant(base, f"rho={rho:g}", dataset=dataset)
    return variants


def pi_variants(base: ExperimentSpec, presets=None) -> dict[str, ExperimentSpec]:
    if base.dataset.kind != "mixture":
        raise InvalidArgumentError(f"pi sweep needs a mixture dataset, got {base.dataset.kind}")
    variants = {}
    for name in presets or MIXTURE_WEIGHT_PRESETS:
        if name not in MIXTURE_WEIGHT_PRESETS:
            raise InvalidArgumentError(f"Unknown mixture preset '{name}'")
        mixture = base.dataset.mixture.model_copy(
            update={"weights": MIXTURE_WEIGHT_PRESETS[name]}
        )
        dataset = base.dataset.model_copy(update={"mixture": mixture})
        variants[name] = _variant(base, name, dataset=dataset)
    return variants


def alpha_variants(base: ExperimentSpec, alphas=ALPHA_GRID) -> dict[str, ExperimentSpec]:
    """DRP on with a fixed weight per alpha; only used to label and digest the sweep."""
    return {
        f"alpha={a:g}": _variant(
            base,
            f"alpha={a:g}",
            drp=base.drp.model_copy(
                update={"enabled": True, "alpha_schedule": "fixed", "alpha": float(a)}
            ),
            ablation=base.ablation.model_copy(update={"disable_drp": False}),
        )
        for a in alphas
    }


def run_variants(variants: dict[str, ExperimentSpec]) -> dict[str, ExperimentReport]:
    """Run every variant's experiment in order."""
    reports = {}
    for name, spec in variants.items():
        logger.info(f"Running variant {name}")
        reports[name] = run_experiment(spec)
    return reports


def run_ablation(base: ExperimentSpec) -> dict[str, ExperimentReport]:
    """One report per ablation variant, sharing the base seed ladder."""
    reports = run_variants(ablation_variants(base))
    full, single = reports["full"].aggregates.get("fdp"), reports["K=1"].aggregates.get("fdp")
    if full and single:
        direction = "holds" if single.mean >= full.mean else "does not hold"
        logger.info(
            f"Mean FDR K=1 {single.mean:.3f} vs full {full.mean:.3f}: "
            f"expected ordering {direction}"
        )
    return reports


def alpha_sweep_trial(
    variants: dict[str, ExperimentSpec], repeat_index: int
) -> dict[str, TrialResult]:
    """One repeat of the alpha sweep: one knockoff, perturbed with every alpha.

    All variants share data and training settings, so the generator is trained
    once and only the perturbation, the filter and the diagnostics rerun.
    """
    first = next(iter(variants.values()))
    started = time.perf_counter()
    try:
        draw = draw_knockoff(first, repeat_index)
    except StageError as e:
        logger.warning(f"Alpha sweep repeat {repeat_index} failed in stage '{e.stage}'")
        elapsed = time.perf_counter() - started
        return {
            name: error_result(spec, repeat_index, e, elapsed) for name, spec in variants.items()
        }

    results = {}
    for name, spec in variants.items():
        try:
            outcome = select_with_knockoff(spec, repeat_index, draw, spec.drp, started)
            results[name] = outcome.result
        except StageError as e:
            results[name] = error_result(spec, repeat_index, e, time.perf_counter() - started)
    return results


def run_alpha_sweep(base: ExperimentSpec, alphas=ALPHA_GRID) -> dict[str, ExperimentReport]:
    """FDR and power per DRP weight, reusing one knockoff per repeat."""
    variants = alpha_variants(base, alphas)
    started = time.perf_counter()
    per_variant: dict[str, list[TrialResult]] = {name: [] for name in variants}
    for index in range(base.num_repeats):
        for name, result in alpha_sweep_trial(variants, index).items():
            per_variant[name].append(result)
    elapsed = time.perf_counter() - started
    return {
        name: build_report(variants[name], trials, total_seconds=elapsed)
        for name, trials in per_variant.items()
    }
