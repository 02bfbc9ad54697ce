"""Aggregate trial results into experiment reports and compare variants."""

import logging
import math

import numpy as np

from .diagnostics import statistic_distribution_summary
from .models import AggregateStats, ExperimentReport, ExperimentSpec, TrialResult
from .seeding import content_digest

logger = logging.getLogger(__name__)

# Headline numbers for the Gaussian-mixture benchmark at n=2000, p=100
PUBLISHED_REFERENCE = {"label": "published (MG, n=2000, p=100)", "fdp": 0.081, "power": 0.973}

AGGREGATED_COLUMNS = ("fdp", "power", "tau", "num_selected", "runtime_seconds", "train_seconds")


def trial_row(trial: TrialResult) -> dict:
    """Flat per-repeat row; error trials carry blanks for the selection columns."""
    row = {
        "repeat_index": trial.repeat_index,
        "seed": trial.seed,
        "status": trial.status,
        "stage": trial.stage,
        "error": trial.error,
        "fdp": None,
        "power": None,
        "tau": None,
        "num_selected": None,
        "penalty": None,
        "runtime_seconds": trial.runtime_seconds,
        "train_seconds": trial.train_seconds,
        "best_epoch": trial.best_epoch,
        "stopping_epoch": trial.stopping_epoch,
    }
    if trial.selection is not None:
        sel = trial.selection
        row.update(
            fdp=sel.fdp,
            power=sel.power,
            tau=sel.tau,
            num_selected=len(sel.selected),
            penalty=sel.penalty,
        )
        for key in ("drp_alpha", "swc_generated", "swc_perturbed"):
            if key in sel.metadata:
                row[key] = sel.metadata[key]
    if trial.swap_metrics is not None:
        for metric, value in trial.swap_metrics.averages.items():
            row[f"swap_{metric}"] = value
        row["mean_abs_correlation"] = trial.swap_metrics.mean_abs_correlation
    return row


def aggregate_values(values: list[float]) -> AggregateStats | None:
    """Mean, population std, median and 5%/95% quantiles of the finite values."""
    finite = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    if finite.size == 0:
        return None
    return AggregateStats(
        mean=float(np.mean(finite)),
        std=float(np.std(finite)) if finite.size > 1 else 0.0,
        median=float(np.median(finite)),
        q05=float(np.quantile(finite, 0.05)),
        q95=float(np.quantile(finite, 0.95)),
        count=int(finite.size),
    )


def aggregate_trials(trials: list[TrialResult]) -> dict[str, AggregateStats]:
    """Aggregate every numeric per-repeat column over the successful trials."""
    rows = [trial_row(t) for t in trials if t.status == "success"]
    columns = list(AGGREGATED_COLUMNS)
    for row in rows:
        columns += [k for k in row if k.startswith("swap_") or k.startswith("swc_")]
    aggregates = {}
    for column in dict.fromkeys(columns):
        stats = aggregate_values([row.get(column) for row in rows])
        if stats is not None:
            aggregates[column] = stats
    return aggregates


def build_report(
    spec: ExperimentSpec,
    trials: list[TrialResult],
    total_seconds: float = 0.0,
) -> ExperimentReport:
    """Reduce trials (in repeat-index order) into an ExperimentReport.

    Args:
        spec: The experiment specification
        trials: Trial results in any completion order
        total_seconds: Wall-clock time of the whole experiment

    Returns:
        ExperimentReport with aggregates, failures and summaries
    """
    trials = sorted(trials, key=lambda t: t.repeat_index)
    successful = [t for t in trials if t.status == "success"]
    failures = [
        {"repeat_index": t.repeat_index, "seed": t.seed, "stage": t.stage, "error": t.error}
        for t in trials
        if t.status != "success"
    ]
    if failures:
        logger.warning(f"{len(failures)} of {len(trials)} trials failed")

    summary = None
    with_w = [t for t in successful if t.selection is not None]
    if with_w:
        p = len(with_w[0].selection.w)
        masks = np.zeros((len(with_w), p), dtype=bool)
        for i, trial in enumerate(with_w):
            masks[i, trial.nonnull_indices] = True
        summary = statistic_distribution_summary([t.selection.w for t in with_w], masks)

    swap_averages: dict[str, float] = {}
    reports = [t.swap_metrics for t in successful if t.swap_metrics is not None]
    if reports:
        for metric in reports[0].averages:
            swap_averages[metric] = float(np.mean([r.averages[metric] for r in reports]))

    return ExperimentReport(
        spec=spec,
        digest=content_digest(spec.model_dump()),
        trials=trials,
        aggregates=aggregate_trials(trials),
        failures=failures,
        single_repeat=len(successful) == 1,
        statistic_summary=summary,
        swap_metric_averages=swap_averages,
        total_seconds=total_seconds,
        loss_log=next((t.loss_log for t in trials if t.loss_log is not None), None),
    )


def compare_reports(reports: dict[str, ExperimentReport]) -> dict:
    """Summary of several variants keyed by name.

    Args:
        reports: Variant name to report

    Returns:
        Comparison summary dict
    """
    summary = {"total_variants": len(reports), "variants": {}}
    for name, report in reports.items():
        entry = {
            "digest": report.digest,
            "successful": len(report.successful),
            "failed": len(report.failures),
        }
        for column in ("fdp", "power"):
            stats = report.aggregates.get(column)
            entry[f"{column}_mean"] = stats.mean if stats else None
            entry[f"{column}_std"] = stats.std if stats else None
        summary["variants"][name] = entry
    return summary


def _fmt(value: float | None, digits: int = 3) -> str:
    if value is None:
        return "-"
    if not math.isfinite(value):
        return str(value)
    return f"{value:.{digits}f}"


def format_report_markdown(report: ExperimentReport, figures: list[str] | None = None) -> str:
    """Format an experiment report as markdown.

    Args:
        report: The report to format
        figures: Relative figure paths to reference

    Returns:
        Markdown formatted string
    """
    spec = report.spec
    lines = [
        f"# Knockoff Experiment: {spec.tag}",
        "",
        f"**Dataset:** {spec.dataset.tag} (n={spec.n}, p={spec.p})",
        f"**Knockoffs:** {spec.knockoff_source}, net preset {spec.net_preset}",
        f"**Target FDR q:** {spec.selection.q}",
        f"**Repeats:** {len(report.trials)} ({len(report.successful)} successful)",
        f"**Config digest:** `{report.digest}`",
        f"**Total duration:** {report.total_seconds:.1f}s",
        "",
        "## Selection",
        "",
        "| Statistic | Mean | Std | Median | 5% | 95% |",
        "|-----------|------|-----|--------|----|-----|",
    ]
    for column in ("fdp", "power", "tau", "num_selected"):
        stats = report.aggregates.get(column)
        if stats is None:
            continue
        lines.append(
            f"| {column} | {_fmt(stats.mean)} | {_fmt(stats.std)} | {_fmt(stats.median)} | "
            f"{_fmt(stats.q05)} | {_fmt(stats.q95)} |"
        )
    if report.single_repeat:
        lines.extend(["", "_Single repeat: standard deviations are reported as 0._"])

    fdp = report.aggregates.get("fdp")
    power = report.aggregates.get("power")
    lines.extend(
        [
            "",
            "## Reference",
            "",
            "| Setting | FDR | Power |",
            "|---------|-----|-------|",
            f"| {PUBLISHED_REFERENCE['label']} | {PUBLISHED_REFERENCE['fdp']:.3f} | "
            f"{PUBLISHED_REFERENCE['power']:.3f} |",
            f"| this run ({spec.dataset.tag}, n={spec.n}, p={spec.p}) | "
            f"{_fmt(fdp.mean if fdp else None)} | {_fmt(power.mean if power else None)} |",
        ]
    )

    if report.swap_metric_averages:
        lines.extend(["", "## Swap Property", "", "| Metric | Mean over trials |", "|---|---|"])
        for metric, value in report.swap_metric_averages.items():
            lines.append(f"| {metric} | {_fmt(value, 4)} |")

    summary = report.statistic_summary
    if summary is not None:
        lines.extend(
            [
                "",
                "## Knockoff Statistics",
                "",
                f"- **Null:** mean {_fmt(summary.null_mean, 4)}, std {_fmt(summary.null_std, 4)} "
                f"({summary.null_count} values)",
                f"- **Nonnull:** mean {_fmt(summary.nonnull_mean, 4)}, "
                f"std {_fmt(summary.nonnull_std, 4)} ({summary.nonnull_count} values)",
            ]
        )

    runtime = report.aggregates.get("train_seconds")
    if runtime is not None:
        lines.extend(["", f"- **Mean training time per trial:** {runtime.mean:.1f}s"])

    log = report.loss_log
    if log is not None and log.epochs:
        lines.append(
            f"- **Dependency loss minimum (repeat 0):** epoch {log.drl_min_epoch} "
            f"of {log.stopping_epoch or len(log.epochs)}"
        )

    if report.failures:
        lines.extend(["", "## Failures", ""])
        for failure in report.failures:
            lines.append(
                f"- repeat {failure['repeat_index']} (stage {failure['stage']}): "
                f"{failure['error']}"
            )

    if figures:
        lines.extend(["", "## Figures", ""])
        lines.extend(f"![{name}]({name})" for name in figures)

    return "\n".join(lines)


def format_variants_markdown(reports: dict[str, ExperimentReport], title: str) -> str:
    """Side-by-side FDR and power for named variants (ablations, sweeps)."""
    comparison = compare_reports(reports)
    lines = [
        f"# {title}",
        "",
        "| Variant | FDR mean | FDR std | Power mean | Power std | Failed | Digest |",
        "|---------|----------|---------|------------|-----------|--------|--------|",
    ]
    for name, entry in comparison["variants"].items():
        lines.append(
            f"| {name} | {_fmt(entry['fdp_mean'])} | {_fmt(entry['fdp_std'])} | "
            f"{_fmt(entry['power_mean'])} | {_fmt(entry['power_std'])} | {entry['failed']} | "
            f"`{entry['digest']}` |"
        )
    return "\n".join(lines)
