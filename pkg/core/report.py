"""Report files: per-repeat rows, aggregates, summaries and figures."""

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .comparator import (  # noqa: E402
    compare_reports,
    format_report_markdown,
    format_variants_markdown,
    trial_row,
)
from .diagnostics import loss_competition  # noqa: E402
from .errors import InvalidArgumentError  # noqa: E402
from .models import REPORT_FORMATS, ExperimentReport, TrainingLog  # noqa: E402

logger = logging.getLogger(__name__)


def _check_formats(formats) -> set[str]:
    formats = set(formats)
    unknown = formats - set(REPORT_FORMATS)
    if unknown:
        raise InvalidArgumentError(
            f"Unknown report formats: {', '.join(sorted(unknown))}",
            [f"Valid formats: {', '.join(REPORT_FORMATS)}"],
        )
    return formats


def _prepare(output_dir: Path) -> Path:
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InvalidArgumentError(f"Cannot create output directory {output_dir}", [str(e)])
    return output_dir


def trial_frame(report: ExperimentReport) -> pd.DataFrame:
    return pd.DataFrame([trial_row(t) for t in report.trials])


def aggregate_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [{"statistic": name, **stats.model_dump()} for name, stats in report.aggregates.items()]
    return pd.DataFrame(rows, columns=["statistic", "mean", "std", "median", "q05", "q95", "count"])


def load_trial_rows(path: Path) -> pd.DataFrame:
    """Read per-repeat rows written by emit_report."""
    return pd.read_csv(path)


# =============================================================================
# Figures
# =============================================================================


def _bar_chart(
    labels: list[str],
    fdp: list[float],
    power: list[float],
    fdp_err: list[float],
    power_err: list[float],
    q: float,
    title: str,
    path: Path,
) -> None:
    """Grouped FDR / power bars with a horizontal line at the target FDR."""
    x = np.arange(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(labels) + 2.0), 3.6))
    ax.bar(x - width / 2, fdp, width, yerr=fdp_err, label="FDR", color="tab:blue", capsize=3)
    ax.bar(x + width / 2, power, width, yerr=power_err, label="Power", color="tab:orange",
           capsize=3)
    ax.axhline(q, color="red", linestyle="--", linewidth=1.0, label=f"q = {q:g}")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30 if len(labels) > 4 else 0, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _stats(report: ExperimentReport, column: str) -> tuple[float, float]:
    stats = report.aggregates.get(column)
    return (stats.mean, stats.std) if stats else (float("nan"), 0.0)


def plot_selection(report: ExperimentReport, path: Path) -> Path:
    fdp, fdp_std = _stats(report, "fdp")
    power, power_std = _stats(report, "power")
    label = f"{report.spec.dataset.tag} / {report.spec.knockoff_source}"
    _bar_chart(
        [label], [fdp], [power], [fdp_std], [power_std],
        report.spec.selection.q, f"{report.spec.tag}: FDR and power", path,
    )
    return path


def plot_loss_competition(log: TrainingLog, path: Path, epochs: int = 20) -> Path:
    """Normalized swap loss and dependency loss over the first epochs."""
    frame = loss_competition(log, epochs)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(frame["epoch"], frame["swap_loss_normalized"], marker="o", label="swap loss")
    ax.plot(frame["epoch"], frame["drl_normalized"], marker="s", label="dependency loss")
    minimum = frame.loc[frame["drl_min"], "epoch"]
    if not minimum.empty:
        ax.axvline(int(minimum.iloc[0]), color="gray", linestyle=":", label="min dependency loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("normalized loss")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


# =============================================================================
# Emission
# =============================================================================


def emit_report(
    report: ExperimentReport,
    output_dir: Path,
    formats=REPORT_FORMATS,
    log: TrainingLog | None = None,
) -> dict[str, Path]:
    """Write the report in the requested formats.

    Figures are written first so the JSON summary and markdown can reference
    them by relative path.

    Args:
        report: Complete experiment report
        output_dir: Destination directory (created if needed)
        formats: Any of csv, json, markdown, png
        log: Training log of one trial for the loss-competition figure

    Returns:
        Mapping of artifact name to written path

    Raises:
        InvalidArgumentError: Unknown format or unwritable directory
    """
    formats = _check_formats(formats)
    output_dir = _prepare(output_dir)
    log = log if log is not None else report.loss_log
    files: dict[str, Path] = {}

    if "png" in formats:
        files["selection_figure"] = plot_selection(report, output_dir / "selection.png")
        if log is not None and log.epochs:
            files["loss_figure"] = plot_loss_competition(log, output_dir / "loss_competition.png")

    if "csv" in formats:
        files["trials"] = output_dir / "trials.csv"
        trial_frame(report).to_csv(files["trials"], index=False)
        files["aggregates"] = output_dir / "aggregates.csv"
        aggregate_frame(report).to_csv(files["aggregates"], index=False)
        if log is not None and log.epochs:
            files["loss_table"] = output_dir / "loss_competition.csv"
            loss_competition(log).to_csv(files["loss_table"], index=False)

    figures = [p.name for k, p in files.items() if k.endswith("_figure")]

    if "json" in formats:
        files["summary"] = output_dir / "summary.json"
        summary = report.model_dump(exclude={"trials", "loss_log"})
        summary["figures"] = figures
        summary["num_trials"] = len(report.trials)
        with open(files["summary"], "w") as f:
            json.dump(summary, f, indent=2, default=str)

    if "markdown" in formats:
        files["markdown"] = output_dir / "report.md"
        files["markdown"].write_text(format_report_markdown(report, figures))

    logger.info(f"Wrote {len(files)} report files to {output_dir}")
    return files


def variant_frame(reports: dict[str, ExperimentReport], axis: str = "variant") -> pd.DataFrame:
    """One row per variant with FDR / power means and spreads."""
    comparison = compare_reports(reports)
    rows = [{axis: name, **entry} for name, entry in comparison["variants"].items()]
    return pd.DataFrame(rows)


def emit_variants(
    reports: dict[str, ExperimentReport],
    output_dir: Path,
    title: str,
    axis: str = "variant",
    formats=REPORT_FORMATS,
) -> dict[str, Path]:
    """Write a side-by-side comparison of variants plus each variant's own report.

    Each variant gets a subdirectory with its full report.
    """
    if not reports:
        raise InvalidArgumentError("No variant reports to emit")
    formats = _check_formats(formats)
    output_dir = _prepare(output_dir)
    files: dict[str, Path] = {}

    for name, report in reports.items():
        safe = name.replace("/", "_").replace(" ", "_").replace("=", "-")
        sub = emit_report(report, output_dir / safe, formats)
        files.update({f"{safe}/{k}": v for k, v in sub.items()})

    frame = variant_frame(reports, axis)
    if "png" in formats:
        q = next(iter(reports.values())).spec.selection.q
        path = output_dir / "variants.png"
        _bar_chart(
            [str(v) for v in frame[axis]],
            frame["fdp_mean"].astype(float).tolist(),
            frame["power_mean"].astype(float).tolist(),
            frame["fdp_std"].astype(float).fillna(0.0).tolist(),
            frame["power_std"].astype(float).fillna(0.0).tolist(),
            q,
            title,
            path,
        )
        files["variants_figure"] = path
    if "csv" in formats:
        files["variants"] = output_dir / "variants.csv"
        frame.to_csv(files["variants"], index=False)
    if "json" in formats:
        files["variants_summary"] = output_dir / "variants.json"
        summary = {
            "title": title,
            "axis": axis,
            **compare_reports(reports),
            "figures": ["variants.png"] if "variants_figure" in files else [],
        }
        with open(files["variants_summary"], "w") as f:
            json.dump(summary, f, indent=2, default=str)
    if "markdown" in formats:
        files["variants_markdown"] = output_dir / "variants.md"
        text = format_variants_markdown(reports, title)
        if "variants_figure" in files:
            text += "\n\n![variants](variants.png)"
        files["variants_markdown"].write_text(text)

    logger.info(f"Wrote comparison of {len(reports)} variants to {output_dir}")
    return files
