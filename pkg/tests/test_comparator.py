"""Tests for report aggregation and comparison."""

import math

import pytest

from core.comparator import (
    PUBLISHED_REFERENCE,
    aggregate_trials,
    aggregate_values,
    build_report,
    compare_reports,
    format_report_markdown,
    format_variants_markdown,
    trial_row,
)
from core.models import ExperimentSpec, SelectionResult, SwapMetricReport, TrialResult


def _trial(index: int, fdp: float | None, power: float | None, tau: float = 1.0,
           w: list[float] | None = None, drp_alpha: float | None = None) -> TrialResult:
    metadata = {"knockoff_source": "oracle"}
    if drp_alpha is not None:
        metadata["drp_alpha"] = drp_alpha
    return TrialResult(
        repeat_index=index,
        seed=100 + index,
        selection=SelectionResult(
            selected=[0],
            tau=tau,
            q=0.1,
            fdp=fdp,
            power=power,
            w=w or [2.0, -1.0],
            metadata=metadata,
        ),
        swap_metrics=SwapMetricReport(
            ratios=[0.5],
            per_ratio={"swd1": [0.2 * (index + 1)]},
            averages={"swd1": 0.2 * (index + 1)},
            mean_abs_correlation=0.3,
            seed=0,
        ),
        nonnull_indices=[0],
        runtime_seconds=1.0,
    )


def _failed(index: int) -> TrialResult:
    return TrialResult(
        repeat_index=index, seed=100 + index, status="error", error="boom", stage="train"
    )


class TestAggregation:
    """Tests for per-column aggregation."""

    def test_aggregate_values(self):
        """Mean and population std over finite values."""
        stats = aggregate_values([1.0, 3.0, None, math.inf])
        assert stats.mean == 2.0
        assert stats.std == 1.0
        assert stats.median == 2.0
        assert stats.count == 2

    def test_single_value_std_zero(self):
        """One value has zero spread."""
        assert aggregate_values([0.4]).std == 0.0

    def test_no_values(self):
        """Nothing finite gives None."""
        assert aggregate_values([None, math.inf]) is None

    def test_trial_row_columns(self):
        """Rows flatten selection, metadata and swap averages."""
        row = trial_row(_trial(0, 0.1, 0.9, drp_alpha=0.5))
        assert row["num_selected"] == 1
        assert row["drp_alpha"] == 0.5
        assert row["swap_swd1"] == pytest.approx(0.2)
        assert row["mean_abs_correlation"] == 0.3

    def test_error_row_blank(self):
        """Failed trials have blank selection columns."""
        row = trial_row(_failed(2))
        assert row["status"] == "error"
        assert row["fdp"] is None

    def test_infinite_tau_skipped(self):
        """Infinite thresholds do not poison the tau aggregate."""
        aggregates = aggregate_trials([_trial(0, 0.0, 0.0, tau=math.inf), _trial(1, 0.2, 1.0)])
        assert aggregates["tau"].count == 1
        assert aggregates["fdp"].mean == pytest.approx(0.1)
        assert "swap_swd1" in aggregates

    def test_missing_truth_skipped(self):
        """Trials without ground truth drop out of the FDP and power aggregates."""
        aggregates = aggregate_trials([_trial(0, None, None), _trial(1, 0.2, 0.8)])
        assert aggregates["fdp"].count == 1
        assert aggregates["power"].mean == pytest.approx(0.8)
        assert aggregates["tau"].count == 2


class TestBuildReport:
    """Tests for build_report."""

    def test_orders_by_repeat_index(self):
        """Trials are sorted regardless of completion order."""
        report = build_report(ExperimentSpec(), [_trial(2, 0.0, 1.0), _trial(0, 0.2, 0.8)])
        assert [t.repeat_index for t in report.trials] == [0, 2]

    def test_failures_recorded(self):
        """Failures are listed and excluded from aggregates."""
        report = build_report(ExperimentSpec(), [_trial(0, 0.1, 1.0), _failed(1)])
        assert report.failures == [
            {"repeat_index": 1, "seed": 101, "stage": "train", "error": "boom"}
        ]
        assert report.aggregates["fdp"].count == 1
        assert report.single_repeat

    def test_statistic_summary(self):
        """Statistics split by each trial's nonnull indices."""
        trials = [_trial(0, 0.0, 1.0, w=[2.0, -1.0]), _trial(1, 0.0, 1.0, w=[4.0, 1.0])]
        report = build_report(ExperimentSpec(), trials)
        assert report.statistic_summary.nonnull_mean == 3.0
        assert report.statistic_summary.null_mean == 0.0
        assert report.swap_metric_averages["swd1"] == pytest.approx(0.3)

    def test_digest_tracks_spec(self):
        """The digest changes with the spec and not with the trials."""
        a = build_report(ExperimentSpec(), [_trial(0, 0.1, 1.0)])
        b = build_report(ExperimentSpec(), [_trial(0, 0.3, 0.5)])
        c = build_report(ExperimentSpec(base_seed=9), [_trial(0, 0.1, 1.0)])
        assert a.digest == b.digest
        assert a.digest != c.digest

    def test_all_failed(self):
        """A report with no successes has no aggregates or summary."""
        report = build_report(ExperimentSpec(), [_failed(0)])
        assert report.aggregates == {}
        assert report.statistic_summary is None
        assert not report.single_repeat


class TestFormatting:
    """Tests for comparisons and markdown."""

    def test_compare_reports(self):
        """Each variant reports FDR and power moments."""
        reports = {
            "full": build_report(ExperimentSpec(tag="a"), [_trial(0, 0.1, 0.9)]),
            "K=1": build_report(ExperimentSpec(tag="b"), [_failed(0)]),
        }
        comparison = compare_reports(reports)
        assert comparison["total_variants"] == 2
        assert comparison["variants"]["full"]["fdp_mean"] == pytest.approx(0.1)
        assert comparison["variants"]["K=1"]["fdp_mean"] is None
        assert comparison["variants"]["K=1"]["failed"] == 1

    def test_report_markdown(self):
        """Markdown includes the sections and the published reference."""
        report = build_report(ExperimentSpec(tag="md"), [_trial(0, 0.1, 0.9), _failed(1)])
        text = format_report_markdown(report, ["selection.png"])
        assert "# Knockoff Experiment: md" in text
        assert "## Selection" in text
        assert PUBLISHED_REFERENCE["label"] in text
        assert "_Single repeat" in text
        assert "## Failures" in text
        assert "![selection.png](selection.png)" in text

    def test_variants_markdown(self):
        """Variants appear as table rows, with dashes for missing values."""
        reports = {"no_drp": build_report(ExperimentSpec(), [_failed(0)])}
        text = format_variants_markdown(reports, "Ablation")
        assert text.startswith("# Ablation")
        assert "| no_drp | - | - | - | - | 1 |" in text
