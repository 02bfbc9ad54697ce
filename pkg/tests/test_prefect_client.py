"""Tests for the Prefect client API."""

import re
from unittest.mock import patch

import pytest

from core.comparator import build_report
from core.models import ExperimentSpec


def _report_dict(spec: ExperimentSpec) -> dict:
    return build_report(spec, []).model_dump()


class TestGenerateFlowRunId:
    """Tests for generate_flow_run_id."""

    def test_generate_flow_run_id_format(self):
        """IDs carry the sanitized tag and a short hex suffix."""
        from orchestrators.prefect.client import generate_flow_run_id

        run_id = generate_flow_run_id("mg/K=1 run")
        assert re.fullmatch(r"knockoff-mg-K=1-run-[0-9a-f]{8}", run_id)

    def test_generate_flow_run_id_unique(self):
        """IDs are unique."""
        from orchestrators.prefect.client import generate_flow_run_id

        assert len({generate_flow_run_id("x") for _ in range(20)}) == 20


class TestRunExperiment:
    """Tests for run_experiment."""

    def test_validates_report(self):
        """The flow result is returned as an ExperimentReport."""
        from orchestrators.prefect.client import run_experiment

        spec = ExperimentSpec(tag="client")
        with patch(
            "orchestrators.prefect.client.run_experiment_flow", return_value=_report_dict(spec)
        ) as mock_flow:
            report = run_experiment(spec, workers=4)

        assert report.spec.tag == "client"
        args = mock_flow.call_args.args
        assert args[1] == 4
        assert args[2] is None


class TestRunSweep:
    """Tests for run_sweep."""

    def test_ablation_uses_variants_flow(self, tmp_path):
        """Ablations run through the variants flow with their title."""
        from orchestrators.prefect.client import run_sweep

        base = ExperimentSpec(tag="base")

        def fake_flow(dicts, title, axis, workers, output_dir, formats):
            assert title == "Ablation"
            assert axis == "variant"
            assert output_dir == str(tmp_path)
            return {name: _report_dict(ExperimentSpec.model_validate(d))
                    for name, d in dicts.items()}

        with patch("orchestrators.prefect.client.run_variants_flow", side_effect=fake_flow):
            reports = run_sweep("ablation", base, output_dir=tmp_path)

        assert set(reports) == {"full", "no_rex", "K=1", "no_swapper_decor", "no_drp"}
        assert reports["K=1"].spec.tag == "base/K=1"

    def test_alpha_uses_alpha_flow(self):
        """The alpha sweep goes through the shared-knockoff flow."""
        from orchestrators.prefect.client import run_sweep

        def fake_flow(dicts, workers, output_dir, formats):
            return {name: _report_dict(ExperimentSpec.model_validate(d))
                    for name, d in dicts.items()}

        with patch("orchestrators.prefect.client.run_alpha_sweep_flow", side_effect=fake_flow):
            reports = run_sweep("alpha", ExperimentSpec())

        assert len(reports) == 11

    def test_unknown_sweep(self):
        """Unknown sweep kinds list the valid ones."""
        from orchestrators.prefect.client import run_sweep

        with pytest.raises(ValueError, match="Valid sweeps"):
            run_sweep("gamma", ExperimentSpec())


class TestCheckPrefectHealth:
    """Tests for check_prefect_health function."""

    def test_check_prefect_health_success(self):
        """check_prefect_health returns healthy status on success."""
        from orchestrators.prefect.client import check_prefect_health

        spec = ExperimentSpec()
        with patch(
            "orchestrators.prefect.client.run_experiment",
            return_value=build_report(spec, []),
        ):
            result = check_prefect_health()

        assert result["healthy"] is True
        assert result["mode"] == "ephemeral"
        assert "healthy" in result["message"].lower()

    def test_check_prefect_health_failure(self):
        """check_prefect_health returns unhealthy status on failure."""
        from orchestrators.prefect.client import check_prefect_health

        with patch(
            "orchestrators.prefect.client.run_experiment",
            side_effect=RuntimeError("Prefect error"),
        ):
            result = check_prefect_health()

        assert result["healthy"] is False
        assert "failed" in result["message"].lower()


class TestModuleExports:
    """Tests for module exports."""

    def test_exports_client(self):
        """Package exports the client API."""
        from orchestrators.prefect import (
            SWEEPS,
            check_prefect_health,
            generate_flow_run_id,
            run_experiment,
            run_sweep,
        )

        assert set(SWEEPS) == {"ablation", "beta-scale", "rho", "pi"}
        assert callable(check_prefect_health)
        assert callable(generate_flow_run_id)
        assert callable(run_experiment)
        assert callable(run_sweep)
