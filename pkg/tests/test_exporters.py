"""Tests for the report exporters."""

import json

import pytest

from experiments import ConvergenceFit, ExperimentReport, SeriesRow
from exporters import SERIES_COLUMNS, ReportExporter
from operator_core import NumericalQualityError


@pytest.fixture
def report():
    return ExperimentReport(
        scenario="zeno", seed=0, dim=2, t1=0.0, t=1.0, name="zeno_qubit", n_list=[11, 101],
        series=[SeriesRow(11, 0.5, 0.25, 1.0), SeriesRow(101, 0.75, 0.125, 1.0)],
        closed_form_probability=1.0,
        fit=ConvergenceFit(-1.0, -0.7, 1e-3, False, 2),
        zeno_constant=1.05,
        notes=["sample note"],
        timings={"chains": 1.5},
    )


class TestJson:
    def test_sorted_and_newline_terminated(self, report):
        text = ReportExporter().report_json(report)
        assert text.endswith("}\n")
        data = json.loads(text)
        assert list(data) == sorted(data)
        assert "timings_ms" not in data
        assert data["series"][0] == {"n": 11, "p_discrete": 0.5, "op_error": 0.25, "p_closed_form": 1.0}

    def test_timings_only_on_request(self, report):
        data = json.loads(ReportExporter(include_timings=True).report_json(report))
        assert data["timings_ms"] == {"chains": 1.5}

    def test_non_finite_numbers_rejected(self, report):
        report.closed_form_probability = float("nan")
        with pytest.raises(NumericalQualityError, match="non-finite"):
            ReportExporter().report_json(report)


class TestCsv:
    def test_columns_and_precision(self, report, tmp_path):
        exporter = ReportExporter()
        path = exporter.export_csv(exporter.series_frame(report), tmp_path / "series.csv")
        lines = open(path, encoding="utf-8").read().split("\n")
        assert lines[0] == ",".join(SERIES_COLUMNS) == "n,p_discrete,op_error,p_closed_form"
        assert lines[1:3] == ["11,0.5,0.25,1", "101,0.75,0.125,1"]
        assert lines[-1] == ""

    def test_empty_series(self, tmp_path):
        exporter = ReportExporter()
        empty = ExperimentReport(scenario="residual", seed=0, dim=2, t1=0.0, t=1.0)
        path = exporter.export_csv(exporter.series_frame(empty), tmp_path / "series.csv")
        assert open(path, encoding="utf-8").read() == "n,p_discrete,op_error,p_closed_form\n"


class TestSummary:
    def test_headline_skips_missing_values(self, report):
        pairs = dict(ReportExporter().headline(report))
        assert pairs["closed_form_probability"] == 1.0
        assert pairs["fit_slope"] == -1.0
        assert "w_unitarity_residual" not in pairs

    def test_export_all(self, report, tmp_path):
        written = ReportExporter().export_all(report, tmp_path)
        assert set(written) == {"json", "csv", "markdown"}
        summary = (tmp_path / "summary.md").read_text(encoding="utf-8")
        assert summary.startswith("# Kettlewatch zeno report")
        assert "## Series" in summary
        assert "- sample note" in summary
