"""
Export Module for Kettlewatch
Writes experiment reports: report.json, series.csv and summary.md.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Tuple

import pandas as pd
from tabulate import tabulate

from experiments import ExperimentReport
from operator_core import NumericalQualityError

SERIES_COLUMNS = ["n", "p_discrete", "op_error", "p_closed_form"]

HEADLINE_FIELDS = [
    "closed_form_probability", "zeno_constant", "w_unitarity_residual", "equation_residual",
    "support_residual", "state_deviation", "fidelity_initial", "fidelity_path_state",
    "final_support_residual", "reduction_error",
]


class ReportExporter:
    """Handles writing an ExperimentReport to its result folder."""

    def __init__(self, include_timings: bool = False):
        """
        Initialize the exporter.

        Args:
            include_timings: Write wall-clock stage timings into report.json
        """
        self.include_timings = include_timings

    def report_json(self, report: ExperimentReport) -> str:
        """
        Serialize the report deterministically.

        Raises:
            NumericalQualityError: When a number in the report is not finite
        """
        try:
            text = json.dumps(report.to_dict(self.include_timings), sort_keys=True, indent=2,
                              allow_nan=False, ensure_ascii=False)
        except ValueError as e:
            raise NumericalQualityError(f"report contains non-finite numbers: {e}")
        return text + "\n"

    def series_frame(self, report: ExperimentReport) -> pd.DataFrame:
        """Per-n table with the fixed series.csv columns."""
        rows = [[row.n, row.p_discrete, row.op_error, row.p_closed_form] for row in report.series]
        df = pd.DataFrame(rows, columns=SERIES_COLUMNS)
        return df.astype({"n": "int64", "p_discrete": "float64", "op_error": "float64",
                          "p_closed_form": "float64"})

    def export_json(self, report: ExperimentReport, output_path: Path) -> str:
        with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.report_json(report))
        return str(output_path)

    def export_csv(self, df: pd.DataFrame, output_path: Path) -> str:
        """
        Export the series with 17 significant digits, '.' decimal and no index.

        Args:
            df: Series table from series_frame
            output_path: Output file path

        Returns:
            str: Path to exported file
        """
        df.to_csv(output_path, index=False, float_format='%.17g', lineterminator='\n',
                  encoding='utf-8')
        return str(output_path)

    def headline(self, report: ExperimentReport) -> List[Tuple[str, Any]]:
        """(field, value) pairs for the scalar results that were computed."""
        data = report.to_dict()
        pairs = [(key, data[key]) for key in HEADLINE_FIELDS if data[key] is not None]
        if report.fit is not None:
            pairs.append(("fit_slope", report.fit.slope))
            pairs.append(("fit_residual", report.fit.residual))
            pairs.append(("fit_degenerate", report.fit.degenerate))
        return pairs

    def export_markdown(self, report: ExperimentReport, df: pd.DataFrame, output_path: Path) -> str:
        """Summary page: headline numbers, the per-n table and any notes."""
        content = []
        content.append(f"# Kettlewatch {report.scenario} report")
        if report.name:
            content.append(f"\n**Config:** `{report.name}`")
        content.append(f"\n**Seed:** {report.seed}  **dim:** {report.dim}  **interval:** [{report.t1}, {report.t}]\n")

        content.append("## Results\n")
        content.append(tabulate(self.headline(report), headers=["quantity", "value"],
                                tablefmt='github', floatfmt='.12g'))

        if not df.empty:
            content.append("\n## Series\n")
            content.append(tabulate(df, headers='keys', tablefmt='github', showindex=False,
                                    floatfmt='.12g'))

        if report.sweep:
            content.append(f"\n## Sweep ({len(report.sweep)} instances)\n")
            content.append(tabulate(pd.DataFrame(report.sweep), headers='keys', tablefmt='github',
                                    showindex=False, floatfmt='.6g'))

        if report.notes:
            content.append("\n## Notes\n")
            content.extend(f"- {note}" for note in report.notes)

        content.append("")
        with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write('\n'.join(content))
        return str(output_path)

    def export_all(self, report: ExperimentReport, out_dir: Path) -> Dict[str, str]:
        """
        Write every result file into out_dir (which must already exist).

        Returns:
            Dict[str, str]: File kind -> written path
        """
        out_dir = Path(out_dir)
        df = self.series_frame(report)
        return {
            "json": self.export_json(report, out_dir / "report.json"),
            "csv": self.export_csv(df, out_dir / "series.csv"),
            "markdown": self.export_markdown(report, df, out_dir / "summary.md"),
        }
