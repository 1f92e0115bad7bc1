"""
Visualization Engine for Kettlewatch
Log-log convergence chart of operator error against chain length.
"""

from pathlib import Path
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import console
from experiments import ExperimentReport


class ConvergencePlotter:
    """Draws the discrete-to-continuum convergence of a report."""

    def __init__(self, artifacts_dir: str = "artifacts"):
        """
        Initialize the plotter.

        Args:
            artifacts_dir: Directory to save generated charts
        """
        self.artifacts_dir = Path(artifacts_dir)
        plt.style.use('seaborn-v0_8-darkgrid')

    def plot_convergence(self, report: ExperimentReport, output_path: Optional[Path] = None) -> Optional[str]:
        """
        Plot op_error against n on log-log axes with the fitted line.

        Args:
            report: Report whose series carries nonzero errors
            output_path: Where to save; defaults to <artifacts_dir>/convergence.png

        Returns:
            Optional[str]: Path to saved chart, or None when nothing is plottable
        """
        ns = np.array([row.n for row in report.series], dtype=float)
        errors = np.array([row.op_error for row in report.series], dtype=float)
        positive = errors > 0
        if positive.sum() < 1:
            console.info("ℹ️  No nonzero errors to plot")
            return None

        output_path = Path(output_path) if output_path else self.artifacts_dir / "convergence.png"
        fig, ax = plt.subplots(figsize=(10, 6))

        ax.loglog(ns[positive], errors[positive], marker='o', linewidth=2, markersize=6,
                  color='#2E86AB', label='discrete chain')

        fit = report.fit
        if fit is not None and not fit.degenerate:
            grid = np.geomspace(ns[positive].min(), ns[positive].max(), 50)
            ax.loglog(grid, np.exp(fit.intercept) * grid ** fit.slope, linestyle='--',
                      color='#A23B72', label=f'fit: slope {fit.slope:.3f}')

        ax.set_xlabel('n (measurements)', fontsize=12, fontweight='bold')
        ax.set_ylabel('‖A_n - A_closed‖_F', fontsize=12, fontweight='bold')
        ax.set_title(f'{report.scenario} convergence', fontsize=14, fontweight='bold', pad=20)
        ax.legend()
        ax.grid(True, alpha=0.3, which='both')

        plt.tight_layout()
        plt.savefig(output_path, dpi=300, bbox_inches='tight')
        plt.close(fig)

        console.info(f"📈 Chart saved: {output_path}")
        return str(output_path)
