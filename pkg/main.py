"""
Kettlewatch - Main CLI Interface
Continuous projective measurement laboratory: Zeno and anti-Zeno propagators
computed by discrete chains, the measurement ODE and closed forms.

Usage:
    python main.py zeno --config zeno_qubit
    python main.py anti-zeno --config anti_zeno_drag --plot
    python main.py converge --config converge_random --set ode.step=1e-4
    python main.py residual --config residual_random --seed 5
    python main.py templates
"""

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from dotenv import load_dotenv
from tabulate import tabulate

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / 'src'))

import console
from config_loader import SCENARIOS, parse_config, parse_overrides
from experiments import RUNNERS
from exporters import ReportExporter
from operator_core import NumericalQualityError, ValidationError
from performance_monitor import PerformanceMonitor
from template_manager import TemplateManager
from visualizer import ConvergencePlotter

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class OutputDirError(OSError):
    """Raised when the output directory cannot be created or written."""


@dataclass(frozen=True)
class RunManifest:
    """One CLI invocation: what to run, on which config, and where to write."""

    config: str
    out_dir: Path
    scenario: str
    overrides: Tuple[str, ...] = ()
    seed: Optional[int] = None
    plot: bool = False
    timings: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")


class KettlewatchApp:
    """Main application class for the Kettlewatch CLI."""

    def __init__(self):
        """Initialize the app; components are created in initialize()."""
        self.templates = None
        self.performance = None
        self.default_out = "artifacts"

    def initialize(self):
        """Load environment configuration and set up components."""
        load_dotenv()

        self.default_out = os.getenv('KETTLEWATCH_OUT', 'artifacts')
        templates_dir = os.getenv('KETTLEWATCH_TEMPLATES', str(Path(__file__).parent / 'templates'))

        console.debug(f"Output directory default: {self.default_out}")
        console.debug(f"Templates: {templates_dir}")

        self.templates = TemplateManager(templates_dir)
        self.performance = PerformanceMonitor()

    def _prepare_out_dir(self, out_dir: Path):
        """Create out_dir and confirm it is writable."""
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputDirError(f"cannot create output directory {out_dir}: {e.strerror or e}")
        if not os.access(out_dir, os.W_OK):
            raise OutputDirError(f"output directory {out_dir} is not writable")

    def dispatch(self, manifest: RunManifest) -> int:
        """
        Run one scenario and write its result files.

        Args:
            manifest: Validated run manifest

        Returns:
            int: 0 on success, 2 on validation errors, 3 on numerical-quality errors
        """
        console.banner(f"🫖 Kettlewatch - {manifest.scenario}")
        try:
            self._prepare_out_dir(manifest.out_dir)
            text, source = self.templates.resolve(manifest.config)
            console.info(f"📋 Config: {source}")
            config = parse_config(text, scenario=manifest.scenario,
                                  overrides=parse_overrides(manifest.overrides), seed=manifest.seed)
            console.info(f"   dim={config.dim} seed={config.seed} interval=[{config.t1}, {config.t}] n={list(config.n_list)}")

            report = RUNNERS[manifest.scenario](config, self.performance)

            exporter = ReportExporter(include_timings=manifest.timings)
            written = exporter.export_all(report, manifest.out_dir)
            if manifest.plot:
                chart = ConvergencePlotter(str(manifest.out_dir)).plot_convergence(report)
                if chart:
                    written["chart"] = chart
        except ValidationError as e:
            console.error_line(e.kind, str(e), pointer=getattr(e, "pointer", None) or None,
                               bound=e.bound, residual=e.residual)
            return EXIT_VALIDATION
        except NumericalQualityError as e:
            console.error_line(e.kind, str(e), residual=e.residual)
            return EXIT_NUMERICAL
        except OSError as e:
            console.error_line("output_dir", str(e))
            return EXIT_VALIDATION

        table = tabulate(exporter.headline(report), headers=["quantity", "value"],
                         tablefmt='simple', floatfmt='.12g')
        console.info(f"\n{table}")
        if manifest.timings:
            console.info(self.performance.format_report())

        console.info(f"\n💾 Results saved to: {manifest.out_dir}/")
        for kind, path in written.items():
            console.info(f"   {kind}: {Path(path).name}")
        return EXIT_OK

    def show_templates(self) -> int:
        """Show the bundled configs."""
        templates = self.templates.list_templates()
        print("\n📋 Bundled configs:")
        print("=" * 80)
        for t in templates:
            print(f"\n{t['id']} (dim {t['dim']}):")
            print(f"   {t['description']}")
        print("=" * 80)
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kettlewatch",
        description="Zeno and anti-Zeno propagators for continuous projective measurement",
    )
    subparsers = parser.add_subparsers(dest="command")

    for scenario in SCENARIOS:
        run_parser = subparsers.add_parser(scenario, help=f"Run the {scenario} scenario")
        run_parser.add_argument("--config", "-c", required=True,
                                help="Config JSON path or bundled config name")
        run_parser.add_argument("--out", "-o", default=None,
                                help="Output directory (default: $KETTLEWATCH_OUT or artifacts)")
        run_parser.add_argument("--set", dest="overrides", action="append", default=[],
                                metavar="KEY=VALUE", help="Override a config value (dotted keys allowed)")
        run_parser.add_argument("--seed", type=int, default=None, help="Seed for random instances")
        run_parser.add_argument("--plot", action="store_true", help="Write convergence.png")
        run_parser.add_argument("--timings", action="store_true",
                                help="Include stage timings in report.json")

    subparsers.add_parser("templates", help="List bundled configs")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    if args.command is None:
        build_parser().print_help()
        return EXIT_VALIDATION

    app = KettlewatchApp()
    app.initialize()
    if args.command == "templates":
        return app.show_templates()

    manifest = RunManifest(
        config=args.config,
        out_dir=Path(args.out or app.default_out),
        scenario=args.command,
        overrides=tuple(args.overrides),
        seed=args.seed,
        plot=args.plot,
        timings=args.timings,
    )
    return app.dispatch(manifest)


if __name__ == "__main__":
    sys.exit(main())
