"""
Experiments for Kettlewatch
Scenario runners that assemble the numerical modules into the Zeno and
anti-Zeno demonstrations, convergence studies and residual certification.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

import console
from config_loader import SUPPORT_TOL, ExperimentConfig
from continuum import (
    anti_zeno_propagator, chain_equation_residual, complement_chain_ode, dragged_state,
    integrate_chain_ode, union_propagator_ode, w_operator, zeno_closed_form,
)
from measurement_chain import (
    MeasurementSchedule, Route, chain_operator, complement_chain, evaluate_chain,
    sequence_probability, union_propagator,
)
from operator_core import (
    NumericalQualityError, Operator, ValidationError, fidelity, frobenius, leading_state,
    operator_to_json, support_residual, unitarity_residual,
)
from performance_monitor import PerformanceMonitor

# Errors at or below this count as exact in a convergence fit
EXACT_ERROR = 1e-14

# Anti-Zeno closed-form probability is expected to equal 1 this tightly
CLOSED_FORM_TOL = 1e-8

MIN_STUDY_POINTS = 3
MIN_STUDY_DECADES = 2.0


@dataclass
class SeriesRow:
    n: int
    p_discrete: float
    op_error: float
    p_closed_form: float


@dataclass
class ConvergenceFit:
    """Least-squares line through log(error) against log(n)."""

    slope: Optional[float]
    intercept: Optional[float]
    residual: Optional[float]
    degenerate: bool
    points: int


@dataclass
class ExperimentReport:
    """Everything a scenario run produces; to_dict() is what report.json holds."""

    scenario: str
    seed: int
    dim: int
    t1: float
    t: float
    name: str = ""
    n_list: List[int] = field(default_factory=list)
    series: List[SeriesRow] = field(default_factory=list)
    closed_form_probability: Optional[float] = None
    closed_form_route: Optional[str] = None
    fit: Optional[ConvergenceFit] = None
    zeno_constant: Optional[float] = None
    w_unitarity_residual: Optional[float] = None
    equation_residual: Optional[float] = None
    support_residual: Optional[float] = None
    final_state: Optional[Operator] = None
    # "schrodinger": e^{-iHt} A ρ0 A† e^{iHt} normalized
    final_state_picture: Optional[str] = None
    state_deviation: Optional[float] = None
    fidelity_initial: Optional[float] = None
    fidelity_path_state: Optional[float] = None
    final_support_residual: Optional[float] = None
    reduction_error: Optional[float] = None
    event_probabilities: Dict[str, float] = field(default_factory=dict)
    route_errors: Dict[str, float] = field(default_factory=dict)
    breakpoints: List[float] = field(default_factory=list)
    sweep: List[Dict[str, Any]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> Dict[str, Any]:
        """
        JSON-ready view of the report.

        Args:
            include_timings: Add wall-clock stage timings (breaks byte-identical reruns)

        Returns:
            Dict[str, Any]: Plain dict of numbers, strings, lists and None
        """
        data = {
            "name": self.name,
            "scenario": self.scenario,
            "seed": self.seed,
            "dim": self.dim,
            "t1": self.t1,
            "t": self.t,
            "n_list": list(self.n_list),
            "series": [asdict(row) for row in self.series],
            "closed_form_probability": self.closed_form_probability,
            "closed_form_route": self.closed_form_route,
            "fit": asdict(self.fit) if self.fit else None,
            "zeno_constant": self.zeno_constant,
            "w_unitarity_residual": self.w_unitarity_residual,
            "equation_residual": self.equation_residual,
            "support_residual": self.support_residual,
            "final_state": operator_to_json(self.final_state) if self.final_state is not None else None,
            "final_state_picture": self.final_state_picture,
            "state_deviation": self.state_deviation,
            "fidelity_initial": self.fidelity_initial,
            "fidelity_path_state": self.fidelity_path_state,
            "final_support_residual": self.final_support_residual,
            "reduction_error": self.reduction_error,
            "event_probabilities": dict(self.event_probabilities),
            "route_errors": dict(self.route_errors),
            "breakpoints": list(self.breakpoints),
            "sweep": [dict(item) for item in self.sweep],
            "notes": list(self.notes),
        }
        if include_timings:
            data["timings_ms"] = dict(self.timings)
        return data


def fit_convergence_order(ns: Sequence[int], errors: Sequence[float]) -> ConvergenceFit:
    """
    Fit log(error) = slope * log(n) + intercept by least squares.

    Points with error <= EXACT_ERROR are left out; fewer than two remaining
    points make the fit degenerate (slope None), which is not a failure.

    Args:
        ns: Chain lengths
        errors: Operator errors against the closed form

    Returns:
        ConvergenceFit: Slope, intercept, RMS residual in log space
    """
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > EXACT_ERROR
    if int(keep.sum()) < 2:
        return ConvergenceFit(None, None, None, True, int(keep.sum()))
    x = np.log(ns[keep])
    y = np.log(errors[keep])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return ConvergenceFit(float(slope), float(intercept), residual, False, int(keep.sum()))


def zeno_constant(ns: Sequence[int], probabilities: Sequence[float]) -> float:
    """Smallest C with 1 - p(n) <= C / n over the sampled n."""
    return float(max(n * (1.0 - p) for n, p in zip(ns, probabilities)))


def _monitor(monitor: Optional[PerformanceMonitor]) -> PerformanceMonitor:
    return monitor if monitor is not None else PerformanceMonitor()


def _base_report(config: ExperimentConfig, scenario: str) -> ExperimentReport:
    return ExperimentReport(
        scenario=scenario, seed=config.seed, dim=config.dim, t1=config.t1, t=config.t,
        name=config.name, n_list=list(config.n_list),
        breakpoints=_interior_breakpoints(config),
    )


def _interior_breakpoints(config: ExperimentConfig) -> List[float]:
    return [b for b in config.path.breakpoints if config.t1 < b <= config.t]


def _discrete_series(config: ExperimentConfig, A_closed: Operator, p_closed: float,
                     monitor: PerformanceMonitor) -> List[SeriesRow]:
    """Chain probability and operator error for every n in the config."""
    H, ppath = config.hamiltonian, config.projector_path
    rows = []
    for n in config.n_list:
        schedule = MeasurementSchedule(config.t1, config.t, n)
        with monitor.stage("chains", items=n):
            result = evaluate_chain(chain_operator(H, ppath, schedule), config.rho0, n, Route.DISCRETE)
        op_error = frobenius(result.A - A_closed)
        console.debug(f"n={n}: p={result.probability:.15f} op_error={op_error:.3e}")
        rows.append(SeriesRow(n=n, p_discrete=result.probability, op_error=op_error,
                              p_closed_form=p_closed))
    return rows


def _event_probabilities(config: ExperimentConfig, monitor: PerformanceMonitor) -> Dict[str, float]:
    """p(h̄) and p(h') at the largest n, plus their continuum counterparts."""
    H, ppath, rho0 = config.hamiltonian, config.projector_path, config.rho0
    n = max(config.n_list)
    schedule = MeasurementSchedule(config.t1, config.t, n)
    with monitor.stage("complement", items=n):
        p_complement = sequence_probability(complement_chain(H, ppath, schedule), rho0)
        p_union = sequence_probability(union_propagator(H, ppath, schedule, config.t), rho0)
    with monitor.stage("ode"):
        p_complement_ode = sequence_probability(
            complement_chain_ode(H, ppath, config.t1, config.t, config.ode), rho0)
        p_union_ode = sequence_probability(
            union_propagator_ode(H, ppath, config.t1, config.t, config.t, config.ode), rho0)
    return {
        "n": n,
        "p_complement_discrete": p_complement,
        "p_union_discrete": p_union,
        "p_complement_ode": p_complement_ode,
        "p_union_ode": p_union_ode,
    }


def _check_zeno(config: ExperimentConfig):
    if not config.path.is_identity:
        raise ValidationError("Zeno run needs a static projector (path type 'identity')")
    if config.projector.rank != 1:
        raise ValidationError(f"Zeno run needs a rank-1 projector, got rank {config.projector.rank}")
    offset = frobenius(config.rho0.op - config.projector.op)
    if offset > SUPPORT_TOL:
        raise ValidationError(
            f"Zeno run needs rho0 = |ψ0⟩⟨ψ0| = E; ‖ρ0 - E‖_F = {offset:.3e}",
            bound=SUPPORT_TOL, residual=offset,
        )


def _check_support(config: ExperimentConfig) -> float:
    residual = support_residual(config.projector.op, config.rho0.op)
    if residual > SUPPORT_TOL:
        raise ValidationError(
            f"anti-Zeno run needs EρE = ρ; ‖Eρ0E - ρ0‖_F = {residual:.3e} > {SUPPORT_TOL:.0e}",
            bound=SUPPORT_TOL, residual=residual,
        )
    return residual


def run_zeno(config: ExperimentConfig, monitor: Optional[PerformanceMonitor] = None) -> ExperimentReport:
    """
    Zeno demonstration: a static rank-1 projector watched continuously.

    Args:
        config: Validated config with U ≡ 1, E = ρ0 = |ψ0⟩⟨ψ0|
        monitor: Optional stage timer

    Returns:
        ExperimentReport: Per-n probabilities, operator errors, fitted order
    """
    monitor = _monitor(monitor)
    _check_zeno(config)
    H = config.hamiltonian
    psi0 = leading_state(config.projector)
    report = _base_report(config, "zeno")

    with monitor.stage("closed_form"):
        A_closed = zeno_closed_form(H, psi0, config.t1, config.t)
        p_closed = sequence_probability(A_closed, config.rho0)
    report.closed_form_probability = p_closed
    report.closed_form_route = "zeno_closed_form"
    report.support_residual = support_residual(config.projector.op, config.rho0.op)

    report.series = _discrete_series(config, A_closed, p_closed, monitor)
    with monitor.stage("fit"):
        report.fit = fit_convergence_order([r.n for r in report.series], [r.op_error for r in report.series])
        report.zeno_constant = zeno_constant([r.n for r in report.series],
                                             [r.p_discrete for r in report.series])

    with monitor.stage("ode"):
        A_ode = integrate_chain_ode(H, config.projector_path, config.t1, config.t, config.ode)
    report.route_errors["ode"] = frobenius(A_ode - A_closed)
    report.event_probabilities = _event_probabilities(config, monitor)

    report.timings = monitor.stage_totals()
    console.info(f"✅ Zeno: closed-form p = {p_closed:.15f}, C = {report.zeno_constant:.6g}")
    return report


def _instance_summary(config: ExperimentConfig, monitor: PerformanceMonitor) -> Dict[str, Any]:
    """Closed-form and largest-n discrete numbers for one anti-Zeno instance."""
    support = _check_support(config)
    H, E, path = config.hamiltonian, config.projector, config.path
    with monitor.stage("w_operator"):
        W = w_operator(H, path, E, config.t1, config.t, config.ode)
        A_closed = anti_zeno_propagator(H, path, E, config.t1, config.t, config.ode, w=W)
    n = max(config.n_list)
    schedule = MeasurementSchedule(config.t1, config.t, n)
    with monitor.stage("chains", items=n):
        A_discrete = chain_operator(H, config.projector_path, schedule)
    residual = None
    if not _interior_breakpoints(config):
        with monitor.stage("residual"):
            residual = chain_equation_residual(H, path, E, config.t1, config.t, config.ode,
                                               config.residual_samples, config.residual_delta)
    return {
        "seed": config.seed,
        "n": n,
        "closed_form_probability": sequence_probability(A_closed, config.rho0),
        "discrete_probability": sequence_probability(A_discrete, config.rho0),
        "op_error": frobenius(A_discrete - A_closed),
        "w_unitarity_residual": unitarity_residual(W.op),
        "equation_residual": residual,
        "support_residual": support,
    }


def anti_zeno_sweep(config: ExperimentConfig, instances: int,
                    monitor: Optional[PerformanceMonitor] = None) -> List[Dict[str, Any]]:
    """
    Run the anti-Zeno checks on instances drawn with seeds seed, seed+1, ...

    Returns:
        List[Dict[str, Any]]: One summary per instance
    """
    monitor = _monitor(monitor)
    if instances < 1:
        raise ValidationError(f"sweep needs at least one instance, got {instances}")
    summaries = []
    for i in range(instances):
        instance = config if i == 0 else config.with_seed(config.seed + i)
        summary = _instance_summary(instance, monitor)
        console.debug(
            f"seed {instance.seed}: p_closed={summary['closed_form_probability']:.12f} "
            f"p_discrete={summary['discrete_probability']:.6f} "
            f"W residual={summary['w_unitarity_residual']:.2e}"
        )
        summaries.append(summary)
    return summaries


def run_anti_zeno(config: ExperimentConfig, monitor: Optional[PerformanceMonitor] = None) -> ExperimentReport:
    """
    Anti-Zeno demonstration: the state is dragged along E_s(t) = U E U† with certainty.

    Args:
        config: Validated config whose ρ0 lives on the range of E
        monitor: Optional stage timer

    Returns:
        ExperimentReport: Closed-form and per-n discrete probabilities, the
        final Schrodinger-picture state and how far it moved
    """
    monitor = _monitor(monitor)
    report = _base_report(config, "anti-zeno")
    report.support_residual = _check_support(config)
    H, E, path, rho0 = config.hamiltonian, config.projector, config.path, config.rho0

    with monitor.stage("w_operator"):
        W = w_operator(H, path, E, config.t1, config.t, config.ode)
    report.w_unitarity_residual = unitarity_residual(W.op)
    with monitor.stage("closed_form"):
        A_closed = anti_zeno_propagator(H, path, E, config.t1, config.t, config.ode, w=W)
        p_closed = sequence_probability(A_closed, rho0)
    report.closed_form_probability = p_closed
    report.closed_form_route = "anti_zeno_propagator"
    if abs(p_closed - 1.0) > CLOSED_FORM_TOL:
        console.warn(f"closed-form probability {p_closed:.12f} differs from 1 by more than {CLOSED_FORM_TOL:.0e}")

    report.series = _discrete_series(config, A_closed, p_closed, monitor)
    with monitor.stage("fit"):
        report.fit = fit_convergence_order([r.n for r in report.series], [r.op_error for r in report.series])

    final = dragged_state(H, path, E, rho0, config.t1, config.t, config.ode, w=W)
    report.final_state = final.op
    report.final_state_picture = "schrodinger"
    report.state_deviation = frobenius(final.op - rho0.op)
    E_final = config.projector_path.schrodinger_stack([config.t])[0]
    report.final_support_residual = support_residual(E_final, final.op)
    if config.psi0 is not None:
        report.fidelity_initial = fidelity(final.op, config.psi0)
        report.fidelity_path_state = fidelity(final.op, path.unitary(config.t) @ config.psi0)

    if report.breakpoints:
        report.notes.append(
            "path has generator breakpoints inside [t1, t]; rates there use the left limit "
            "and the equation residual is not sampled"
        )
    else:
        with monitor.stage("residual"):
            report.equation_residual = chain_equation_residual(
                H, path, E, config.t1, config.t, config.ode, config.residual_samples,
                config.residual_delta)

    if path.is_identity and E.rank == 1:
        zeno = zeno_closed_form(H, leading_state(E), config.t1, config.t)
        report.reduction_error = frobenius(A_closed - zeno)

    report.event_probabilities = _event_probabilities(config, monitor)
    if config.instances > 1:
        report.sweep = anti_zeno_sweep(config, config.instances, monitor)

    report.timings = monitor.stage_totals()
    console.info(f"✅ Anti-Zeno: closed-form p = {p_closed:.15f}, state moved by {report.state_deviation:.6f}")
    return report


def convergence_study(config: ExperimentConfig, monitor: Optional[PerformanceMonitor] = None) -> ExperimentReport:
    """
    Fit the discrete-to-continuum convergence order over config.n_list.

    The reference is the Zeno closed form for a static rank-1 projector and
    the anti-Zeno propagator otherwise.

    Raises:
        ValidationError: Fewer than 3 n values or a span under 2 decades
    """
    monitor = _monitor(monitor)
    ns = config.n_list
    if len(ns) < MIN_STUDY_POINTS:
        raise ValidationError(f"convergence study needs at least {MIN_STUDY_POINTS} n values, got {len(ns)}")
    span = np.log10(max(ns) / min(ns))
    if span < MIN_STUDY_DECADES - 1e-12:
        raise ValidationError(f"convergence study n values must span {MIN_STUDY_DECADES:g} decades, got {span:.2f}")

    report = _base_report(config, "converge")
    H, E, path = config.hamiltonian, config.projector, config.path
    with monitor.stage("closed_form"):
        if path.is_identity and E.rank == 1:
            A_closed = zeno_closed_form(H, leading_state(E), config.t1, config.t)
            report.closed_form_route = "zeno_closed_form"
        else:
            W = w_operator(H, path, E, config.t1, config.t, config.ode)
            report.w_unitarity_residual = unitarity_residual(W.op)
            A_closed = anti_zeno_propagator(H, path, E, config.t1, config.t, config.ode, w=W)
            report.closed_form_route = "anti_zeno_propagator"
        p_closed = sequence_probability(A_closed, config.rho0)
    report.closed_form_probability = p_closed
    report.support_residual = support_residual(E.op, config.rho0.op)

    report.series = _discrete_series(config, A_closed, p_closed, monitor)
    with monitor.stage("fit"):
        report.fit = fit_convergence_order(ns, [r.op_error for r in report.series])
    if report.fit.degenerate:
        report.notes.append("errors are exact at every n; convergence fit is degenerate")
        console.info("ℹ️  Degenerate fit: the discrete chain is exact for this instance")
    else:
        console.info(f"✅ Convergence slope {report.fit.slope:.4f} (log residual {report.fit.residual:.2e})")

    report.timings = monitor.stage_totals()
    return report


def residual_certify(config: ExperimentConfig, monitor: Optional[PerformanceMonitor] = None) -> ExperimentReport:
    """
    Certify that the anti-Zeno closed form solves dA/dt = (dE_H/dt) A.

    Raises:
        ValidationError: When the path has generator breakpoints in (t1, t]
    """
    monitor = _monitor(monitor)
    interior = _interior_breakpoints(config)
    if interior:
        raise ValidationError(f"residual certification needs a smooth path on [t1, t]; breakpoints at {interior}")
    report = _base_report(config, "residual")
    H, E, path = config.hamiltonian, config.projector, config.path

    with monitor.stage("w_operator"):
        W = w_operator(H, path, E, config.t1, config.t, config.ode)
    report.w_unitarity_residual = unitarity_residual(W.op)
    A_closed = anti_zeno_propagator(H, path, E, config.t1, config.t, config.ode, w=W)
    report.closed_form_probability = sequence_probability(A_closed, config.rho0)
    report.closed_form_route = "anti_zeno_propagator"
    report.support_residual = support_residual(E.op, config.rho0.op)

    with monitor.stage("residual"):
        report.equation_residual = chain_equation_residual(
            H, path, E, config.t1, config.t, config.ode, config.residual_samples,
            config.residual_delta)
    if not np.isfinite(report.equation_residual):
        raise NumericalQualityError("equation residual is not finite")

    report.timings = monitor.stage_totals()
    console.info(f"✅ Equation residual {report.equation_residual:.3e} over {config.residual_samples} samples")
    return report


RUNNERS = {
    "zeno": run_zeno,
    "anti-zeno": run_anti_zeno,
    "converge": convergence_study,
    "residual": residual_certify,
}
