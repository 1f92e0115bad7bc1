"""
Continuum for Kettlewatch
The continuous-measurement limit: the measurement differential equation
dA/dt = (dE_H/dt) A, its time-ordered exponential series, and the Zeno and
anti-Zeno closed forms including the unitary W.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import console
from dynamics import (
    Hamiltonian, ProjectorPath, UnitaryPath, combined_unitaries,
    drag_generators, heisenberg_rates, heisenberg_stack,
)
from measurement_chain import post_measurement_state
from operator_core import (
    DensityOp, NumericalQualityError, Operator, Projector, UnitaryOp, ValidationError,
    as_state, check_dims, dagger, freeze, frobenius, unitarity_residual,
)

DEFAULT_STEP_FRACTION = 1e-4
MIN_INTERVALS = 10
W_UNITARITY_LIMIT = 1e-6
MAX_SERIES_ORDER = 3
MIN_QUADRATURE_POINTS = 16

# Steps whose rates are evaluated in one batch
STEP_CHUNK = 1024

METHODS = ("rk4_fixed", "ordered_product")

# rate(times, side) -> stack of operators R(t) for dY/dt = R(t) Y
RateFn = Callable[[np.ndarray, Optional[str]], np.ndarray]


@dataclass(frozen=True)
class OdeSettings:
    """Fixed-step integration settings; step defaults to 1e-4 (t - t1)."""

    step: Optional[float] = None
    method: str = "rk4_fixed"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"ODE method must be one of {METHODS}, got {self.method!r}")
        if self.step is not None and not (math.isfinite(self.step) and self.step > 0):
            raise ValidationError(f"ODE step must be a positive number, got {self.step}")

    def resolve_step(self, t1: float, t: float) -> float:
        """
        Step for [t1, t], checked against the minimum interval count.

        Raises:
            NumericalQualityError: When the step leaves fewer than 10 intervals
        """
        span = t - t1
        step = DEFAULT_STEP_FRACTION * span if self.step is None else self.step
        if step > span / MIN_INTERVALS * (1 + 1e-12):
            raise NumericalQualityError(
                f"ODE step {step:.3e} is too large for [{t1}, {t}]: it must divide the interval "
                f"into at least {MIN_INTERVALS} steps; use step <= {span / MIN_INTERVALS:.3e}",
                residual=step,
            )
        return step


@dataclass(frozen=True)
class SeriesSettings:
    order: int = MAX_SERIES_ORDER
    points: int = MIN_QUADRATURE_POINTS

    def __post_init__(self):
        if int(self.order) != self.order or not 0 <= self.order <= MAX_SERIES_ORDER:
            raise ValidationError(f"series order must be an integer in [0, {MAX_SERIES_ORDER}], got {self.order}")
        if int(self.points) != self.points or self.points < MIN_QUADRATURE_POINTS:
            raise ValidationError(f"quadrature needs at least {MIN_QUADRATURE_POINTS} points, got {self.points}")


def _check_interval(t1: float, t: float):
    if not (math.isfinite(t1) and math.isfinite(t)) or t <= t1:
        raise ValidationError(f"integration needs t > t1, got t1={t1}, t={t}")


def _segments(t1: float, t: float, step: float, cuts: Sequence[float]) -> List[Tuple[float, float, int]]:
    """Split [t1, t] at the cuts so each cut lands on a step boundary."""
    inner = sorted({float(c) for c in cuts if t1 < c < t})
    edges = [t1] + inner + [t]
    segments = []
    for a, b in zip(edges, edges[1:]):
        segments.append((a, b, max(1, int(math.ceil((b - a) / step - 1e-9)))))
    return segments


def _integrate_segment(rate: RateFn, Y: np.ndarray, a: float, b: float, steps: int,
                       method: str) -> np.ndarray:
    """
    Fixed-step integration of dY/dt = R(t) Y over one smooth segment.

    Segment end points are evaluated as one-sided limits (right at a, left
    at b) so a breakpoint at either end never needs a side chosen later.
    """
    h = (b - a) / steps
    for first in range(0, steps, STEP_CHUNK):
        count = min(STEP_CHUNK, steps - first)
        if method == "ordered_product":
            starts = a + h * np.arange(first, first + count)
            rates = rate(starts, "right")
            for R in rates:
                Y = Y + h * (R @ Y)
            continue
        # RK4 stage points t_k, t_k + h/2, t_k + h
        grid = a + (h / 2) * np.arange(2 * first, 2 * (first + count) + 1)
        rates = np.concatenate([rate(grid[:-1], "right"), rate(grid[-1:], "left")])
        for k in range(count):
            R0, Rm, R1 = rates[2 * k], rates[2 * k + 1], rates[2 * k + 2]
            k1 = R0 @ Y
            k2 = Rm @ (Y + (h / 2) * k1)
            k3 = Rm @ (Y + (h / 2) * k2)
            k4 = R1 @ (Y + h * k3)
            Y = Y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(Y)):
        raise NumericalQualityError(f"non-finite state while integrating over [{a}, {b}]")
    return Y


def integrate_linear(rate: RateFn, Y0: np.ndarray, t1: float, t: float, settings: OdeSettings,
                     cuts: Sequence[float] = (),
                     snapshots: Sequence[float] = (),
                     step: Optional[float] = None) -> Tuple[np.ndarray, Dict[float, np.ndarray]]:
    """
    Integrate dY/dt = R(t) Y from Y(t1) = Y0 to t on a grid containing every cut.

    Args:
        rate: Batched rate function
        Y0: Initial value
        t1: Start time
        t: End time
        settings: Step and method
        cuts: Times that must be step boundaries (generator breakpoints)
        snapshots: Times at which Y is recorded (also step boundaries)
        step: Step already resolved against a longer interval; skips the
            interval-count check for this span

    Returns:
        Tuple[np.ndarray, Dict[float, np.ndarray]]: (Y(t), {snapshot: Y(snapshot)})
    """
    _check_interval(t1, t)
    if step is None:
        step = settings.resolve_step(t1, t)
    wanted = {float(s) for s in snapshots if t1 < s <= t}
    recorded = {}
    Y = np.array(Y0, dtype=complex)
    for a, b, steps in _segments(t1, t, step, list(cuts) + list(wanted)):
        Y = _integrate_segment(rate, Y, a, b, steps, settings.method)
        if b in wanted:
            recorded[b] = Y.copy()
    return Y, recorded


def _chain_rate(H: Hamiltonian, ppath: ProjectorPath, sign: float) -> RateFn:
    def rate(times, side):
        return sign * heisenberg_rates(H, ppath, times, side)
    return rate


def integrate_chain_ode(H: Hamiltonian, ppath: ProjectorPath, t1: float, t: float,
                        settings: OdeSettings = OdeSettings()) -> Operator:
    """
    Solve dA/dt = (dE_H/dt) A(t_-) with A(t1) = E_H(t1).

    Args:
        H: Hamiltonian
        ppath: Measured projector path
        t1: First measurement time
        t: Last measurement time
        settings: Step and method (rk4_fixed or ordered_product)

    Returns:
        Operator: A_h(t, t1)
    """
    check_dims(H.op, ppath.base.op, names=["H", "projector"])
    A0 = heisenberg_stack(H, ppath, [t1])[0]
    A, _ = integrate_linear(_chain_rate(H, ppath, 1.0), A0, t1, t, settings,
                            cuts=ppath.path.breakpoints)
    return freeze(A)


def complement_chain_ode(H: Hamiltonian, ppath: ProjectorPath, t1: float, t: float,
                         settings: OdeSettings = OdeSettings()) -> Operator:
    """Same equation for the complement chain: rate -dE_H/dt, A(t1) = 1 - E_H(t1)."""
    check_dims(H.op, ppath.base.op, names=["H", "projector"])
    A0 = np.eye(ppath.dim) - heisenberg_stack(H, ppath, [t1])[0]
    A, _ = integrate_linear(_chain_rate(H, ppath, -1.0), A0, t1, t, settings,
                            cuts=ppath.path.breakpoints)
    return freeze(A)


def union_propagator_ode(H: Hamiltonian, ppath: ProjectorPath, t1: float, t: float, t_final: float,
                         settings: OdeSettings = OdeSettings()) -> Operator:
    """e^{-iH t_final} [1 - A_h̄(t, t1)] from the continuum complement chain."""
    if t_final < t:
        raise ValidationError(f"t_final must be >= t = {t}, got {t_final}")
    complement = complement_chain_ode(H, ppath, t1, t, settings)
    return freeze(H.propagator(t_final) @ (np.eye(ppath.dim) - complement))


def dyson_series(H: Hamiltonian, ppath: ProjectorPath, t1: float, t: float,
                 settings: SeriesSettings = SeriesSettings(), complement: bool = False) -> Operator:
    """
    Truncated time-ordered exponential applied to the initial projector.

    Computes [1 + sum_{k<=order} nested integrals of R(t'_1)···R(t'_k)] E_H(t1)
    over the simplex t1 <= t'_k <= ... <= t'_1 <= t, using the recursion
    T_m(s) = 1 + ∫_{t1}^{s} R(u) T_{m-1}(u) du with Gauss-Legendre nodes per level.
    """
    _check_interval(t1, t)
    check_dims(H.op, ppath.base.op, names=["H", "projector"])
    sign = -1.0 if complement else 1.0
    E1 = heisenberg_stack(H, ppath, [t1])[0]
    initial = np.eye(ppath.dim) - E1 if complement else E1
    if settings.order == 0:
        return freeze(np.array(initial))

    x, w = np.polynomial.legendre.leggauss(settings.points)
    eye = np.eye(ppath.dim, dtype=complex)

    # level-k node tree: nodes[k] has shape (q,)*k, the parent of each node is its prefix
    nodes = [np.array(t)]
    for _ in range(settings.order):
        parent = nodes[-1][..., None]
        nodes.append(t1 + (parent - t1) * (x + 1) / 2)

    # T at the deepest level is the identity; climb back up to the root
    T = np.broadcast_to(eye, nodes[-1].shape + eye.shape)
    for level in range(settings.order, 0, -1):
        flat = nodes[level].reshape(-1)
        R = sign * heisenberg_rates(H, ppath, flat, "left").reshape(nodes[level].shape + eye.shape)
        half = ((nodes[level - 1] - t1) / 2)[..., None, None]
        integral = half * np.einsum("j,...jab,...jbc->...ac", w, R, T)
        T = eye + integral
    return freeze(T @ initial)


def zeno_closed_form(H: Hamiltonian, psi0, t1: float, t: float) -> Operator:
    """
    e^{i(H - H̄)t} |ψ0⟩⟨ψ0| e^{-i(H - H̄)t1} with H̄ = ⟨ψ0|H|ψ0⟩.

    Args:
        H: Hamiltonian
        psi0: Initial unit vector, which is also the measured state
        t1: First measurement time
        t: Last measurement time

    Returns:
        Operator: Continuum limit of the Zeno chain
    """
    psi = as_state(psi0, "psi0")
    check_dims(H.op, psi, names=["H", "psi0"])
    h_bar = float(np.real(np.conj(psi) @ H.op @ psi))
    P = np.outer(psi, np.conj(psi))
    phase = np.exp(-1j * h_bar * (t - t1))
    return freeze(phase * (H.frame(t) @ P @ H.propagator(t1)))


def _drag_rate(H: Hamiltonian, path: UnitaryPath, E: Projector) -> RateFn:
    def rate(times, side):
        return E.op @ drag_generators(H, path, times, side) @ E.op
    return rate


def _w_trajectory(H: Hamiltonian, path: UnitaryPath, E: Projector, t1: float, t: float,
                  settings: OdeSettings, snapshots: Sequence[float] = (),
                  step: Optional[float] = None):
    check_dims(H.op, E.op, np.eye(path.dim), names=["H", "E", "path"])
    W0 = np.eye(E.dim, dtype=complex)
    return integrate_linear(_drag_rate(H, path, E), W0, t1, t, settings,
                            cuts=path.breakpoints, snapshots=snapshots, step=step)


def _checked_unitary(W: np.ndarray, where: str) -> UnitaryOp:
    residual = unitarity_residual(W)
    if not math.isfinite(residual) or residual > W_UNITARITY_LIMIT:
        raise NumericalQualityError(
            f"W{where} unitarity residual {residual:.3e} exceeds {W_UNITARITY_LIMIT:.0e}; "
            f"reduce the ODE step",
            residual=residual,
        )
    return UnitaryOp(freeze(W))


def w_operator(H: Hamiltonian, path: UnitaryPath, E: Projector, t1: float, t: float,
               settings: OdeSettings = OdeSettings()) -> UnitaryOp:
    """
    W(t, t1) = T exp(∫ E M(t') E dt') from dW/dt' = E M(t') E W, W(t1) = 1.

    M is the drag generator (dV†/dt) V, anti-Hermitian, so W is unitary.

    Raises:
        NumericalQualityError: When the step is too coarse or ‖W†W - 1‖ > 1e-6
    """
    if settings.method != "rk4_fixed":
        settings = OdeSettings(step=settings.step, method="rk4_fixed")
    W, _ = _w_trajectory(H, path, E, t1, t, settings)
    return _checked_unitary(W, f"({t}, {t1})")


def anti_zeno_propagator(H: Hamiltonian, path: UnitaryPath, E: Projector, t1: float, t: float,
                         settings: OdeSettings = OdeSettings(),
                         w: Optional[UnitaryOp] = None) -> Operator:
    """A_h(t, t1) = V(t) W(t, t1) E V†(t1); pass w to reuse a computed W."""
    if w is None:
        w = w_operator(H, path, E, t1, t, settings)
    V = combined_unitaries(H, path, [t1, t])
    return freeze(V[1] @ w.op @ E.op @ dagger(V[0]))


def dragged_state(H: Hamiltonian, path: UnitaryPath, E: Projector, rho0: DensityOp, t1: float,
                  t: float, settings: OdeSettings = OdeSettings(),
                  w: Optional[UnitaryOp] = None) -> DensityOp:
    """Schrodinger-picture state at t after continuous measurement: K ρ0 K† normalized, K = e^{-iHt} A."""
    A = anti_zeno_propagator(H, path, E, t1, t, settings, w)
    return post_measurement_state(H.propagator(t) @ A, rho0)


def residual_sample_times(t1: float, t: float, samples: int) -> np.ndarray:
    return t1 + (t - t1) * np.arange(1, samples + 1) / samples


def chain_equation_residual(H: Hamiltonian, path: UnitaryPath, E: Projector, t1: float, t: float,
                            settings: OdeSettings = OdeSettings(), samples: int = 5,
                            delta: Optional[float] = None) -> float:
    """
    Largest ‖dA/dt - (dE_H/dt) A‖_F over sample times for the anti-Zeno solution.

    dA/dt is a central difference with spacing delta (default 1e-5 (t - t1)).
    W is integrated once up to each s - delta, then advanced by two RK4 steps
    of size delta to reach s and s + delta.
    """
    _check_interval(t1, t)
    if samples < 1:
        raise ValidationError(f"residual check needs at least one sample, got {samples}")
    delta = 1e-5 * (t - t1) if delta is None else delta
    if not 0 < delta < (t - t1) / samples:
        raise ValidationError(f"residual delta must lie in (0, {(t - t1) / samples:.3e}), got {delta}")
    times = residual_sample_times(t1, t, samples)
    if any(abs(s - b) <= delta for s in times for b in path.breakpoints):
        raise ValidationError("residual sample falls within delta of a generator breakpoint")
    # same W as w_operator: RK4 with the step resolved on the full [t1, t]
    settings = OdeSettings(step=settings.step, method="rk4_fixed")
    step = settings.resolve_step(t1, t)
    ppath = ProjectorPath(E, path)
    rate = _drag_rate(H, path, E)
    _, recorded = _w_trajectory(H, path, E, t1, float(times[-1] - delta), settings,
                                snapshots=[float(s - delta) for s in times], step=step)
    worst = 0.0
    for s in times:
        start = float(s - delta)
        W_minus = recorded[start] if start > t1 else np.eye(E.dim, dtype=complex)
        W_mid = _integrate_segment(rate, W_minus, start, float(s), 1, "rk4_fixed")
        W_plus = _integrate_segment(rate, W_mid, float(s), float(s + delta), 1, "rk4_fixed")
        V = combined_unitaries(H, path, [t1, start, float(s), float(s + delta)])
        tail = E.op @ dagger(V[0])
        A_minus, A_mid, A_plus = V[1] @ W_minus @ tail, V[2] @ W_mid @ tail, V[3] @ W_plus @ tail
        derivative = (A_plus - A_minus) / (2 * delta)
        residual = frobenius(derivative - heisenberg_rates(H, ppath, [float(s)], "left")[0] @ A_mid)
        console.debug(f"residual at t={s:.6g}: {residual:.3e}")
        worst = max(worst, residual)
    return worst

