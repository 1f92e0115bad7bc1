"""
Measurement Chain for Kettlewatch
Finite-n measurement sequences: chain and complement operators, union
propagator, event probabilities and state collapse. This is the brute-force
oracle for everything the continuum module computes.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

import console
from dynamics import (
    Hamiltonian, ProjectorPath, UnitaryPath, combined_unitaries, evolve_density,
    heisenberg_stack,
)
from operator_core import (
    DensityOp, Operator, Projector, ValidationError, check_dims, dagger, freeze,
    frobenius, validate_density,
)

EPS_COLLAPSE = 1e-14
PROBABILITY_CLAMP = 1e-10

# Heisenberg projectors are built in batches of this many times
CHUNK = 2048


class ZeroProbabilityBranchError(ValidationError):
    """Raised when a collapse is requested on a branch of (numerically) zero probability."""


class ProbabilityRangeError(ValidationError):
    """Raised when a probability leaves [0, 1] by more than roundoff."""


class Route(str, Enum):
    DISCRETE = "discrete"
    ODE = "ode"
    SERIES = "series"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class MeasurementSchedule:
    """Uniform grid t_i = t1 + (t - t1)(i - 1)/(n - 1), or {t1} when n = 1."""

    t1: float
    t: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.t1) and np.isfinite(self.t)) or self.t <= self.t1:
            raise ValidationError(f"schedule needs t > t1, got t1={self.t1}, t={self.t}")
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"schedule needs an integer n >= 1, got {self.n}")

    @property
    def times(self) -> np.ndarray:
        if self.n == 1:
            return np.array([float(self.t1)])
        return np.linspace(self.t1, self.t, int(self.n))

    @property
    def step(self) -> float:
        return 0.0 if self.n == 1 else (self.t - self.t1) / (self.n - 1)


@dataclass(frozen=True, eq=False)
class ChainResult:
    """A propagator modifier A with its event probability and diagnostics."""

    A: Operator
    probability: float
    n: int
    route: Route
    in_range: bool = True

    @property
    def norm(self) -> float:
        return frobenius(self.A)


def collapse(rho: DensityOp, E: Projector, eps: float = EPS_COLLAPSE) -> Tuple[float, DensityOp]:
    """
    Ideal instantaneous measurement of E finding the value 1.

    Args:
        rho: State before the measurement
        E: Measured projector
        eps: Probabilities at or below this are treated as a null branch

    Returns:
        Tuple[float, DensityOp]: (Tr(EρE), EρE / Tr(EρE))

    Raises:
        ZeroProbabilityBranchError: When Tr(EρE) <= eps
    """
    check_dims(rho.op, E.op, names=["rho", "E"])
    projected = E.op @ rho.op @ E.op
    probability = float(np.real(np.trace(projected)))
    if probability <= eps:
        raise ZeroProbabilityBranchError(
            f"zero-probability branch: Tr(EρE) = {probability:.3e} <= {eps:.1e}",
            bound=eps, residual=probability,
        )
    after = projected / probability
    return probability, validate_density((after + dagger(after)) / 2, name="collapsed state")


def _ordered_product(stack_fn, times: np.ndarray, dim: int) -> np.ndarray:
    """T-ordered product F(t_n)···F(t_1), later times on the left."""
    A = np.eye(dim, dtype=complex)
    for start in range(0, times.size, CHUNK):
        for factor in stack_fn(times[start:start + CHUNK]):
            A = factor @ A
    return A


def chain_operator(H: Hamiltonian, ppath: ProjectorPath, schedule: MeasurementSchedule) -> Operator:
    """A_h = E_H(t_n)···E_H(t_1)."""
    A = _ordered_product(lambda ts: heisenberg_stack(H, ppath, ts), schedule.times, ppath.dim)
    return freeze(A)


def complement_chain(H: Hamiltonian, ppath: ProjectorPath, schedule: MeasurementSchedule) -> Operator:
    """A_h̄ = Ē_H(t_n)···Ē_H(t_1) with Ē_H = 1 - E_H."""
    eye = np.eye(ppath.dim, dtype=complex)
    A = _ordered_product(lambda ts: eye - heisenberg_stack(H, ppath, ts), schedule.times, ppath.dim)
    return freeze(A)


def modified_propagator(H: Hamiltonian, A: Operator, t_final: float) -> Operator:
    """Feynman propagator modified by the chain: K = e^{-iH t_final} A."""
    check_dims(H.op, A, names=["H", "A"])
    return freeze(H.propagator(t_final) @ A)


def union_propagator(H: Hamiltonian, ppath: ProjectorPath, schedule: MeasurementSchedule,
                     t_final: float) -> Operator:
    """K_h' = e^{-iH t_final} [1 - A_h̄], the propagator for at least one E_i = 1."""
    if t_final < schedule.t:
        raise ValidationError(f"t_final must be >= t = {schedule.t}, got {t_final}")
    complement = complement_chain(H, ppath, schedule)
    return modified_propagator(H, np.eye(ppath.dim) - complement, t_final)


def probability_with_flag(A: Operator, rho0: DensityOp) -> Tuple[float, bool]:
    """
    Tr(A ρ0 A†), clamped to [0, 1] when within roundoff of the bounds.

    Returns:
        Tuple[float, bool]: (probability, in_range); out-of-range values are raw
    """
    check_dims(A, rho0.op, names=["A", "rho0"])
    value = float(np.real(np.trace(A @ rho0.op @ dagger(A))))
    if 0.0 <= value <= 1.0:
        return value, True
    if -PROBABILITY_CLAMP <= value < 0.0 or 1.0 < value <= 1.0 + PROBABILITY_CLAMP:
        clamped = min(max(value, 0.0), 1.0)
        console.debug(f"probability {value!r} clamped to {clamped}")
        return clamped, True
    console.warn(f"probability {value:.6e} outside [0, 1] beyond roundoff")
    return value, False


def sequence_probability(A: Operator, rho0: DensityOp) -> float:
    """p(h) = Tr(A ρ0 A†)."""
    return probability_with_flag(A, rho0)[0]


def pure_state_probability(K: Operator, psi0: np.ndarray) -> float:
    """‖K ψ0‖²."""
    check_dims(K, psi0, names=["K", "psi0"])
    return float(np.linalg.norm(K @ psi0) ** 2)


def post_measurement_state(K: Operator, rho0: DensityOp, eps: float = EPS_COLLAPSE) -> DensityOp:
    """K ρ0 K† / Tr(K ρ0 K†)."""
    check_dims(K, rho0.op, names=["K", "rho0"])
    out = K @ rho0.op @ dagger(K)
    probability = float(np.real(np.trace(out)))
    if probability <= eps:
        raise ZeroProbabilityBranchError(
            f"zero-probability branch: Tr(Kρ0K†) = {probability:.3e} <= {eps:.1e}",
            bound=eps, residual=probability,
        )
    out = out / probability
    return validate_density((out + dagger(out)) / 2, name="post-measurement state")


def evaluate_chain(A: Operator, rho0: DensityOp, n: int, route: Route) -> ChainResult:
    """
    Package an operator with its probability.

    Raises:
        ProbabilityRangeError: When the probability leaves [0, 1] beyond roundoff
    """
    probability, in_range = probability_with_flag(A, rho0)
    if not in_range:
        raise ProbabilityRangeError(
            f"{route.value} route produced probability {probability:.6e} outside [0, 1] (n={n})",
            bound=PROBABILITY_CLAMP, residual=probability,
        )
    return ChainResult(A=A, probability=probability, n=n, route=route, in_range=in_range)


def dragged_chain_discrete(H: Hamiltonian, E: Projector, path: UnitaryPath,
                           schedule: MeasurementSchedule) -> Operator:
    """
    Chain for E_s(t) = U E U† regrouped as V(t_n) [X(t_{n-1})···X(t_1)] V†(t_1).

    X(t_i) = E V†(t_{i+1}) V(t_i) E. This is an algebraic rearrangement of
    chain_operator and must agree with it to roundoff.
    """
    if schedule.n < 2:
        raise ValidationError("dragged chain needs n >= 2")
    check_dims(H.op, E.op, np.eye(path.dim), names=["H", "E", "path"])
    times = schedule.times
    Y = E.op.copy()
    V_prev = None
    V_first = None
    for start in range(0, times.size, CHUNK):
        V = combined_unitaries(H, path, times[start:start + CHUNK])
        if V_first is None:
            V_first = V[0]
        for V_next in V:
            if V_prev is not None:
                Y = (E.op @ dagger(V_next) @ V_prev @ E.op) @ Y
            V_prev = V_next
    return freeze(V_prev @ Y @ dagger(V_first))


def sequential_collapse(H: Hamiltonian, ppath: ProjectorPath, schedule: MeasurementSchedule,
                        rho0: DensityOp) -> Tuple[float, DensityOp]:
    """
    Schrodinger-picture replay of the chain: evolve between measurement times
    and collapse onto E_s(t_i) at each one, starting from ρ0 at time 0.

    Returns:
        Tuple[float, DensityOp]: (product of step probabilities, state at t_n)
    """
    check_dims(H.op, ppath.base.op, rho0.op, names=["H", "E", "rho0"])
    probability = 1.0
    rho = rho0
    previous = 0.0
    for t_i in schedule.times:
        rho = evolve_density(H, float(t_i) - previous, rho)
        step_probability, rho = collapse(rho, ppath.schrodinger(float(t_i)))
        probability *= step_probability
        previous = float(t_i)
    return probability, rho
