"""
Operator Core for Kettlewatch
Dense complex matrix algebra with validated projector, unitary and density subtypes.
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import expm

# Default tolerances (Frobenius norm everywhere)
TOL_PROJ = 1e-10
TOL_UNIT = 1e-10
TOL_PSD = 1e-10
TOL_TRACE = 1e-12

# conjugate() re-validates at this multiple of the caller's tolerance
CONJUGATE_TOL_SCALE = 10.0

Operator = np.ndarray


class KettlewatchError(Exception):
    """Base class for every error raised by the laboratory."""

    kind = "error"


class ValidationError(KettlewatchError):
    """Raised when an input or intermediate violates a stated bound."""

    kind = "validation"

    def __init__(self, message: str, bound: Optional[float] = None,
                 residual: Optional[float] = None):
        super().__init__(message)
        self.bound = bound
        self.residual = residual


class NumericalQualityError(KettlewatchError):
    """Raised when a computation finishes but its quality check fails."""

    kind = "numerical_quality"

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Projector:
    """Hermitian idempotent operator. Build through validate_projector."""

    op: Operator

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    @property
    def rank(self) -> int:
        return rank(self.op)

    def complement(self) -> "Projector":
        """Return 1 - E, which is a projector whenever E is."""
        return Projector(freeze(np.eye(self.dim, dtype=complex) - self.op))


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    """Unitary operator. Build through validate_unitary."""

    op: Operator

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    @property
    def dagger(self) -> Operator:
        return dagger(self.op)


@dataclass(frozen=True, eq=False)
class DensityOp:
    """Hermitian, positive semidefinite, unit-trace operator."""

    op: Operator

    @property
    def dim(self) -> int:
        return self.op.shape[0]


def freeze(A: np.ndarray) -> np.ndarray:
    """Mark an array read-only so validated values stay immutable."""
    A.setflags(write=False)
    return A


def as_operator(A, name: str = "operator") -> Operator:
    """
    Convert input to a finite, square complex128 matrix.

    Args:
        A: Array-like input
        name: Label used in error messages

    Returns:
        Operator: Read-only complex copy of the input
    """
    arr = np.array(A, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return freeze(arr)


def as_state(psi, name: str = "state", tol: float = TOL_TRACE) -> np.ndarray:
    """Convert input to a finite unit-norm complex vector."""
    vec = np.array(psi, dtype=complex).reshape(-1)
    if vec.size < 1 or not np.all(np.isfinite(vec)):
        raise ValidationError(f"{name} must be a non-empty finite vector")
    norm_residual = abs(np.linalg.norm(vec) - 1.0)
    if norm_residual > tol:
        raise ValidationError(
            f"{name} must have unit norm (|‖ψ‖ - 1| = {norm_residual:.3e} > {tol:.1e})",
            bound=tol, residual=norm_residual,
        )
    return freeze(vec)


def dagger(A: np.ndarray) -> np.ndarray:
    """Conjugate transpose (works on stacks of matrices too)."""
    return np.conj(np.swapaxes(A, -1, -2))


def frobenius(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, ord="fro"))


def check_dims(*ops, names: Optional[List[str]] = None):
    """Raise ValidationError unless every operand has the same dimension."""
    dims = [np.shape(op)[0] for op in ops]
    if len(set(dims)) > 1:
        labels = names or [f"arg{i}" for i in range(len(ops))]
        detail = ", ".join(f"{n}={d}" for n, d in zip(labels, dims))
        raise ValidationError(f"dimension mismatch: {detail}")


def mat_exp(A) -> Operator:
    """
    Matrix exponential by scaling and squaring with Pade approximants.

    Args:
        A: Square finite matrix

    Returns:
        Operator: e^A
    """
    return freeze(expm(as_operator(A, "exponent")))


def hermitian_residual(A: np.ndarray) -> float:
    return frobenius(A - dagger(A))


def anti_hermitian_residual(A: np.ndarray) -> float:
    return frobenius(A + dagger(A))


def unitarity_residual(A: np.ndarray) -> float:
    """Larger of ‖A†A - 1‖_F and ‖AA† - 1‖_F."""
    eye = np.eye(A.shape[0])
    return max(frobenius(dagger(A) @ A - eye), frobenius(A @ dagger(A) - eye))


def validate_hermitian(A, tol: float = TOL_PROJ, name: str = "operator") -> Operator:
    op = as_operator(A, name)
    residual = hermitian_residual(op)
    if residual > tol:
        raise ValidationError(
            f"{name} is not Hermitian: ‖A - A†‖_F = {residual:.3e} > {tol:.1e}",
            bound=tol, residual=residual,
        )
    return op


def validate_anti_hermitian(A, tol: float = TOL_PROJ, name: str = "generator") -> Operator:
    op = as_operator(A, name)
    residual = anti_hermitian_residual(op)
    if residual > tol:
        raise ValidationError(
            f"{name} is not anti-Hermitian: ‖G + G†‖_F = {residual:.3e} > {tol:.1e}",
            bound=tol, residual=residual,
        )
    return op


def validate_projector(A, tol: float = TOL_PROJ, name: str = "projector") -> Projector:
    """
    Wrap a matrix as a Projector if it is Hermitian and idempotent within tol.

    Args:
        A: Square matrix
        tol: Frobenius bound applied to both residuals
        name: Label used in error messages

    Returns:
        Projector: Validated wrapper

    Raises:
        ValidationError: Naming the violated bound and its residual
    """
    op = as_operator(A, name)
    residual = hermitian_residual(op)
    if residual > tol:
        raise ValidationError(
            f"{name} fails Hermiticity: ‖E - E†‖_F = {residual:.3e} > {tol:.1e}",
            bound=tol, residual=residual,
        )
    residual = frobenius(op @ op - op)
    if residual > tol:
        raise ValidationError(
            f"{name} fails idempotence: ‖E² - E‖_F = {residual:.3e} > {tol:.1e}",
            bound=tol, residual=residual,
        )
    return Projector(op)


def validate_unitary(A, tol: float = TOL_UNIT, name: str = "unitary") -> UnitaryOp:
    op = as_operator(A, name)
    residual = unitarity_residual(op)
    if residual > tol:
        raise ValidationError(
            f"{name} is not unitary: residual {residual:.3e} > {tol:.1e}",
            bound=tol, residual=residual,
        )
    return UnitaryOp(op)


def validate_density(A, tol_psd: float = TOL_PSD, tol_trace: float = TOL_TRACE,
                     name: str = "density operator") -> DensityOp:
    """Wrap a matrix as a DensityOp if Hermitian, PSD and unit trace."""
    op = as_operator(A, name)
    residual = hermitian_residual(op)
    if residual > tol_psd:
        raise ValidationError(
            f"{name} is not Hermitian: ‖ρ - ρ†‖_F = {residual:.3e} > {tol_psd:.1e}",
            bound=tol_psd, residual=residual,
        )
    min_eig = float(np.min(np.linalg.eigvalsh((op + dagger(op)) / 2)))
    if min_eig < -tol_psd:
        raise ValidationError(
            f"{name} is not positive semidefinite: min eigenvalue {min_eig:.3e}",
            bound=tol_psd, residual=-min_eig,
        )
    trace_residual = abs(np.trace(op) - 1.0)
    if trace_residual > tol_trace:
        raise ValidationError(
            f"{name} must have unit trace: |Tr ρ - 1| = {trace_residual:.3e} > {tol_trace:.1e}",
            bound=tol_trace, residual=trace_residual,
        )
    return DensityOp(op)


def conjugate(E: Projector, U: UnitaryOp, tol: float = TOL_PROJ) -> Projector:
    """Return U E U† as a Projector."""
    check_dims(E.op, U.op, names=["E", "U"])
    return validate_projector(U.op @ E.op @ U.dagger, tol=CONJUGATE_TOL_SCALE * tol,
                              name="conjugated projector")


def first_k_projector(d: int, k: int) -> Projector:
    """Projector onto the span of the first k basis vectors."""
    if d < 1 or not 0 <= k <= d:
        raise ValidationError(f"first-k projector needs 0 <= k <= d, got d={d}, k={k}")
    op = np.zeros((d, d), dtype=complex)
    op[np.arange(k), np.arange(k)] = 1.0
    return Projector(freeze(op))


def projector_from_state(psi) -> Projector:
    """Rank-1 projector |ψ⟩⟨ψ| for a unit vector ψ."""
    vec = as_state(psi)
    return Projector(freeze(np.outer(vec, np.conj(vec))))


def density_from_state(psi) -> DensityOp:
    vec = as_state(psi)
    return DensityOp(freeze(np.outer(vec, np.conj(vec))))


def rank(E: np.ndarray) -> int:
    """Rank of a projector, counted from its eigenvalues."""
    eigvals = np.linalg.eigvalsh((E + dagger(E)) / 2)
    return int(np.sum(eigvals > 0.5))


def leading_state(E: Projector) -> np.ndarray:
    """Unit vector spanning a rank-1 projector, with a real non-negative largest entry."""
    if E.rank != 1:
        raise ValidationError(f"expected a rank-1 projector, got rank {E.rank}")
    _, vecs = np.linalg.eigh((E.op + dagger(E.op)) / 2)
    vec = vecs[:, -1]
    pivot = vec[np.argmax(np.abs(vec))]
    return freeze(vec * (abs(pivot) / pivot))


def fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """⟨ψ|ρ|ψ⟩."""
    return float(np.real(np.conj(psi) @ rho @ psi))


def support_residual(E: np.ndarray, rho: np.ndarray) -> float:
    """‖EρE - ρ‖_F; zero exactly when ρ lives on the range of E."""
    return frobenius(E @ rho @ E - rho)


def operator_to_json(A: np.ndarray) -> list:
    """Row-major list of [re, im] pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A)]


def operator_from_json(data, name: str = "matrix") -> Operator:
    """
    Parse a row-major matrix whose entries are [re, im] pairs or real numbers.

    Raises:
        ValidationError: When the nesting or entries are malformed
    """
    if not isinstance(data, list) or not data or not all(isinstance(row, list) for row in data):
        raise ValidationError(f"{name} must be a non-empty list of rows")
    rows = []
    for row in data:
        rows.append([_complex_entry(entry, name) for entry in row])
    if any(len(row) != len(rows) for row in rows):
        raise ValidationError(f"{name} must be square")
    return as_operator(rows, name)


def state_from_json(data, name: str = "state") -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ValidationError(f"{name} must be a non-empty list")
    return np.array([_complex_entry(entry, name) for entry in data], dtype=complex)


def _complex_entry(entry, name: str) -> complex:
    if isinstance(entry, bool):
        raise ValidationError(f"{name} entries must be numbers or [re, im] pairs")
    if isinstance(entry, (int, float)):
        value = complex(entry)
    elif isinstance(entry, list) and len(entry) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry):
        value = complex(entry[0], entry[1])
    else:
        raise ValidationError(f"{name} entries must be numbers or [re, im] pairs, got {entry!r}")
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValidationError(f"{name} has non-finite entries")
    return value
