"""
Dynamics for Kettlewatch
Schrodinger/Heisenberg evolution, analytic unitary measurement paths U(t),
the combined unitary V(t) = e^{iHt} U(t) and the drag generator (dV†/dt) V.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from operator_core import (
    TOL_PROJ, TOL_TRACE, DensityOp, Operator, Projector, ValidationError,
    as_state, check_dims, dagger, freeze, validate_anti_hermitian,
    validate_density, validate_hermitian, validate_projector,
)

# Two times closer than this (relative) are treated as the same breakpoint
BREAKPOINT_TOL = 1e-12

# Heisenberg projectors are re-validated at this looser bound
HEISENBERG_TOL = 1e-9

SIDES = (None, "left", "right")


class BreakpointAmbiguityError(ValidationError):
    """Raised when a rate is requested exactly at a generator breakpoint without a side."""


def _eigen_phases(K: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, symmetrized first."""
    vals, vecs = np.linalg.eigh((K + dagger(K)) / 2)
    return vals, vecs


def _phase_stack(vals: np.ndarray, vecs: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Stack of Q diag(e^{i λ t}) Q† for every t in times."""
    if not np.any(vals):
        return np.broadcast_to(np.eye(vals.size, dtype=complex), (times.size, vals.size, vals.size)).copy()
    phases = np.exp(1j * np.outer(times, vals))
    stack = (vecs[None, :, :] * phases[:, None, :]) @ dagger(vecs)[None, :, :]
    # exact identity at t = 0
    stack[times == 0] = np.eye(vals.size)
    return stack


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Self-adjoint Hamiltonian with hbar = 1, cached eigendecomposition."""

    op: Operator
    _vals: np.ndarray = field(init=False, repr=False, compare=False)
    _vecs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vals, vecs = _eigen_phases(self.op)
        object.__setattr__(self, "_vals", vals)
        object.__setattr__(self, "_vecs", vecs)

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def frames(self, times) -> np.ndarray:
        """Stack of e^{iHt} for each t."""
        return _phase_stack(self._vals, self._vecs, np.atleast_1d(np.asarray(times, dtype=float)))

    def frame(self, t: float) -> np.ndarray:
        """e^{iHt}."""
        return self.frames([t])[0]

    def propagator(self, t: float) -> np.ndarray:
        """e^{-iHt}."""
        return self.frames([-t])[0]


def make_hamiltonian(A, tol: float = TOL_PROJ) -> Hamiltonian:
    return Hamiltonian(validate_hermitian(A, tol, name="Hamiltonian"))


@dataclass(frozen=True, eq=False)
class PathPiece:
    """One constant anti-Hermitian generator G acting until t_end."""

    t_end: float
    generator: Operator
    _vals: np.ndarray = field(init=False, repr=False, compare=False)
    _vecs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # G = iK with K Hermitian, so e^{Gs} = Q diag(e^{iλs}) Q†
        vals, vecs = _eigen_phases(-1j * self.generator)
        object.__setattr__(self, "_vals", vals)
        object.__setattr__(self, "_vecs", vecs)

    def exponentials(self, durations: np.ndarray) -> np.ndarray:
        return _phase_stack(self._vals, self._vecs, durations)


@dataclass(frozen=True, eq=False)
class UnitaryPath:
    """
    Unitary measurement path U(t) with analytic generator, U(0) = 1.

    Piece j acts on (t_end[j-1], t_end[j]]; the last piece continues past its
    t_end and is the only piece for "identity" and "exp" paths. At an inner
    breakpoint U is continuous but its generator jumps, so generator lookups
    there need an explicit side.
    """

    dim: int
    pieces: Tuple[PathPiece, ...]
    kind: str = "exp"
    _anchors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.pieces:
            raise ValidationError("unitary path needs at least one piece")
        ends = [p.t_end for p in self.pieces[:-1]]
        if any(b <= 0 for b in ends) or any(b2 <= b1 for b1, b2 in zip(ends, ends[1:])):
            raise ValidationError(f"piece end times must be positive and increasing, got {ends}")
        anchors = [np.eye(self.dim, dtype=complex)]
        start = 0.0
        for piece in self.pieces[:-1]:
            anchors.append(piece.exponentials(np.array([piece.t_end - start]))[0] @ anchors[-1])
            start = piece.t_end
        object.__setattr__(self, "_anchors", np.array(anchors))

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return tuple(p.t_end for p in self.pieces[:-1])

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    def _starts(self) -> np.ndarray:
        return np.array((0.0,) + self.breakpoints)

    def piece_index(self, t: float, side: Optional[str] = None) -> int:
        """
        Index of the piece governing t.

        Args:
            t: Time
            side: 'left' or 'right' limit; required exactly at a breakpoint

        Raises:
            BreakpointAmbiguityError: t is a breakpoint and side is None
        """
        if side not in SIDES:
            raise ValidationError(f"side must be one of {SIDES}, got {side!r}")
        for j, b in enumerate(self.breakpoints):
            if abs(t - b) <= BREAKPOINT_TOL * max(1.0, abs(b)):
                if side is None:
                    raise BreakpointAmbiguityError(
                        f"t = {t} is a generator breakpoint; request side='left' or side='right'"
                    )
                return j if side == "left" else j + 1
            if t < b:
                return j
        return len(self.pieces) - 1

    def generator(self, t: float, side: Optional[str] = None) -> Operator:
        return self.pieces[self.piece_index(t, side)].generator

    def unitaries(self, times, piece: Optional[int] = None) -> np.ndarray:
        """Stack of U(t); U is continuous so breakpoints need no side."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if piece is None:
            index = np.searchsorted(np.array(self.breakpoints), times, side="left")
        else:
            index = np.full(times.shape, piece)
        starts = self._starts()
        out = np.empty((times.size, self.dim, self.dim), dtype=complex)
        for j in np.unique(index):
            mask = index == j
            out[mask] = self.pieces[j].exponentials(times[mask] - starts[j]) @ self._anchors[j]
        return out

    def unitary(self, t: float) -> np.ndarray:
        return self.unitaries([t])[0]


def identity_path(dim: int) -> UnitaryPath:
    return UnitaryPath(dim, (PathPiece(np.inf, freeze(np.zeros((dim, dim), dtype=complex))),),
                       kind="identity")


def exp_path(G, tol: float = TOL_PROJ) -> UnitaryPath:
    """U(t) = e^{Gt} for a constant anti-Hermitian G."""
    op = validate_anti_hermitian(G, tol, name="path generator")
    return UnitaryPath(op.shape[0], (PathPiece(np.inf, op),), kind="exp")


def piecewise_path(pieces: Sequence[Tuple[float, np.ndarray]], tol: float = TOL_PROJ) -> UnitaryPath:
    """Piecewise-constant generators given as (t_end, G_j) pairs."""
    built = []
    for j, (t_end, G) in enumerate(pieces):
        built.append(PathPiece(float(t_end), validate_anti_hermitian(G, tol, name=f"piece {j} generator")))
    dims = {p.generator.shape[0] for p in built}
    if len(dims) != 1:
        raise ValidationError(f"piece generators disagree on dimension: {sorted(dims)}")
    return UnitaryPath(dims.pop(), tuple(built), kind="piecewise")


@dataclass(frozen=True, eq=False)
class ProjectorPath:
    """Schrodinger projector E_s(t) = U(t) E U†(t)."""

    base: Projector
    path: UnitaryPath

    def __post_init__(self):
        check_dims(self.base.op, np.eye(self.path.dim), names=["projector", "path"])

    @property
    def dim(self) -> int:
        return self.base.dim

    def schrodinger_stack(self, times, piece: Optional[int] = None) -> np.ndarray:
        if self.path.is_identity:
            return np.broadcast_to(self.base.op, (np.atleast_1d(times).size,) + self.base.op.shape)
        U = self.path.unitaries(times, piece)
        return U @ self.base.op @ dagger(U)

    def schrodinger(self, t: float) -> Projector:
        return validate_projector(self.schrodinger_stack([t])[0], HEISENBERG_TOL,
                                  name="Schrodinger projector")


def evolve_state(H: Hamiltonian, t: float, psi0) -> np.ndarray:
    """e^{-iHt} ψ0."""
    psi = as_state(psi0, "psi0", TOL_TRACE)
    check_dims(H.op, np.eye(psi.size), names=["H", "psi0"])
    return H.propagator(t) @ psi


def evolve_density(H: Hamiltonian, t: float, rho0: DensityOp) -> DensityOp:
    """e^{-iHt} ρ0 e^{iHt}."""
    check_dims(H.op, rho0.op, names=["H", "rho0"])
    P = H.propagator(t)
    rho = P @ rho0.op @ dagger(P)
    return validate_density((rho + dagger(rho)) / 2, name="evolved density")


def combined_unitaries(H: Hamiltonian, path: UnitaryPath, times, piece: Optional[int] = None) -> np.ndarray:
    """Stack of V(t) = e^{iHt} U(t)."""
    frames = H.frames(times)
    if path.is_identity:
        return frames
    return frames @ path.unitaries(times, piece)


def heisenberg_stack(H: Hamiltonian, ppath: ProjectorPath, times, piece: Optional[int] = None) -> np.ndarray:
    """Stack of E_H(t) = V(t) E V†(t), unvalidated."""
    check_dims(H.op, ppath.base.op, names=["H", "projector"])
    V = combined_unitaries(H, ppath.path, times, piece)
    return V @ ppath.base.op @ dagger(V)


def heisenberg_projector(H: Hamiltonian, ppath: ProjectorPath, t: float) -> Projector:
    """
    Heisenberg-picture measured projector E_H(t) = V(t) E V†(t).

    Args:
        H: Hamiltonian
        ppath: Measured projector path
        t: Time

    Returns:
        Projector: E_H(t)
    """
    return validate_projector(heisenberg_stack(H, ppath, [t])[0], HEISENBERG_TOL,
                              name="Heisenberg projector")


def _side_pieces(path: UnitaryPath, times: np.ndarray, side: Optional[str]) -> np.ndarray:
    return np.array([path.piece_index(float(t), side) for t in times], dtype=int)


def heisenberg_rates(H: Hamiltonian, ppath: ProjectorPath, times, side: Optional[str] = None) -> np.ndarray:
    """
    Stack of dE_H/dt = i[H, E_H] + e^{iHt} (G E_s - E_s G) e^{-iHt}.

    The same side convention applies to every time in the batch.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    check_dims(H.op, ppath.base.op, names=["H", "projector"])
    frames = H.frames(times)
    if ppath.path.is_identity:
        E_s = np.broadcast_to(ppath.base.op, (times.size,) + ppath.base.op.shape)
        drift = 0.0
    else:
        pieces = _side_pieces(ppath.path, times, side)
        U = np.empty((times.size, ppath.dim, ppath.dim), dtype=complex)
        G = np.empty_like(U)
        for j in np.unique(pieces):
            mask = pieces == j
            U[mask] = ppath.path.unitaries(times[mask], piece=j)
            G[mask] = ppath.path.pieces[j].generator
        E_s = U @ ppath.base.op @ dagger(U)
        drift = frames @ (G @ E_s - E_s @ G) @ dagger(frames)
    E_H = frames @ E_s @ dagger(frames)
    commutator = 1j * (H.op @ E_H - E_H @ H.op)
    return commutator + drift


def heisenberg_rate(H: Hamiltonian, ppath: ProjectorPath, t: float, side: Optional[str] = None) -> Operator:
    """dE_H/dt at t, computed analytically from the path generator."""
    return heisenberg_rates(H, ppath, [t], side)[0]


def drag_generators(H: Hamiltonian, path: UnitaryPath, times, side: Optional[str] = None) -> np.ndarray:
    """Stack of M(t) = (dU†/dt) U - i U† H U, which equals (dV†/dt) V."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    check_dims(H.op, np.eye(path.dim), names=["H", "path"])
    if path.is_identity:
        return np.broadcast_to(-1j * H.op, (times.size,) + H.op.shape).copy()
    pieces = _side_pieces(path, times, side)
    out = np.empty((times.size, path.dim, path.dim), dtype=complex)
    for j in np.unique(pieces):
        mask = pieces == j
        U = path.unitaries(times[mask], piece=j)
        Ud = dagger(U)
        G = path.pieces[j].generator
        # dU/dt = G U  =>  dU†/dt = -U† G
        out[mask] = -(Ud @ G @ U) - 1j * (Ud @ H.op @ U)
    return out


def drag_generator(H: Hamiltonian, path: UnitaryPath, t: float, side: Optional[str] = None) -> Operator:
    return drag_generators(H, path, [t], side)[0]
