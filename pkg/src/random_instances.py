"""
Random Instances for Kettlewatch
Seeded generation of Hermitian, anti-Hermitian and unitary matrices,
rank-k projectors and density matrices supported on a projector's range.
"""

from typing import Optional

import numpy as np
from scipy.linalg import qr

from operator_core import (
    DensityOp, Operator, Projector, ValidationError, dagger, freeze, validate_density,
)


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """Seeded generator; the same seed always replays the same instance."""
    return np.random.default_rng(seed)


def complex_gaussian(shape, rng: np.random.Generator) -> np.ndarray:
    """Entries with independent N(0, 1/2) real and imaginary parts, E|z|² = 1."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    """
    Symmetrized complex Gaussian matrix scaled by 1/sqrt(d).

    The spectrum stays O(scale) independent of d.
    """
    X = complex_gaussian((d, d), rng)
    return freeze(scale * (X + dagger(X)) / (2 * np.sqrt(d)))


def random_anti_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> Operator:
    return freeze(1j * random_hermitian(d, rng, scale))


def random_unitary(d: int, rng: np.random.Generator) -> Operator:
    """Haar-distributed unitary from the QR decomposition of a Gaussian matrix."""
    Q, R = qr(complex_gaussian((d, d), rng))
    diag = np.diag(R)
    return freeze(Q * (diag / np.abs(diag)))


def random_projector(d: int, k: int, rng: np.random.Generator) -> Projector:
    """Projector onto k random orthonormal directions."""
    if not 0 <= k <= d:
        raise ValidationError(f"random projector needs 0 <= k <= d, got d={d}, k={k}")
    Q = random_unitary(d, rng)[:, :k]
    P = Q @ dagger(Q)
    return Projector(freeze((P + dagger(P)) / 2))


def random_density(E: Projector, rng: np.random.Generator) -> DensityOp:
    """Random full-rank state on the range of E, so E ρ E = ρ."""
    if E.rank < 1:
        raise ValidationError("cannot place a state on the range of the zero projector")
    X = complex_gaussian((E.dim, E.dim), rng)
    rho = E.op @ X @ dagger(X) @ E.op
    rho = (rho + dagger(rho)) / 2
    return validate_density(rho / np.real(np.trace(rho)), name="random density")
