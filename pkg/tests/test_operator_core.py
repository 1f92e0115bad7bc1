"""Tests for operator_core: validated operator types and the matrix exponential."""

import math

import numpy as np
import pytest

from operator_core import (
    ValidationError, conjugate, first_k_projector, fidelity, frobenius, leading_state,
    mat_exp, operator_from_json, operator_to_json, projector_from_state, rank,
    support_residual, validate_density, validate_projector, validate_unitary,
)
from random_instances import random_anti_hermitian, random_projector, random_unitary


def taylor_exp(A, terms=30):
    result = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ A / k
        result = result + term
    return result


class TestMatExp:
    def test_zero_matrix_gives_identity(self):
        np.testing.assert_allclose(mat_exp(np.zeros((2, 2))), np.eye(2), atol=1e-15)

    def test_diagonal(self):
        out = mat_exp(np.diag([0.3, -1.2]))
        np.testing.assert_allclose(out, np.diag([math.exp(0.3), math.exp(-1.2)]), rtol=1e-12)

    def test_rotation_matches_taylor(self, pauli):
        A = 1j * (math.pi / 2) * pauli["x"]
        out = mat_exp(A)
        np.testing.assert_allclose(out, 1j * pauli["x"], atol=1e-12)
        np.testing.assert_allclose(out, taylor_exp(A), atol=1e-12)

    def test_inverse_pair(self, rng):
        for _ in range(5):
            A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            A *= 5.0 / frobenius(A)
            assert frobenius(mat_exp(A) @ mat_exp(-A) - np.eye(4)) <= 1e-10

    def test_anti_hermitian_exponent_is_unitary(self, rng):
        G = random_anti_hermitian(5, rng, scale=3.0)
        validate_unitary(mat_exp(G))

    def test_result_is_read_only(self):
        out = mat_exp(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            out[0, 0] = 2.0

    @pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan, 0], [0, 1]])])
    def test_rejects_non_square_or_non_finite(self, bad):
        with pytest.raises(ValidationError):
            mat_exp(bad)


class TestValidateProjector:
    def test_identity_is_full_rank(self):
        E = validate_projector(np.eye(3))
        assert E.rank == 3

    def test_ground_state_projector(self):
        E = validate_projector(np.diag([1.0, 0.0]))
        assert E.rank == 1
        assert E.dim == 2

    def test_sigma_x_fails_idempotence(self, pauli):
        with pytest.raises(ValidationError) as excinfo:
            validate_projector(pauli["x"])
        assert "idempotence" in str(excinfo.value)
        assert excinfo.value.residual == pytest.approx(frobenius(np.eye(2) - pauli["x"]))
        assert excinfo.value.bound == 1e-10

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValidationError, match="Hermiticity"):
            validate_projector(np.array([[1, 1], [0, 0]]))

    def test_complement(self):
        E = first_k_projector(3, 1)
        np.testing.assert_array_equal(E.complement().op, np.diag([0, 1, 1]))

    def test_first_k_bounds(self):
        with pytest.raises(ValidationError):
            first_k_projector(2, 3)


class TestConjugate:
    def test_identity_leaves_projector(self):
        E = first_k_projector(2, 1)
        out = conjugate(E, validate_unitary(np.eye(2)))
        np.testing.assert_allclose(out.op, E.op)

    def test_sigma_x_flips(self, pauli):
        out = conjugate(first_k_projector(2, 1), validate_unitary(pauli["x"]))
        np.testing.assert_allclose(out.op, np.diag([0, 1]))

    def test_random_rank_and_trace_preserved(self, rng):
        for k in (1, 2, 3):
            E = random_projector(5, k, rng)
            U = validate_unitary(random_unitary(5, rng))
            out = conjugate(E, U)
            assert rank(out.op) == k
            assert abs(np.trace(out.op) - np.trace(E.op)) <= 5 * 1e-10
            np.testing.assert_allclose(out.op, U.op @ E.op @ U.dagger, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="dimension mismatch"):
            conjugate(first_k_projector(2, 1), validate_unitary(np.eye(3)))


class TestDensity:
    def test_pure_state(self, ket0):
        rho = validate_density(np.outer(ket0, ket0))
        assert rho.dim == 2

    def test_trace_must_be_one(self):
        with pytest.raises(ValidationError, match="unit trace"):
            validate_density(np.eye(2))

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(ValidationError, match="positive semidefinite"):
            validate_density(np.diag([1.5, -0.5]))

    def test_fidelity_and_support(self, ket0, ket1):
        rho = np.outer(ket0, ket0)
        assert fidelity(rho, ket0) == pytest.approx(1.0)
        assert fidelity(rho, ket1) == pytest.approx(0.0)
        assert support_residual(np.diag([1, 0]), rho) == 0.0
        assert support_residual(np.diag([0, 1]), rho) == pytest.approx(1.0)


class TestStates:
    def test_leading_state_phase_is_fixed(self):
        psi = np.array([0.6j, 0.8])
        vec = leading_state(projector_from_state(psi))
        assert abs(abs(np.vdot(vec, psi)) - 1.0) < 1e-12
        pivot = vec[np.argmax(np.abs(vec))]
        assert abs(pivot.imag) < 1e-14 and pivot.real > 0

    def test_leading_state_needs_rank_one(self):
        with pytest.raises(ValidationError, match="rank-1"):
            leading_state(first_k_projector(3, 2))

    def test_unnormalized_state_rejected(self):
        with pytest.raises(ValidationError, match="unit norm"):
            projector_from_state([1.0, 1.0])


class TestJson:
    def test_pairs_and_reals(self):
        op = operator_from_json([[[0, 0], [0, -1]], [[0, 1], 0]])
        np.testing.assert_array_equal(op, np.array([[0, -1j], [1j, 0]]))

    def test_to_json_layout(self, pauli):
        assert operator_to_json(pauli["y"]) == [[[0.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [0.0, 0.0]]]

    @pytest.mark.parametrize("data", [[[1, 0]], [], [[1, "a"], [0, 1]], [[1, [1, 2, 3]], [0, 1]]])
    def test_malformed(self, data):
        with pytest.raises(ValidationError):
            operator_from_json(data)
