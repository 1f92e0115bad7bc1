"""Tests for dynamics: evolution, unitary paths, Heisenberg projectors and rates."""

import math

import numpy as np
import pytest

from dynamics import (
    BreakpointAmbiguityError, ProjectorPath, combined_unitaries, drag_generator,
    drag_generators, evolve_density, evolve_state, exp_path, heisenberg_projector,
    heisenberg_rate, heisenberg_rates, identity_path, make_hamiltonian, piecewise_path,
)
from operator_core import (
    ValidationError, anti_hermitian_residual, dagger, first_k_projector, frobenius,
    hermitian_residual, mat_exp, unitarity_residual, validate_density,
)
from random_instances import random_anti_hermitian, random_hermitian, random_projector


@pytest.fixture
def random_instance(rng):
    H = make_hamiltonian(random_hermitian(3, rng))
    path = exp_path(random_anti_hermitian(3, rng))
    E = random_projector(3, 1, rng)
    return H, path, E


@pytest.fixture
def kinked(pauli):
    return piecewise_path([(0.5, -1j * pauli["y"]), (math.inf, -1j * pauli["x"])])


class TestEvolution:
    def test_zero_hamiltonian(self, ket0):
        out = evolve_state(make_hamiltonian(np.zeros((2, 2))), 3.7, ket0)
        np.testing.assert_allclose(out, ket0, atol=1e-15)

    def test_eigenstate_phase(self, pauli, ket0):
        t = 0.8
        out = evolve_state(make_hamiltonian(pauli["z"]), t, ket0)
        np.testing.assert_allclose(out, np.exp(-1j * t) * ket0, atol=1e-12)

    def test_sigma_x_quarter_period(self, pauli, ket0, ket1):
        out = evolve_state(make_hamiltonian(pauli["x"]), math.pi / 2, ket0)
        np.testing.assert_allclose(out, -1j * ket1, atol=1e-12)
        np.testing.assert_allclose(out, mat_exp(-1j * math.pi / 2 * pauli["x"]) @ ket0, atol=1e-12)

    def test_norm_preserved(self, rng):
        H = make_hamiltonian(random_hermitian(4, rng))
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        psi /= np.linalg.norm(psi)
        assert abs(np.linalg.norm(evolve_state(H, 2.3, psi)) - 1.0) <= 1e-12

    def test_density_cases(self, pauli, ket0):
        rho0 = validate_density(np.outer(ket0, ket0))
        assert frobenius(evolve_density(make_hamiltonian(np.zeros((2, 2))), 1.0, rho0).op - rho0.op) == 0.0
        mixed = validate_density(np.eye(2) / 2)
        np.testing.assert_allclose(evolve_density(make_hamiltonian(pauli["y"]), 0.7, mixed).op,
                                   np.eye(2) / 2, atol=1e-12)
        flipped = evolve_density(make_hamiltonian(pauli["x"]), math.pi / 2, rho0)
        np.testing.assert_allclose(flipped.op, np.diag([0, 1]), atol=1e-12)

    def test_dimension_mismatch(self, pauli):
        with pytest.raises(ValidationError):
            evolve_state(make_hamiltonian(pauli["x"]), 1.0, np.array([1, 0, 0]))


class TestHeisenbergProjector:
    def test_time_zero_is_base(self, random_instance):
        H, path, E = random_instance
        np.testing.assert_allclose(heisenberg_projector(H, ProjectorPath(E, path), 0.0).op, E.op, atol=1e-14)

    def test_commuting_case(self, pauli):
        ppath = ProjectorPath(first_k_projector(2, 1), identity_path(2))
        H = make_hamiltonian(pauli["z"])
        for t in (0.3, 1.7, 4.0):
            np.testing.assert_allclose(heisenberg_projector(H, ppath, t).op, np.diag([1, 0]), atol=1e-12)

    def test_sigma_x_quarter_period(self, zeno_qubit):
        H, E, path = zeno_qubit
        out = heisenberg_projector(H, ProjectorPath(E, path), math.pi / 2)
        np.testing.assert_allclose(out.op, np.diag([0, 1]), atol=1e-12)

    def test_projector_property_along_path(self, random_instance):
        H, path, E = random_instance
        ppath = ProjectorPath(E, path)
        for t in np.linspace(-1.0, 3.0, 9):
            P = heisenberg_projector(H, ppath, float(t)).op
            assert frobenius(P @ P - P) <= 1e-9

    def test_combined_unitary_is_unitary(self, random_instance):
        H, path, _ = random_instance
        for V in combined_unitaries(H, path, np.linspace(0.0, 5.0, 11)):
            assert unitarity_residual(V) <= 1e-10


class TestHeisenbergRate:
    def test_static_cases_vanish(self, pauli):
        ppath = ProjectorPath(first_k_projector(2, 1), identity_path(2))
        assert frobenius(heisenberg_rate(make_hamiltonian(np.zeros((2, 2))), ppath, 0.4)) == 0.0
        assert frobenius(heisenberg_rate(make_hamiltonian(pauli["z"]), ppath, 0.4)) <= 1e-14

    def test_sigma_x_at_zero_is_sigma_y(self, zeno_qubit, pauli):
        H, E, path = zeno_qubit
        ppath = ProjectorPath(E, path)
        rate = heisenberg_rate(H, ppath, 0.0)
        np.testing.assert_allclose(rate, pauli["y"], atol=1e-12)
        delta = 1e-6
        fd = (heisenberg_projector(H, ppath, delta).op - heisenberg_projector(H, ppath, -delta).op) / (2 * delta)
        np.testing.assert_allclose(rate, fd, atol=1e-8)

    def test_central_difference_order(self, random_instance):
        H, path, E = random_instance
        ppath = ProjectorPath(E, path)
        t = 0.7
        exact = heisenberg_rate(H, ppath, t)
        errors = []
        for delta in (1e-3, 1e-4):
            fd = (heisenberg_projector(H, ppath, t + delta).op
                  - heisenberg_projector(H, ppath, t - delta).op) / (2 * delta)
            errors.append(frobenius(fd - exact))
        assert math.log10(errors[0] / errors[1]) >= 1.9

    def test_rate_is_hermitian(self, random_instance):
        H, path, E = random_instance
        for R in heisenberg_rates(H, ProjectorPath(E, path), np.linspace(0.0, 2.0, 7)):
            assert hermitian_residual(R) <= 1e-10

    def test_breakpoint_needs_side(self, pauli, kinked):
        ppath = ProjectorPath(first_k_projector(2, 1), kinked)
        H = make_hamiltonian(pauli["z"])
        with pytest.raises(BreakpointAmbiguityError):
            heisenberg_rate(H, ppath, 0.5)
        left = heisenberg_rate(H, ppath, 0.5, side="left")
        right = heisenberg_rate(H, ppath, 0.5, side="right")
        assert frobenius(left - right) > 1e-3

    def test_one_sided_limits_match_nearby_rates(self, pauli, kinked):
        ppath = ProjectorPath(first_k_projector(2, 1), kinked)
        H = make_hamiltonian(pauli["z"])
        eps = 1e-9
        np.testing.assert_allclose(heisenberg_rate(H, ppath, 0.5, side="left"),
                                   heisenberg_rate(H, ppath, 0.5 - eps), atol=1e-7)
        np.testing.assert_allclose(heisenberg_rate(H, ppath, 0.5, side="right"),
                                   heisenberg_rate(H, ppath, 0.5 + eps), atol=1e-7)


class TestUnitaryPath:
    def test_identity_at_zero(self, random_instance):
        _, path, _ = random_instance
        np.testing.assert_array_equal(path.unitary(0.0), np.eye(3))

    def test_path_is_continuous_at_breakpoint(self, kinked):
        np.testing.assert_allclose(kinked.unitary(0.5), kinked.unitaries([0.5], piece=1)[0], atol=1e-15)
        np.testing.assert_allclose(kinked.unitary(0.5 + 1e-9), kinked.unitary(0.5), atol=1e-8)

    def test_piecewise_composition(self, pauli, kinked):
        expected = mat_exp(-1j * 0.25 * pauli["x"]) @ mat_exp(-1j * 0.5 * pauli["y"])
        np.testing.assert_allclose(kinked.unitary(0.75), expected, atol=1e-12)
        assert kinked.breakpoints == (0.5,)

    def test_generator_must_be_anti_hermitian(self, pauli):
        with pytest.raises(ValidationError, match="anti-Hermitian"):
            exp_path(pauli["x"])

    def test_piece_ends_must_increase(self, pauli):
        with pytest.raises(ValidationError, match="increasing"):
            piecewise_path([(0.5, -1j * pauli["y"]), (0.2, -1j * pauli["x"]), (math.inf, -1j * pauli["z"])])


class TestDragGenerator:
    def test_trivial_cases(self, pauli, random_instance):
        zero = make_hamiltonian(np.zeros((2, 2)))
        assert frobenius(drag_generator(zero, identity_path(2), 0.3)) == 0.0
        H = make_hamiltonian(pauli["x"])
        np.testing.assert_allclose(drag_generator(H, identity_path(2), 1.1), -1j * pauli["x"])

    def test_constant_generator(self, rng):
        G = random_anti_hermitian(3, rng)
        zero = make_hamiltonian(np.zeros((3, 3)))
        path = exp_path(G)
        for M in drag_generators(zero, path, [0.0, 0.4, 2.5]):
            np.testing.assert_allclose(M, -G, atol=1e-12)

    def test_matches_finite_difference_of_v(self, random_instance):
        H, path, _ = random_instance
        t, delta = 0.9, 1e-5
        V = combined_unitaries(H, path, [t - delta, t, t + delta])
        fd = (dagger(V[2]) - dagger(V[0])) / (2 * delta) @ V[1]
        np.testing.assert_allclose(drag_generator(H, path, t), fd, atol=1e-8)

    def test_anti_hermitian(self, random_instance):
        H, path, _ = random_instance
        for M in drag_generators(H, path, np.linspace(0.0, 3.0, 7)):
            assert anti_hermitian_residual(M) <= 1e-9
