"""
Shared fixtures for the Kettlewatch test suite.
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Same mechanism as main.py
ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / 'src'))
sys.path.insert(0, str(ROOT))

os.environ.setdefault("KETTLEWATCH_LOG", "quiet")

from dynamics import identity_path, make_hamiltonian  # noqa: E402
from operator_core import first_k_projector  # noqa: E402


@pytest.fixture
def pauli():
    return {
        "i": np.eye(2, dtype=complex),
        "x": np.array([[0, 1], [1, 0]], dtype=complex),
        "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "z": np.array([[1, 0], [0, -1]], dtype=complex),
    }


@pytest.fixture
def ket0():
    return np.array([1, 0], dtype=complex)


@pytest.fixture
def ket1():
    return np.array([0, 1], dtype=complex)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def zeno_qubit(pauli):
    """H = σ_x, E = |0⟩⟨0|, U ≡ 1."""
    return make_hamiltonian(pauli["x"]), first_k_projector(2, 1), identity_path(2)


@pytest.fixture
def templates_dir():
    return ROOT / "templates"
