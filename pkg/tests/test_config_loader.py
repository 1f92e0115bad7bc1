"""Tests for config_loader: schema defaults, JSON-pointer errors, overrides and seeds."""

import json
import math

import numpy as np
import pytest

from config_loader import (
    DEFAULT_N_LIST, ConfigError, apply_overrides, parse_config, parse_overrides,
)
from template_manager import TemplateManager

MINIMAL = {
    "dim": 2,
    "hamiltonian": {"type": "pauli", "axis": "x"},
    "projector": {"type": "first_k", "k": 1},
    "t": 1,
}


def parse(document, **kwargs):
    return parse_config(json.dumps(document), **kwargs)


def with_changes(**changes):
    doc = dict(MINIMAL)
    doc.update(changes)
    return doc


class TestDefaults:
    def test_minimal_document(self):
        config = parse(MINIMAL)
        assert config.dim == 2
        assert config.t1 == 0.0 and config.t == 1.0
        assert config.n_list == DEFAULT_N_LIST
        assert config.seed == 0 and config.instances == 1
        assert config.path.is_identity
        assert config.ode.step is None and config.ode.method == "rk4_fixed"
        assert config.series.order == 3 and config.series.points == 16
        assert config.residual_samples == 5 and config.residual_delta is None
        np.testing.assert_array_equal(config.rho0.op, config.projector.op)
        np.testing.assert_allclose(config.psi0, [1, 0])

    def test_n_list_sorted_and_unique(self):
        config = parse(with_changes(n_list=[1000, 10, 100, 10]))
        assert config.n_list == (10, 100, 1000)

    def test_mixed_state_has_no_pure_vector(self):
        config = parse(with_changes(projector={"type": "first_k", "k": 2}))
        assert config.psi0 is None
        np.testing.assert_allclose(config.rho0.op, np.eye(2) / 2)

    def test_complex_entries(self):
        config = parse(with_changes(hamiltonian={"type": "matrix", "matrix": [[0, [0, -1]], [[0, 1], 0]]}))
        np.testing.assert_array_equal(config.hamiltonian.op, [[0, -1j], [1j, 0]])

    def test_piecewise_last_piece_is_open(self):
        config = parse(with_changes(path={"type": "piecewise", "pieces": [
            {"t_end": 0.5, "G": [[0, -1], [1, 0]]},
            {"G": [[0, 1], [-1, 0]]},
        ]}))
        assert config.path.breakpoints == (0.5,)

    def test_bundled_configs_parse(self, templates_dir):
        manager = TemplateManager(str(templates_dir))
        for item in manager.list_templates():
            config = parse_config(manager.get_template(item["id"]))
            assert config.dim == item["dim"]


class TestPointers:
    def test_non_hermitian_hamiltonian(self):
        with pytest.raises(ConfigError) as excinfo:
            parse(with_changes(hamiltonian={"type": "matrix", "matrix": [[0, 1], [0, 0]]}))
        err = excinfo.value
        assert err.pointer == "/hamiltonian"
        assert str(err).startswith("/hamiltonian: ")
        assert err.residual == pytest.approx(math.sqrt(2))
        assert err.kind == "config"

    def test_missing_key(self):
        doc = dict(MINIMAL)
        del doc["t"]
        with pytest.raises(ConfigError) as excinfo:
            parse(doc)
        assert excinfo.value.pointer == "/t"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            parse(with_changes(colour="blue"))
        assert excinfo.value.pointer == "/colour"

    def test_interval_order(self):
        with pytest.raises(ConfigError) as excinfo:
            parse(with_changes(t1=2.0))
        assert excinfo.value.pointer == "/t"

    def test_projector_not_idempotent(self):
        with pytest.raises(ConfigError, match="idempotence") as excinfo:
            parse(with_changes(projector={"type": "matrix", "matrix": [[0, 1], [1, 0]]}))
        assert excinfo.value.pointer == "/projector"

    def test_path_must_start_at_identity(self):
        path = {"type": "rotation", "axis": "y", "U0": [[0, 1], [1, 0]]}
        with pytest.raises(ConfigError, match="U\\(0\\) = 1") as excinfo:
            parse(with_changes(path=path))
        assert excinfo.value.pointer == "/path/U0"

    def test_identity_u0_accepted(self):
        config = parse(with_changes(path={"type": "rotation", "U0": [[1, 0], [0, 1]]}))
        assert not config.path.is_identity

    def test_generator_not_anti_hermitian(self):
        with pytest.raises(ConfigError) as excinfo:
            parse(with_changes(path={"type": "exp", "G": [[0, 1], [1, 0]]}))
        assert excinfo.value.pointer == "/path"

    def test_bad_n_list_entry(self):
        with pytest.raises(ConfigError) as excinfo:
            parse(with_changes(n_list=[10, 0]))
        assert excinfo.value.pointer == "/n_list/1"

    def test_pauli_needs_qubit(self):
        with pytest.raises(ConfigError):
            parse(with_changes(dim=3))

    def test_invalid_json(self):
        with pytest.raises(ConfigError, match="invalid JSON"):
            parse_config("{not json")


class TestAntiZenoSupport:
    def test_state_off_range_rejected(self):
        doc = with_changes(rho0={"type": "pure", "state": [0.6, 0.8]})
        with pytest.raises(ConfigError) as excinfo:
            parse(doc, scenario="anti-zeno")
        assert excinfo.value.pointer == "/rho0"
        assert excinfo.value.bound == 1e-12
        # other scenarios accept it
        assert parse(doc, scenario="converge").psi0 is not None

    def test_state_on_range_accepted(self):
        config = parse(with_changes(rho0={"type": "pure", "state": [1, 0]}), scenario="anti-zeno")
        assert config.scenario == "anti-zeno"


class TestOverrides:
    def test_parse_values(self):
        overrides = parse_overrides(["ode.step=1e-3", "name=run one", "n_list=[10, 100]"])
        assert overrides == {"ode.step": 1e-3, "name": "run one", "n_list": [10, 100]}

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_overrides(["ode.step"])

    def test_dotted_keys_create_sections(self):
        doc = apply_overrides(MINIMAL, {"ode.step": 0.01, "hamiltonian.axis": "z"})
        assert doc["ode"] == {"step": 0.01}
        assert doc["hamiltonian"]["axis"] == "z"
        assert "ode" not in MINIMAL

    def test_cannot_descend_into_scalar(self):
        with pytest.raises(ConfigError) as excinfo:
            apply_overrides(MINIMAL, {"t.value": 1})
        assert excinfo.value.pointer == "/t"

    def test_override_reaches_config(self):
        config = parse_config(json.dumps(MINIMAL), overrides={"ode.step": 0.01})
        assert config.ode.step == 0.01


class TestSeeds:
    RANDOM = {
        "dim": 3,
        "hamiltonian": {"type": "random"},
        "projector": {"type": "random", "k": 2},
        "path": {"type": "random"},
        "rho0": {"type": "random"},
        "t": 1,
        "seed": 5,
    }

    def test_same_seed_same_instance(self):
        a, b = parse(self.RANDOM), parse(self.RANDOM)
        for name in ("hamiltonian", "projector", "rho0"):
            np.testing.assert_array_equal(getattr(a, name).op, getattr(b, name).op)
        assert a.uses_randomness

    def test_seed_argument_wins(self):
        config = parse(self.RANDOM, seed=6)
        assert config.seed == 6
        assert not np.array_equal(config.hamiltonian.op, parse(self.RANDOM).hamiltonian.op)

    def test_random_state_on_projector_range(self):
        config = parse(self.RANDOM, scenario="anti-zeno")
        E, rho = config.projector.op, config.rho0.op
        assert np.linalg.norm(E @ rho @ E - rho) <= 1e-12
        assert config.projector.rank == 2


class TestTolerances:
    def test_hamiltonian_hermiticity_bound(self):
        nearly = [[0, 1], [1 + 5e-11, 0]]
        assert parse(with_changes(hamiltonian={"type": "matrix", "matrix": nearly})).dim == 2
        with pytest.raises(ConfigError) as excinfo:
            parse(with_changes(hamiltonian={"type": "matrix", "matrix": [[0, 1], [1 + 1e-9, 0]]}))
        assert excinfo.value.bound == 1e-10
