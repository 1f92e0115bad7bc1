"""
Config Loader for Kettlewatch
Parses experiment JSON documents into validated ExperimentConfig values.
Every schema or physics failure is reported with the JSON pointer of the
offending field.
"""

import copy
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from continuum import OdeSettings, SeriesSettings
from dynamics import (
    Hamiltonian, ProjectorPath, UnitaryPath, exp_path, identity_path, make_hamiltonian,
    piecewise_path,
)
from operator_core import (
    TOL_TRACE, TOL_UNIT, DensityOp, Projector, ValidationError, as_state, check_dims,
    density_from_state, first_k_projector, frobenius, leading_state,
    operator_from_json, projector_from_state, state_from_json, support_residual,
    validate_density, validate_projector,
)
from random_instances import (
    make_rng, random_anti_hermitian, random_density, random_hermitian, random_projector,
)

SCENARIOS = ("zeno", "anti-zeno", "converge", "residual")

# ‖EρE - ρ‖_F bound required before an anti-Zeno run
SUPPORT_TOL = 1e-12

DEFAULT_N_LIST = (11, 101, 1001)
DEFAULT_RESIDUAL_SAMPLES = 5

TOP_LEVEL_KEYS = {
    "name", "description", "dim", "hamiltonian", "projector", "path", "rho0",
    "t1", "t", "n_list", "ode", "series", "seed", "instances", "residual",
}

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ConfigError(ValidationError):
    """Schema or physics violation located by a JSON pointer."""

    kind = "config"

    def __init__(self, message: str, pointer: str = "", bound: Optional[float] = None,
                 residual: Optional[float] = None):
        super().__init__(f"{pointer or '/'}: {message}", bound=bound, residual=residual)
        self.pointer = pointer


@contextmanager
def located(pointer: str):
    """Re-raise operator validation failures as ConfigError at pointer."""
    try:
        yield
    except ConfigError:
        raise
    except ValidationError as e:
        raise ConfigError(str(e), pointer, bound=e.bound, residual=e.residual) from e


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """One fully validated experiment instance."""

    dim: int
    hamiltonian: Hamiltonian
    projector: Projector
    path: UnitaryPath
    rho0: DensityOp
    psi0: Optional[np.ndarray]
    t1: float
    t: float
    n_list: Tuple[int, ...]
    ode: OdeSettings
    series: SeriesSettings
    seed: int
    residual_samples: int
    residual_delta: Optional[float]
    instances: int
    scenario: Optional[str]
    name: str = ""
    document: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def projector_path(self) -> ProjectorPath:
        return ProjectorPath(self.projector, self.path)

    @property
    def uses_randomness(self) -> bool:
        return any(self.document.get(key, {}).get("type") == "random"
                   for key in ("hamiltonian", "projector", "path", "rho0")
                   if isinstance(self.document.get(key), dict))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Rebuild the same document with another seed (fresh random draws)."""
        return build_config(self.document, scenario=self.scenario, seed=seed)


def parse_overrides(items: Optional[Iterable[str]]) -> Dict[str, Any]:
    """
    Parse --set key=value items; values are JSON when they parse, else strings.

    Raises:
        ConfigError: When an item has no '='
    """
    overrides = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r} must look like key=value", "")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides[key.strip()] = value
    return overrides


def apply_overrides(document: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Return a copy of document with dotted-path overrides applied."""
    doc = copy.deepcopy(document)
    for dotted, value in (overrides or {}).items():
        parts = dotted.split(".")
        node = doc
        for depth, part in enumerate(parts[:-1]):
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                pointer = "/" + "/".join(parts[:depth + 1])
                raise ConfigError(f"cannot override inside a non-object value ({dotted})", pointer)
            node = child
        node[parts[-1]] = value
    return doc


def parse_config(text: str, scenario: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None,
                 seed: Optional[int] = None) -> ExperimentConfig:
    """
    Parse and validate a UTF-8 JSON experiment document.

    Args:
        text: JSON document
        scenario: Scenario the config is meant for; enables scenario checks
        overrides: Dotted-path overrides applied before validation
        seed: Seed replacing the document's seed

    Returns:
        ExperimentConfig: Validated config with defaults filled

    Raises:
        ConfigError: Schema violation or physics-validation failure
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", "")
    if not isinstance(document, dict):
        raise ConfigError("config root must be a JSON object", "")
    return build_config(apply_overrides(document, overrides), scenario=scenario, seed=seed)


def build_config(document: Dict[str, Any], scenario: Optional[str] = None,
                 seed: Optional[int] = None) -> ExperimentConfig:
    """Validate an already decoded document (see parse_config)."""
    if scenario is not None and scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}", "")
    unknown = sorted(set(document) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", f"/{unknown[0]}")

    dim = _integer(_require(document, "dim", ""), "/dim", minimum=1)
    seed = _integer(document.get("seed", 0) if seed is None else seed, "/seed", minimum=0)
    rng = make_rng(seed)

    # random draws happen in this order so a seed replays the whole instance
    H = _hamiltonian(_section(document, "hamiltonian", required=True), dim, rng)
    E = _projector(_section(document, "projector", required=True), dim, rng)
    path = _path(_section(document, "path", default={"type": "identity"}), dim, rng)
    rho0 = _density(_section(document, "rho0", default={"type": "projector"}), dim, E, rng)

    t1 = _number(document.get("t1", 0.0), "/t1")
    t = _number(_require(document, "t", ""), "/t")
    if t <= t1:
        raise ConfigError(f"t must be greater than t1 (t1={t1}, t={t})", "/t")

    n_list = _n_list(document.get("n_list", list(DEFAULT_N_LIST)))
    ode = _ode(_section(document, "ode", default={}))
    series = _series(_section(document, "series", default={}))
    residual = _section(document, "residual", default={})
    samples = _integer(residual.get("samples", DEFAULT_RESIDUAL_SAMPLES), "/residual/samples", minimum=1)
    delta = residual.get("delta")
    if delta is not None:
        delta = _number(delta, "/residual/delta")
        if delta <= 0:
            raise ConfigError("residual delta must be positive", "/residual/delta")
    instances = _integer(document.get("instances", 1), "/instances", minimum=1)

    psi0 = _pure_state(rho0)
    if scenario == "anti-zeno":
        residual_value = support_residual(E.op, rho0.op)
        if residual_value > SUPPORT_TOL:
            raise ConfigError(
                f"initial state must lie on the range of the measured projector: "
                f"‖Eρ0E - ρ0‖_F = {residual_value:.3e} > {SUPPORT_TOL:.0e}",
                "/rho0", bound=SUPPORT_TOL, residual=residual_value,
            )

    name = document.get("name", "")
    if not isinstance(name, str):
        raise ConfigError("name must be a string", "/name")
    return ExperimentConfig(
        dim=dim, hamiltonian=H, projector=E, path=path, rho0=rho0, psi0=psi0,
        t1=t1, t=t, n_list=n_list, ode=ode, series=series, seed=seed,
        residual_samples=samples, residual_delta=delta, instances=instances,
        scenario=scenario, name=name, document=copy.deepcopy(document),
    )


def _require(node: Dict[str, Any], key: str, parent: str) -> Any:
    if key not in node:
        raise ConfigError(f"missing required key {key!r}", f"{parent}/{key}")
    return node[key]


def _section(document: Dict[str, Any], key: str, required: bool = False,
             default: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    if key not in document:
        if required:
            raise ConfigError(f"missing required key {key!r}", f"/{key}")
        return dict(default or {})
    value = document[key]
    if not isinstance(value, dict):
        raise ConfigError(f"{key} must be a JSON object", f"/{key}")
    return value


def _number(value: Any, pointer: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", pointer)
    return float(value)


def _integer(value: Any, pointer: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", pointer)
    if minimum is not None and value < minimum:
        raise ConfigError(f"expected an integer >= {minimum}, got {value}", pointer)
    return value


def _kind(section: Dict[str, Any], pointer: str, allowed: Tuple[str, ...]) -> str:
    kind = _require(section, "type", pointer)
    if kind not in allowed:
        raise ConfigError(f"type must be one of {allowed}, got {kind!r}", f"{pointer}/type")
    return kind


def _matrix(section: Dict[str, Any], key: str, pointer: str, dim: int) -> np.ndarray:
    where = f"{pointer}/{key}"
    with located(where):
        op = operator_from_json(_require(section, key, pointer), name=where)
        check_dims(op, np.eye(dim), names=[where, "dim"])
    return op


def _pauli(axis: Any, pointer: str, dim: int) -> np.ndarray:
    if dim != 2:
        raise ConfigError(f"Pauli operators need dim = 2, got {dim}", pointer)
    if axis not in PAULI:
        raise ConfigError(f"axis must be one of {sorted(PAULI)}, got {axis!r}", f"{pointer}/axis")
    return PAULI[axis]


def _hamiltonian(section: Dict[str, Any], dim: int, rng: np.random.Generator) -> Hamiltonian:
    pointer = "/hamiltonian"
    kind = _kind(section, pointer, ("matrix", "zero", "pauli", "random"))
    scale = _number(section.get("scale", 1.0), f"{pointer}/scale")
    if kind == "matrix":
        op = _matrix(section, "matrix", pointer, dim)
    elif kind == "zero":
        op = np.zeros((dim, dim), dtype=complex)
    elif kind == "pauli":
        op = scale * _pauli(section.get("axis", "x"), pointer, dim)
    else:
        op = random_hermitian(dim, rng, scale)
    with located(pointer):
        return make_hamiltonian(op)


def _projector(section: Dict[str, Any], dim: int, rng: np.random.Generator) -> Projector:
    pointer = "/projector"
    kind = _kind(section, pointer, ("matrix", "first_k", "state", "random"))
    with located(pointer):
        if kind == "matrix":
            return validate_projector(_matrix(section, "matrix", pointer, dim), name=pointer)
        if kind == "state":
            psi = state_from_json(_require(section, "state", pointer), name=f"{pointer}/state")
            check_dims(psi, np.eye(dim), names=[f"{pointer}/state", "dim"])
            return projector_from_state(psi)
        k = _integer(section.get("k", section.get("rank", 1)), f"{pointer}/k", minimum=0)
        if kind == "first_k":
            return first_k_projector(dim, k)
        return random_projector(dim, k, rng)


def _path(section: Dict[str, Any], dim: int, rng: np.random.Generator) -> UnitaryPath:
    pointer = "/path"
    kind = _kind(section, pointer, ("identity", "exp", "piecewise", "rotation", "random"))
    if "U0" in section:
        # U(0) = 1 is part of the path definition; a supplied U0 must agree
        U0 = _matrix(section, "U0", pointer, dim)
        offset = frobenius(U0 - np.eye(dim))
        if offset > TOL_UNIT:
            raise ConfigError(
                f"unitary path must satisfy U(0) = 1; ‖U0 - 1‖_F = {offset:.3e}",
                f"{pointer}/U0", bound=TOL_UNIT, residual=offset,
            )
    with located(pointer):
        if kind == "identity":
            return identity_path(dim)
        if kind == "exp":
            return exp_path(_matrix(section, "G", pointer, dim))
        if kind == "rotation":
            theta = _number(section.get("theta", 1.0), f"{pointer}/theta")
            sigma = _pauli(section.get("axis", "y"), pointer, dim)
            return exp_path(-1j * theta * sigma)
        if kind == "random":
            scale = _number(section.get("scale", 1.0), f"{pointer}/scale")
            return exp_path(random_anti_hermitian(dim, rng, scale))
        pieces = _require(section, "pieces", pointer)
        if not isinstance(pieces, list) or not pieces:
            raise ConfigError("pieces must be a non-empty list", f"{pointer}/pieces")
        built: List[Tuple[float, np.ndarray]] = []
        for j, piece in enumerate(pieces):
            where = f"{pointer}/pieces/{j}"
            if not isinstance(piece, dict):
                raise ConfigError("each piece must be an object", where)
            if j == len(pieces) - 1 and piece.get("t_end") is None:
                t_end = math.inf
            else:
                t_end = _number(_require(piece, "t_end", where), f"{where}/t_end")
            built.append((t_end, _matrix(piece, "G", where, dim)))
        return piecewise_path(built)


def _density(section: Dict[str, Any], dim: int, E: Projector, rng: np.random.Generator) -> DensityOp:
    pointer = "/rho0"
    kind = _kind(section, pointer, ("pure", "matrix", "projector", "random"))
    with located(pointer):
        if kind == "pure":
            psi = state_from_json(_require(section, "state", pointer), name=f"{pointer}/state")
            check_dims(psi, np.eye(dim), names=[f"{pointer}/state", "dim"])
            return density_from_state(as_state(psi, f"{pointer}/state", TOL_TRACE))
        if kind == "matrix":
            return validate_density(_matrix(section, "matrix", pointer, dim), name=pointer)
        if kind == "projector":
            if E.rank < 1:
                raise ValidationError("cannot normalize the zero projector into a state")
            return validate_density(E.op / E.rank, name=pointer)
        return random_density(E, rng)


def _pure_state(rho: DensityOp) -> Optional[np.ndarray]:
    """Unit vector ψ with ρ = |ψ⟩⟨ψ|, or None for a mixed state."""
    purity = float(np.real(np.trace(rho.op @ rho.op)))
    if abs(purity - 1.0) > 1e-10:
        return None
    return leading_state(Projector(rho.op))


def _n_list(value: Any) -> Tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("n_list must be a non-empty list of integers", "/n_list")
    ns = [_integer(n, f"/n_list/{i}", minimum=1) for i, n in enumerate(value)]
    return tuple(sorted(set(ns)))


def _ode(section: Dict[str, Any]) -> OdeSettings:
    step = section.get("step")
    if step is not None:
        step = _number(step, "/ode/step")
    method = section.get("method", "rk4_fixed")
    with located("/ode"):
        return OdeSettings(step=step, method=method)


def _series(section: Dict[str, Any]) -> SeriesSettings:
    order = _integer(section.get("order", 3), "/series/order")
    points = _integer(section.get("points", 16), "/series/points")
    with located("/series"):
        return SeriesSettings(order=order, points=points)
