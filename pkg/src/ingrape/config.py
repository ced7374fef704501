"""Run-configuration documents.

A configuration is a JSON object; complex numbers are ``[re, im]`` pairs and
matrices are nested lists of them (plain reals are accepted too).  Validation
happens in two passes: a JSON-Schema pass for structure (unknown keys are
rejected) and a physics pass that builds the model and objective.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any

import jsonschema
import numpy as np

from .landscape import LandscapeConfig
from .linalg import SIGMA_X, SIGMA_Y, SIGMA_Z, check_density, is_hermitian, is_unitary
from .models import (
    ControlledSystem,
    IncoherentChannel,
    ModelError,
    preset_qubit,
    preset_qutrit_forbidden,
    preset_two_qubit,
)
from .objectives import GATES, GateOnChannel, GateOnStates, ObservableMean, StateTransfer
from .optimizer import InitSpec, OptimizerConfig
from .propagator import PWCControls, TimeGrid

SYNTAX_ERROR = "SYNTAX_ERROR"
SCHEMA_INVALID = "SCHEMA_INVALID"
PHYSICS_INVALID = "PHYSICS_INVALID"


class ConfigError(ValueError):
    def __init__(self, code: str, errors: list[tuple[str, str]]):
        self.code = code
        self.errors = errors
        super().__init__("; ".join(f"{code} at {path or '<root>'}: {msg}" for path, msg in errors))


_NUM = {"type": "number"}
_CPLX = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _CPLX}}
_STATE = {"oneOf": [{"type": "string"}, _MATRIX,
                    {"type": "object", "properties": {"basis": {"type": "integer", "minimum": 0}},
                     "required": ["basis"], "additionalProperties": False}]}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "model": {"oneOf": [
        _obj({"type": {"const": "qubit"}, "omega": _NUM, "gamma": _NUM}, ["type", "omega", "gamma"]),
        _obj({"type": {"const": "qutrit_forbidden"}, "E": {"type": "array", "items": _NUM,
                                                           "minItems": 3, "maxItems": 3},
              "v13": _CPLX, "v23": _CPLX, "A1": _NUM, "A2": _NUM},
             ["type", "E", "v13", "v23", "A1", "A2"]),
        _obj({"type": {"const": "two_qubit"}, "omega1": _NUM, "omega2": _NUM, "J": _NUM,
              "gamma1": _NUM, "gamma2": _NUM}, ["type", "omega1", "omega2", "J", "gamma1", "gamma2"]),
        _obj({"type": {"const": "explicit"}, "H0": _MATRIX,
              "V": {"type": "array", "items": _MATRIX},
              "n_controls": {"type": "integer", "minimum": 0},
              "channels": {"type": "array", "items": _obj({
                  "lower": {"type": "integer"}, "upper": {"type": "integer"}, "jump": _MATRIX,
                  "A": _NUM, "control": {"type": "integer"}}, ["A", "control"])}},
             ["type", "H0"]),
    ]},
    "grid": _obj({"T": _NUM, "M": {"type": "integer"}}, ["T", "M"]),
    "objective": {"oneOf": [
        _obj({"type": {"const": "observable_mean"}, "observable": _STATE, "rho0": _STATE,
              "maximize": {"type": "boolean"}}, ["type", "observable", "rho0"]),
        _obj({"type": {"const": "state_transfer"}, "rho0": _STATE, "target": _STATE},
             ["type", "rho0", "target"]),
        _obj({"type": {"const": "gate_on_states"}, "gate": {"oneOf": [{"type": "string"}, _MATRIX]},
              "basis": {"type": "array", "items": _STATE}}, ["type", "gate"]),
        _obj({"type": {"const": "gate_on_channel"}, "gate": {"oneOf": [{"type": "string"}, _MATRIX]}},
             ["type", "gate"]),
    ]},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
    "initial_state": _STATE,
    "controls": _obj({"u": {"type": "array", "items": {"type": "array", "items": _NUM}},
                      "w": {"type": "array", "items": {"type": "array", "items": _NUM}}}, ["u", "w"]),
    "init": _obj({"u_amplitude": _NUM, "w_amplitude": _NUM}),
    "optimizer": _obj({"max_iters": {"type": "integer"}, "grad_tol": _NUM, "f_tol": _NUM,
                       "step_init": _NUM, "backtrack_factor": _NUM, "grow_factor": _NUM,
                       "max_backtracks": {"type": "integer"},
                       "u_bound": {"oneOf": [_NUM, {"type": "null"}]}}),
    "landscape": _obj({"L": {"type": "integer"}, "bins": {"type": "integer"}}, ["L"]),
    "robustness": _obj({"levels": {"type": "array", "items": _NUM}, "samples": {"type": "integer"}}),
    "output": _obj({"directory": {"type": "string"},
                    "formats": {"type": "array", "items": {"enum": ["csv", "json"]}}}),
}, ["model", "grid", "objective"])

DEFAULTS = {
    "seed": 0,
    "initial_state": {"basis": 0},
    "init": {"u_amplitude": 1.0, "w_amplitude": 0.5},
    "optimizer": {"max_iters": 1000, "grad_tol": 1e-8, "f_tol": 1e-12, "step_init": 0.1,
                  "backtrack_factor": 0.5, "grow_factor": 1.5, "max_backtracks": 30, "u_bound": None},
    "robustness": {"levels": [0.0, 0.01, 0.02, 0.05, 0.1], "samples": 20},
    "output": {"directory": "out", "formats": ["csv", "json"]},
}


@dataclass(frozen=True, eq=False)
class RunConfiguration:
    document: dict  # normalized, defaults filled in
    system: ControlledSystem
    grid: TimeGrid
    objective: Any
    init: InitSpec
    optimizer: OptimizerConfig
    landscape: LandscapeConfig | None
    initial_state: np.ndarray
    controls: PWCControls | None

    @property
    def seed(self) -> int:
        return self.document["seed"]

    def serialize(self) -> str:
        return json.dumps(self.document, indent=2, sort_keys=True)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def decode_complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        return complex(x[0], x[1])
    return complex(x)


def decode_matrix(rows, path: str) -> np.ndarray:
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ConfigError(PHYSICS_INVALID, [(path, "matrix must be square")])
    return np.array([[decode_complex(z) for z in r] for r in rows], dtype=complex)


_NAMED_KETS = {
    "0": [1, 0], "1": [0, 1], "+": [1, 1], "-": [1, -1], "+i": [1, 1j], "-i": [1, -1j],
}
_NAMED_OBSERVABLES = {"sx": SIGMA_X, "sy": SIGMA_Y, "sz": SIGMA_Z}


def decode_state(spec, dim: int, path: str) -> np.ndarray:
    if isinstance(spec, dict):
        k = spec["basis"]
        if k >= dim:
            raise ConfigError(PHYSICS_INVALID, [(path + ".basis", f"index {k} >= dim {dim}")])
        rho = np.zeros((dim, dim), dtype=complex)
        rho[k, k] = 1.0
        return rho
    if isinstance(spec, str):
        if spec == "mixed":
            return np.eye(dim, dtype=complex) / dim
        if spec not in _NAMED_KETS or dim != 2:
            raise ConfigError(PHYSICS_INVALID, [(path, f"unknown state name {spec!r} for dim {dim}")])
        ket = np.array(_NAMED_KETS[spec], dtype=complex)
        ket /= np.linalg.norm(ket)
        return np.outer(ket, ket.conj())
    rho = decode_matrix(spec, path)
    try:
        return check_density(rho)
    except ValueError as exc:
        raise ConfigError(PHYSICS_INVALID, [(path, str(exc))]) from None


def _physics(path: str, message: str) -> ConfigError:
    return ConfigError(PHYSICS_INVALID, [(path, message)])


def load_model(doc: dict) -> ControlledSystem:
    """Build a ControlledSystem from the ``model`` block of a configuration."""
    try:
        jsonschema.validate(doc, SCHEMA["properties"]["model"])
    except jsonschema.ValidationError as exc:
        raise ConfigError(SCHEMA_INVALID, [(_path(["model", *exc.absolute_path]), exc.message)]) from None
    kind = doc["type"]
    try:
        if kind == "qubit":
            return preset_qubit(doc["omega"], doc["gamma"])
        if kind == "qutrit_forbidden":
            e1, e2, e3 = doc["E"]
            return preset_qutrit_forbidden(e1, e2, e3, decode_complex(doc["v13"]),
                                           decode_complex(doc["v23"]), doc["A1"], doc["A2"])
        if kind == "two_qubit":
            return preset_two_qubit(doc["omega1"], doc["omega2"], doc["J"], doc["gamma1"], doc["gamma2"])
        h0 = decode_matrix(doc["H0"], "model.H0")
        dim = h0.shape[0]
        vs = [decode_matrix(v, f"model.V[{k}]") for k, v in enumerate(doc.get("V", []))]
        channels = []
        for i, ch in enumerate(doc.get("channels", [])):
            path = f"model.channels[{i}]"
            if "jump" in ch:
                jump = decode_matrix(ch["jump"], path + ".jump")
                channels.append(IncoherentChannel(jump, ch["A"], ch["control"]))
            elif "lower" in ch and "upper" in ch:
                try:
                    channels.append(IncoherentChannel.transition(dim, ch["lower"], ch["upper"],
                                                                 ch["A"], ch["control"]))
                except ModelError as exc:
                    raise _physics(path, str(exc)) from None
            else:
                raise ConfigError(SCHEMA_INVALID, [(path, "channel needs 'jump' or 'lower'/'upper'")])
        return ControlledSystem(h0, tuple(vs), tuple(channels), doc.get("n_controls", 0))
    except ModelError as exc:
        path = f"model.{exc.path}" if exc.path else "model"
        message = str(exc).split(": ", 1)[-1] if exc.path else str(exc)
        raise ConfigError(PHYSICS_INVALID, [(path, message)]) from None


def _decode_gate(spec, path: str) -> np.ndarray:
    if isinstance(spec, str):
        if spec.lower() not in GATES:
            raise _physics(path, f"unknown gate {spec!r}")
        return GATES[spec.lower()].copy()
    u = decode_matrix(spec, path)
    if not is_unitary(u, 1e-10):
        raise _physics(path, "gate not unitary")
    return u


def load_objective(doc: dict, dim: int):
    kind = doc["type"]
    if kind == "observable_mean":
        spec = doc["observable"]
        if isinstance(spec, str) and spec in _NAMED_OBSERVABLES and dim == 2:
            o = _NAMED_OBSERVABLES[spec]
        elif isinstance(spec, dict):
            o = decode_state(spec, dim, "objective.observable")
        elif isinstance(spec, list):
            o = decode_matrix(spec, "objective.observable")
            if not is_hermitian(o):
                raise _physics("objective.observable", "observable not Hermitian")
        else:
            raise _physics("objective.observable", f"unknown observable {spec!r}")
        return ObservableMean(o, decode_state(doc["rho0"], dim, "objective.rho0"),
                              doc.get("maximize", False))
    if kind == "state_transfer":
        return StateTransfer(decode_state(doc["rho0"], dim, "objective.rho0"),
                             decode_state(doc["target"], dim, "objective.target"))
    u = _decode_gate(doc["gate"], "objective.gate")
    if u.shape[0] != dim:
        raise _physics("objective.gate", f"gate dim {u.shape[0]} differs from model dim {dim}")
    if kind == "gate_on_channel":
        return GateOnChannel(u)
    basis = tuple(decode_state(b, dim, f"objective.basis[{i}]") for i, b in enumerate(doc.get("basis", [])))
    if not basis and dim not in (2, 4):
        raise _physics("objective.basis", f"no default basis for dim {dim}; list the states")
    return GateOnStates(u, basis)


def _check_positive(doc: dict) -> list[tuple[str, str]]:
    errs = []
    g = doc["grid"]
    if not g["T"] > 0:
        errs.append(("grid.T", "must be positive"))
    if g["M"] < 1:
        errs.append(("grid.M", "must be >= 1"))
    for key in ("u_amplitude", "w_amplitude"):
        if not doc["init"][key] > 0:
            errs.append((f"init.{key}", "must be positive"))
    opt = doc["optimizer"]
    for key in ("grad_tol", "f_tol", "step_init"):
        if not opt[key] > 0:
            errs.append((f"optimizer.{key}", "must be positive"))
    if not 0 < opt["backtrack_factor"] < 1:
        errs.append(("optimizer.backtrack_factor", "must lie in (0, 1)"))
    if not opt["grow_factor"] > 1:
        errs.append(("optimizer.grow_factor", "must exceed 1"))
    if opt["max_iters"] < 0 or opt["max_backtracks"] < 1:
        errs.append(("optimizer", "iteration limits must be positive"))
    if opt["u_bound"] is not None and not opt["u_bound"] > 0:
        errs.append(("optimizer.u_bound", "must be positive"))
    if "landscape" in doc:
        if doc["landscape"]["L"] < 1:
            errs.append(("landscape.L", "must be >= 1"))
        if doc["landscape"]["bins"] < 1:
            errs.append(("landscape.bins", "must be >= 1"))
    rob = doc["robustness"]
    if any(x < 0 for x in rob["levels"]):
        errs.append(("robustness.levels", "must be nonnegative"))
    if rob["samples"] < 1:
        errs.append(("robustness.samples", "must be >= 1"))
    return errs


def normalize(doc: dict) -> dict:
    out = copy.deepcopy(doc)
    for key, default in DEFAULTS.items():
        if isinstance(default, dict) and key != "initial_state":
            out[key] = {**default, **out.get(key, {})}
        else:
            out.setdefault(key, default)
    if "landscape" in out:
        out["landscape"] = {"bins": 20, **out["landscape"]}
    return out


def build(doc: dict) -> RunConfiguration:
    """Validate a decoded JSON document and build all runtime objects."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError(SCHEMA_INVALID, [(_error_path(e), _describe(e)) for e in errors])
    doc = normalize(doc)
    errs = _check_positive(doc)
    if errs:
        raise ConfigError(PHYSICS_INVALID, errs)
    system = load_model(doc["model"])
    grid = TimeGrid(doc["grid"]["T"], doc["grid"]["M"])
    objective = load_objective(doc["objective"], system.dim)
    init = InitSpec(doc["init"]["u_amplitude"], doc["init"]["w_amplitude"], doc["seed"])
    opt = OptimizerConfig(**doc["optimizer"])
    landscape = None
    if "landscape" in doc:
        landscape = LandscapeConfig(doc["landscape"]["L"], doc["seed"], init, opt, doc["landscape"]["bins"])
    rho0 = decode_state(doc["initial_state"], system.dim, "initial_state")
    controls = None
    if "controls" in doc:
        u = np.array(doc["controls"]["u"], dtype=float)
        w = np.array(doc["controls"]["w"], dtype=float)
        if u.shape != (grid.M, system.n_coherent) or w.shape != (grid.M, system.n_controls):
            raise _physics("controls", f"expected shapes ({grid.M}, {system.n_coherent}) and "
                           f"({grid.M}, {system.n_controls})")
        controls = PWCControls(grid, u, w)
    return RunConfiguration(doc, system, grid, objective, init, opt, landscape, rho0, controls)


def _error_path(err: jsonschema.ValidationError) -> str:
    parts = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        # point at the first unexpected key rather than its parent
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        if extra:
            parts.append(extra[0])
    return _path(parts)


def _describe(err: jsonschema.ValidationError) -> str:
    if err.validator == "additionalProperties":
        return err.message
    if err.validator == "oneOf" and err.context:
        # report the closest branch, i.e. the one whose errors go deepest
        best = jsonschema.exceptions.best_match(err.context)
        return f"{best.message} (at {_path(err.absolute_path) or '<root>'})"
    return err.message


def parse_config(text: str) -> RunConfiguration:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(SYNTAX_ERROR, [("", f"line {exc.lineno} column {exc.colno}: {exc.msg}")]) from None
    if not isinstance(doc, dict):
        raise ConfigError(SCHEMA_INVALID, [("", "configuration must be a JSON object")])
    return build(doc)
