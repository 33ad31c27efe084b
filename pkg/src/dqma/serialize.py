"""JSON formats for states, strategies, networks, configs and reports.

Every document carries ``schemaVersion``. Reports are written with sorted
keys, camelCase names and floats at 12 significant digits, so identical runs
produce identical bytes.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Any

import numpy as np

from .fingerprint import fingerprint_of, make_family
from .linalg import DensityMatrix, PureState
from .path import GlobalState, Honest, ProductStates, RotationAttack
from .tree import Network
from .tree_protocol import PathRotation

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid JSON document; the message names the line or field at fault."""


def loads(text: str, what: str = "config") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(w[:1].upper() + w[1:] for w in rest)


def normalize(obj: Any) -> Any:
    """Plain JSON data with camelCase keys and floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {(_camel(k) if isinstance(k, str) else str(k)): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        obj = float(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.12g}")
    return obj


def dumps_report(kind: str, payload: dict) -> str:
    doc = {"schemaVersion": SCHEMA_VERSION, "kind": kind, "report": normalize(payload)}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def loads_report(text: str, kind: str | None = None) -> dict:
    doc = loads(text, "report")
    if not isinstance(doc, dict) or doc.get("schemaVersion") != SCHEMA_VERSION:
        raise ConfigError(f"report: field 'schemaVersion' must be {SCHEMA_VERSION}")
    if kind is not None and doc.get("kind") != kind:
        raise ConfigError(f"report: field 'kind' must be {kind!r}, got {doc.get('kind')!r}")
    if not isinstance(doc.get("report"), dict):
        raise ConfigError("report: field 'report' must be an object")
    return doc


# -- field helpers -----------------------------------------------------------

def field(doc: dict, name: str, kind, where: str = "config", default=...):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    if name not in doc:
        if default is ...:
            raise ConfigError(f"{where}: missing field '{name}'")
        return default
    value = doc[name]
    if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise ConfigError(f"{where}: field '{name}' must be an integer")
    if kind is float and (not isinstance(value, (int, float)) or isinstance(value, bool)):
        raise ConfigError(f"{where}: field '{name}' must be a number")
    if kind in (str, list, dict, bool) and not isinstance(value, kind):
        raise ConfigError(f"{where}: field '{name}' must be of type {kind.__name__}")
    return value


def _complex_vector(data, where: str) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: amplitudes must be numbers or [re, im] pairs") from None
    if arr.ndim == 2 and arr.shape[-1] == 2:
        return arr[:, 0] + 1j * arr[:, 1]
    if arr.ndim == 1:
        return arr.astype(complex)
    raise ConfigError(f"{where}: amplitudes must be a list of numbers or [re, im] pairs")


def _complex_matrix(data, where: str) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: matrix entries must be numbers or [re, im] pairs") from None
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ConfigError(f"{where}: matrix must be square, with numbers or [re, im] pairs")


# -- states ------------------------------------------------------------------

def state_from_json(doc: dict, where: str = "state"):
    kind = field(doc, "kind", str, where)
    try:
        if kind == "pure":
            return PureState(_complex_vector(field(doc, "amplitudes", list, where), where))
        if kind == "density":
            return DensityMatrix(_complex_matrix(field(doc, "matrix", list, where), where))
        if kind == "basis":
            return PureState.basis(field(doc, "dim", int, where), field(doc, "index", int, where))
        if kind == "fingerprint":
            x = field(doc, "input", str, where)
            return fingerprint_of(make_family(len(x)), x).state
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None
    raise ConfigError(f"{where}: field 'kind' must be pure, density, basis or fingerprint")


def _pairs(v: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in v]


def state_to_json(state) -> dict:
    if isinstance(state, PureState):
        return {"schemaVersion": SCHEMA_VERSION, "kind": "pure", "amplitudes": _pairs(state.amplitudes)}
    if isinstance(state, DensityMatrix):
        return {"schemaVersion": SCHEMA_VERSION, "kind": "density",
                "matrix": [_pairs(row) for row in state.matrix]}
    raise TypeError(f"cannot serialize {type(state).__name__}")


# -- strategies --------------------------------------------------------------

def strategy_from_json(doc, where: str = "strategy"):
    if isinstance(doc, str):
        doc = {"type": doc}
    kind = field(doc, "type", str, where)
    if kind == "honest":
        return Honest()
    if kind == "rotation":
        return RotationAttack()
    if kind == "path-rotation":
        leaf = field(doc, "leaf", int, where, None)
        return PathRotation(leaf)
    if kind == "product":
        states = field(doc, "states", list, where)
        return ProductStates(tuple(state_from_json(s, f"{where}.states[{i}]") for i, s in enumerate(states)))
    if kind == "global":
        return GlobalState(state_from_json(field(doc, "state", dict, where), f"{where}.state"),
                           field(doc, "spansRepetitions", bool, where, False))
    raise ConfigError(f"{where}: field 'type' must be honest, rotation, path-rotation, product or global")


def strategy_to_json(strategy) -> dict:
    if isinstance(strategy, Honest):
        return {"type": "honest"}
    if isinstance(strategy, RotationAttack):
        return {"type": "rotation"}
    if isinstance(strategy, PathRotation):
        return {"type": "path-rotation"} if strategy.leaf is None else {
            "type": "path-rotation", "leaf": strategy.leaf}
    if isinstance(strategy, ProductStates):
        return {"type": "product", "states": [state_to_json(s) for s in strategy.states]}
    if isinstance(strategy, GlobalState):
        return {"type": "global", "state": state_to_json(strategy.state),
                "spansRepetitions": strategy.spans_repetitions}
    raise TypeError(f"cannot serialize {type(strategy).__name__}")


# -- networks ----------------------------------------------------------------

def network_from_json(doc: dict, where: str = "network") -> Network:
    nodes = field(doc, "nodes", list, where)
    edges = field(doc, "edges", list, where)
    terminals = field(doc, "terminals", list, where)
    inputs = field(doc, "inputs", dict, where, {})
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) for v in e)):
            raise ConfigError(f"{where}: field 'edges[{i}]' must be a pair of node ids")
    try:
        parsed = {int(k): v for k, v in inputs.items()}
    except ValueError:
        raise ConfigError(f"{where}: field 'inputs' keys must be node ids") from None
    for k, v in parsed.items():
        if not isinstance(v, str) or set(v) - {"0", "1"} or not v:
            raise ConfigError(f"{where}: field 'inputs.{k}' must be a non-empty bit string")
    try:
        return Network(tuple(nodes), tuple(tuple(e) for e in edges), tuple(terminals), parsed)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def network_to_json(net: Network) -> dict:
    return {
        "schemaVersion": SCHEMA_VERSION,
        "nodes": list(net.nodes),
        "edges": [list(e) for e in net.edges],
        "terminals": list(net.terminals),
        "inputs": {str(k): v for k, v in sorted(net.inputs.items())},
    }
