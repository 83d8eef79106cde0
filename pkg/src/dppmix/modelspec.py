"""JSON model files and deterministic JSON output.

A model file looks like::

    {"schema_version": 1,
     "ground": {"n": 3, "labels": ["a", "b", "c"]},
     "beta": 1.0,
     "function": {"type": "graph_cut", "L": [[0, 1, 0], [1, 0, 1], [0, 1, 0]], "b": 1, "c": 1}}

``--model builtin:NAME`` loads one of the files bundled in ``dppmix/models``.
"""
from __future__ import annotations

import json
import math
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .core import DppmixError, GroundSet, ModelError, PointProcess
from .functions import (
    DecomposableFunction,
    FacilityLocation,
    GraphCut,
    LogDetFunction,
    ModularFunction,
    PairTweakFunction,
    concave_from_dict,
    pair_tweak_preset,
)

SCHEMA_VERSION = 1


class SpecError(DppmixError, ValueError):
    """A model file failed to parse or validate; ``line`` is 1-based when known."""

    def __init__(self, message: str, source: str = "<model>", line: int | None = None):
        self.source, self.line, self.message = source, line, message
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


def builtin_names() -> list[str]:
    folder = resources.files("dppmix") / "models"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def _read_source(ref: str) -> tuple[str, str]:
    if ref.startswith("builtin:"):
        name = ref[len("builtin:") :]
        path = resources.files("dppmix") / "models" / f"{name}.json"
        if not path.is_file():
            raise SpecError(f"unknown builtin model {name!r}; available: {', '.join(builtin_names())}", ref)
        return path.read_text(), ref
    try:
        return Path(ref).read_text(), ref
    except OSError as exc:
        raise SpecError(f"cannot read model file: {exc.strerror}", ref) from None


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _get(d: dict, key: str, ctx: str, default=...):
    if key in d:
        return d[key]
    if default is ...:
        raise ModelError(f"{ctx}: missing required field {key!r}")
    return default


def _number(v, name: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelError(f"{name} must be a number, got {type(v).__name__}")
    return float(v)


def function_from_dict(d: dict, n: int):
    kind = _get(d, "type", "function")
    if kind == "modular":
        f = ModularFunction(_get(d, "w", "modular"))
    elif kind == "pair_tweak":
        if "w" in d:
            f = PairTweakFunction(d["w"], _get(d, "k", "pair_tweak", 0), _get(d, "k_prime", "pair_tweak", 1))
        else:
            f = pair_tweak_preset(n, d.get("k", 0), d.get("k_prime", 1))
    elif kind == "facility_location":
        f = FacilityLocation(_get(d, "L", "facility_location"), _number(d.get("lambda", 0.0), "lambda"))
    elif kind == "graph_cut":
        f = GraphCut(
            _get(d, "L", "graph_cut"),
            a=_number(d.get("a", 0.0), "a"),
            b=_number(d.get("b", 1.0), "b"),
            c=_number(d.get("c", 1.0), "c"),
        )
    elif kind == "log_det":
        f = LogDetFunction(_get(d, "L", "log_det"))
    elif kind == "decomposable":
        phi = _get(d, "phi", "decomposable")
        phis = [concave_from_dict(p) for p in phi] if isinstance(phi, list) else concave_from_dict(phi)
        f = DecomposableFunction(n, _get(d, "cover", "decomposable"), phis)
    else:
        raise ModelError(
            f"unknown function type {kind!r}; expected modular, pair_tweak, facility_location, graph_cut, log_det or decomposable"
        )
    if f.n != n:
        raise ModelError(f"function has n = {f.n} but ground.n = {n}")
    return f


def model_from_dict(d: dict) -> PointProcess:
    if not isinstance(d, dict):
        raise ModelError("model must be a JSON object")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ModelError(f"unsupported schema_version {version!r}")
    ground = _get(d, "ground", "model")
    n = _get(ground, "n", "ground")
    if isinstance(n, bool) or not isinstance(n, int):
        raise ModelError("ground.n must be an integer")
    G = GroundSet(n, tuple(ground.get("labels", ())))
    beta = _number(_get(d, "beta", "model"), "beta")
    f = function_from_dict(_get(d, "function", "model"), n)
    return PointProcess(f, beta, G)


_FIELD_RE = re.compile(r"'(\w+)'|\b(beta|lambda|labels|cover|phi|theta|scale|eps0|L|w|k|k_prime|a|b|c|p|q|n)\b")


def load_model(ref: str) -> PointProcess:
    """Parse and validate a model file (or ``builtin:NAME``)."""
    text, source = _read_source(ref)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc.msg} (column {exc.colno})", source, exc.lineno) from None
    try:
        return model_from_dict(d)
    except (ModelError, TypeError, ValueError) as exc:
        line = None
        for m in _FIELD_RE.finditer(str(exc)):
            line = _line_of(text, m.group(1) or m.group(2))
            if line:
                break
        if line is None:
            line = _line_of(text, "function")
        raise SpecError(str(exc), source, line) from None


def model_to_dict(P: PointProcess) -> dict:
    f = P.f
    if isinstance(f, ModularFunction):
        fd = {"type": "modular", "w": f.w.tolist()}
    elif isinstance(f, PairTweakFunction):
        fd = {"type": "pair_tweak", "w": f.w.tolist(), "k": f.k, "k_prime": f.k_prime}
    elif isinstance(f, FacilityLocation):
        fd = {"type": "facility_location", "L": f.L.tolist(), "lambda": f.lam}
    elif isinstance(f, GraphCut):
        fd = {"type": "graph_cut", "L": f.L.tolist(), "a": f.a, "b": f.b, "c": f.c}
    elif isinstance(f, LogDetFunction):
        fd = {"type": "log_det", "L": np.asarray(f.L).tolist()}
    elif isinstance(f, DecomposableFunction):
        fd = {"type": "decomposable", "cover": [sorted(A) for A in f.cover], "phi": [p.to_dict() for p in f.phis]}
    else:
        raise ModelError(f"family {f.family!r} has no model-file form")
    return {
        "schema_version": SCHEMA_VERSION,
        "ground": {"n": P.n, "labels": list(P.ground.labels)},
        "beta": P.beta,
        "function": fd,
    }


# ---------------------------------------------------------------------------
# output


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _encode(obj, indent: int | None, level: int) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return json.dumps(obj.value)
    nl = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{nl}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # short numeric rows stay on one line
        if indent is not None and all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, None, 0) for v in obj) + "]"
        items = [f"{nl}{_encode(v, indent, level + 1)}" for v in obj]
        return "[" + sep.join(items) + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with every float printed to 17 significant digits."""
    return _encode(obj, indent, 0)
