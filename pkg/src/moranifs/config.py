"""JSON system declarations (see ``docs/schema.md``)."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .core import Box, ContractionMap, ExplicitPeriodic, Kind, LayerSystem, WeightSequence
from .errors import ConfigError
from .families import make_family

SCHEMA_VERSION = 1


def _sub(pointer: str, exc: ConfigError) -> ConfigError:
    return ConfigError(pointer + exc.pointer, exc.message)


def _vector(doc, pointer, d=None):
    if not isinstance(doc, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in doc):
        raise ConfigError(pointer, "expected an array of numbers")
    if d is not None and len(doc) != d:
        raise ConfigError(pointer, f"expected {d} components, got {len(doc)}")
    return [float(v) for v in doc]


def parse_map(doc, pointer: str, d: int) -> ContractionMap:
    if not isinstance(doc, dict):
        raise ConfigError(pointer, "map must be an object")
    kind = doc.get("kind", "similarity")
    known = {"kind", "ratio", "log_ratio", "diag", "log_diag", "angle", "orthogonal", "translation"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"{pointer}/{sorted(extra)[0]}", "unknown field")
    t = _vector(doc.get("translation", [0.0] * d), f"{pointer}/translation", d)
    try:
        if kind == "similarity":
            ratio = doc.get("ratio")
            if ratio is not None and (isinstance(ratio, bool) or not isinstance(ratio, (int, float))):
                raise ConfigError("/ratio", "ratio must be a number")
            return ContractionMap.similarity(ratio, t, angle=doc.get("angle"),
                                             orthogonal=doc.get("orthogonal"), log_ratio=doc.get("log_ratio"))
        if kind == "diagonal":
            if "log_diag" in doc:
                return ContractionMap.diagonal(translation=t, log_diag=_vector(doc["log_diag"], "/log_diag", d))
            if "diag" not in doc:
                raise ConfigError("/diag", "diag is required")
            return ContractionMap.diagonal(_vector(doc["diag"], "/diag", d), t)
    except ConfigError as exc:
        raise _sub(pointer, exc) from None
    raise ConfigError(f"{pointer}/kind", f"kind must be 'similarity' or 'diagonal', got {kind!r}")


def map_to_json(m: ContractionMap) -> dict:
    if m.kind is Kind.SIMILARITY:
        out = {"kind": "similarity"}
        r = math.exp(float(m.log_scale[0]))
        if r > 0:
            out["ratio"] = r
        else:
            out["log_ratio"] = float(m.log_scale[0])
        if m.has_rotation:
            out["orthogonal"] = m.orthogonal.tolist()
    else:
        out = {"kind": "diagonal", "diag": np.exp(m.log_scale).tolist()}
    out["translation"] = m.translation.tolist()
    return out


def parse_weights(doc, pointer="/weights") -> WeightSequence:
    if not isinstance(doc, dict):
        raise ConfigError(pointer, "weights must be an object")
    kind = doc.get("kind", "uniform")
    if kind == "uniform":
        return WeightSequence.uniform()
    if kind == "ratio_power":
        s = doc.get("s")
        if not isinstance(s, (int, float)) or isinstance(s, bool):
            raise ConfigError(f"{pointer}/s", "s must be a number")
        return WeightSequence.ratio_power(s)
    if kind == "explicit":
        return WeightSequence.explicit(doc.get("prefix", []), doc.get("cycle", []))
    raise ConfigError(f"{pointer}/kind", f"unknown weights kind {kind!r}")


def parse_system(doc) -> LayerSystem:
    if not isinstance(doc, dict):
        raise ConfigError("", "system declaration must be a JSON object")
    ver = doc.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise ConfigError("/schema_version", f"unsupported schema_version {ver!r}")
    provider = doc.get("provider", "family" if "family" in doc else "explicit")
    amb = doc.get("ambient")
    ambient = None
    if amb is not None:
        if not isinstance(amb, dict):
            raise ConfigError("/ambient", "ambient must be an object with lo and hi")
        lo = _vector(amb.get("lo"), "/ambient/lo")
        hi = _vector(amb.get("hi"), "/ambient/hi", len(lo))
        if any(h <= l for l, h in zip(lo, hi)):
            raise ConfigError("/ambient", "ambient box must have hi > lo in every axis")
        ambient = Box(lo, hi)
    if provider == "family":
        fam = doc.get("family")
        if not isinstance(fam, dict) or "name" not in fam:
            raise ConfigError("/family", "family provider needs {name, params}")
        params = fam.get("params", {}) or {}
        if not isinstance(params, dict):
            raise ConfigError("/family/params", "params must be an object")
        prov = make_family(fam["name"], params)
        d = doc.get("dimension", prov.dimension)
        if d != prov.dimension:
            raise ConfigError("/dimension", f"family {fam['name']} has dimension {prov.dimension}")
        ambient = ambient if ambient is not None else prov.ambient()
    elif provider == "explicit":
        d = doc.get("dimension")
        if d not in (1, 2, 3):
            raise ConfigError("/dimension", f"dimension must be 1, 2 or 3, got {d!r}")
        if ambient is None:
            raise ConfigError("/ambient", "explicit systems need an ambient box")

        def layers(key):
            arr = doc.get(key, [])
            if not isinstance(arr, list):
                raise ConfigError(f"/{key}", "expected an array of layers")
            out = []
            for i, lay in enumerate(arr):
                if not isinstance(lay, list) or len(lay) < 2:
                    raise ConfigError(f"/{key}/{i}", "a layer is an array of at least 2 maps")
                out.append([parse_map(m, f"/{key}/{i}/{j}", d) for j, m in enumerate(lay)])
            return out
        prefix, cycle = layers("layers"), layers("cycle")
        if not cycle:
            raise ConfigError("/cycle", "cycle must contain at least one layer")
        prov = ExplicitPeriodic(prefix, cycle)
    else:
        raise ConfigError("/provider", f"provider must be 'explicit' or 'family', got {provider!r}")
    if ambient.dim != d:
        raise ConfigError("/ambient", f"ambient box has dimension {ambient.dim}, expected {d}")
    weights = parse_weights(doc["weights"]) if "weights" in doc else None
    return LayerSystem(d, ambient, prov, weights=weights)


def load_system(path) -> LayerSystem:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_system(doc)


def system_to_json(sys: LayerSystem) -> dict:
    out = {"schema_version": SCHEMA_VERSION}
    out.update(sys.to_json())
    return out


def dumps(doc) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
