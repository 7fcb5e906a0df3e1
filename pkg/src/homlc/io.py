"""JSON and CSV persistence.

Floats are written with 17 significant digits so every double survives a
round trip exactly. Inputs are checked against JSON schemas; failures carry
a JSON pointer to the offending element.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .errors import HomLCError, InputError, InvariantError, ParseError
from .evaluation import Model, Truth
from .geometry import body_from_dict
from .projection import PiecewiseLinearConcave
from .sampling import FAMILIES, GeneratorFamily

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}

BODY_SCHEMA = {
    "$defs": {
        "body": {
            "type": "object",
            "required": ["kind", "p"],
            "properties": {
                "kind": {"enum": ["ball", "box", "linear_image", "point_hull"]},
                "p": {"type": "integer", "minimum": 1},
            },
            "allOf": [
                {"if": {"properties": {"kind": {"const": "ball"}}},
                 "then": {"required": ["radius"], "properties": {"radius": {"type": "number", "exclusiveMinimum": 0}}}},
                {"if": {"properties": {"kind": {"const": "box"}}},
                 "then": {"required": ["halfwidths"], "properties": {"halfwidths": _VEC}}},
                {"if": {"properties": {"kind": {"const": "linear_image"}}},
                 "then": {"required": ["matrix", "base"],
                          "properties": {"matrix": {"type": "array", "items": _VEC, "minItems": 1},
                                         "base": {"$ref": "#/$defs/body"}}}},
                {"if": {"properties": {"kind": {"const": "point_hull"}}},
                 "then": {"required": ["vertices"],
                          "properties": {"vertices": {"type": "array", "items": _VEC, "minItems": 1}}}},
            ],
        }
    },
    "$ref": "#/$defs/body",
}

GENERATOR_SCHEMA = {
    "type": "object",
    "required": ["breakpoints", "values"],
    "properties": {"breakpoints": _VEC, "values": _VEC},
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["p", "mu", "body", "log_volume", "generator"],
    "properties": {
        "p": {"type": "integer", "minimum": 1},
        "mu": _VEC,
        "body": {"$ref": "#/$defs/body"},
        "log_volume": _NUM,
        "log_volume_se": {"type": "number", "minimum": 0},
        "generator": GENERATOR_SCHEMA,
        "meta": {"type": "object"},
    },
    "$defs": BODY_SCHEMA["$defs"],
}

TRUTH_SCHEMA = {
    "type": "object",
    "required": ["family", "body"],
    "properties": {
        "family": {"enum": [f for f in FAMILIES if f != "knots"]},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "body": {"$ref": "#/$defs/body"},
        "mu": _VEC,
    },
    "$defs": BODY_SCHEMA["$defs"],
}


def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else ""


def validate(doc, schema, error=ParseError):
    """Raise ``error`` with a JSON pointer for the first schema violation."""
    v = jsonschema.Draft202012Validator(schema)
    errs = sorted(v.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if errs:
        e = jsonschema.exceptions.best_match(errs)
        raise error(e.message, _pointer(e.absolute_path))
    return doc


def _reject_constant(name):
    raise ParseError(f"non-finite number {name} is not allowed")


def read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON in {path}: {e.msg} (line {e.lineno})") from e


def _fmt_float(x):
    if not math.isfinite(x):
        raise InputError(f"cannot serialise non-finite value {x!r} to JSON")
    s = "%.17g" % x
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent=0, _level=0):
    """JSON text with floats at 17 significant digits."""
    pad = "\n" + " " * (indent * (_level + 1)) if indent else ""
    end = "\n" + " " * (indent * _level) if indent else ""
    sep = "," + pad if indent else ", "
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (json.dumps(str(k)) + ": " + dumps(v, indent, _level + 1) for k, v in obj.items())
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not len(seq):
            return "[]"
        scalar = all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in seq)
        if scalar:
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        return "[" + pad + sep.join(dumps(v, indent, _level + 1) for v in seq) + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(obj)


def write_json(path, obj):
    Path(path).write_text(dumps(obj, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def model_to_dict(model: Model) -> dict:
    d = {
        "p": int(model.p),
        "mu": model.mu.tolist(),
        "body": model.body.to_dict(),
        "log_volume": float(model.log_volume),
        "log_volume_se": float(model.log_volume_se),
        "generator": {"breakpoints": model.generator.breakpoints.tolist(),
                      "values": model.generator.values.tolist()},
        "meta": dict(model.meta),
    }
    return d


def model_from_dict(d: dict) -> Model:
    validate(d, MODEL_SCHEMA)
    p = d["p"]
    if len(d["mu"]) != p:
        raise InvariantError(f"mu has length {len(d['mu'])}, expected {p}", "/mu")
    if d["body"]["p"] != p:
        raise InvariantError("body dimension differs from model dimension", "/body/p")
    r = np.asarray(d["generator"]["breakpoints"], dtype=float)
    v = np.asarray(d["generator"]["values"], dtype=float)
    if r.size != v.size:
        raise InvariantError("breakpoints and values differ in length", "/generator/values")
    if r[0] < 0:
        raise InvariantError("breakpoints must be non-negative", "/generator/breakpoints/0")
    bad = np.nonzero(np.diff(r) <= 0)[0]
    if bad.size:
        i = int(bad[0]) + 1
        raise InvariantError(f"breakpoints must be strictly increasing at index {i}",
                             f"/generator/breakpoints/{i}")
    gen = PiecewiseLinearConcave(r, v, p, float(d["log_volume"]))
    try:
        gen.check_shape()
    except InvariantError as e:
        raise InvariantError(e.message, "/generator" + e.pointer) from None
    try:
        body = body_from_dict(d["body"])
    except HomLCError as e:
        raise type(e)(f"invalid body: {e}") from None
    model = Model(body, np.asarray(d["mu"], dtype=float), gen, float(d["log_volume"]),
                  float(d.get("log_volume_se", 0.0)), dict(d.get("meta", {})))
    model.check()
    return model


def save_model(model: Model, path):
    write_json(path, model_to_dict(model))


def load_model(path) -> Model:
    return model_from_dict(read_json(path))


def truth_from_dict(d: dict) -> Truth:
    validate(d, TRUTH_SCHEMA)
    body = body_from_dict(d["body"])
    fam = d["family"]
    if fam == "unif":
        family = GeneratorFamily.unif(d.get("radius", float(body.p)))
    else:
        family = GeneratorFamily(fam)
    mu = np.asarray(d.get("mu", np.zeros(body.p)), dtype=float)
    if mu.size != body.p:
        raise InvariantError(f"mu has length {mu.size}, expected {body.p}", "/mu")
    return Truth(family, body, mu)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _parse_float(s):
    x = float(s)
    if not math.isfinite(x):
        raise ValueError("non-finite")
    return x


def read_matrix(path, expected_cols=None):
    """Numeric CSV with an optional single header row; NaN and inf are rejected."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    except UnicodeDecodeError as e:
        raise ParseError(f"{path} is not valid UTF-8") from e
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise ParseError(f"{path} contains no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}", f"/{i}")
        for j, c in enumerate(row):
            try:
                out[i, j] = _parse_float(c.strip())
            except ValueError:
                raise ParseError(f"{path}: row {i + 1}, column {j + 1}: {c!r} is not a finite number",
                                 f"/{i}/{j}") from None
    if expected_cols is not None and width != expected_cols:
        raise ParseError(f"{path} has {width} columns, expected {expected_cols}")
    return out


def format_cell(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return ""
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(x)


def write_csv(path, header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for r in rows:
        w.writerow([format_cell(c) for c in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
