"""Project files: JSON schema, parsing, canonical serialization and binary matrices.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested
lists.  The canonical writer prints every innermost row on one line, so
``serialize(parse(text)) == text`` for files it produced itself.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .bratteli import TracialBratteli
from .connection import UnitaryConnection
from .errors import StructuralError
from .semisimple import WeightedCategory

__all__ = [
    "PROJECT_SCHEMA_TAG",
    "PROJECT_SCHEMA",
    "InputError",
    "Project",
    "parse_project",
    "load_project",
    "project_to_dict",
    "serialize",
    "dumps_canonical",
    "complex_matrix_to_json",
    "complex_matrix_from_json",
    "write_matrix_bin",
    "read_matrix_bin",
    "atomic_write",
]

PROJECT_SCHEMA_TAG = "conncalc.project/1"
MATRIX_MAGIC = b"CCMX"
MATRIX_VERSION = 1

_int_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}}
_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_cmatrix = {"type": "array", "items": {"type": "array", "items": _pair}}

PROJECT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "zero_cells", "one_cells"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": PROJECT_SCHEMA_TAG},
        "options": {"type": "object"},
        "zero_cells": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["preperiod", "period", "pf_scalar", "levels", "functors"],
                "additionalProperties": False,
                "properties": {
                    "preperiod": {"type": "integer", "minimum": 0},
                    "period": {"type": "integer", "minimum": 1},
                    "pf_scalar": {"type": "number", "exclusiveMinimum": 0},
                    "levels": {
                        "type": "array",
                        "minItems": 2,
                        "items": {
                            "type": "object",
                            "required": ["labels", "weights"],
                            "additionalProperties": False,
                            "properties": {
                                "labels": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                                "weights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                            },
                        },
                    },
                    "functors": {"type": "array", "items": _int_matrix},
                },
            },
        },
        "one_cells": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["source", "target", "lambdas", "connection"],
                "additionalProperties": False,
                "properties": {
                    "source": {"type": "string"},
                    "target": {"type": "string"},
                    "lambdas": {"type": "array", "items": _int_matrix},
                    "connection": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "required": ["m", "n", "block"],
                                "additionalProperties": False,
                                "properties": {
                                    "m": {"type": "integer", "minimum": 0},
                                    "n": {"type": "integer", "minimum": 0},
                                    "block": _cmatrix,
                                },
                            },
                        },
                    },
                    "meta": {"type": "object"},
                },
            },
        },
    },
}


class InputError(ValueError):
    """The file does not parse, violates the schema or has dangling references."""


@dataclass
class Project:
    zero_cells: dict
    one_cells: dict
    options: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def cell(self, name):
        try:
            return self.one_cells[name]
        except KeyError:
            raise InputError(f"unknown 1-cell {name!r}; known: {sorted(self.one_cells)}") from None

    def tower_name(self, tower):
        for k, v in self.zero_cells.items():
            if v is tower:
                return k
        raise InputError("0-cell is not registered in the project")


# --------------------------------------------------------------------------
# complex matrices
# --------------------------------------------------------------------------


def complex_matrix_to_json(a):
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def complex_matrix_from_json(rows, shape=None):
    if len(rows) == 0:
        return np.zeros((0, 0) if shape is None else shape, dtype=complex)
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InputError("complex matrices must be nested lists of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


def parse_project(data):
    """Build the objects of a decoded project file (dict)."""
    try:
        jsonschema.validate(data, PROJECT_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"schema violation at {where}: {exc.message}") from None
    towers = {}
    try:
        for name, z in data["zero_cells"].items():
            levels = [WeightedCategory(lv["labels"], lv["weights"]) for lv in z["levels"]]
            towers[name] = TracialBratteli(levels, [np.asarray(f, dtype=np.int64) for f in z["functors"]],
                                           z["preperiod"], z["period"], z["pf_scalar"], name=name)
        cells, meta = {}, {}
        for name, c in data["one_cells"].items():
            for side in ("source", "target"):
                if c[side] not in towers:
                    raise InputError(f"1-cell {name!r}: unknown {side} 0-cell {c[side]!r}")
            lambdas = [np.asarray(a, dtype=np.int64).reshape(len(a), -1) if len(a) else
                       np.zeros((0, 0), dtype=np.int64) for a in c["lambdas"]]
            blocks = []
            for level in c["connection"]:
                lv = {}
                for entry in level:
                    key = (entry["m"], entry["n"])
                    if key in lv:
                        raise InputError(f"1-cell {name!r}: duplicate block {key}")
                    lv[key] = complex_matrix_from_json(entry["block"])
                blocks.append(lv)
            cells[name] = UnitaryConnection(towers[c["source"]], towers[c["target"]], lambdas, blocks, name=name)
            if "meta" in c:
                meta[name] = c["meta"]
    except StructuralError as exc:
        raise InputError(str(exc)) from None
    return Project(towers, cells, dict(data.get("options", {})), meta)


def load_project(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_project(data)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _tower_to_dict(b):
    return {
        "preperiod": b.preperiod,
        "period": b.period,
        "pf_scalar": float(b.pf_scalar),
        "levels": [{"labels": list(lv.labels), "weights": [float(w) for w in lv.weights]} for lv in b.levels],
        "functors": [f.adjacency.astype(int).tolist() for f in b.functors],
    }


def _cell_to_dict(c, source, target, meta=None):
    out = {
        "source": source,
        "target": target,
        "lambdas": [a.astype(int).tolist() for a in c.lambdas],
        "connection": [
            [{"m": m, "n": n, "block": complex_matrix_to_json(blk)} for (m, n), blk in sorted(lv.items())]
            for lv in c.w_blocks
        ],
    }
    if meta is not None:
        out["meta"] = meta
    return out


def project_to_dict(project):
    towers = {}
    for name, b in project.zero_cells.items():
        towers[name] = _tower_to_dict(b)
    cells = {}
    for name, c in project.one_cells.items():
        cells[name] = _cell_to_dict(c, project.tower_name(c.source), project.tower_name(c.target),
                                    project.meta.get(name))
    out = {"schema": PROJECT_SCHEMA_TAG}
    if project.options:
        out["options"] = project.options
    out["zero_cells"] = towers
    out["one_cells"] = cells
    return out


def _is_leaf_row(x):
    """Rows of numbers or rows of [re, im] pairs are printed inline."""
    if not isinstance(x, list):
        return False
    return all(not isinstance(e, (list, dict)) for e in x) or \
        all(isinstance(e, list) and all(not isinstance(t, (list, dict)) for t in e) for e in x)


def dumps_canonical(obj, indent=0):
    """JSON text with one line per innermost row; deterministic for a given object."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps_canonical(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if _is_leaf_row(obj):
            return json.dumps(obj, separators=(", ", ": "))
        items = [f"{inner}{dumps_canonical(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, float) and not np.isfinite(obj):
        raise ValueError("non-finite numbers are not representable")
    return json.dumps(obj)


def serialize(project):
    return dumps_canonical(project_to_dict(project)) + "\n"


def atomic_write(path, data, mode="w"):
    """Write to a sibling temporary file and rename it over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    umask = os.umask(0)
    os.umask(umask)
    try:
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, mode + ("b" if isinstance(data, bytes) else ""),
                       **({} if isinstance(data, bytes) else {"encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# binary matrices
# --------------------------------------------------------------------------

# magic, version, components per entry (1 real / 2 complex), rows, cols
_HEADER = struct.Struct("<4sIIQQ")


def matrix_to_bytes(a):
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError("only 2-d matrices can be exported")
    ncomp = 2 if np.iscomplexobj(a) else 1
    body = np.ascontiguousarray(a, dtype="<c16" if ncomp == 2 else "<f8")
    return _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, ncomp, a.shape[0], a.shape[1]) + body.tobytes()


def write_matrix_bin(path, a):
    """Little-endian doubles, row-major (complex entries as ``re, im``) after a 28-byte header."""
    atomic_write(path, matrix_to_bytes(a))


def read_matrix_bin(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise InputError(f"{path}: truncated header")
    magic, version, ncomp, rows, cols = _HEADER.unpack_from(raw)
    if magic != MATRIX_MAGIC or version != MATRIX_VERSION or ncomp not in (1, 2):
        raise InputError(f"{path}: not a matrix file of version {MATRIX_VERSION}")
    count = rows * cols
    dtype = "<c16" if ncomp == 2 else "<f8"
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=_HEADER.size)
    return data.reshape(rows, cols).copy()
