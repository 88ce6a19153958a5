"""Loading pipeline documents from JSON.

The format is strict: unknown keys are rejected so that a typo in a grain
declaration fails loudly instead of being ignored.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema

from .grain import FunctionalDependency, IsoWitness, RelationDecl
from .inference import AGG_FUNCS, Aggregate
from .pipeline import FLAVORS, OPS, LoadError, PipelineDoc, PlanNode, Target, validate
from .typealg import FieldId, TypeMismatch, TypeSig


class ParseError(LoadError):
    pass


class SpecError(LoadError):
    pass


_refs = {"type": "array", "items": {"type": "string", "minLength": 1}}
_fd = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lhs", "rhs"],
    "properties": {"lhs": _refs, "rhs": _refs},
}
_field = {
    "oneOf": [
        {"type": "string", "minLength": 1},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"type": "string", "minLength": 1},
                "type": {"type": "string", "minLength": 1},
                "domain": {"type": "integer", "minimum": 1},
            },
        },
    ]
}
_agg = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "func"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "func": {"enum": list(AGG_FUNCS)},
        "field": {"type": "string", "minLength": 1},
        "type": {"type": "string", "minLength": 1},
    },
}
_params = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "left_key": _refs,
        "right_key": _refs,
        "iso": {"type": "string"},
        "theta": {"type": "string"},
        "predicate": {"type": "string"},
        "keep": _refs,
        "distinct": {"type": "boolean"},
        "field": _field,
        "expr": {"type": "string"},
        "from": {"type": "string", "minLength": 1},
        "to": {"type": "string", "minLength": 1},
        "group_cols": _refs,
        "aggs": {"type": "array", "items": _agg},
    },
}
SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["relations"],
    "properties": {
        "relations": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "schema", "grain"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "schema": {"type": "array", "items": _field},
                    "grain": _refs,
                    "fds": {"type": "array", "items": _fd},
                    "nullable": _refs,
                    "collection": {"type": "string"},
                },
            },
        },
        "isos": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "left", "right"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "left": _refs,
                    "right": _refs,
                    "pairing": {
                        "type": "array",
                        "items": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
        "fds": {"type": "array", "items": _fd},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "op", "inputs"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "op": {"enum": list(OPS)},
                    "inputs": _refs,
                    "params": _params,
                    "join_flavor": {"enum": list(FLAVORS)},
                },
            },
        },
        "target": {
            "type": "object",
            "additionalProperties": False,
            "required": ["node", "grain"],
            "properties": {"node": {"type": "string", "minLength": 1}, "grain": _refs},
        },
    },
}


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "document"


def _field_decl(raw) -> tuple[FieldId, int | None]:
    if isinstance(raw, str):
        return FieldId(raw), None
    return FieldId(raw["name"], raw.get("type", "")), raw.get("domain")


def _resolve(refs, schema: TypeSig, where: str) -> TypeSig:
    out = []
    for ref in refs:
        f = schema.lookup(ref)
        if f is None:
            raise SpecError(f"field {ref!r} is not in schema {schema}", where)
        out.append(f)
    return TypeSig(out)


def _global_field(ref: str, types: dict[str, str]) -> FieldId:
    f = FieldId.parse(ref)
    return FieldId(f.name, types.get(f.name, ""), f.provenance)


def _fd_of(raw, resolve, scope: str) -> FunctionalDependency:
    lhs, rhs = resolve(raw["lhs"]), resolve(raw["rhs"])
    try:
        return FunctionalDependency(lhs, rhs, scope)
    except ValueError as exc:
        raise SpecError(str(exc), scope) from exc


def build_document(data: Any) -> PipelineDoc:
    """Turn parsed JSON into a validated :class:`PipelineDoc`."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SpecError(e.message, _path(e.absolute_path))
    try:
        return _build(data)
    except TypeMismatch as exc:
        raise SpecError(str(exc)) from exc


def _build(data: dict) -> PipelineDoc:
    relations: list[RelationDecl] = []
    types: dict[str, str] = {}
    for i, raw in enumerate(data["relations"]):
        where = f"relations[{i}] ({raw['name']})"
        fields, domains = [], []
        for item in raw["schema"]:
            f, dom = _field_decl(item)
            if types.setdefault(f.name, f.semantic_type) != f.semantic_type:
                raise SpecError(
                    f"field {f.name} has semantic type {f.semantic_type!r}, elsewhere {types[f.name]!r}", where
                )
            if f.provenance is not None or "." in f.name:
                raise SpecError(f"source field {item!r} may not carry provenance", where)
            fields.append(f)
            if dom is not None:
                domains.append((f.name, dom))
        if len({f.name for f in fields}) != len(fields):
            raise SpecError("duplicate field in schema", where)
        schema = TypeSig(fields)
        grain = _resolve(raw["grain"], schema, where + ".grain")
        fds = tuple(
            _fd_of(fd, lambda r, w=where: _resolve(r, schema, w + ".fds"), raw["name"])
            for fd in raw.get("fds", [])
        )
        nullable = frozenset(_resolve(raw.get("nullable", []), schema, where + ".nullable"))
        relations.append(RelationDecl(raw["name"], schema, grain, fds, nullable,
                                      raw.get("collection", ""), tuple(domains)))

    isos = []
    for i, raw in enumerate(data.get("isos", [])):
        where = f"isos[{i}] ({raw['name']})"
        left = TypeSig(_global_field(r, types) for r in raw["left"])
        right = TypeSig(_global_field(r, types) for r in raw["right"])
        pairing = tuple((_global_field(a, types), _global_field(b, types)) for a, b in raw.get("pairing", []))
        if not pairing and len(left) == len(right) == 1:
            pairing = ((left.sorted()[0], right.sorted()[0]),)
        try:
            isos.append(IsoWitness(raw["name"], left, right, pairing))
        except ValueError as exc:
            raise SpecError(str(exc), where) from exc

    global_fds = [
        _fd_of(fd, lambda r: TypeSig(_global_field(x, types) for x in r), "global")
        for fd in data.get("fds", [])
    ]

    nodes = []
    for i, raw in enumerate(data.get("nodes", [])):
        where = f"nodes[{i}] ({raw['id']})"
        params = _node_params(raw["op"], raw.get("params", {}), types, where)
        nodes.append(PlanNode(raw["id"], raw["op"], tuple(raw["inputs"]), params, raw.get("join_flavor")))

    target = None
    if "target" in data:
        t = data["target"]
        target = Target(t["node"], TypeSig(_global_field(r, types) for r in t["grain"]))

    doc = PipelineDoc(relations, nodes, isos, global_fds, target)
    validate(doc)
    return doc


_REQUIRED = {
    "equijoin": ("left_key",),
    "semijoin": ("left_key",),
    "antijoin": ("left_key",),
    "projection": ("keep",),
    "extension": ("field",),
    "rename": ("from", "to"),
    "grouping": ("group_cols",),
}
_ALLOWED = {
    "equijoin": {"left_key", "right_key", "iso"},
    "semijoin": {"left_key", "right_key", "iso"},
    "antijoin": {"left_key", "right_key", "iso"},
    "natural_join": set(),
    "thetajoin": {"theta"},
    "selection": {"predicate"},
    "projection": {"keep", "distinct"},
    "extension": {"field", "expr"},
    "rename": {"from", "to"},
    "grouping": {"group_cols", "aggs"},
    "union": set(),
    "intersection": set(),
    "difference": set(),
}


def _node_params(op: str, raw: dict, types: dict[str, str], where: str) -> dict:
    extra = set(raw) - _ALLOWED[op]
    if extra:
        raise SpecError(f"parameter(s) {sorted(extra)} not accepted by {op}", where + ".params")
    for k in _REQUIRED.get(op, ()):
        if k not in raw:
            raise SpecError(f"{op} requires parameter {k!r}", where + ".params")
    p: dict[str, Any] = {}
    for k, v in raw.items():
        if k in ("left_key", "right_key", "keep", "group_cols"):
            p[k] = TypeSig(_global_field(x, types) for x in v)
        elif k in ("from", "to"):
            p[k] = FieldId.parse(v)
        elif k == "field":
            f, _ = _field_decl(v)
            p[k] = FieldId.parse(f.name, f.semantic_type if not isinstance(v, str) else "")
        elif k == "aggs":
            p[k] = tuple(
                Aggregate(
                    FieldId(a["name"], a.get("type", "")),
                    a["func"],
                    FieldId.parse(a["field"]) if "field" in a else None,
                )
                for a in v
            )
        else:
            p[k] = v
    return p


def parse_document(text: str) -> PipelineDoc:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
    return build_document(data)


def load_document(path: str | Path) -> PipelineDoc:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_document(text)
