"""Nested-loop evaluation of plan nodes over concrete tables.

This module works out result layouts on its own instead of reusing the
inference code, so that comparing the two is a genuine cross-check.
"""

from __future__ import annotations

from typing import Mapping

from ..expr import eval_expr, eval_predicate, parse_expr, parse_predicate
from ..grain import IsoWitness
from ..pipeline import PipelineDoc, PlanNode, topo_order
from ..typealg import FieldId, TypeSig
from .instances import Row, SchemaMismatch, Table, Value, _hash


class UnsupportedOp(ValueError):
    pass


def _sig(value) -> TypeSig:
    return value if isinstance(value, TypeSig) else TypeSig.of(*value)


def _field(value) -> FieldId:
    return value if isinstance(value, FieldId) else FieldId.parse(value)


def _find(t: Table, f: FieldId) -> FieldId:
    for c in t.schema.fields:
        if c == f:
            return c
    raise SchemaMismatch(f"{f} not in {t.schema}")


def key_pairs(node: PlanNode, left: Table, right: Table, isos: Mapping[str, IsoWitness]) -> list[tuple[FieldId, FieldId]]:
    """Matched (left field, right field) pairs for an equality join."""
    if node.op == "natural_join":
        common = left.schema & right.schema
        if not common:
            raise SchemaMismatch("natural join without common fields")
        return [(_find(left, f), _find(right, f)) for f in common.sorted()]
    lk = _sig(node.params["left_key"])
    rk = _sig(node.params.get("right_key") or lk)
    name = node.params.get("iso")
    if name is None:
        if lk != rk:
            raise SchemaMismatch("keys differ without an iso")
        return [(_find(left, f), _find(right, f)) for f in lk.sorted()]
    iso = isos[name]
    if not iso.pairing:
        raise UnsupportedOp(f"iso {name} has no field pairing to evaluate")
    pairs = []
    for a, b in iso.pairing:
        l, r = (a, b) if a in lk else (b, a)
        pairs.append((_find(left, l), _find(right, r)))
    return pairs


def _tagged(f: FieldId, side: str) -> FieldId:
    prov = f"{side}.{f.provenance}" if f.provenance else side
    return FieldId(f.name, f.semantic_type, prov)


def _match(l: Row, r: Row, pairs) -> bool:
    for a, b in pairs:
        if l[a] is None or r[b] is None or l[a] != r[b]:
            return False
    return True


def _equi_join(node: PlanNode, left: Table, right: Table, isos) -> Table:
    pairs = key_pairs(node, left, right, isos)
    lkeys = {a for a, _ in pairs}
    rkeys = {b for _, b in pairs}
    r_of = {b: a for a, b in pairs}
    rrest = [c for c in right.columns() if c not in rkeys]
    allleft = {c.key for c in left.columns()}
    rnames = {c.key for c in rrest}
    lout = {c: (_tagged(c, "lhs") if c.key in rnames and c not in lkeys else c) for c in left.columns()}
    rout = {c: (_tagged(c, "rhs") if c.key in allleft else c) for c in rrest}
    schema = TypeSig([*lout.values(), *rout.values()])
    rows: list[Row] = []
    flavor = node.flavor
    matched_r: set[int] = set()
    for l in left.rows:
        hit = False
        for j, r in enumerate(right.rows):
            if _match(l, r, pairs):
                hit = True
                matched_r.add(j)
                row = {lout[c]: l[c] for c in left.columns()}
                row.update({rout[c]: r[c] for c in rrest})
                rows.append(row)
        if not hit and flavor in ("left", "full"):
            row = {lout[c]: l[c] for c in left.columns()}
            row.update({rout[c]: None for c in rrest})
            rows.append(row)
    if flavor in ("right", "full"):
        for j, r in enumerate(right.rows):
            if j in matched_r:
                continue
            row = {lout[c]: None for c in left.columns()}
            for b, a in r_of.items():
                row[lout[a]] = r[b]
            row.update({rout[c]: r[c] for c in rrest})
            rows.append(row)
    return Table(schema, rows)


def _theta_join(node: PlanNode, left: Table, right: Table) -> Table:
    shared = left.schema & right.schema
    lout = {c: (_tagged(c, "lhs") if c in shared else c) for c in left.columns()}
    rout = {c: (_tagged(c, "rhs") if c in shared else c) for c in right.columns()}
    schema = TypeSig([*lout.values(), *rout.values()])
    pred = _predicate(node.params.get("theta", ""), schema)
    rows = []
    for l in left.rows:
        for r in right.rows:
            row = {lout[c]: l[c] for c in left.columns()}
            row.update({rout[c]: r[c] for c in right.columns()})
            if eval_predicate(pred, row):
                rows.append(row)
    return Table(schema, rows)


def _predicate(text: str, schema: TypeSig):
    try:
        pred = parse_predicate(text)
    except ValueError as exc:
        raise UnsupportedOp(str(exc)) from exc
    for c in pred:
        for t in (c.left, c.right):
            if isinstance(t.value, FieldId) and t.value not in schema:
                raise SchemaMismatch(f"predicate field {t.value} not in {schema}")
    return pred


def _distinct(rows: list[Row], cols: list[FieldId]) -> list[Row]:
    seen, out = set(), []
    for r in rows:
        k = tuple(r[c] for c in cols)
        if k not in seen:
            seen.add(k)
            out.append(r)
    return out


def _aggregate(func: str, values: list[Value] | None, n: int) -> Value:
    if values is None:
        return n
    present = [v for v in values if v is not None]
    if func == "COUNT":
        return len(present)
    if func == "COUNT_DISTINCT":
        return len(set(present))
    if not present:
        return None
    if func == "SUM":
        return sum(present)
    if func == "MIN":
        return min(present)
    if func == "MAX":
        return max(present)
    return sum(present) // len(present)


def eval_node(node: PlanNode, inputs: list[Table], isos: Mapping[str, IsoWitness] | None = None) -> Table:
    isos = isos or {}
    op, p = node.op, node.params
    if op in ("equijoin", "natural_join", "thetajoin", "semijoin", "antijoin",
              "union", "intersection", "difference") and len(inputs) != 2:
        raise SchemaMismatch(f"{op} takes two inputs")
    if op in ("equijoin", "natural_join"):
        return _equi_join(node, inputs[0], inputs[1], isos)
    if op == "thetajoin":
        return _theta_join(node, inputs[0], inputs[1])
    if op in ("semijoin", "antijoin"):
        left, right = inputs
        pairs = key_pairs(node, left, right, isos)
        want = op == "semijoin"
        rows = [l for l in left.rows if any(_match(l, r, pairs) for r in right.rows) == want]
        return Table(left.schema, rows)
    if op in ("union", "intersection", "difference"):
        a, b = inputs
        if a.schema != b.schema:
            raise SchemaMismatch(f"{a.schema} vs {b.schema}")
        cols = a.columns()
        keyed = lambda t: {tuple(r[c] for c in cols) for r in t.rows}  # noqa: E731
        inb = keyed(b)
        if op == "union":
            rows = _distinct(a.rows + [{c: r[c] for c in cols} for r in b.rows], cols)
        elif op == "intersection":
            rows = _distinct([r for r in a.rows if tuple(r[c] for c in cols) in inb], cols)
        else:
            rows = _distinct([r for r in a.rows if tuple(r[c] for c in cols) not in inb], cols)
        return Table(a.schema, rows)
    (t,) = inputs
    if op == "selection":
        pred = _predicate(p.get("predicate", ""), t.schema)
        return Table(t.schema, [r for r in t.rows if eval_predicate(pred, r)])
    if op == "projection":
        keep = [_find(t, f) for f in _sig(p["keep"]).sorted()]
        rows = [{c: r[c] for c in keep} for r in t.rows]
        if p.get("distinct", False):
            rows = _distinct(rows, keep)
        return Table(TypeSig(keep), rows)
    if op == "extension":
        new = _field(p["field"])
        if new in t.schema:
            raise SchemaMismatch(f"{new} already present")
        expr = p.get("expr")
        if expr:
            try:
                parsed = parse_expr(expr)
            except ValueError as exc:
                raise UnsupportedOp(str(exc)) from exc
            for f in _expr_fields(parsed):
                _find(t, f)
            compute = lambda r: eval_expr(parsed, r)  # noqa: E731
        else:
            cols = t.columns()
            compute = lambda r: _hash(tuple(r[c] for c in cols)) % 1000  # noqa: E731
        return Table(t.schema | TypeSig([new]), [{**r, new: compute(r)} for r in t.rows])
    if op == "rename":
        old = _find(t, _field(p["from"]))
        to = _field(p["to"])
        new = FieldId(to.name, old.semantic_type, to.provenance)
        return Table(
            TypeSig(new if c == old else c for c in t.schema),
            [{(new if c == old else c): v for c, v in r.items()} for r in t.rows],
        )
    if op == "grouping":
        cols = [_find(t, f) for f in _sig(p["group_cols"]).sorted()]
        aggs = p.get("aggs", ())
        groups: dict[tuple, list[Row]] = {}
        for r in t.rows:
            groups.setdefault(tuple(r[c] for c in cols), []).append(r)
        rows = []
        for k, members in groups.items():
            row = dict(zip(cols, k))
            for a in aggs:
                vals = None if a.field is None else [m[_find(t, a.field)] for m in members]
                row[a.name] = _aggregate(a.func, vals, len(members))
            rows.append(row)
        return Table(TypeSig([*cols, *(a.name for a in aggs)]), rows)
    raise UnsupportedOp(f"cannot evaluate {op}")


def _expr_fields(parsed) -> list[FieldId]:
    return [t.value for t in parsed.terms if isinstance(t.value, FieldId)]


def evaluate(doc: PipelineDoc, instances: Mapping[str, Table], upto: str | None = None) -> dict[str, Table]:
    """Evaluate every node (or those needed for ``upto``) over source instances."""
    tables: dict[str, Table] = dict(instances)
    order = topo_order(doc)
    needed = None
    if upto is not None:
        needed = {upto}
        for n in reversed(order):
            if n.id in needed:
                needed.update(n.inputs)
    isos = doc.iso_map()
    for node in order:
        if needed is not None and node.id not in needed:
            continue
        tables[node.id] = eval_node(node, [tables[i] for i in node.inputs], isos)
    return tables
