"""SQL scripts that replay a pipeline on generated data and assert its grains.

The script creates every source with its grain as PRIMARY KEY, loads a seeded
instance, materializes each node into a table keyed on the inferred grain and
finishes with one ``COUNT(*)`` against ``COUNT(DISTINCT grain)`` query per
node.  Only ANSI core constructs are used.
"""

from __future__ import annotations

from typing import Callable

from ..expr import UnsupportedExpression, expr_sql, parse_expr, parse_predicate, predicate_sql
from ..inference import InferenceResult
from ..pipeline import Analysis, PipelineDoc, PlanNode, VerificationReport, analyze
from ..typealg import FieldId, TypeSig
from .evaluate import UnsupportedOp, _sig, key_pairs
from .instances import Table, Value, generate_instance

SQL_AGG = {"SUM": "SUM", "COUNT": "COUNT", "MIN": "MIN", "MAX": "MAX"}


def quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def col(f: FieldId, alias: str | None = None) -> str:
    q = quote(str(f))
    return f"{alias}.{q}" if alias else q


def _literal(v: Value) -> str:
    return "NULL" if v is None else str(int(v))


def _cols(sig: TypeSig) -> str:
    return ", ".join(col(f) for f in sig.sorted())


def _create(name: str, schema: TypeSig, grain: TypeSig, not_null: set[FieldId] | None = None) -> str:
    lines = []
    for f in schema.sorted():
        nn = " NOT NULL" if not_null is not None and f in not_null else ""
        lines.append(f"  {col(f)} INTEGER{nn}")
    if grain:
        lines.append(f"  PRIMARY KEY ({_cols(grain)})")
    return f"CREATE TABLE {quote(name)} (\n" + ",\n".join(lines) + "\n);"


def _inserts(name: str, table: Table) -> list[str]:
    cols = table.columns()
    head = f"INSERT INTO {quote(name)} ({', '.join(col(c) for c in cols)}) VALUES "
    return [head + "(" + ", ".join(_literal(r[c]) for c in cols) + ");" for r in table.rows]


def _parse(fn, text: str):
    try:
        return fn(text)
    except (UnsupportedExpression, ValueError) as exc:
        raise UnsupportedOp(str(exc)) from exc


def _stub(decl) -> Table:
    return Table(decl.schema, [])


def _join_sources(res: InferenceResult, flavor: str, coalesce: bool) -> dict[FieldId, str]:
    """Result column -> SQL expression over the aliases ``l`` and ``r``."""
    exprs: dict[FieldId, list[str]] = {}
    for alias, lin in zip("lr", res.lineage):
        for f, image in lin.items():
            for g in image:
                exprs.setdefault(g, []).append(col(f, alias))
    out = {}
    for g, options in exprs.items():
        if len(options) > 1 and coalesce and flavor in ("right", "full"):
            out[g] = f"COALESCE({', '.join(options)})"
        else:
            out[g] = options[0]
    return out


def _select_list(res: InferenceResult, exprs: dict[FieldId, str]) -> str:
    return ", ".join(f"{exprs[f]} AS {col(f)}" for f in res.result_schema.sorted())


def node_query(node: PlanNode, analysis: Analysis) -> str:
    """A SELECT producing the node's result with one column per result field."""
    doc = analysis.doc
    res = analysis.results[node.id]
    ins = [analysis.decls[i] for i in node.inputs]
    src = [quote(i) for i in node.inputs]
    op, p = node.op, node.params

    if op in ("equijoin", "natural_join"):
        pairs = key_pairs(node, _stub(ins[0]), _stub(ins[1]), doc.iso_map())
        on = " AND ".join(f"{col(a, 'l')} = {col(b, 'r')}" for a, b in pairs)
        kind = {"inner": "INNER JOIN", "left": "LEFT OUTER JOIN",
                "right": "RIGHT OUTER JOIN", "full": "FULL OUTER JOIN"}[node.flavor]
        exprs = _join_sources(res, node.flavor, coalesce=True)
        return f"SELECT {_select_list(res, exprs)}\nFROM {src[0]} l {kind} {src[1]} r ON {on}"
    if op == "thetajoin":
        exprs = _join_sources(res, "inner", coalesce=False)
        pred = _parse(parse_predicate, p.get("theta", ""))
        cond = predicate_sql(pred, lambda f: _resolve(f, exprs))
        return f"SELECT {_select_list(res, exprs)}\nFROM {src[0]} l CROSS JOIN {src[1]} r\nWHERE {cond}"
    if op in ("semijoin", "antijoin"):
        pairs = key_pairs(node, _stub(ins[0]), _stub(ins[1]), doc.iso_map())
        on = " AND ".join(f"{col(a, 'l')} = {col(b, 'r')}" for a, b in pairs)
        neg = "" if op == "semijoin" else "NOT "
        cols = ", ".join(f"{col(f, 'l')} AS {col(f)}" for f in ins[0].schema.sorted())
        return f"SELECT {cols}\nFROM {src[0]} l\nWHERE {neg}EXISTS (SELECT 1 FROM {src[1]} r WHERE {on})"
    if op in ("union", "intersection", "difference"):
        word = {"union": "UNION", "intersection": "INTERSECT", "difference": "EXCEPT"}[op]
        cols = _cols(ins[0].schema)
        return f"SELECT {cols} FROM {src[0]}\n{word}\nSELECT {cols} FROM {src[1]}"

    inp = ins[0]
    by_field: Callable[[FieldId], str] = lambda f: _resolve(f, {g: col(g) for g in inp.schema})  # noqa: E731
    exprs = {f: col(f) for f in inp.schema}
    tail = ""
    if op == "selection":
        pred = _parse(parse_predicate, p.get("predicate", ""))
        tail = f"\nWHERE {predicate_sql(pred, by_field)}"
    elif op == "projection":
        distinct = "DISTINCT " if p.get("distinct", False) else ""
        return f"SELECT {distinct}{_cols(res.result_schema)} FROM {src[0]}"
    elif op == "extension":
        if not p.get("expr"):
            raise UnsupportedOp(f"extension {node.id} has no expression to emit")
        expr = _parse(parse_expr, p["expr"])
        (new,) = (res.result_schema - inp.schema).sorted()
        exprs[new] = expr_sql(expr, by_field)
    elif op == "rename":
        (lin,) = res.lineage
        exprs = {lin[f].sorted()[0]: col(f) for f in inp.schema}
    elif op == "grouping":
        groups = [by_field(f) for f in _sig(p["group_cols"]).sorted()]
        exprs = {f: col(f) for f in _sig(p["group_cols"])}
        for a in p.get("aggs", ()):
            exprs[a.name] = _agg_sql(a, by_field)
        tail = f"\nGROUP BY {', '.join(groups)}" if groups else ""
    else:
        raise UnsupportedOp(f"cannot emit SQL for {op}")
    return f"SELECT {_select_list(res, exprs)} FROM {src[0]}{tail}"


def _resolve(f: FieldId, exprs: dict[FieldId, str]) -> str:
    if f in exprs:
        return exprs[f]
    raise UnsupportedOp(f"field {f} is not available here")


def _agg_sql(a, by_field) -> str:
    if a.field is None:
        if a.func != "COUNT":
            raise UnsupportedOp(f"{a.func} needs a field")
        return "COUNT(*)"
    arg = by_field(a.field)
    if a.func == "COUNT_DISTINCT":
        return f"COUNT(DISTINCT {arg})"
    if a.func == "AVG":
        # integer average, matching the evaluator for non-negative data
        return f"SUM({arg}) / COUNT({arg})"
    return f"{SQL_AGG[a.func]}({arg})"


def assertion(name: str, grain: TypeSig) -> str:
    inner = _cols(grain) if grain else "1"
    return (
        f"SELECT '{name}' AS check_name, "
        f"(SELECT COUNT(*) FROM {quote(name)}) AS row_count, "
        f"(SELECT COUNT(*) FROM (SELECT DISTINCT {inner} FROM {quote(name)}) d) AS distinct_count;"
    )


def emit_sql(
    doc: PipelineDoc,
    report: VerificationReport | None = None,
    seed: int = 42,
    rows: int = 50,
    analysis: Analysis | None = None,
) -> str:
    """Deterministic SQL script for ``doc`` over instances generated with ``seed``."""
    analysis = analysis or analyze(doc)
    report = report or analysis.report
    out = [f"-- grain check script, seed {seed}, {rows} rows per source, verdict {report.verdict}"]
    for r in doc.relations:
        out.append("")
        out.append(_create(r.name, r.schema, r.grain, set(r.schema) - set(r.nullable)))
        out.extend(_inserts(r.name, generate_instance(r, seed, rows)))
    checks = [assertion(r.name, r.grain) for r in doc.relations]
    for node in analysis.order:
        if node.id not in analysis.results:
            out.append(f"\n-- {node.id}: skipped, inputs failed inference")
            continue
        res = analysis.results[node.id]
        out.append("")
        out.append(f"-- {node.id}: {node.op}, grain {res.result_grain}")
        out.append(_create(node.id, res.result_schema, res.result_grain))
        out.append(f"INSERT INTO {quote(node.id)} ({_cols(res.result_schema)})\n{node_query(node, analysis)};")
        checks.append(assertion(node.id, res.result_grain))
    out.append("")
    out.append("-- each row must show row_count = distinct_count")
    out.extend(checks)
    return "\n".join(out) + "\n"
