"""The small interpreted subset of predicates and expressions.

Grain inference never looks inside predicates.  Only the oracle and the SQL
emitter do, and they accept:

    predicate := TRUE | cmp (AND cmp)*
    cmp       := term op term          op in = != <> < <= > >=
    expr      := term ((+|-|*) term)*
    term      := integer | field reference (``name`` or ``prov.name``)
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Callable, Mapping

from .typealg import FieldId


class UnsupportedExpression(ValueError):
    pass


_TOKEN = re.compile(r"\s*(?:(-?\d+)|([A-Za-z_][\w.]*)|(<>|!=|<=|>=|=|<|>|\+|-|\*))")
_CMP = {
    "=": operator.eq,
    "!=": operator.ne,
    "<>": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul}


@dataclass(frozen=True)
class Term:
    value: int | FieldId


@dataclass(frozen=True)
class Cmp:
    left: Term
    op: str
    right: Term


@dataclass(frozen=True)
class Arith:
    terms: tuple[Term, ...]
    ops: tuple[str, ...]


def _tokens(text: str) -> list[tuple[str, str]]:
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise UnsupportedExpression(f"cannot parse {text[pos:]!r}")
        num, ident, sym = m.groups()
        if num is not None:
            out.append(("num", num))
        elif ident is not None:
            out.append(("kw", ident.upper()) if ident.upper() in ("AND", "TRUE") else ("ref", ident))
        else:
            out.append(("sym", sym))
        pos = m.end()
    return out


def _term(tok: tuple[str, str]) -> Term:
    kind, text = tok
    if kind == "num":
        return Term(int(text))
    if kind == "ref":
        return Term(FieldId.parse(text))
    raise UnsupportedExpression(f"expected a field or integer, got {text!r}")


def parse_predicate(text: str) -> tuple[Cmp, ...]:
    toks = _tokens(text)
    if not toks or toks == [("kw", "TRUE")]:
        return ()
    out = []
    i = 0
    while True:
        if i + 3 > len(toks):
            raise UnsupportedExpression(f"incomplete comparison in {text!r}")
        left, op, right = toks[i : i + 3]
        if op[0] != "sym" or op[1] not in _CMP:
            raise UnsupportedExpression(f"expected a comparison operator in {text!r}")
        out.append(Cmp(_term(left), op[1], _term(right)))
        i += 3
        if i == len(toks):
            return tuple(out)
        if toks[i] != ("kw", "AND"):
            raise UnsupportedExpression(f"only AND-joined comparisons are interpreted: {text!r}")
        i += 1


def parse_expr(text: str) -> Arith:
    toks = _tokens(text)
    if not toks:
        raise UnsupportedExpression("empty expression")
    terms, ops = [_term(toks[0])], []
    i = 1
    while i < len(toks):
        if toks[i][0] != "sym" or toks[i][1] not in _ARITH or i + 1 >= len(toks):
            raise UnsupportedExpression(f"cannot parse expression {text!r}")
        ops.append(toks[i][1])
        terms.append(_term(toks[i + 1]))
        i += 2
    return Arith(tuple(terms), tuple(ops))


def fields_of(node: tuple[Cmp, ...] | Arith) -> set[FieldId]:
    terms = node.terms if isinstance(node, Arith) else [t for c in node for t in (c.left, c.right)]
    return {t.value for t in terms if isinstance(t.value, FieldId)}


def _value(t: Term, row: Mapping[FieldId, int | None]):
    return row[t.value] if isinstance(t.value, FieldId) else t.value


def eval_predicate(pred: tuple[Cmp, ...], row: Mapping[FieldId, int | None]) -> bool:
    for c in pred:
        a, b = _value(c.left, row), _value(c.right, row)
        if a is None or b is None or not _CMP[c.op](a, b):
            return False
    return True


def eval_expr(expr: Arith, row: Mapping[FieldId, int | None]) -> int | None:
    acc = _value(expr.terms[0], row)
    for op, t in zip(expr.ops, expr.terms[1:]):
        v = _value(t, row)
        if acc is None or v is None:
            return None
        acc = _ARITH[op](acc, v)
    return acc


def _sql_term(t: Term, column: Callable[[FieldId], str]) -> str:
    return column(t.value) if isinstance(t.value, FieldId) else str(t.value)


def predicate_sql(pred: tuple[Cmp, ...], column: Callable[[FieldId], str]) -> str:
    if not pred:
        return "1 = 1"
    ops = {"!=": "<>"}
    return " AND ".join(
        f"{_sql_term(c.left, column)} {ops.get(c.op, c.op)} {_sql_term(c.right, column)}" for c in pred
    )


def expr_sql(expr: Arith, column: Callable[[FieldId], str]) -> str:
    parts = [_sql_term(expr.terms[0], column)]
    for op, t in zip(expr.ops, expr.terms[1:]):
        parts += [op, _sql_term(t, column)]
    return " ".join(parts)
