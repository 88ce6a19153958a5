"""Concrete tables and seeded instance generation."""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Mapping

from ..grain import RelationDecl
from ..typealg import FieldId, TypeSig

Value = int | None
Row = dict[FieldId, Value]

NULL_RATE = 0.25
NON_GRAIN_DOMAIN = 4
MAX_ROWS = 1000


class InfeasibleSpec(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


@dataclass
class Table:
    schema: TypeSig
    rows: list[Row] = field(default_factory=list)

    def columns(self) -> list[FieldId]:
        return self.schema.sorted()

    def project(self, sig: TypeSig) -> list[tuple[Value, ...]]:
        cols = sig.sorted()
        return [tuple(r[c] for c in cols) for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class Instance(Table):
    relation: RelationDecl | None = None


def violations(decl: RelationDecl, rows: list[Row]) -> list[str]:
    """Instance invariants: grain unique, FDs hold, nulls only where allowed."""
    out = []
    seen: dict[tuple, int] = {}
    gcols = decl.grain.sorted()
    for i, r in enumerate(rows):
        k = tuple(r[c] for c in gcols)
        if k in seen:
            out.append(f"rows {seen[k]} and {i} share grain value {k}")
            break
        seen[k] = i
    for fd in decl.fds:
        lc, rc = fd.lhs.sorted(), fd.rhs.sorted()
        image: dict[tuple, tuple] = {}
        for r in rows:
            k, v = tuple(r[c] for c in lc), tuple(r[c] for c in rc)
            if image.setdefault(k, v) != v:
                out.append(f"FD {fd} fails at {k}")
                break
    for r in rows:
        bad = [c for c, v in r.items() if v is None and c not in decl.nullable]
        if bad:
            out.append(f"null in non-nullable field {bad[0]}")
            break
    return out


def default_domains(decl: RelationDecl, rows: int) -> dict[str, int]:
    """Grain fields get just enough values for ``rows`` distinct tuples."""
    k = len(decl.grain)
    per = max(2, math.ceil(rows ** (1 / k) - 1e-9)) if k else 1
    out = {f.name: (per if f in decl.grain else NON_GRAIN_DOMAIN) for f in decl.schema}
    out.update(dict(decl.domains))
    return out


def _hash(*parts) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        a, b = self.find(i), self.find(j)
        if a == b:
            return False
        self.parent[max(a, b)] = min(a, b)
        return True


def _grain_tuples(rng: random.Random, doms: list[int], n: int) -> list[tuple[int, ...]]:
    total = math.prod(doms)
    if total <= 4 * n:
        return rng.sample(list(product(*(range(d) for d in doms))), n)
    seen: set[tuple[int, ...]] = set()
    out = []
    while len(out) < n:
        t = tuple(rng.randrange(d) for d in doms)
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def _attempt(decl: RelationDecl, rng: random.Random, n: int, doms: Mapping[str, int], salt) -> list[Row] | None:
    fds = list(decl.fds)
    gcols = decl.grain.sorted()
    rhs_fields = {f for fd in fds for f in fd.rhs}
    pinned = {f for fd in fds if fd.rhs & decl.grain for f in fd.lhs if f not in decl.grain}
    lhs_fields = {f for fd in fds for f in fd.lhs}
    cols = decl.schema.sorted()
    rows: list[Row] = [dict(zip(gcols, t)) for t in _grain_tuples(rng, [doms[c.name] for c in gcols], n)]

    seeded = [c for c in cols if c not in decl.grain and c not in rhs_fields and c not in pinned]
    for c in seeded:
        for r in rows:
            if c in decl.nullable and rng.random() < NULL_RATE:
                r[c] = None
            else:
                r[c] = rng.randrange(doms[c.name])

    # equality classes per field; fixed and seeded fields start from their values
    uf = {c: _UnionFind(n) for c in cols}
    for c in cols:
        if c in decl.grain or c in seeded:
            first: dict[Value, int] = {}
            for i, r in enumerate(rows):
                uf[c].union(first.setdefault(r[c], i), i)
    changed = True
    while changed:
        changed = False
        for fd in fds:
            buckets: dict[tuple, int] = {}
            for i in range(n):
                k = tuple(uf[c].find(i) for c in fd.lhs.sorted())
                j = buckets.setdefault(k, i)
                if j != i:
                    for y in fd.rhs:
                        changed |= uf[y].union(i, j)

    for c in cols:
        if c in decl.grain or c in seeded:
            # merged classes must agree on a value
            rep: dict[int, Value] = {}
            for i, r in enumerate(rows):
                root = uf[c].find(i)
                if rep.setdefault(root, r[c]) != r[c]:
                    if c in decl.grain:
                        return None
                    r[c] = rep[root]
            continue
        roots = sorted({uf[c].find(i) for i in range(n)})
        code = {root: k for k, root in enumerate(roots)}
        nulls = {
            root for root in roots
            if c in decl.nullable and c not in lhs_fields and rng.random() < NULL_RATE
        }
        for i, r in enumerate(rows):
            root = uf[c].find(i)
            if root in nulls:
                r[c] = None
            elif c in lhs_fields:
                r[c] = code[root]
            else:
                r[c] = _hash(salt, c.name, root) % doms[c.name]
    return rows


def generate_instance(
    decl: RelationDecl, seed: int, rows: int, domains: Mapping[str, int] | None = None
) -> Instance:
    """Seeded instance of ``decl`` with at most ``rows`` rows.

    The row count shrinks when the grain domains cannot supply that many
    distinct grain values.
    """
    if rows < 1:
        raise ValueError("rows must be at least 1")
    rows = min(rows, MAX_ROWS)
    doms = default_domains(decl, rows)
    if domains:
        doms.update({k: v for k, v in domains.items() if k in doms})
    n = min(rows, math.prod(doms[f.name] for f in decl.grain)) if decl.grain else 1
    for attempt in range(8):
        rng = random.Random(f"{decl.name}|{seed}|{attempt}")
        data = _attempt(decl, rng, n, doms, (decl.name, seed, attempt))
        if data is not None and not violations(decl, data):
            cols = decl.schema.sorted()
            data = [{c: r[c] for c in cols} for r in data]
            return Instance(decl.schema, data, decl)
    raise InfeasibleSpec(f"could not generate a valid instance of {decl.name}")


def enumerate_instances(decl: RelationDecl, values: Iterable[int] = (0, 1), max_rows: int = 2) -> list[Instance]:
    """Every valid instance with 1..max_rows rows over a tiny value domain."""
    cols = decl.schema.sorted()
    vals = list(values)
    choices = [vals + ([None] if c in decl.nullable else []) for c in cols]
    tuples = [dict(zip(cols, t)) for t in product(*choices)]
    out = []
    for k in range(1, max_rows + 1):
        for combo in combinations(tuples, k):
            rows = [dict(r) for r in combo]
            if not violations(decl, rows):
                out.append(Instance(decl.schema, rows, decl))
    return out


def count_instances(decl: RelationDecl, values: int = 2, max_rows: int = 2) -> int:
    """Upper bound on ``len(enumerate_instances(...))`` without building them."""
    cells = math.prod(values + (1 if c in decl.nullable else 0) for c in decl.schema)
    return sum(math.comb(cells, k) for k in range(1, max_rows + 1))
