"""Grain declarations, grain relations and the FD-closure decision procedure."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .typealg import EMPTY, FieldId, TypeSig

GLOBAL = "global"
MAX_GRAIN_FIELDS = 12


class GrainTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FunctionalDependency:
    lhs: TypeSig
    rhs: TypeSig
    scope: str = GLOBAL

    def __post_init__(self) -> None:
        if not self.lhs and self.rhs:
            raise ValueError("an FD with an empty left side must have an empty right side")

    @classmethod
    def of(cls, lhs: Iterable[str], rhs: Iterable[str], scope: str = GLOBAL) -> "FunctionalDependency":
        return cls(TypeSig.of(*lhs), TypeSig.of(*rhs), scope)

    def fields(self) -> TypeSig:
        return self.lhs | self.rhs

    def __str__(self) -> str:
        return f"{self.lhs} → {self.rhs}"


@dataclass(frozen=True)
class IsoWitness:
    """A declared one-to-one correspondence between two field sets.

    ``pairing`` maps fields one-to-one.  An empty pairing declares a
    whole-set correspondence (e.g. a composite date against a single one).
    """

    name: str
    left: TypeSig
    right: TypeSig
    pairing: tuple[tuple[FieldId, FieldId], ...] = ()

    def __post_init__(self) -> None:
        if not self.pairing:
            return
        ls = [a for a, _ in self.pairing]
        rs = [b for _, b in self.pairing]
        if len(set(ls)) != len(ls) or len(set(rs)) != len(rs):
            raise ValueError(f"iso {self.name}: pairing is not injective")
        if TypeSig(ls) != self.left or TypeSig(rs) != self.right:
            raise ValueError(f"iso {self.name}: pairing does not cover both sides")

    def as_fds(self, scope: str = GLOBAL) -> list[FunctionalDependency]:
        fds = [
            FunctionalDependency(self.left, self.right, scope),
            FunctionalDependency(self.right, self.left, scope),
        ]
        for a, b in self.pairing:
            fds.append(FunctionalDependency(TypeSig([a]), TypeSig([b]), scope))
            fds.append(FunctionalDependency(TypeSig([b]), TypeSig([a]), scope))
        return fds

    def mapping(self) -> dict[FieldId, FieldId]:
        """right field -> left field"""
        return {b: a for a, b in self.pairing}


@dataclass(frozen=True)
class RelationDecl:
    name: str
    schema: TypeSig
    grain: TypeSig
    fds: tuple[FunctionalDependency, ...] = ()
    nullable: frozenset[FieldId] = frozenset()
    collection_tag: str = ""
    domains: tuple[tuple[str, int], ...] = ()

    def implicit_fd(self) -> FunctionalDependency:
        if not self.grain:
            # an empty grain means at most one row: every field is constant
            return FunctionalDependency(EMPTY, EMPTY, self.name)
        return FunctionalDependency(self.grain, self.schema, self.name)

    def all_fds(self) -> list[FunctionalDependency]:
        return [*self.fds, self.implicit_fd()]

    def domain_of(self, name: str) -> int | None:
        return dict(self.domains).get(name)


@dataclass(frozen=True)
class Rule:
    name: str
    premises: tuple[TypeSig, ...] = ()
    detail: str = ""

    def __str__(self) -> str:
        prem = ", ".join(str(p) for p in self.premises)
        text = f"{self.name}({prem})"
        return f"{text}: {self.detail}" if self.detail else text


@dataclass(frozen=True)
class Judgement:
    holds: bool
    derivation: tuple[Rule, ...] = ()

    def __bool__(self) -> bool:
        return self.holds


EQUAL, LEQ_LR, LEQ_RL, INCOMPARABLE = "Equal", "LeqLR", "LeqRL", "Incomparable"


@dataclass(frozen=True)
class GrainRelation:
    kind: str
    derivation: tuple[Rule, ...] = field(default=(), compare=False)

    def __str__(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Irreducibility:
    ok: bool
    offending: TypeSig | None = None

    def __bool__(self) -> bool:
        return self.ok


def closure_trace(
    attrs: TypeSig, fds: Sequence[FunctionalDependency]
) -> tuple[TypeSig, list[FunctionalDependency]]:
    """Attribute closure with the FDs fired, in firing order."""
    have = set(attrs.fields)
    missing = [len(fd.lhs.fields - have) for fd in fds]
    waiting: dict[FieldId, list[int]] = {}
    for i, fd in enumerate(fds):
        for f in fd.lhs.fields - have:
            waiting.setdefault(f, []).append(i)
    ready = [i for i, m in enumerate(missing) if m == 0]
    fired: list[FunctionalDependency] = []
    while ready:
        i = ready.pop(0)
        fd = fds[i]
        new = fd.rhs.fields - have
        if new:
            fired.append(fd)
        for f in sorted(new, key=lambda x: x.key):
            have.add(f)
            for j in waiting.pop(f, ()):
                missing[j] -= 1
                if missing[j] == 0:
                    ready.append(j)
    return TypeSig(have), fired


def fd_closure(attrs: TypeSig, fds: Sequence[FunctionalDependency]) -> TypeSig:
    return closure_trace(attrs, list(fds))[0]


def determines(lhs: TypeSig, rhs: TypeSig, fds: Sequence[FunctionalDependency]) -> bool:
    return rhs <= fd_closure(lhs, fds)


def _decl_fds(r1: RelationDecl, r2: RelationDecl, fds: Iterable[FunctionalDependency]):
    out = [*fds, *r1.fds, *r2.fds, r1.implicit_fd(), r2.implicit_fd()]
    return out


def grain_leq(r1: RelationDecl, r2: RelationDecl, fds: Iterable[FunctionalDependency] = ()) -> Judgement:
    """Does the grain of ``r1`` determine the grain of ``r2``?"""
    g1, g2 = r1.grain, r2.grain
    if g2 <= g1:
        name = "self-determination" if g1 == g2 else "grain-subset"
        return Judgement(True, (Rule(name, (g1, g2)),))
    cl, fired = closure_trace(g1, _decl_fds(r1, r2, fds))
    if g2 <= cl:
        steps = tuple(Rule("fd", (fd.lhs, fd.rhs), fd.scope) for fd in fired)
        return Judgement(True, (*steps, Rule("closure", (g1, cl)), Rule("grain-subset", (cl, g2))))
    return Judgement(False, (Rule("closure", (g1, cl), f"missing {g2 - cl}"),))


def classify(r1: RelationDecl, r2: RelationDecl, fds: Iterable[FunctionalDependency] = ()) -> GrainRelation:
    fds = list(fds)
    lr = grain_leq(r1, r2, fds)
    rl = grain_leq(r2, r1, fds)
    trace = (
        Rule(f"{r1.name} determines {r2.name}" if lr else f"{r1.name} does not determine {r2.name}"),
        *lr.derivation,
        Rule(f"{r2.name} determines {r1.name}" if rl else f"{r2.name} does not determine {r1.name}"),
        *rl.derivation,
    )
    if lr and rl:
        kind = EQUAL
    elif lr:
        kind = LEQ_LR
    elif rl:
        kind = LEQ_RL
    else:
        kind = INCOMPARABLE
    return GrainRelation(kind, trace)


def glb(g1: TypeSig, g2: TypeSig) -> TypeSig:
    return g1 | g2


def lub(g1: TypeSig, g2: TypeSig) -> TypeSig:
    return g1 & g2


def minimize(grain: TypeSig, fds: Sequence[FunctionalDependency], cover: TypeSig | None = None) -> TypeSig:
    """Greedily drop fields (in sorted order) while the rest still covers ``cover``."""
    target = grain if cover is None else cover
    keep = grain.sorted()
    for f in grain.sorted():
        trial = TypeSig(x for x in keep if x != f)
        if target <= fd_closure(trial, fds):
            keep = trial.sorted()
    return TypeSig(keep)


def check_irreducible(grain: TypeSig, fds: Sequence[FunctionalDependency]) -> Irreducibility:
    if len(grain) > MAX_GRAIN_FIELDS:
        raise GrainTooLarge(f"grain {grain} has more than {MAX_GRAIN_FIELDS} fields")
    fds = list(fds)
    # closure is monotone, so a covering proper subset exists iff some
    # one-field-smaller subset covers
    for f in grain.sorted():
        rest = grain - TypeSig([f])
        if grain <= fd_closure(rest, fds):
            return Irreducibility(False, minimize(rest, fds, cover=grain))
    return Irreducibility(True)


def smallest_key(cover: TypeSig, fds: Sequence[FunctionalDependency], limit: int = 16) -> TypeSig:
    """Smallest subset of ``cover`` determining all of it; ties go to the
    lexicographically first field list.  Falls back to greedy minimization
    beyond ``limit`` fields."""
    fds = list(fds)
    fields = cover.sorted()
    if len(fields) > limit:
        return minimize(cover, fds)
    for size in range(len(fields) + 1):
        for combo in combinations(fields, size):
            cand = TypeSig(combo)
            if cover <= fd_closure(cand, fds):
                return cand
    return cover


def project_fds(fds: Sequence[FunctionalDependency], keep: TypeSig, scope: str) -> list[FunctionalDependency]:
    """FDs that survive projection onto ``keep`` (lhs kept, rhs cut to ``keep``)."""
    out = []
    for fd in fds:
        if fd.lhs <= keep:
            rhs = fd_closure(fd.lhs, fds) & keep
            rhs = rhs - fd.lhs
            if rhs:
                out.append(FunctionalDependency(fd.lhs, rhs, scope))
    return out
