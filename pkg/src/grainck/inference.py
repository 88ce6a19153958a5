"""Per-operation grain inference.

Every ``infer_*`` function takes declared inputs and returns an
:class:`InferenceResult` holding the result schema, the result grain, the FDs
known to hold on the result, and a lineage map from input fields to result
fields.  The lineage map is what lets downstream checks lift an input grain
into the result's field space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .grain import (
    FunctionalDependency,
    IsoWitness,
    RelationDecl,
    determines,
    fd_closure,
    minimize,
    project_fds,
    smallest_key,
)
from .typealg import EMPTY, FieldId, TypeSig

CASE_A, CASE_B, NOT_A_JOIN = "CaseA", "CaseB", "NotAJoinCase"
TRIVIAL_AGG, COARSENED, ORTHOGONAL, MIXED = "TrivialAgg", "CoarsenedGrain", "OrthogonalAgg", "MixedAgg"
LHS, RHS = "lhs", "rhs"


class InferenceError(ValueError):
    code = "SpecError"


class InvalidKey(InferenceError):
    pass


class MissingIso(InferenceError):
    pass


class EmptyNaturalKey(InferenceError):
    pass


class FieldNotInSchema(InferenceError):
    pass


class DuplicateField(InferenceError):
    pass


class NotUnionCompatible(InferenceError):
    pass


class DegenerateInput(InferenceError):
    pass


class SetGrainMismatch(InferenceError):
    code = "GrainMismatch"


@dataclass(frozen=True)
class JoinKeySpec:
    left_key: TypeSig
    right_key: TypeSig
    iso: str | None = None

    @classmethod
    def same(cls, *refs: str) -> "JoinKeySpec":
        k = TypeSig.of(*refs)
        return cls(k, k)


@dataclass(frozen=True)
class Note:
    kind: str
    detail: str
    fields: TypeSig = EMPTY

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True)
class InferenceResult:
    result_schema: TypeSig
    result_grain: TypeSig
    case_tag: str = NOT_A_JOIN
    semantics_tag: str | None = None
    notes: tuple[Note, ...] = ()
    fds: tuple[FunctionalDependency, ...] = field(default=(), compare=False)
    implied_fds: tuple[FunctionalDependency, ...] = field(default=(), compare=False)
    lineage: tuple[Mapping[FieldId, TypeSig], ...] = field(default=(), compare=False)
    trace: tuple[str, ...] = field(default=(), compare=False)

    def as_decl(self, name: str, nullable: Iterable[FieldId] = ()) -> RelationDecl:
        return RelationDecl(
            name,
            self.result_schema,
            self.result_grain,
            tuple(self.fds) + tuple(self.implied_fds),
            frozenset(nullable),
        )

    def lift(self, side: int, fields: TypeSig) -> TypeSig:
        """Image of input ``side``'s fields in the result."""
        lin = self.lineage[side]
        out: list[FieldId] = []
        for f in fields:
            out.extend(lin.get(f, EMPTY))
        return TypeSig(out)

    def note(self, kind: str) -> Note | None:
        return next((n for n in self.notes if n.kind == kind), None)


# -- helpers ---------------------------------------------------------------


def _require_subset(part: TypeSig, whole: TypeSig, what: str, exc=FieldNotInSchema) -> None:
    missing = part - whole
    if missing:
        raise exc(f"{what}: {missing} not in schema {whole}")


def _lift_fds(fds: Iterable[FunctionalDependency], lineage: Mapping[FieldId, TypeSig], scope: str):
    out = []
    for fd in fds:
        if not fd.fields().fields <= set(lineage):
            continue
        lhs = TypeSig(x for f in fd.lhs for x in lineage[f])
        rhs = TypeSig(x for f in fd.rhs for x in lineage[f])
        if lhs or not rhs:
            out.append(FunctionalDependency(lhs, rhs, scope))
    return out


def _identity(schema: TypeSig) -> dict[FieldId, TypeSig]:
    return {f: TypeSig([f]) for f in schema}


def _unary(inp: RelationDecl, schema: TypeSig, grain: TypeSig, **kw) -> InferenceResult:
    lineage = {f: TypeSig([f]) for f in inp.schema if f in schema}
    kw.setdefault("fds", tuple(inp.fds))
    return InferenceResult(schema, grain, lineage=(lineage,), **kw)


# -- equi-joins -------------------------------------------------------------


def _tag(sig: TypeSig, side: str) -> TypeSig:
    return TypeSig(FieldId(f.name, f.semantic_type, f"{side}:{f.provenance or ''}") for f in sig)


def _tag_fds(fds: Iterable[FunctionalDependency], side: str):
    return [FunctionalDependency(_tag(fd.lhs, side), _tag(fd.rhs, side), fd.scope) for fd in fds]


@dataclass
class _KeyMap:
    """How right-key fields are expressed in left-key names."""

    left_key: TypeSig
    right_key: TypeSig
    pairs: dict[FieldId, FieldId] | None  # right -> left; None for a whole-set iso

    def to_left(self, portion: TypeSig) -> TypeSig:
        if self.pairs is not None:
            return TypeSig(self.pairs[f] for f in portion)
        if not portion:
            return EMPTY
        if portion == self.right_key:
            return self.left_key
        raise InvalidKey(
            f"grain portion {portion} covers only part of a whole-set iso key "
            f"{self.right_key}; declare a field pairing"
        )

    def equality_fds(self) -> list[FunctionalDependency]:
        lk, rk = _tag(self.left_key, "L"), _tag(self.right_key, "R")
        fds = [FunctionalDependency(lk, rk, "join-key"), FunctionalDependency(rk, lk, "join-key")]
        for r, l in (self.pairs or {}).items():
            a, b = _tag(TypeSig([l]), "L"), _tag(TypeSig([r]), "R")
            fds += [FunctionalDependency(a, b, "join-key"), FunctionalDependency(b, a, "join-key")]
        return fds


def _resolve_key(
    left: RelationDecl, right: RelationDecl, key: JoinKeySpec, isos: Mapping[str, IsoWitness]
) -> tuple[_KeyMap, IsoWitness | None]:
    _require_subset(key.left_key, left.schema, f"left key of {left.name}", InvalidKey)
    _require_subset(key.right_key, right.schema, f"right key of {right.name}", InvalidKey)
    if not key.left_key or not key.right_key:
        raise InvalidKey("join key must be non-empty")
    lk = TypeSig(left.schema.lookup(f) for f in key.left_key)
    rk = TypeSig(right.schema.lookup(f) for f in key.right_key)
    if key.iso is None:
        if lk != rk:
            raise MissingIso(f"keys {lk} and {rk} differ and no iso witness is named")
        for f in lk:
            g = rk.lookup(f)
            if g.semantic_type != f.semantic_type:
                raise InvalidKey(f"key field {f} has type {f.semantic_type} vs {g.semantic_type}")
        return _KeyMap(lk, rk, {f: f for f in rk}), None
    iso = isos.get(key.iso)
    if iso is None:
        raise MissingIso(f"iso witness {key.iso!r} is not declared")
    if iso.left == lk and iso.right == rk:
        pairs = {rk.lookup(b): lk.lookup(a) for a, b in iso.pairing} if iso.pairing else None
    elif iso.left == rk and iso.right == lk:
        pairs = {rk.lookup(a): lk.lookup(b) for a, b in iso.pairing} if iso.pairing else None
    else:
        raise InvalidKey(f"iso {iso.name} relates {iso.left} and {iso.right}, not {lk} and {rk}")
    return _KeyMap(lk, rk, pairs), iso


def _join_layout(left: RelationDecl, right: RelationDecl, km: _KeyMap):
    """Result schema plus lineage; shared non-key names get lhs/rhs tags."""
    left_rest = left.schema - km.left_key
    right_rest = right.schema - km.right_key
    clash_r = right_rest & (left_rest | km.left_key)
    clash_l = left_rest & right_rest
    lin_l: dict[FieldId, TypeSig] = {}
    lin_r: dict[FieldId, TypeSig] = {}
    for f in left.schema:
        lin_l[f] = TypeSig([f.with_provenance(LHS) if f in clash_l else f])
    for g in right_rest:
        lin_r[g] = TypeSig([g.with_provenance(RHS) if g in clash_r else g])
    if km.pairs is not None:
        for g in km.right_key:
            lin_r[g] = TypeSig([km.pairs[g]])
    else:
        for g in km.right_key:
            lin_r[g] = km.left_key
    schema = TypeSig(x for m in (lin_l, lin_r) for s in m.values() for x in s)
    return schema, lin_l, lin_r, clash_l | clash_r


def basic_join_grain(g1: TypeSig, g2: TypeSig, jk: TypeSig) -> tuple[TypeSig, str]:
    """Closed-form equi-join grain over a shared key, without FDs.

    Common non-key grain fields are NOT disambiguated here; callers compare
    modulo provenance.
    """
    p1, p2 = g1 & jk, g2 & jk
    rest = (g1 - jk) | (g2 - jk)
    if p1 <= p2 or p2 <= p1:
        return rest | (p1 & p2), CASE_A
    return rest | p1 | p2, CASE_B


def infer_equijoin(
    left: RelationDecl,
    right: RelationDecl,
    key: JoinKeySpec,
    fds: Sequence[FunctionalDependency] = (),
    isos: Mapping[str, IsoWitness] | None = None,
) -> InferenceResult:
    isos = isos or {}
    km, iso = _resolve_key(left, right, key, isos)
    schema, lin_l, lin_r, dup = _join_layout(left, right, km)
    trace = [
        f"grain({left.name}) = {left.grain}",
        f"grain({right.name}) = {right.grain}",
        f"join key = {km.left_key}" + ("" if km.left_key == km.right_key else f" ≅ {km.right_key} via {iso.name}"),
    ]
    p1 = left.grain & km.left_key
    p2 = right.grain & km.right_key
    p2c = km.to_left(p2)
    trace.append(f"left key portion = {p1}")
    trace.append(f"right key portion = {p2}" + ("" if p2c == p2 else f" (as {p2c})"))

    notes: list[Note] = []
    if p1 <= p2c or p2c <= p1:
        case, meet = CASE_A, p1 & p2c
        trace.append(f"portions comparable by inclusion: Case A, meet = {meet}")
    else:
        global_fds = [*fds, *(fd for w in isos.values() for fd in w.as_fds())]
        space = [
            *_tag_fds(left.fds, "L"),
            *_tag_fds(right.fds, "R"),
            *_tag_fds(global_fds, "L"),
            *_tag_fds(global_fds, "R"),
            *km.equality_fds(),
        ]
        lr = determines(_tag(p1, "L"), _tag(p2, "R"), space)
        rl = determines(_tag(p2, "R"), _tag(p1, "L"), space)
        if lr and rl:
            case, meet = CASE_A, p1
            trace.append(f"portions equivalent under FDs/iso: Case A, meet = left portion {p1}")
            notes.append(Note("MeetChoice", "both portions determine each other; left portion chosen", p1))
        elif lr:
            case, meet = CASE_A, p2c
            trace.append(f"left portion determines right portion: Case A, meet = coarser {p2c}")
        elif rl:
            case, meet = CASE_A, p1
            trace.append(f"right portion determines left portion: Case A, meet = coarser {p1}")
        else:
            case, meet = CASE_B, p1 | p2c
            trace.append(f"portions incomparable: Case B, portion union = {meet}")

    rest1 = TypeSig(x for f in left.grain - km.left_key for x in lin_l[f])
    rest2 = TypeSig(x for f in right.grain - km.right_key for x in lin_r[f])
    closed = rest1 | rest2 | meet
    trace.append(f"closed form = ({rest1}) × ({rest2}) × ({meet}) = {closed}")

    iso_fds = [fd for w in isos.values() for fd in w.as_fds()]
    propagated = [
        *_lift_fds(left.fds, lin_l, left.name),
        *_lift_fds(right.fds, lin_r, right.name),
        *(fd for fd in [*fds, *iso_fds] if fd.fields() <= schema),
    ]
    implied = [
        *_lift_fds([left.implicit_fd()], lin_l, left.name),
        *_lift_fds([right.implicit_fd()], lin_r, right.name),
    ]
    grain = minimize(closed, propagated)
    if grain != closed:
        trace.append(f"minimized under propagated FDs: {grain}")
    if dup:
        notes.append(Note("DuplicatedField", "common non-key fields kept from both sides", dup))
    if case == CASE_B:
        alt = [k for k in (rest1 | TypeSig(x for f in right.grain for x in lin_r[f]),
                           TypeSig(x for f in left.grain for x in lin_l[f]) | rest2)
               if not grain <= k]
        if alt:
            notes.append(Note(
                "AlternativeKeys",
                "one full input grain plus the other side's non-key grain fields also identifies rows: "
                + "; ".join(str(k) for k in alt),
                TypeSig(x for k in alt for x in k),
            ))
    trace.append(f"result grain = {grain}")
    result = InferenceResult(
        schema, grain, case, None, tuple(notes), tuple(propagated), tuple(implied), (lin_l, lin_r), tuple(trace)
    )
    _assert_bounds(result, left, right)
    return result


def _assert_bounds(result: InferenceResult, left: RelationDecl, right: RelationDecl) -> None:
    lo, hi = bounds(result, left, right)
    fds = [*result.fds, *result.implied_fds]
    if not (result.result_grain <= fd_closure(lo, fds) and hi <= fd_closure(result.result_grain, fds)):
        raise AssertionError(f"bounds violated for {left.name} ⋈ {right.name}: {result.result_grain}")


def bounds(result: InferenceResult, left: RelationDecl, right: RelationDecl) -> tuple[TypeSig, TypeSig]:
    """(lifted G1 × G2, left-lifted G1 ∩ G2) in the result's field space."""
    lo = result.lift(0, left.grain) | result.lift(1, right.grain)
    hi = result.lift(0, left.grain & right.grain)
    return lo, hi


def infer_natural_join(
    left: RelationDecl,
    right: RelationDecl,
    fds: Sequence[FunctionalDependency] = (),
    isos: Mapping[str, IsoWitness] | None = None,
) -> InferenceResult:
    jk = left.schema & right.schema
    if not jk:
        raise EmptyNaturalKey(f"{left.name} and {right.name} share no fields")
    res = infer_equijoin(left, right, JoinKeySpec(jk, jk), fds, isos)
    return InferenceResult(
        res.result_schema, res.result_grain, res.case_tag, None, res.notes, res.fds,
        res.implied_fds, res.lineage, (f"natural join: join key = schema intersection {jk}", *res.trace),
    )


def infer_thetajoin(
    left: RelationDecl, right: RelationDecl, theta: str = "", fds: Sequence[FunctionalDependency] = ()
) -> InferenceResult:
    if not left.schema or not right.schema:
        raise DegenerateInput("theta join needs non-empty schemas on both sides")
    shared = left.schema & right.schema
    lin_l = {f: TypeSig([f.with_provenance(LHS) if f in shared else f]) for f in left.schema}
    lin_r = {f: TypeSig([f.with_provenance(RHS) if f in shared else f]) for f in right.schema}
    schema = TypeSig(x for m in (lin_l, lin_r) for s in m.values() for x in s)
    product = TypeSig(x for f in left.grain for x in lin_l[f]) | TypeSig(x for f in right.grain for x in lin_r[f])
    propagated = [
        *_lift_fds(left.fds, lin_l, left.name),
        *_lift_fds(right.fds, lin_r, right.name),
        *(fd for fd in fds if fd.fields() <= schema),
    ]
    implied = [
        *_lift_fds([left.implicit_fd()], lin_l, left.name),
        *_lift_fds([right.implicit_fd()], lin_r, right.name),
    ]
    grain = minimize(product, propagated)
    notes = (Note("DuplicatedField", "shared fields kept from both sides", shared),) if shared else ()
    trace = (
        f"grain({left.name}) = {left.grain}",
        f"grain({right.name}) = {right.grain}",
        f"theta join ({theta or 'opaque predicate'}): product grain {product}",
        f"result grain = {grain}",
    )
    return InferenceResult(schema, grain, NOT_A_JOIN, None, notes, tuple(propagated), tuple(implied), (lin_l, lin_r), trace)


def _filter_join(
    left: RelationDecl, right: RelationDecl, key: JoinKeySpec, isos, label: str
) -> InferenceResult:
    _resolve_key(left, right, key, isos or {})
    return _unary(
        left, left.schema, left.grain,
        trace=(f"grain({left.name}) = {left.grain}", f"{label} filters {left.name} rows only", f"result grain = {left.grain}"),
    )


def infer_semijoin(left, right, key: JoinKeySpec, isos=None) -> InferenceResult:
    return _filter_join(left, right, key, isos, "semi-join")


def infer_antijoin(left, right, key: JoinKeySpec, isos=None) -> InferenceResult:
    return _filter_join(left, right, key, isos, "anti-join")


# -- unary operators ----------------------------------------------------------


def infer_selection(inp: RelationDecl, predicate: str = "") -> InferenceResult:
    return _unary(
        inp, inp.schema, inp.grain,
        trace=(f"grain({inp.name}) = {inp.grain}", "selection keeps type and grain", f"result grain = {inp.grain}"),
    )


def _resolve(refs: TypeSig, schema: TypeSig, what: str) -> TypeSig:
    _require_subset(refs, schema, what)
    return TypeSig(schema.lookup(f) for f in refs)


def infer_projection(
    inp: RelationDecl, keep: TypeSig, fds: Sequence[FunctionalDependency] = (), distinct: bool = False
) -> InferenceResult:
    keep = _resolve(keep, inp.schema, "projection")
    all_fds = [*inp.all_fds(), *fds]
    out_fds = tuple(project_fds(all_fds, keep, inp.name))
    trace = [f"grain({inp.name}) = {inp.grain}", f"keep = {keep}"]
    if inp.grain <= keep:
        trace.append(f"grain kept: result grain = {inp.grain}")
        return _unary(inp, keep, inp.grain, fds=out_fds, trace=tuple(trace))
    grain = smallest_key(keep, all_fds)
    trace.append(f"grain dropped; smallest FD-covering subset of keep = {grain}")
    mode = "DISTINCT applied" if distinct else "bag semantics keeps duplicates"
    note = Note("DedupHazard", f"grain fields {inp.grain - keep} dropped; {mode}", inp.grain - keep)
    return _unary(inp, keep, grain, fds=out_fds, notes=(note,), trace=tuple(trace))


def infer_extension(inp: RelationDecl, new_field: FieldId) -> InferenceResult:
    if not inp.schema:
        raise DegenerateInput("cannot extend an empty schema")
    if new_field in inp.schema:
        raise DuplicateField(f"{new_field} already in {inp.name}")
    schema = inp.schema | TypeSig([new_field])
    fds = (*inp.fds, FunctionalDependency(inp.grain, TypeSig([new_field]), inp.name)) if inp.grain else tuple(inp.fds)
    return _unary(
        inp, schema, inp.grain, fds=fds,
        trace=(f"grain({inp.name}) = {inp.grain}", f"extension adds {new_field}, grain unchanged", f"result grain = {inp.grain}"),
    )


def infer_rename(inp: RelationDecl, old: FieldId, new: FieldId) -> InferenceResult:
    src = inp.schema.lookup(old)
    if src is None:
        raise FieldNotInSchema(f"{old} not in {inp.name}")
    dst = FieldId(new.name, src.semantic_type, new.provenance)
    if dst in inp.schema and dst != src:
        raise DuplicateField(f"{dst} already in {inp.name}")

    def sub(sig: TypeSig) -> TypeSig:
        return TypeSig(dst if f == src else f for f in sig)

    lineage = {f: TypeSig([dst if f == src else f]) for f in inp.schema}
    fds = tuple(FunctionalDependency(sub(fd.lhs), sub(fd.rhs), fd.scope) for fd in inp.fds)
    grain = sub(inp.grain)
    trace = (f"grain({inp.name}) = {inp.grain}", f"rename {src} → {dst}", f"result grain = {grain}")
    return InferenceResult(sub(inp.schema), grain, fds=fds, lineage=(lineage,), trace=trace)


AGG_FUNCS = ("SUM", "COUNT", "AVG", "MIN", "MAX", "COUNT_DISTINCT")


@dataclass(frozen=True)
class Aggregate:
    name: FieldId
    func: str
    field: FieldId | None = None  # None means COUNT(*)

    def __post_init__(self) -> None:
        if self.func not in AGG_FUNCS:
            raise InferenceError(f"unknown aggregate {self.func}")
        if self.field is None and self.func != "COUNT":
            raise InferenceError(f"{self.func} needs an input field")

    def __str__(self) -> str:
        return f"{self.func}({self.field or '*'}) AS {self.name}"


def grouping_tag(grain: TypeSig, cols: TypeSig) -> str:
    if grain <= cols:
        return TRIVIAL_AGG
    if cols <= grain:
        return COARSENED
    if not (cols & grain):
        return ORTHOGONAL
    return MIXED


def infer_grouping(inp: RelationDecl, group_cols: TypeSig, aggs: Sequence[Aggregate] = ()) -> InferenceResult:
    cols = _resolve(group_cols, inp.schema, "grouping columns")
    out = list(cols)
    for a in aggs:
        if a.field is not None:
            _require_subset(TypeSig([a.field]), inp.schema, f"aggregate {a.name}")
        if TypeSig([a.name]) <= TypeSig(out):
            raise DuplicateField(f"aggregate output {a.name} clashes with another column")
        out.append(a.name)
    schema = TypeSig(out)
    all_fds = list(inp.all_fds())
    grain = smallest_key(cols, all_fds)
    tag = grouping_tag(inp.grain, cols)
    metrics = TypeSig(a.name for a in aggs)
    fds = tuple(project_fds(all_fds, cols, inp.name))
    if grain and metrics:
        fds += (FunctionalDependency(grain, metrics, inp.name),)
    lineage = {f: TypeSig([f]) for f in cols}
    trace = [f"grain({inp.name}) = {inp.grain}", f"group by {cols} ({tag})"]
    if grain != cols:
        trace.append(f"grouping columns minimized under FDs to {grain}")
    trace.append(f"result grain = {grain}")
    return InferenceResult(schema, grain, NOT_A_JOIN, tag, fds=fds, lineage=(lineage,), trace=tuple(trace))


SETOPS = ("union", "intersection", "difference")


def infer_setop(kind: str, a: RelationDecl, b: RelationDecl) -> InferenceResult:
    if kind not in SETOPS:
        raise InferenceError(f"unknown set operation {kind}")
    if a.schema != b.schema or any(a.schema.lookup(f).semantic_type != f.semantic_type for f in b.schema):
        raise NotUnionCompatible(f"{a.name} {a.schema} vs {b.name} {b.schema}")
    if a.grain != b.grain:
        raise SetGrainMismatch(f"{kind}: grains {a.grain} and {b.grain} differ")
    if kind == "union":
        fds = tuple(fd for fd in a.fds if fd in b.fds)
        notes = (Note("UnionOverlap", "grain stays unique only if inputs agree on shared grain values", a.grain),)
    elif kind == "intersection":
        fds, notes = (*a.fds, *b.fds), ()
    else:
        fds, notes = tuple(a.fds), ()
    lineage = _identity(a.schema)
    trace = (f"grain({a.name}) = grain({b.name}) = {a.grain}", f"{kind} keeps type and grain", f"result grain = {a.grain}")
    return InferenceResult(a.schema, a.grain, NOT_A_JOIN, None, notes, fds, (), (lineage, dict(lineage)), trace)
