"""Pipeline DAGs and the verification pass.

``verify`` walks the DAG in topological order, infers every node's grain,
compares the final grain with the declared target and then runs the
detectors (fan trap, chasm trap, dedup hazard, join-type advice) on every
node, not only the last one.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping

from . import inference as inf
from .grain import (
    EQUAL,
    MAX_GRAIN_FIELDS,
    FunctionalDependency,
    IsoWitness,
    RelationDecl,
    check_irreducible,
    classify,
    fd_closure,
    grain_leq,
)
from .typealg import FieldId, TypeSig

ERROR, WARNING, ADVICE = "Error", "Warning", "Advice"
SEVERITIES = (ERROR, WARNING, ADVICE)
CODES = (
    "GrainMismatch",
    "FanTrap",
    "ChasmTrap",
    "DedupHazard",
    "JoinTypeAdvice",
    "IrreducibilityFailure",
    "SpecError",
)
FLAVORS = ("inner", "left", "right", "full")
EQUI_JOINS = ("equijoin", "natural_join")
JOINS = (*EQUI_JOINS, "thetajoin")
BINARY = (*JOINS, "semijoin", "antijoin", *inf.SETOPS)
UNARY = ("selection", "projection", "extension", "rename", "grouping")
OPS = (*BINARY, *UNARY)
MAX_CHAIN = 8
# aggregates whose value grows with duplicated input rows
INFLATING = ("SUM", "AVG", "COUNT")


class LoadError(ValueError):
    """The document violates a structural or declaration invariant."""

    def __init__(self, message: str, where: str = "") -> None:
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


class CycleDetected(LoadError):
    pass


class UnknownReference(LoadError):
    pass


class UnknownNode(KeyError):
    pass


@dataclass(frozen=True)
class PlanNode:
    id: str
    op: str
    inputs: tuple[str, ...]
    params: Mapping[str, Any] = field(default_factory=dict, compare=False)
    join_flavor: str | None = None

    @property
    def flavor(self) -> str:
        return self.join_flavor or "inner"


@dataclass(frozen=True)
class Target:
    node: str
    grain: TypeSig


@dataclass
class PipelineDoc:
    relations: list[RelationDecl]
    nodes: list[PlanNode] = field(default_factory=list)
    isos: list[IsoWitness] = field(default_factory=list)
    global_fds: list[FunctionalDependency] = field(default_factory=list)
    target: Target | None = None

    def relation(self, name: str) -> RelationDecl | None:
        return next((r for r in self.relations if r.name == name), None)

    def node(self, node_id: str) -> PlanNode | None:
        return next((n for n in self.nodes if n.id == node_id), None)

    def iso_map(self) -> dict[str, IsoWitness]:
        return {w.name: w for w in self.isos}

    def all_global_fds(self) -> list[FunctionalDependency]:
        return [*self.global_fds, *(fd for w in self.isos for fd in w.as_fds())]


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    node: str
    message: str
    evidence: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "node": self.node,
            "message": self.message,
            "evidence": dict(self.evidence),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Diagnostic":
        return cls(d["severity"], d["code"], d["node"], d["message"], dict(d["evidence"]))


@dataclass(frozen=True)
class NodeReport:
    id: str
    op: str
    inputs: list[str]
    schema: list[str]
    grain: list[str]
    case_tag: str
    semantics_tag: str | None
    notes: list[str]
    join_flavor: str | None = None


@dataclass
class VerificationReport:
    verdict: str
    nodes: list[NodeReport]
    relations: list[dict]
    target: dict | None
    diagnostics: list[Diagnostic]

    @property
    def passed(self) -> bool:
        return self.verdict == "Pass"

    def codes(self, severity: str | None = None) -> list[str]:
        return [d.code for d in self.diagnostics if severity is None or d.severity == severity]

    def node(self, node_id: str) -> NodeReport:
        return next(n for n in self.nodes if n.id == node_id)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "nodes": [asdict(n) for n in self.nodes],
            "relations": [dict(r) for r in self.relations],
            "target": self.target,
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "VerificationReport":
        return cls(
            d["verdict"],
            [NodeReport(**n) for n in d["nodes"]],
            [dict(r) for r in d["relations"]],
            d["target"],
            [Diagnostic.from_dict(x) for x in d["diagnostics"]],
        )


# -- validation -------------------------------------------------------------


def validate_relation(r: RelationDecl, where: str = "") -> None:
    where = where or f"relation {r.name}"
    if r.grain - r.schema:
        raise LoadError(f"grain fields {r.grain - r.schema} are not in the schema", where)
    for fd in r.fds:
        if fd.fields() - r.schema:
            raise LoadError(f"FD {fd} mentions fields outside the schema", where)
    if set(r.nullable) - set(r.schema.fields):
        raise LoadError("nullable fields must belong to the schema", where)
    bad = [f for f in r.nullable if f in r.grain]
    if bad:
        raise LoadError(f"grain field {bad[0]} cannot be nullable", where)
    if any(f.provenance for f in r.schema):
        raise LoadError("source fields carry no provenance", where)
    if len(r.grain) > MAX_GRAIN_FIELDS:
        raise LoadError(f"grain has more than {MAX_GRAIN_FIELDS} fields", where)
    irr = check_irreducible(r.grain, list(r.fds))
    if not irr:
        raise LoadError(f"grain {r.grain} is reducible: {irr.offending} already determines it", where)


def arity(op: str) -> int:
    return 2 if op in BINARY else 1


def topo_order(doc: PipelineDoc) -> list[PlanNode]:
    sources = {r.name for r in doc.relations}
    ids = [n.id for n in doc.nodes]
    seen: set[str] = set()
    for n in doc.nodes:
        if n.id in seen or n.id in sources:
            raise LoadError(f"duplicate id {n.id!r}", f"node {n.id}")
        seen.add(n.id)
        if n.op not in OPS:
            raise LoadError(f"unknown op {n.op!r}", f"node {n.id}")
        if len(n.inputs) != arity(n.op):
            raise LoadError(f"{n.op} takes {arity(n.op)} input(s), got {len(n.inputs)}", f"node {n.id}")
        if n.join_flavor is not None and n.join_flavor not in FLAVORS:
            raise LoadError(f"unknown join flavor {n.join_flavor!r}", f"node {n.id}")
        for i in n.inputs:
            if i not in sources and i not in ids:
                raise UnknownReference(f"input {i!r} is neither a relation nor a node", f"node {n.id}")
    pending = {n.id: sum(1 for i in n.inputs if i in ids) for n in doc.nodes}
    users: dict[str, list[str]] = {}
    for n in doc.nodes:
        for i in n.inputs:
            users.setdefault(i, []).append(n.id)
    rank = {nid: k for k, nid in enumerate(ids)}
    ready = sorted((nid for nid, c in pending.items() if c == 0), key=rank.get)
    order: list[str] = []
    while ready:
        nid = ready.pop(0)
        order.append(nid)
        for u in users.get(nid, ()):
            pending[u] -= 1
            if pending[u] == 0:
                ready.append(u)
                ready.sort(key=rank.get)
    if len(order) != len(ids):
        stuck = sorted(set(ids) - set(order), key=rank.get)
        raise CycleDetected(f"cycle through nodes {stuck}")
    by_id = {n.id: n for n in doc.nodes}
    return [by_id[i] for i in order]


def validate(doc: PipelineDoc) -> list[PlanNode]:
    names = [r.name for r in doc.relations]
    if len(set(names)) != len(names):
        raise LoadError("duplicate relation names")
    for r in doc.relations:
        validate_relation(r)
    iso_names = [w.name for w in doc.isos]
    if len(set(iso_names)) != len(iso_names):
        raise LoadError("duplicate iso names")
    order = topo_order(doc)
    if doc.target is not None and doc.target.node not in names and doc.node(doc.target.node) is None:
        raise UnknownReference(f"target {doc.target.node!r} does not exist", "target")
    return order


# -- analysis ---------------------------------------------------------------

Origin = tuple[str, FieldId]


@dataclass
class Analysis:
    doc: PipelineDoc
    order: list[PlanNode]
    decls: dict[str, RelationDecl]
    results: dict[str, inf.InferenceResult]
    origins: dict[str, dict[FieldId, frozenset[Origin]]]
    report: VerificationReport

    def consumers(self, node_id: str) -> list[PlanNode]:
        """Nodes reachable downstream of ``node_id``, in topological order."""
        reach = {node_id}
        out = []
        for n in self.order:
            if any(i in reach for i in n.inputs):
                reach.add(n.id)
                out.append(n)
        return out


def _sig(value) -> TypeSig:
    if isinstance(value, TypeSig):
        return value
    return TypeSig.of(*value)


def run_node(node: PlanNode, inputs: list[RelationDecl], doc: PipelineDoc) -> inf.InferenceResult:
    p = node.params
    gfds = doc.all_global_fds()
    isos = doc.iso_map()
    op = node.op
    if op in ("equijoin", "semijoin", "antijoin"):
        lk = _sig(p["left_key"])
        rk = _sig(p.get("right_key") or lk)
        key = inf.JoinKeySpec(lk, rk, p.get("iso"))
        if op == "equijoin":
            return inf.infer_equijoin(inputs[0], inputs[1], key, gfds, isos)
        fn = inf.infer_semijoin if op == "semijoin" else inf.infer_antijoin
        return fn(inputs[0], inputs[1], key, isos)
    if op == "natural_join":
        return inf.infer_natural_join(inputs[0], inputs[1], gfds, isos)
    if op == "thetajoin":
        return inf.infer_thetajoin(inputs[0], inputs[1], p.get("theta", ""), gfds)
    if op in inf.SETOPS:
        return inf.infer_setop(op, inputs[0], inputs[1])
    if op == "selection":
        return inf.infer_selection(inputs[0], p.get("predicate", ""))
    if op == "projection":
        return inf.infer_projection(inputs[0], _sig(p["keep"]), gfds, bool(p.get("distinct", False)))
    if op == "extension":
        f = p["field"]
        return inf.infer_extension(inputs[0], f if isinstance(f, FieldId) else FieldId.parse(f))
    if op == "rename":
        old, new = p["from"], p["to"]
        old = old if isinstance(old, FieldId) else FieldId.parse(old)
        new = new if isinstance(new, FieldId) else FieldId.parse(new)
        return inf.infer_rename(inputs[0], old, new)
    if op == "grouping":
        return inf.infer_grouping(inputs[0], _sig(p["group_cols"]), tuple(p.get("aggs", ())))
    raise LoadError(f"unknown op {op!r}", f"node {node.id}")


def _node_nullable(node: PlanNode, res: inf.InferenceResult, inputs: list[RelationDecl]) -> set[FieldId]:
    out: set[FieldId] = set()
    for side, decl in enumerate(inputs[: len(res.lineage)]):
        for f in decl.nullable:
            out |= set(res.lift(side, TypeSig([f])).fields)
    if node.op in JOINS and len(res.lineage) == 2:
        dropped = {"left": [1], "right": [0], "full": [0, 1]}.get(node.flavor, [])
        for side in dropped:
            out |= set(res.lift(side, inputs[side].schema - _key_of(node, side, inputs)).fields)
    return out & set(res.result_schema.fields)


def _key_of(node: PlanNode, side: int, inputs: list[RelationDecl]) -> TypeSig:
    if node.op == "natural_join":
        return inputs[0].schema & inputs[1].schema
    if node.op == "equijoin":
        lk = _sig(node.params["left_key"])
        return lk if side == 0 else _sig(node.params.get("right_key") or lk)
    return TypeSig()


def _node_origins(node: PlanNode, res: inf.InferenceResult, ins: list[dict]) -> dict[FieldId, frozenset[Origin]]:
    out: dict[FieldId, set[Origin]] = {}
    for side, lin in enumerate(res.lineage):
        for f, image in lin.items():
            for g in image:
                out.setdefault(g, set()).update(ins[side].get(f, ()))
    if node.op == "grouping":
        for a in node.params.get("aggs", ()):
            src = ins[0].get(a.field, frozenset()) if a.field is not None else frozenset()
            out.setdefault(a.name, set()).update(src)
    return {f: frozenset(v) for f, v in out.items()}


def _grain_text(sig: TypeSig) -> list[str]:
    return sig.names()


def analyze(doc: PipelineDoc) -> Analysis:
    order = validate(doc)
    decls: dict[str, RelationDecl] = {r.name: r for r in doc.relations}
    origins = {r.name: {f: frozenset([(r.name, f)]) for f in r.schema} for r in doc.relations}
    results: dict[str, inf.InferenceResult] = {}
    diags: list[Diagnostic] = []
    blocked: set[str] = set()
    for node in order:
        if any(i in blocked for i in node.inputs):
            blocked.add(node.id)
            continue
        inputs = [decls[i] for i in node.inputs]
        try:
            res = run_node(node, inputs, doc)
        except inf.SetGrainMismatch as exc:
            blocked.add(node.id)
            diags.append(Diagnostic(ERROR, "GrainMismatch", node.id, str(exc), {
                "inputs": list(node.inputs),
                "grains": [_grain_text(d.grain) for d in inputs],
            }))
            continue
        except (inf.InferenceError, KeyError, ValueError) as exc:
            raise LoadError(str(exc), f"node {node.id}") from exc
        results[node.id] = res
        decls[node.id] = res.as_decl(node.id, _node_nullable(node, res, inputs))
        origins[node.id] = _node_origins(node, res, [origins[i] for i in node.inputs])

    analysis = Analysis(doc, order, decls, results, origins, None)  # type: ignore[arg-type]
    target_info = _check_target(analysis, diags, blocked)
    for node in order:
        if node.id in results:
            diags.extend(_node_detectors(analysis, node))
    diags.extend(detect_chasm_trap(doc, analysis))
    diags = _sorted_diags(diags, order)
    nodes = [_node_report(n, results.get(n.id)) for n in order]
    verdict = "Fail" if any(d.severity == ERROR for d in diags) else "Pass"
    analysis.report = VerificationReport(verdict, nodes, _relations(doc), target_info, diags)
    return analysis


def verify(doc: PipelineDoc) -> VerificationReport:
    return analyze(doc).report


def _sorted_diags(diags: list[Diagnostic], order: list[PlanNode]) -> list[Diagnostic]:
    rank = {n.id: k for k, n in enumerate(order)}
    sev = {s: k for k, s in enumerate(SEVERITIES)}
    return sorted(diags, key=lambda d: (rank.get(d.node, -1), sev[d.severity], d.code, d.message))


def _node_report(node: PlanNode, res: inf.InferenceResult | None) -> NodeReport:
    if res is None:
        return NodeReport(node.id, node.op, list(node.inputs), [], [], "Blocked", None, [], node.join_flavor)
    return NodeReport(
        node.id,
        node.op,
        list(node.inputs),
        res.result_schema.names(),
        res.result_grain.names(),
        res.case_tag,
        res.semantics_tag,
        [str(n) for n in res.notes],
        node.join_flavor,
    )


def _relations(doc: PipelineDoc) -> list[dict]:
    gfds = doc.all_global_fds()
    rels = list(doc.relations)
    if doc.target is not None:
        t = doc.target
        rels.append(RelationDecl(f"target:{t.node}", t.grain, t.grain))
    out = []
    for i, a in enumerate(rels):
        for b in rels[i + 1:]:
            out.append({"left": a.name, "right": b.name, "kind": classify(a, b, gfds).kind})
    return out


def _check_target(analysis: Analysis, diags: list[Diagnostic], blocked: set[str]) -> dict | None:
    doc = analysis.doc
    if doc.target is None:
        return None
    t = doc.target
    if t.node in blocked:
        return {"node": t.node, "declared": t.grain.names(), "inferred": None, "relation": None}
    final = analysis.decls[t.node]
    target = RelationDecl(f"target:{t.node}", t.grain, t.grain)
    gfds = [*doc.all_global_fds(), *final.fds]
    rel = classify(final, target, gfds)
    info = {
        "node": t.node,
        "declared": t.grain.names(),
        "inferred": final.grain.names(),
        "relation": rel.kind,
    }
    if rel.kind != EQUAL:
        diags.append(Diagnostic(
            ERROR, "GrainMismatch", t.node,
            f"inferred grain {final.grain} is not equivalent to target grain {t.grain} ({rel.kind})",
            {"inferred": final.grain.names(), "declared": t.grain.names(), "relation": rel.kind,
             "derivation": [str(r) for r in rel.derivation]},
        ))
    if len(t.grain) <= MAX_GRAIN_FIELDS:
        irr = check_irreducible(t.grain, gfds)
        if not irr:
            diags.append(Diagnostic(
                WARNING, "IrreducibilityFailure", t.node,
                f"declared target grain {t.grain} is reducible to {irr.offending}",
                {"declared": t.grain.names(), "offending": irr.offending.names()},
            ))
    return info


# -- detectors ----------------------------------------------------------------


def _node_detectors(analysis: Analysis, node: PlanNode) -> list[Diagnostic]:
    res = analysis.results[node.id]
    inputs = [analysis.decls[i] for i in node.inputs]
    out: list[Diagnostic] = []
    if len(res.result_grain) <= MAX_GRAIN_FIELDS:
        irr = check_irreducible(res.result_grain, list(res.fds))
        if not irr:
            out.append(Diagnostic(
                ERROR, "IrreducibilityFailure", node.id,
                f"inferred grain {res.result_grain} is reducible to {irr.offending}",
                {"grain": res.result_grain.names(), "offending": irr.offending.names()},
            ))
    if node.op in JOINS:
        out.extend(_escalate(analysis, node, detect_fan_trap(node, res, inputs, analysis.doc.all_global_fds())))
        advice = detect_join_type(node, res, inputs, analysis.doc.all_global_fds())
        if advice:
            out.append(advice)
    hazard = res.note("DedupHazard")
    if node.op == "projection" and hazard and not node.params.get("distinct", False):
        out.append(Diagnostic(
            ERROR, "DedupHazard", node.id,
            f"projection drops grain fields {hazard.fields} under bag semantics; "
            f"rows are not unique on {res.result_grain} without duplicate elimination",
            {"dropped": hazard.fields.names(), "grain": res.result_grain.names(),
             "input_grain": inputs[0].grain.names()},
        ))
    return out


def detect_fan_trap(
    node: PlanNode,
    res: inf.InferenceResult,
    inputs: list[RelationDecl],
    fds: Iterable[FunctionalDependency] = (),
) -> list[Diagnostic]:
    """One FanTrap warning per input side whose rows the join duplicates."""
    if node.op not in JOINS:
        return []
    known = [*fds, *res.fds, *res.implied_fds]
    grain = res.result_grain
    out = []
    for side, decl in enumerate(inputs):
        lifted = res.lift(side, decl.grain)
        res_leq = lifted <= fd_closure(grain, known)
        reach = fd_closure(lifted, known)
        if res_leq and not grain <= reach:
            out.append(Diagnostic(
                WARNING, "FanTrap", node.id,
                f"result grain {grain} is finer than the grain {decl.grain} of {decl.name}; "
                f"each {decl.name} row may appear several times",
                {"side": "left" if side == 0 else "right", "input": decl.name,
                 "input_grain": decl.grain.names(), "result_grain": grain.names(),
                 "lifted_input_grain": lifted.names(), "undetermined": (grain - reach).names()},
            ))
    return out


def _escalate(analysis: Analysis, node: PlanNode, diags: list[Diagnostic]) -> list[Diagnostic]:
    """Raise a fan trap to Error once a downstream aggregate sums duplicated values."""
    out = []
    for d in diags:
        side = 0 if d.evidence["side"] == "left" else 1
        dup_origins: set = set()
        for f in analysis.decls[node.inputs[side]].schema:
            dup_origins |= analysis.origins[node.inputs[side]].get(f, frozenset())
        consumers = []
        for c in analysis.consumers(node.id):
            if c.op != "grouping" or c.id not in analysis.results:
                continue
            src = analysis.origins[c.inputs[0]]
            for a in c.params.get("aggs", ()):
                if a.func in INFLATING and a.field is not None and src.get(a.field, frozenset()) & dup_origins:
                    consumers.append({"node": c.id, "aggregate": str(a)})
        if consumers:
            ev = {**d.evidence, "aggregated_by": consumers}
            d = Diagnostic(ERROR, d.code, d.node, d.message + "; duplicated metrics are aggregated downstream", ev)
        out.append(d)
    return out


def detect_join_type(
    node: PlanNode, res: inf.InferenceResult, inputs: list[RelationDecl], fds: Iterable[FunctionalDependency] = ()
) -> Diagnostic | None:
    if node.op not in EQUI_JOINS or node.flavor == "full":
        return None
    left, right = inputs
    if classify(left, right, fds).kind != EQUAL:
        return None
    k0, k1 = _key_of(node, 0, inputs), _key_of(node, 1, inputs)
    if not (left.grain <= k0 and right.grain <= k1):
        return None
    return Diagnostic(
        ADVICE, "JoinTypeAdvice", node.id,
        f"{left.name} and {right.name} have equal grains joined on the full grain; "
        f"the {node.flavor} join drops rows present on only one side; use a full outer join "
        f"unless both sides cover the same key values",
        {"left_grain": left.grain.names(), "right_grain": right.grain.names(),
         "flavor": node.flavor, "suggested": "full"},
    )


@dataclass(frozen=True)
class _Hop:
    src: str
    dst: str
    node: str
    field: FieldId  # key field on the src side
    src_side: int
    flavor: str


def _join_hops(doc: PipelineDoc, analysis: Analysis) -> list[_Hop]:
    hops = []
    gfds = doc.all_global_fds()
    for node in analysis.order:
        if node.op not in EQUI_JOINS or node.id not in analysis.results:
            continue
        inputs = [analysis.decls[i] for i in node.inputs]
        lk, rk = _key_of(node, 0, inputs), _key_of(node, 1, inputs)
        lo, ro = analysis.origins[node.inputs[0]], analysis.origins[node.inputs[1]]
        for lf, rf in _key_pairs(node, lk, rk, analysis.doc):
            for a_rel, a_f in sorted(lo.get(lf, ()), key=lambda o: (o[0], o[1].key)):
                for b_rel, b_f in sorted(ro.get(rf, ()), key=lambda o: (o[0], o[1].key)):
                    a, b = doc.relation(a_rel), doc.relation(b_rel)
                    if a is None or b is None or a_rel == b_rel:
                        continue
                    if grain_leq(a, b, gfds):
                        hops.append(_Hop(a_rel, b_rel, node.id, a_f, 0, node.flavor))
                    if grain_leq(b, a, gfds):
                        hops.append(_Hop(b_rel, a_rel, node.id, b_f, 1, node.flavor))
    return hops


def _key_pairs(node: PlanNode, lk: TypeSig, rk: TypeSig, doc: PipelineDoc):
    if lk == rk:
        return [(f, f) for f in lk]
    iso = doc.iso_map().get(node.params.get("iso"))
    if iso is None or not iso.pairing:
        return [(a, b) for a in lk for b in rk]
    pairs = []
    for a, b in iso.pairing:
        pairs.append((a, b) if a in lk else (b, a))
    return pairs


def _drops(hop: _Hop) -> bool:
    """Does the join flavor drop src-side rows with a NULL key?"""
    keep = ("left", "full") if hop.src_side == 0 else ("right", "full")
    return hop.flavor not in keep


def detect_chasm_trap(doc: PipelineDoc, analysis: Analysis | None = None) -> list[Diagnostic]:
    analysis = analysis or analyze(doc)
    hops = _join_hops(doc, analysis)
    into: dict[str, list[_Hop]] = {}
    for h in hops:
        into.setdefault(h.dst, []).append(h)
    out: list[Diagnostic] = []
    seen: set[tuple[str, str, str]] = set()
    for hop in hops:
        mid = doc.relation(hop.src)
        if hop.field not in mid.nullable or not _drops(hop):
            continue
        chain = _longest_chain(hop, into)
        if chain is None:
            continue
        key = (hop.node, hop.src, str(hop.field))
        if key in seen:
            continue
        seen.add(key)
        out.append(Diagnostic(
            ERROR, "ChasmTrap", hop.node,
            f"{hop.flavor} join through nullable {hop.src}.{hop.field} drops "
            f"{chain[0]} rows along {' → '.join(chain)}",
            {"chain": chain, "nullable_field": f"{hop.src}.{hop.field}", "flavor": hop.flavor},
        ))
    return out


def _longest_chain(hop: _Hop, into: dict[str, list[_Hop]]) -> list[str] | None:
    """Longest simple path ending in ``hop`` (at least two hops, bounded)."""
    best: list[str] | None = None
    stack = [[hop.src, hop.dst]]
    while stack:
        path = stack.pop()
        if len(path) >= 3 and (best is None or len(path) > len(best) or
                               (len(path) == len(best) and path < best)):
            best = path
        if len(path) > MAX_CHAIN:
            continue
        for h in into.get(path[0], ()):
            if h.src not in path and h.node != hop.node:
                stack.append([h.src, *path])
    return best


# -- explain -------------------------------------------------------------------


def explain(doc: PipelineDoc, node_id: str, analysis: Analysis | None = None) -> str:
    analysis = analysis or analyze(doc)
    rel = doc.relation(node_id)
    if rel is not None:
        lines = [
            f"source {rel.name}",
            f"  schema: {rel.schema}",
            f"  declared grain: {rel.grain}",
        ]
        lines += [f"  FD: {fd}" for fd in rel.fds]
        if rel.nullable:
            lines.append(f"  nullable: {TypeSig(rel.nullable)}")
        return "\n".join(lines) + "\n"
    node = doc.node(node_id)
    if node is None:
        raise UnknownNode(node_id)
    lines = [f"node {node.id}: {node.op}({', '.join(node.inputs)})"]
    if node.op in JOINS:
        lines[0] += f" [{node.flavor}]"
    res = analysis.results.get(node.id)
    if res is None:
        lines.append("  not inferred: an upstream node failed")
    else:
        lines += [f"  {t}" for t in res.trace]
        if res.case_tag != inf.NOT_A_JOIN:
            lines.append(f"  case: {res.case_tag}")
        if res.semantics_tag:
            lines.append(f"  aggregation: {res.semantics_tag}")
        lines += [f"  note {n}" for n in res.notes]
    for d in analysis.report.diagnostics:
        if d.node == node.id:
            lines.append(f"  {d.severity} {d.code}: {d.message}")
    return "\n".join(lines) + "\n"
