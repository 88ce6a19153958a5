"""Data-level grain checks: uniqueness and adversarial irreducibility search."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

from ..grain import FunctionalDependency, RelationDecl, fd_closure
from ..pipeline import Analysis, PipelineDoc, analyze, topo_order
from ..typealg import TypeSig
from .evaluate import evaluate
from .instances import Table, enumerate_instances, count_instances, generate_instance

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 4096
SEARCH_SEEDS = 32
METHODS = ("auto", "seeded", "exhaustive")

COLLIDES, IMPLIED, EXHAUSTED = "collides", "implied", "exhausted"


class SearchExhausted(RuntimeError):
    """Raised on request when some subset never collided."""


@dataclass(frozen=True)
class GrainCheck:
    unique: bool
    collision: tuple[int, int] | None = None
    rows: int = 0

    def __bool__(self) -> bool:
        return self.unique


def check_grain(table: Table, candidate: TypeSig) -> GrainCheck:
    """Do the ``candidate`` columns tell the rows of ``table`` apart?

    Nulls compare equal to each other, as in ``COUNT(DISTINCT ...)`` over a
    row constructor and in ``SELECT DISTINCT``.
    """
    missing = candidate - table.schema
    if missing:
        raise ValueError(f"candidate fields {missing} not in {table.schema}")
    cols = [c for c in table.columns() if c in candidate]
    seen: dict[tuple, int] = {}
    for i, r in enumerate(table.rows):
        k = tuple(r[c] for c in cols)
        j = seen.setdefault(k, i)
        if j != i:
            return GrainCheck(False, (j, i), len(table.rows))
    return GrainCheck(True, None, len(table.rows))


@dataclass(frozen=True)
class SubsetOutcome:
    subset: TypeSig
    status: str
    trial: int | None = None
    witness: tuple[int, int] | None = None

    def __str__(self) -> str:
        where = f" (trial {self.trial}, rows {self.witness})" if self.status == COLLIDES else ""
        return f"{self.subset}: {self.status}{where}"


@dataclass
class IrreducibilityReport:
    node: str
    grain: TypeSig
    method: str
    outcomes: list[SubsetOutcome] = field(default_factory=list)
    trials: int = 0

    @property
    def ok(self) -> bool:
        return all(o.status != EXHAUSTED for o in self.outcomes)

    def tested(self) -> list[SubsetOutcome]:
        return [o for o in self.outcomes if o.status != IMPLIED]

    def exhausted(self) -> list[SubsetOutcome]:
        return [o for o in self.outcomes if o.status == EXHAUSTED]

    def __bool__(self) -> bool:
        return self.ok


def upstream_sources(doc: PipelineDoc, node_id: str) -> list[RelationDecl]:
    """Source relations that ``node_id`` reads, directly or through other nodes."""
    names = {r.name for r in doc.relations}
    if node_id in names:
        return [doc.relation(node_id)]
    need = {node_id}
    for n in reversed(topo_order(doc)):
        if n.id in need:
            need.update(n.inputs)
    return [r for r in doc.relations if r.name in need]


def _node_fds(analysis: Analysis, node_id: str) -> list[FunctionalDependency]:
    decl = analysis.decls[node_id]
    return [*decl.fds, *analysis.doc.all_global_fds()]


def candidate_subsets(grain: TypeSig, fds: Sequence[FunctionalDependency]) -> list[tuple[TypeSig, bool]]:
    """Maximal proper subsets of ``grain`` and whether FDs already make each a key.

    Testing only the maximal subsets suffices: any smaller subset collides
    whenever a superset of it does.
    """
    if not grain:
        return []
    out = []
    for f in grain.sorted():
        s = grain - TypeSig([f])
        out.append((s, grain <= fd_closure(s, fds)))
    return out


def search_domains(decls: Iterable[RelationDecl], i: int) -> dict[str, dict[str, int]]:
    """Small domains for trial ``i``, uniform across relations so shared fields match.

    Trials cycle through four densities.  The sparsest holds non-grain
    fields constant, so every row pair that differs only in grain fields
    still joins; the others add random variation.
    """
    grain_dom, other = ((2, 1), (2, 2), (3, 2), (3, 3))[i % 4]
    out = {}
    for decl in decls:
        k = len(decl.grain)
        per = max(grain_dom, math.ceil(10 ** (1 / k) - 1e-9)) if k and i % 4 == 3 else grain_dom
        out[decl.name] = {f.name: (per if f in decl.grain else other) for f in decl.schema}
    return out


def search_rows(i: int) -> int:
    return 10 + (i * 17) % 51


def _trial_tables(doc: PipelineDoc, sources: list[RelationDecl], seed: int, rows: int, domains) -> dict[str, Table]:
    return {r.name: generate_instance(r, seed, rows, domains.get(r.name) if domains else None) for r in sources}


def _exhaustive_space(sources: list[RelationDecl]) -> int:
    return math.prod(count_instances(r) for r in sources)


def check_irreducibility_data(
    doc: PipelineDoc,
    node_id: str,
    grain: TypeSig | None = None,
    seeds: int = SEARCH_SEEDS,
    method: str = "auto",
    analysis: Analysis | None = None,
    strict: bool = False,
) -> IrreducibilityReport:
    """Search for data on which each maximal proper subset of the grain collides.

    Subsets that the known FDs already force to be keys are reported as
    ``implied`` and not searched.  Subsets that never collide are reported as
    ``exhausted`` (and raise :class:`SearchExhausted` when ``strict``).
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    analysis = analysis or analyze(doc)
    if node_id not in analysis.decls:
        raise KeyError(node_id)
    grain = analysis.decls[node_id].grain if grain is None else grain
    if not grain:
        raise ValueError("irreducibility of an empty grain is trivial")
    sources = upstream_sources(doc, node_id)
    if method == "auto":
        method = "exhaustive" if _exhaustive_space(sources) <= EXHAUSTIVE_LIMIT else "seeded"

    pending: dict[TypeSig, None] = {}
    outcomes: dict[TypeSig, SubsetOutcome] = {}
    for s, implied in candidate_subsets(grain, _node_fds(analysis, node_id)):
        if implied:
            outcomes[s] = SubsetOutcome(s, IMPLIED)
        else:
            pending[s] = None

    report = IrreducibilityReport(node_id, grain, method)

    def probe(table: Table, trial: int) -> None:
        for s in list(pending):
            res = check_grain(table, s)
            if not res.unique:
                outcomes[s] = SubsetOutcome(s, COLLIDES, trial, res.collision)
                del pending[s]

    if method == "exhaustive":
        spaces = [enumerate_instances(r) for r in sources]
        for trial, combo in enumerate(product(*spaces)):
            if not pending:
                break
            tables = {r.name: t for r, t in zip(sources, combo)}
            probe(evaluate(doc, tables, upto=node_id)[node_id], trial)
            report.trials += 1
    else:
        for i in range(seeds):
            if not pending:
                break
            tables = _trial_tables(doc, sources, i, search_rows(i), search_domains(sources, i))
            probe(evaluate(doc, tables, upto=node_id)[node_id], i)
            report.trials += 1

    for s in pending:
        outcomes[s] = SubsetOutcome(s, EXHAUSTED)
        log.warning("no collision found for %s at node %s after %d trials", s, node_id, report.trials)
    report.outcomes = [outcomes[s] for s, _ in candidate_subsets(grain, [])]
    if strict and pending:
        raise SearchExhausted(f"{node_id}: " + ", ".join(str(s) for s in pending))
    return report


@dataclass(frozen=True)
class UniquenessTrial:
    seed: int
    rows: int
    check: GrainCheck


def check_uniqueness_data(
    doc: PipelineDoc,
    node_id: str,
    grain: TypeSig | None = None,
    seeds: Sequence[int] = (0, 1, 2, 3),
    rows: int | Sequence[int] = 50,
    analysis: Analysis | None = None,
) -> list[UniquenessTrial]:
    """Evaluate the pipeline on seeded instances and check the grain on each result."""
    analysis = analysis or analyze(doc)
    grain = analysis.decls[node_id].grain if grain is None else grain
    sources = upstream_sources(doc, node_id)
    sizes = [rows] * len(seeds) if isinstance(rows, int) else list(rows)
    out = []
    for seed, n in zip(seeds, sizes):
        tables = _trial_tables(doc, sources, seed, n, None)
        result = evaluate(doc, tables, upto=node_id)[node_id]
        out.append(UniquenessTrial(seed, n, check_grain(result, grain)))
    return out
