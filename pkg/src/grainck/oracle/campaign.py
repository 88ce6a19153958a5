"""Randomized join configurations and the data-level validation campaign.

Each configuration is a two-source document with a single join node.  The
buckets follow the structure of the join-inference rules: the general rule
(key-portion cases A and B), equal grains (four key shapes), ordered grains
(four key shapes, both directions), incomparable grains and natural joins.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable

from ..grain import EQUAL, INCOMPARABLE, LEQ_LR, LEQ_RL, RelationDecl, classify, fd_closure
from ..inference import CASE_A, CASE_B, JoinKeySpec, bounds, infer_equijoin, infer_natural_join
from ..pipeline import PipelineDoc, PlanNode, analyze
from ..typealg import TypeSig
from .checks import IrreducibilityReport, UniquenessTrial, check_irreducibility_data, check_uniqueness_data

FIELDS = "ABCDEFGH"
MAX_SCHEMA = 6
JOIN = "join"

# (bucket, count); the totals match the reference distribution of 100 cases
BUCKETS: tuple[tuple[str, int], ...] = (
    ("main/A", 10),
    ("main/B", 8),
    ("equal/1", 5),
    ("equal/2", 7),
    ("equal/3", 6),
    ("equal/4", 6),
    ("ordered/1/fwd", 3),
    ("ordered/1/rev", 3),
    ("ordered/2/fwd", 3),
    ("ordered/2/rev", 3),
    ("ordered/3/fwd", 3),
    ("ordered/3/rev", 3),
    ("ordered/4/fwd", 3),
    ("ordered/4/rev", 3),
    ("incomparable/A", 8),
    ("incomparable/B", 9),
    ("natural/A", 8),
    ("natural/B", 9),
)

UNIQUENESS_SEEDS = (0, 1, 2, 3)
UNIQUENESS_ROWS = (10, 60, 120, 200)


@dataclass(frozen=True)
class Config:
    bucket: str
    doc: PipelineDoc = field(compare=False)
    signature: tuple = ()

    @property
    def left(self) -> RelationDecl:
        return self.doc.relations[0]

    @property
    def right(self) -> RelationDecl:
        return self.doc.relations[1]

    @property
    def node(self) -> PlanNode:
        return self.doc.nodes[0]

    def describe(self) -> str:
        key = self.node.params.get("left_key", self.left.schema & self.right.schema)
        return (
            f"{self.bucket}: {self.left.schema} [G={self.left.grain}] ⋈ "
            f"{self.right.schema} [G={self.right.grain}] on {key}"
        )


def _relation(rng: random.Random, name: str) -> RelationDecl:
    size = rng.randint(2, MAX_SCHEMA)
    schema = TypeSig.of(*rng.sample(FIELDS, size))
    grain = TypeSig(rng.sample(schema.sorted(), rng.randint(1, min(4, size))))
    return RelationDecl(name, schema, grain)


def _shape(key: TypeSig, grain: TypeSig) -> int:
    """Key shape relative to a grain: 1 equal or covering, 2 inside, 3 partial, 4 disjoint."""
    if grain <= key:
        return 1
    if key < grain:
        return 2
    if key & grain:
        return 3
    return 4


def _bucket_test(bucket: str) -> Callable[[RelationDecl, RelationDecl, TypeSig, str, str], bool]:
    family, *rest = bucket.split("/")
    want_case = {"A": CASE_A, "B": CASE_B}.get(rest[0])

    def test(left, right, key, case, kind) -> bool:
        if family in ("main", "natural"):
            return case == want_case
        if family == "incomparable":
            return kind == INCOMPARABLE and case == want_case
        if family == "equal":
            if kind != EQUAL:
                return False
            n = _shape(key, left.grain)
            if rest[0] == "1":
                return key == left.grain == right.grain
            return n == int(rest[0]) and not key == left.grain
        if family == "ordered":
            want = LEQ_LR if rest[1] == "fwd" else LEQ_RL
            if kind != want:
                return False
            coarse = right.grain if want == LEQ_LR else left.grain
            return _shape(key, coarse) == int(rest[0])
        raise ValueError(bucket)

    return test


def make_config(bucket: str, left: RelationDecl, right: RelationDecl, key: TypeSig | None) -> Config:
    if key is None:
        node = PlanNode(JOIN, "natural_join", (left.name, right.name), {})
    else:
        node = PlanNode(JOIN, "equijoin", (left.name, right.name), {"left_key": key})
    doc = PipelineDoc([left, right], [node])
    sig = (
        tuple(left.schema.names()), tuple(left.grain.names()),
        tuple(right.schema.names()), tuple(right.grain.names()),
        tuple(key.names()) if key is not None else None,
    )
    return Config(bucket, doc, sig)


def sample_config(bucket: str, rng: random.Random, max_tries: int = 20000) -> Config:
    """Rejection-sample one configuration falling in ``bucket``."""
    test = _bucket_test(bucket)
    natural = bucket.startswith("natural")
    for _ in range(max_tries):
        left, right = _relation(rng, "R1"), _relation(rng, "R2")
        common = (left.schema & right.schema).sorted()
        if not common:
            continue
        if natural:
            key = TypeSig(common)
            res = infer_natural_join(left, right)
        else:
            key = TypeSig(rng.sample(common, rng.randint(1, len(common))))
            res = infer_equijoin(left, right, JoinKeySpec(key, key))
        kind = classify(left, right).kind
        if test(left, right, key, res.case_tag, kind):
            return make_config(bucket, left, right, None if natural else key)
    raise RuntimeError(f"no configuration found for {bucket}")


def generate_configs(seed: int = 0, buckets=BUCKETS) -> list[Config]:
    out: list[Config] = []
    seen: set[tuple] = set()
    for bucket, count in buckets:
        rng = random.Random(f"campaign|{seed}|{bucket}")
        while sum(c.bucket == bucket for c in out) < count:
            cfg = sample_config(bucket, rng)
            if cfg.signature not in seen:
                seen.add(cfg.signature)
                out.append(cfg)
    return out


@dataclass
class ConfigOutcome:
    config: Config
    grain: TypeSig
    case: str
    bounds_ok: bool
    uniqueness: list[UniquenessTrial]
    irreducibility: IrreducibilityReport

    @property
    def unique(self) -> bool:
        return all(t.check.unique for t in self.uniqueness)

    @property
    def ok(self) -> bool:
        return self.bounds_ok and self.unique and self.irreducibility.ok


@dataclass
class CampaignResult:
    outcomes: list[ConfigOutcome]
    seconds: float

    @property
    def agreement(self) -> float:
        return sum(o.ok for o in self.outcomes) / len(self.outcomes) if self.outcomes else 1.0

    def failures(self) -> list[ConfigOutcome]:
        return [o for o in self.outcomes if not o.ok]

    def by_bucket(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for o in self.outcomes:
            out[o.config.bucket] = out.get(o.config.bucket, 0) + 1
        return out


def run_config(cfg: Config, seeds=UNIQUENESS_SEEDS, rows=UNIQUENESS_ROWS) -> ConfigOutcome:
    analysis = analyze(cfg.doc)
    res = analysis.results[JOIN]
    lo, hi = bounds(res, cfg.left, cfg.right)
    fds = [*res.fds, *res.implied_fds]
    bounds_ok = res.result_grain <= fd_closure(lo, fds) and hi <= fd_closure(res.result_grain, fds)
    uniq = check_uniqueness_data(cfg.doc, JOIN, seeds=seeds, rows=rows, analysis=analysis)
    irr = check_irreducibility_data(cfg.doc, JOIN, analysis=analysis)
    return ConfigOutcome(cfg, res.result_grain, res.case_tag, bounds_ok, uniq, irr)


def run_campaign(configs: list[Config] | None = None, seed: int = 0) -> CampaignResult:
    start = time.perf_counter()
    configs = generate_configs(seed) if configs is None else configs
    outcomes = [run_config(c) for c in configs]
    return CampaignResult(outcomes, time.perf_counter() - start)

