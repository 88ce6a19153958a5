from collections import Counter

import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import SAMPLES, rel, sig
from grainck.document import load_document
from grainck.grain import FunctionalDependency, RelationDecl
from grainck.oracle import (
    SchemaMismatch,
    Table,
    UnsupportedOp,
    check_grain,
    check_irreducibility_data,
    check_uniqueness_data,
    emit_sql,
    eval_node,
    evaluate,
    generate_instance,
)
from grainck.oracle.checks import COLLIDES, IMPLIED, candidate_subsets
from grainck.oracle.instances import enumerate_instances, violations
from grainck.pipeline import PipelineDoc, PlanNode, analyze
from grainck.typealg import FieldId, TypeSig
from sql_harness import run_script

FIELDS = list("ABCDEF")


@st.composite
def decls(draw, name="R", max_fields=6):
    schema = draw(st.lists(st.sampled_from(FIELDS), min_size=1, max_size=max_fields, unique=True))
    grain = draw(st.lists(st.sampled_from(schema), min_size=1, max_size=min(4, len(schema)), unique=True))
    rest = [f for f in schema if f not in grain]
    fds = ()
    if rest and draw(st.booleans()):
        lhs = draw(st.lists(st.sampled_from(schema), min_size=1, max_size=2, unique=True))
        rhs = [f for f in rest if f not in lhs][:1]
        if rhs:
            fds = (FunctionalDependency(sig(*lhs), sig(*rhs), name),)
    nullable = frozenset(FieldId(f) for f in rest if draw(st.booleans()))
    return RelationDecl(name, sig(*schema), sig(*grain), fds, nullable)


# -- instance generation -----------------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(decls(), st.integers(0, 50), st.integers(1, 80))
def test_generated_instances_satisfy_their_declaration(decl, seed, rows):
    inst = generate_instance(decl, seed, rows)
    assert violations(decl, inst.rows) == []
    assert 1 <= len(inst) <= rows
    assert inst.schema == decl.schema
    again = generate_instance(decl, seed, rows)
    assert again.rows == inst.rows


def test_nullable_foreign_keys_do_get_nulls():
    doc = load_document(SAMPLES / "chasm_inner.json")
    product = doc.relation("Product")
    nulls = sum(r[FieldId("CategoryId")] is None
                for seed in range(4) for r in generate_instance(product, seed, 30).rows)
    assert nulls > 0


def test_domain_hints_bound_values():
    doc = load_document(SAMPLES / "pipeline2.json")
    chan = doc.relation("SalesChannel")
    inst = generate_instance(chan, 3, 50)
    assert len(inst) <= 3 * 2 * 2
    assert {r[FieldId("ChannelId")] for r in inst.rows} <= {0, 1}


def test_fd_into_the_grain_stays_valid():
    # B determines the grain, so B values follow the grain classes, not the hint
    decl = rel("R", "A B C", "A", fds=[("B", "A")])
    inst = generate_instance(decl, 0, 5, {"A": 3, "B": 1})
    assert violations(decl, inst.rows) == []
    assert len({r[FieldId("B")] for r in inst.rows}) == len(inst)


def test_enumerated_instances_are_valid():
    decl = rel("R", "A B", "A")
    insts = enumerate_instances(decl)
    assert insts and all(not violations(decl, i.rows) for i in insts)


# -- check_grain --------------------------------------------------------------------------


def _table(cols, *rows):
    s = sig(*cols.split())
    fs = s.sorted()
    return Table(s, [dict(zip(fs, r)) for r in rows])


def test_check_grain_examples():
    t = _table("A B", (1, 1), (1, 2), (2, 1))
    assert check_grain(t, sig("A", "B"))
    res = check_grain(t, sig("A"))
    assert not res and res.collision == (0, 1)
    assert check_grain(_table("A", (None,), (None,)), sig("A")).unique is False
    assert check_grain(_table("A"), sig("A"))
    with pytest.raises(ValueError):
        check_grain(t, sig("Z"))


def test_candidate_subsets_mark_fd_implied_keys():
    subs = dict(candidate_subsets(sig("A", "B"), [FunctionalDependency(sig("A"), sig("B"))]))
    assert subs == {sig("B"): False, sig("A"): True}


# -- evaluation vs inference ----------------------------------------------------------------


@st.composite
def join_docs(draw, max_fields=6):
    left = draw(decls("L", max_fields))
    right = draw(decls("R2", max_fields))
    common = (left.schema & right.schema).sorted()
    assume(common)
    key = draw(st.lists(st.sampled_from(common), min_size=1, unique=True))
    flavor = draw(st.sampled_from(["inner", "left", "right", "full"]))
    node = PlanNode("j", "equijoin", ("L", "R2"), {"left_key": TypeSig(key)}, flavor)
    return PipelineDoc([left, right], [node])


@settings(max_examples=100, deadline=None)
@given(join_docs(), st.integers(0, 20))
def test_evaluated_schema_matches_inferred_schema(doc, seed):
    analysis = analyze(doc)
    tables = {r.name: generate_instance(r, seed, 20) for r in doc.relations}
    out = evaluate(doc, tables)["j"]
    assert out.schema == analysis.results["j"].result_schema


@settings(max_examples=100, deadline=None)
@given(join_docs(), st.integers(0, 20))
def test_equijoin_matches_theta_join_plus_merge(doc, seed):
    node = doc.nodes[0]
    assume(node.flavor == "inner")
    left, right = doc.relations
    tables = [generate_instance(r, seed, 15) for r in doc.relations]
    key = node.params["left_key"].sorted()
    theta = " AND ".join(f"lhs.{k.name} = rhs.{k.name}" for k in key)
    tj = eval_node(PlanNode("t", "thetajoin", ("L", "R2"), {"theta": theta}), tables)
    ej = eval_node(node, tables)

    def merged(row):
        out = {}
        for c, v in row.items():
            base = FieldId(c.name)
            if base in key:
                # keep one copy of each key column, under its plain name
                if c.provenance == "lhs":
                    out[base] = v
            else:
                out[c] = v
        return out

    def bag(rows):
        return Counter(tuple(sorted((str(c), v) for c, v in r.items())) for r in rows)

    assert bag(merged(r) for r in tj.rows) == bag(ej.rows)


def test_outer_joins_pad_with_nulls():
    doc = load_document(SAMPLES / "chasm_left.json")
    tables = {r.name: generate_instance(r, 0, 30) for r in doc.relations}
    out = evaluate(doc, tables)
    assert len(out["sales_category"]) == len(out["sales_product"])
    assert len(out["sales_product"]) == len(tables["Sales"])


def test_evaluator_rejects_bad_inputs():
    with pytest.raises(SchemaMismatch):
        eval_node(PlanNode("x", "union", ("a", "b"), {}), [Table(sig("A")), Table(sig("B"))])
    with pytest.raises(UnsupportedOp):
        eval_node(PlanNode("x", "selection", ("a",), {"predicate": "A OR B"}), [Table(sig("A"))])


# -- data-level checks -----------------------------------------------------------------------


@pytest.mark.parametrize("name", ["example1", "example2", "example3", "pipeline2", "pipeline3", "chasm_inner"])
def test_inferred_grains_are_unique_on_samples(name):
    doc = load_document(SAMPLES / f"{name}.json")
    analysis = analyze(doc)
    for node in analysis.order:
        trials = check_uniqueness_data(doc, node.id, analysis=analysis)
        assert all(t.check.unique for t in trials), node.id


def test_irreducibility_search_on_example1():
    doc = load_document(SAMPLES / "example1.json")
    rep = check_irreducibility_data(doc, "joined")
    assert rep.ok and all(o.status == COLLIDES for o in rep.outcomes)


def test_case_b_portions_are_keys_on_data():
    # both A×B and A×C identify the rows of the Case B example; neither collides
    doc = load_document(SAMPLES / "example2.json")
    for grain in (sig("A", "B"), sig("A", "C")):
        trials = check_uniqueness_data(doc, "joined", grain=grain, seeds=range(6), rows=200)
        assert all(t.check.unique for t in trials)
    rep = check_irreducibility_data(doc, "joined")
    assert {str(o.subset): o.status for o in rep.outcomes} == {
        "B × C": COLLIDES, "A × C": IMPLIED, "A × B": IMPLIED,
    }


def test_wrong_grain_fails_uniqueness():
    doc = load_document(SAMPLES / "pipeline2.json")
    trials = check_uniqueness_data(doc, "sales_join", grain=sig("CustomerId", "Date"))
    assert not all(t.check.unique for t in trials)


@settings(max_examples=40, deadline=None)
@given(join_docs(max_fields=3))
def test_exhaustive_and_seeded_searches_agree(doc):
    doc.nodes[0] = PlanNode("j", "equijoin", ("L", "R2"), doc.nodes[0].params, "inner")
    analysis = analyze(doc)
    assume(analysis.results["j"].result_grain)
    ex = check_irreducibility_data(doc, "j", method="exhaustive", analysis=analysis)
    se = check_irreducibility_data(doc, "j", method="seeded", analysis=analysis)
    assert [o.status for o in ex.outcomes] == [o.status for o in se.outcomes]
    assert ex.ok and se.ok


# -- SQL ---------------------------------------------------------------------------------------

RUNNABLE = ["example1", "example2", "example3", "pipeline1", "pipeline2", "pipeline3",
            "chasm_inner", "chasm_left", "chasm_not_null"]


def _sorted_rows(table: Table):
    cols = table.columns()
    return sorted((tuple(r[c] for c in cols) for r in table.rows), key=repr)


@pytest.mark.parametrize("name", RUNNABLE)
def test_sql_tables_match_evaluator(name):
    doc = load_document(SAMPLES / f"{name}.json")
    run = run_script(emit_sql(doc, seed=5, rows=30))
    tables = {r.name: generate_instance(r, 5, 30) for r in doc.relations}
    out = evaluate(doc, tables)
    for node in doc.nodes:
        cols = ", ".join(f'"{c}"' for c in out[node.id].columns())
        got = run.conn.execute(f'SELECT {cols} FROM "{node.id}"').fetchall()
        assert sorted(got, key=repr) == _sorted_rows(out[node.id]), node.id


def test_sql_is_deterministic_and_ansi_shaped():
    doc = load_document(SAMPLES / "pipeline3_full.json")
    a, b = emit_sql(doc, seed=1), emit_sql(doc, seed=1)
    assert a == b
    assert "FULL OUTER JOIN" in a and "PRIMARY KEY" in a
    assert "\r" not in a
