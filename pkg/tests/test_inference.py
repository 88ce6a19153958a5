import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import fd, rel, sig
from goldens import GOLDENS, names
from grainck.grain import (
    IsoWitness,
    RelationDecl,
    check_irreducible,
    fd_closure,
    grain_leq,
)
from grainck.inference import (
    CASE_A,
    CASE_B,
    COARSENED,
    MIXED,
    NOT_A_JOIN,
    ORTHOGONAL,
    TRIVIAL_AGG,
    Aggregate,
    DegenerateInput,
    DuplicateField,
    EmptyNaturalKey,
    FieldNotInSchema,
    InvalidKey,
    JoinKeySpec,
    MissingIso,
    NotUnionCompatible,
    SetGrainMismatch,
    basic_join_grain,
    bounds,
    infer_antijoin,
    infer_equijoin,
    infer_extension,
    infer_grouping,
    infer_natural_join,
    infer_projection,
    infer_rename,
    infer_selection,
    infer_semijoin,
    infer_setop,
    infer_thetajoin,
)
from grainck.typealg import FieldId, TypeSig

PROPS = settings(max_examples=250, deadline=None)


@pytest.mark.parametrize("golden", GOLDENS, ids=lambda g: g.id)
def test_worked_examples(golden):
    res = golden.infer()
    assert names(res.result_grain) == golden.grain
    assert res.case_tag == golden.case
    if golden.exact is not None:
        assert res.result_grain == golden.exact
    assert res.result_grain <= res.result_schema


def test_subset_join_keeps_both_copies_of_unjoined_field():
    res = next(g for g in GOLDENS if g.id == "main-3").infer()
    assert sig("lhs.C", "rhs.C") <= res.result_schema
    assert res.note("DuplicatedField") is not None


def test_case_b_lists_alternative_keys():
    res = next(g for g in GOLDENS if g.id == "main-2").infer()
    note = res.note("AlternativeKeys")
    assert note is not None
    assert sig("A", "C") <= note.fields


def test_natural_self_join_keeps_grain():
    r = rel("R", "A B C", "A B")
    assert infer_natural_join(r, r).result_grain == r.grain


def test_fd_comparable_portions_use_case_a():
    left = rel("L", "A B X", "A X")
    right = rel("R", "A B Y", "B Y")
    key = JoinKeySpec.same("A", "B")
    assert infer_equijoin(left, right, key).case_tag == CASE_B
    res = infer_equijoin(left, right, key, fds=[fd("A", "B")])
    assert res.case_tag == CASE_A
    # A determines B, so B is the coarser portion
    assert res.result_grain == sig("B", "X", "Y")


def test_join_key_errors():
    a, b = rel("A", "K V", "K"), rel("B", "K2 W", "K2")
    with pytest.raises(MissingIso):
        infer_equijoin(a, b, JoinKeySpec(sig("K"), sig("K2")))
    with pytest.raises(MissingIso):
        infer_equijoin(a, b, JoinKeySpec(sig("K"), sig("K2"), "nope"))
    with pytest.raises(InvalidKey):
        infer_equijoin(a, b, JoinKeySpec.same("Z"))
    with pytest.raises(EmptyNaturalKey):
        infer_natural_join(a, b)


# -- random configurations -----------------------------------------------------

FIELDS = list("ABCDEF")


@st.composite
def join_configs(draw):
    def relation(name):
        schema = draw(st.lists(st.sampled_from(FIELDS), min_size=1, max_size=6, unique=True))
        grain = draw(st.lists(st.sampled_from(schema), min_size=1, max_size=4, unique=True))
        return RelationDecl(name, sig(*schema), sig(*grain))

    left, right = relation("R1"), relation("R2")
    common = (left.schema & right.schema).sorted()
    assume(common)
    key = draw(st.lists(st.sampled_from(common), min_size=1, unique=True))
    return left, right, TypeSig(key)


@PROPS
@given(join_configs())
def test_bounds_hold(cfg):
    left, right, key = cfg
    res = infer_equijoin(left, right, JoinKeySpec(key, key))
    lo, hi = bounds(res, left, right)
    fds = [*res.fds, *res.implied_fds]
    as_decl = lambda n, g: RelationDecl(n, g, g)  # noqa: E731
    assert grain_leq(as_decl("lo", lo), as_decl("res", res.result_grain), fds)
    assert grain_leq(as_decl("res", res.result_grain), as_decl("hi", hi), fds)
    assert res.result_grain <= res.result_schema
    assert check_irreducible(res.result_grain, res.fds)


@PROPS
@given(join_configs())
def test_identical_keys_reduce_to_closed_form(cfg):
    left, right, key = cfg
    res = infer_equijoin(left, right, JoinKeySpec(key, key))
    grain, case = basic_join_grain(left.grain, right.grain, key)
    assert case == res.case_tag
    assert {f.name for f in res.result_grain} == {f.name for f in grain}


def _primed(right: RelationDecl, key: TypeSig) -> tuple[RelationDecl, IsoWitness]:
    ren = {f: FieldId(f.name + "2") for f in key}
    sub = lambda s: TypeSig(ren.get(f, f) for f in s)  # noqa: E731
    decl = RelationDecl(right.name, sub(right.schema), sub(right.grain))
    pairing = tuple((f, ren[f]) for f in key.sorted())
    return decl, IsoWitness("k", key, sub(key), pairing)


@PROPS
@given(join_configs())
def test_isomorphic_keys_reduce_to_identical_keys(cfg):
    left, right, key = cfg
    plain = infer_equijoin(left, right, JoinKeySpec(key, key))
    right2, w = _primed(right, key)
    via_iso = infer_equijoin(left, right2, JoinKeySpec(key, w.right, "k"), isos={"k": w})
    assert via_iso.result_grain == plain.result_grain
    assert via_iso.case_tag == plain.case_tag


@PROPS
@given(join_configs())
def test_natural_join_is_equijoin_on_common_fields(cfg):
    left, right, _ = cfg
    common = left.schema & right.schema
    assert infer_natural_join(left, right).result_grain == \
        infer_equijoin(left, right, JoinKeySpec(common, common)).result_grain


# -- unary operators -------------------------------------------------------------

ORDER_DETAIL = rel("OrderDetail", "OrderId LineItemId Amount CustomerId", "OrderId LineItemId")


def test_selection_keeps_everything():
    res = infer_selection(ORDER_DETAIL, "Amount > 10")
    assert (res.result_schema, res.result_grain) == (ORDER_DETAIL.schema, ORDER_DETAIL.grain)
    empty = RelationDecl("E", sig("A"), TypeSig())
    assert infer_selection(empty).result_grain == TypeSig()


def test_projection_keeping_the_grain():
    order = rel("Order", "OrderId OrderDate Total", "OrderId")
    res = infer_projection(order, sig("OrderId", "OrderDate"))
    assert res.result_grain == sig("OrderId")
    assert res.note("DedupHazard") is None


def test_projection_dropping_the_grain():
    res = infer_projection(ORDER_DETAIL, sig("OrderId", "Amount"))
    assert res.result_grain == sig("OrderId", "Amount")
    assert res.note("DedupHazard") is not None


def test_projection_minimizes_under_fds():
    cust = rel("CustOrders", "OrderId CustomerId RegionId", "OrderId", fds=[("CustomerId", "RegionId")])
    res = infer_projection(cust, sig("CustomerId", "RegionId"))
    assert res.result_grain == sig("CustomerId")
    assert res.note("DedupHazard") is not None
    with pytest.raises(FieldNotInSchema):
        infer_projection(cust, sig("Nope"))


def test_extension_keeps_grain():
    res = infer_extension(ORDER_DETAIL, FieldId("RowNumber"))
    assert res.result_grain == ORDER_DETAIL.grain
    assert FieldId("RowNumber") in res.result_schema
    assert fd_closure(ORDER_DETAIL.grain, res.fds) >= sig("RowNumber")
    with pytest.raises(DuplicateField):
        infer_extension(ORDER_DETAIL, FieldId("Amount"))
    with pytest.raises(DegenerateInput):
        infer_extension(RelationDecl("E", TypeSig(), TypeSig()), FieldId("X"))


def test_rename_round_trip():
    res = infer_rename(ORDER_DETAIL, FieldId("LineItemId"), FieldId("Line"))
    assert res.result_grain == sig("OrderId", "Line")
    back = infer_rename(res.as_decl("tmp"), FieldId("Line"), FieldId("LineItemId"))
    assert back.result_grain == ORDER_DETAIL.grain
    assert back.result_schema == ORDER_DETAIL.schema
    assert infer_rename(ORDER_DETAIL, FieldId("Amount"), FieldId("Amt")).result_grain == ORDER_DETAIL.grain
    with pytest.raises(DuplicateField):
        infer_rename(ORDER_DETAIL, FieldId("Amount"), FieldId("OrderId"))
    with pytest.raises(FieldNotInSchema):
        infer_rename(ORDER_DETAIL, FieldId("Nope"), FieldId("X"))


@pytest.mark.parametrize(
    "cols, tag",
    [
        ("OrderId LineItemId Amount", TRIVIAL_AGG),
        ("OrderId", COARSENED),
        ("CustomerId", ORTHOGONAL),
        ("OrderId CustomerId", MIXED),
    ],
)
def test_grouping_tags(cols, tag):
    res = infer_grouping(ORDER_DETAIL, sig(*cols.split()), [Aggregate(FieldId("Total"), "SUM", FieldId("Amount"))])
    assert res.semantics_tag == tag
    assert res.result_schema == sig(*cols.split(), "Total")


def test_grouping_sales_by_customer_and_date():
    join = rel("SalesJoin", "CustomerId Date ChannelId ProductId Amount", "CustomerId Date ChannelId ProductId")
    res = infer_grouping(join, sig("CustomerId", "Date"), [Aggregate(FieldId("Sales"), "SUM", FieldId("Amount"))])
    assert res.result_grain == sig("CustomerId", "Date")
    assert res.semantics_tag == COARSENED


def test_grouping_grain_is_minimized():
    r = rel("R", "OrderId CustomerId RegionId Amount", "OrderId", fds=[("CustomerId", "RegionId")])
    res = infer_grouping(r, sig("CustomerId", "RegionId"))
    assert res.result_grain == sig("CustomerId")


def test_set_operations():
    a = rel("A", "K V", "K")
    for kind in ("union", "intersection", "difference"):
        res = infer_setop(kind, a, a)
        assert (res.result_schema, res.result_grain) == (a.schema, a.grain)
    with pytest.raises(NotUnionCompatible):
        infer_setop("union", a, rel("B", "K W", "K"))
    with pytest.raises(SetGrainMismatch):
        infer_setop("union", a, rel("B", "K V", "K V"))


def test_theta_join_product_grain():
    a = rel("A", "K V", "K")
    b = rel("B", "K W", "W")
    res = infer_thetajoin(a, b, "V < W")
    assert res.result_grain == sig("lhs.K", "W")
    assert res.case_tag == NOT_A_JOIN
    assert sig("lhs.K", "rhs.K") <= res.result_schema
    with pytest.raises(DegenerateInput):
        infer_thetajoin(a, RelationDecl("E", TypeSig(), TypeSig()))


def test_semi_and_anti_join_keep_left():
    a, b = rel("A", "K V", "K V"), rel("B", "K W", "W")
    for infer in (infer_semijoin, infer_antijoin):
        res = infer(a, b, JoinKeySpec.same("K"))
        assert (res.result_schema, res.result_grain) == (a.schema, a.grain)
    with pytest.raises(InvalidKey):
        infer_semijoin(a, b, JoinKeySpec.same("V"))


def test_case_tags_are_distinct():
    assert len({CASE_A, CASE_B, NOT_A_JOIN}) == 3
