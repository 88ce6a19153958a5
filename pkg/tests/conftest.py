import sys
from pathlib import Path

import pytest

from grainck.grain import FunctionalDependency, IsoWitness, RelationDecl
from grainck.typealg import FieldId, TypeSig

HERE = Path(__file__).parent
SAMPLES = HERE.parent / "samples"
sys.path.insert(0, str(HERE))


def sig(*names):
    return TypeSig.of(*names)


def fd(lhs, rhs, scope="global"):
    return FunctionalDependency.of(lhs.split() if isinstance(lhs, str) else lhs,
                                   rhs.split() if isinstance(rhs, str) else rhs, scope)


def rel(name, schema, grain, fds=(), nullable=()):
    """``rel("R", "A B C", "A")`` builds a declaration from space-separated names."""
    s = TypeSig.of(*schema.split())
    g = TypeSig.of(*grain.split())
    decl_fds = tuple(fd(a, b, name) for a, b in fds)
    return RelationDecl(name, s, g, decl_fds, frozenset(FieldId(n) for n in nullable))


def iso(name, left, right, pairing=None):
    l, r = sig(*left.split()), sig(*right.split())
    pairs = tuple((FieldId.parse(a), FieldId.parse(b)) for a, b in pairing) if pairing else ()
    if not pairs and len(l) == len(r) == 1:
        pairs = ((l.sorted()[0], r.sorted()[0]),)
    return IsoWitness(name, l, r, pairs)


@pytest.fixture
def samples():
    return SAMPLES


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
