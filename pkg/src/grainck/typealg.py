"""Finite-set algebra over field identifiers.

A record type is modelled as a flat set of fields.  Fields are identified by
``(name, provenance)``; the semantic type tag rides along as metadata and
must agree whenever two fields with the same identity meet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator


class TypeMismatch(ValueError):
    """Two fields share an identity but disagree on their semantic type."""


@dataclass(frozen=True)
class FieldId:
    name: str
    semantic_type: str = field(default="", compare=False)
    provenance: str | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("field name must be non-empty")
        if not self.semantic_type:
            object.__setattr__(self, "semantic_type", self.name)

    @property
    def key(self) -> tuple[str, str]:
        return (self.name, self.provenance or "")

    def with_provenance(self, side: str | None) -> "FieldId":
        if side is None:
            prov = self.provenance
        elif self.provenance:
            prov = f"{side}.{self.provenance}"
        else:
            prov = side
        return FieldId(self.name, self.semantic_type, prov)

    def renamed(self, name: str) -> "FieldId":
        return FieldId(name, self.semantic_type, self.provenance)

    def __str__(self) -> str:
        return f"{self.provenance}.{self.name}" if self.provenance else self.name

    @classmethod
    def parse(cls, ref: str, semantic_type: str = "") -> "FieldId":
        """Parse ``"C"`` or ``"lhs.C"`` (provenance may itself be dotted)."""
        prov, _, name = ref.rpartition(".")
        return cls(name, semantic_type, prov or None)


def _merge(fields: Iterable[FieldId]) -> dict[tuple[str, str], FieldId]:
    out: dict[tuple[str, str], FieldId] = {}
    for f in fields:
        seen = out.get(f.key)
        if seen is None:
            out[f.key] = f
        elif seen.semantic_type != f.semantic_type:
            raise TypeMismatch(
                f"field {f} carries semantic type {f.semantic_type!r} "
                f"and {seen.semantic_type!r}"
            )
    return out


@dataclass(frozen=True, init=False)
class TypeSig:
    """An unordered product type; the empty signature is the unit type."""

    fields: frozenset[FieldId]

    def __init__(self, fields: Iterable[FieldId] = ()) -> None:
        object.__setattr__(self, "fields", frozenset(_merge(fields).values()))

    @classmethod
    def of(cls, *refs: str | FieldId) -> "TypeSig":
        return cls(r if isinstance(r, FieldId) else FieldId.parse(r) for r in refs)

    def __iter__(self) -> Iterator[FieldId]:
        return iter(self.sorted())

    def __len__(self) -> int:
        return len(self.fields)

    def __contains__(self, item: object) -> bool:
        return item in self.fields

    def __bool__(self) -> bool:
        return bool(self.fields)

    def sorted(self) -> list[FieldId]:
        return sorted(self.fields, key=lambda f: f.key)

    def names(self) -> list[str]:
        return [str(f) for f in self.sorted()]

    def lookup(self, ref: str | FieldId) -> FieldId | None:
        probe = FieldId.parse(ref) if isinstance(ref, str) else ref
        for f in self.fields:
            if f == probe:
                return f
        return None

    def __or__(self, other: "TypeSig") -> "TypeSig":
        return union_typ(self, other)

    def __and__(self, other: "TypeSig") -> "TypeSig":
        return intersect_typ(self, other)

    def __sub__(self, other: "TypeSig") -> "TypeSig":
        return diff_typ(self, other)

    def __le__(self, other: "TypeSig") -> bool:
        return subset_typ(self, other)

    def __lt__(self, other: "TypeSig") -> bool:
        return proper_subset_typ(self, other)

    def __str__(self) -> str:
        return " × ".join(self.names()) if self.fields else "∅"

    def __repr__(self) -> str:
        return f"TypeSig({{{', '.join(self.names())}}})"


EMPTY = TypeSig()


def union_typ(a: TypeSig, b: TypeSig) -> TypeSig:
    return TypeSig([*a.fields, *b.fields])


def intersect_typ(a: TypeSig, b: TypeSig) -> TypeSig:
    _merge([*a.fields, *b.fields])
    return TypeSig(a.fields & b.fields)


def diff_typ(a: TypeSig, b: TypeSig) -> TypeSig:
    return TypeSig(a.fields - b.fields)


def subset_typ(a: TypeSig, b: TypeSig) -> bool:
    """True when a projection from ``b`` onto ``a`` exists."""
    return a.fields <= b.fields


def proper_subset_typ(a: TypeSig, b: TypeSig) -> bool:
    return subset_typ(a, b) and not subset_typ(b, a)
