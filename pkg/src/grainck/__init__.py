"""Static grain inference and pipeline verification."""

from .typealg import FieldId, TypeSig
from .grain import FunctionalDependency, IsoWitness, RelationDecl, classify, fd_closure, grain_leq

__all__ = [
    "FieldId",
    "TypeSig",
    "FunctionalDependency",
    "IsoWitness",
    "RelationDecl",
    "classify",
    "fd_closure",
    "grain_leq",
]
__version__ = "0.1.0"
