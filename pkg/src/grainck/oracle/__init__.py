"""Data-level validation: instance generation, evaluation, grain checks and SQL."""

from .checks import (
    GrainCheck,
    IrreducibilityReport,
    SearchExhausted,
    check_grain,
    check_irreducibility_data,
    check_uniqueness_data,
)
from .evaluate import UnsupportedOp, eval_node, evaluate
from .instances import InfeasibleSpec, Instance, SchemaMismatch, Table, generate_instance
from .sql import emit_sql

__all__ = [
    "GrainCheck",
    "InfeasibleSpec",
    "Instance",
    "IrreducibilityReport",
    "SchemaMismatch",
    "SearchExhausted",
    "Table",
    "UnsupportedOp",
    "check_grain",
    "check_irreducibility_data",
    "check_uniqueness_data",
    "emit_sql",
    "eval_node",
    "evaluate",
    "generate_instance",
]
