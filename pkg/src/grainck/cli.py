"""Command-line front end: ``grainck check|explain|oracle|emit-sql``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Sequence, TextIO

from .document import load_document
from .inference import NOT_A_JOIN
from .pipeline import ERROR, WARNING, LoadError, UnknownNode, VerificationReport, analyze, explain
from .oracle.checks import check_irreducibility_data, check_uniqueness_data
from .oracle.evaluate import UnsupportedOp
from .oracle.instances import InfeasibleSpec, SchemaMismatch
from .oracle.sql import emit_sql

EXIT_OK, EXIT_FAIL, EXIT_LOAD, EXIT_INTERNAL = 0, 1, 2, 3

_COLORS = {"Error": "31", "Warning": "33", "Advice": "36", "Pass": "32", "Fail": "31"}


@dataclass
class CliConfig:
    command: str
    input_path: str
    node: str | None = None
    seed: int = 42
    rows: int = 50
    format: str = "text"
    strict: bool = False


def use_color(stream: TextIO) -> bool:
    if os.environ.get("GRAINCK_COLOR") == "0":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _paint(text: str, key: str, color: bool) -> str:
    return f"\033[{_COLORS[key]}m{text}\033[0m" if color and key in _COLORS else text


def render_text(report: VerificationReport, color: bool = False) -> str:
    lines = [f"verdict: {_paint(report.verdict, report.verdict, color)}"]
    for n in report.nodes:
        grain = " × ".join(n.grain) or "∅"
        tag = f" [{n.case_tag}]" if n.case_tag != NOT_A_JOIN else ""
        if n.semantics_tag:
            tag += f" [{n.semantics_tag}]"
        lines.append(f"  node {n.id} ({n.op}): grain {grain}{tag}")
    if report.target:
        t = report.target
        lines.append(f"  target {t['node']}: declared {' × '.join(t['declared']) or '∅'}")
    for r in report.relations:
        lines.append(f"  grains {r['left']} vs {r['right']}: {r['kind']}")
    if report.diagnostics:
        lines.append("diagnostics:")
    for d in report.diagnostics:
        lines.append(f"  {_paint(d.severity, d.severity, color)} {d.code} at {d.node}: {d.message}")
    return "\n".join(lines) + "\n"


def _check(cfg: CliConfig, out: TextIO) -> int:
    report = analyze(load_document(cfg.input_path)).report
    if cfg.format == "structured":
        out.write(json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n")
    else:
        out.write(render_text(report, use_color(out)))
    if any(d.severity == ERROR for d in report.diagnostics):
        return EXIT_FAIL
    if cfg.strict and any(d.severity == WARNING for d in report.diagnostics):
        return EXIT_FAIL
    return EXIT_OK


def _explain(cfg: CliConfig, out: TextIO) -> int:
    doc = load_document(cfg.input_path)
    out.write(explain(doc, cfg.node))
    return EXIT_OK


def _oracle(cfg: CliConfig, out: TextIO) -> int:
    doc = load_document(cfg.input_path)
    analysis = analyze(doc)
    failed = False
    out.write(f"oracle: seed {cfg.seed}, {cfg.rows} rows per source\n")
    for node in analysis.order:
        if node.id not in analysis.results:
            out.write(f"  {node.id}: skipped (not inferred)\n")
            continue
        grain = analysis.decls[node.id].grain
        try:
            (trial,) = check_uniqueness_data(doc, node.id, seeds=(cfg.seed,), rows=cfg.rows, analysis=analysis)
        except (UnsupportedOp, SchemaMismatch) as exc:
            out.write(f"  {node.id}: skipped ({exc})\n")
            continue
        c = trial.check
        if c.unique:
            line = f"  {node.id}: grain {grain} unique over {c.rows} rows"
        else:
            failed = True
            line = f"  {node.id}: grain {grain} NOT unique, rows {c.collision[0]} and {c.collision[1]} collide"
        if grain:
            irr = check_irreducibility_data(doc, node.id, analysis=analysis)
            tested = irr.tested()
            hit = sum(o.status == "collides" for o in tested)
            line += f"; irreducibility ({irr.method}): {hit}/{len(tested)} proper subsets collide"
            skipped = len(irr.outcomes) - len(tested)
            if skipped:
                line += f", {skipped} implied by FDs"
        out.write(line + "\n")
    return EXIT_FAIL if failed else EXIT_OK


def _emit_sql(cfg: CliConfig, out: TextIO) -> int:
    doc = load_document(cfg.input_path)
    out.write(emit_sql(doc, seed=cfg.seed, rows=cfg.rows))
    return EXIT_OK


COMMANDS = {"check": _check, "explain": _explain, "oracle": _oracle, "emit-sql": _emit_sql}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grainck", description="Static grain inference for data pipelines.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", help="verify a pipeline document")
    p.add_argument("file")
    p.add_argument("--strict", action="store_true", help="treat warnings as failures")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p = sub.add_parser("explain", help="print the grain derivation of one node")
    p.add_argument("file")
    p.add_argument("--node", required=True)
    p = sub.add_parser("oracle", help="check inferred grains on generated data")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rows", type=int, default=50)
    p = sub.add_parser("emit-sql", help="print a SQL script that asserts every grain")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=42)
    return parser


def parse_config(argv: Sequence[str] | None = None) -> CliConfig:
    ns = build_parser().parse_args(argv)
    return CliConfig(
        command=ns.command,
        input_path=ns.file,
        node=getattr(ns, "node", None),
        seed=getattr(ns, "seed", 42),
        rows=getattr(ns, "rows", 50),
        format=getattr(ns, "format", "text"),
        strict=getattr(ns, "strict", False),
    )


def run(cfg: CliConfig, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        return COMMANDS[cfg.command](cfg, out)
    except LoadError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_LOAD
    except UnknownNode as exc:
        err.write(f"error: unknown node {exc.args[0]!r}\n")
        return EXIT_LOAD
    except (UnsupportedOp, InfeasibleSpec) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_LOAD
    except Exception as exc:  # noqa: BLE001
        err.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL


def main(argv: Sequence[str] | None = None) -> int:
    return run(parse_config(argv))


if __name__ == "__main__":
    sys.exit(main())
