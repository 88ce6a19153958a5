"""Run emitted SQL scripts against the stdlib sqlite3 engine."""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass, field


@dataclass
class ScriptRun:
    checks: dict[str, tuple[int, int]] = field(default_factory=dict)
    conn: sqlite3.Connection | None = None

    def failing(self) -> list[str]:
        return [name for name, (rows, distinct) in self.checks.items() if rows != distinct]

    def scalar(self, query: str):
        return self.conn.execute(query).fetchone()[0]


def statements(script: str) -> list[str]:
    out, buf = [], ""
    for line in script.splitlines(keepends=True):
        if not buf and (not line.strip() or line.lstrip().startswith("--")):
            continue
        buf += line
        if sqlite3.complete_statement(buf):
            out.append(buf.strip())
            buf = ""
    if buf.strip():
        raise ValueError(f"incomplete statement: {buf[:80]!r}")
    return out


def run_script(script: str) -> ScriptRun:
    """Execute every statement; SELECT statements are the grain assertions."""
    conn = sqlite3.connect(":memory:")
    run = ScriptRun(conn=conn)
    for stmt in statements(script):
        cur = conn.execute(stmt)
        if stmt.upper().startswith("SELECT"):
            name, rows, distinct = cur.fetchone()
            run.checks[name] = (rows, distinct)
    return run
