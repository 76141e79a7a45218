"""Update-log lines: ``I<TAB>rel<TAB>key<TAB>attr=value...`` or ``D<TAB>rel<TAB>key``.

Attribute values are percent-encoded so they may hold tabs, newlines and
``=`` signs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator
from urllib.parse import quote, unquote

from .engine import DELETE, INSERT, UpdateOp
from .store import SchemaGraph

__all__ = ["LogError", "format_op", "parse_op", "read_log"]


class LogError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def format_op(op: UpdateOp, schema: SchemaGraph | None = None) -> str:
    if op.kind == DELETE:
        return f"D\t{op.relation}\t{op.key}"
    values = dict(op.values or {})
    key_attr = schema.relations[op.relation].key if schema else None
    fields = [f"{a}={quote(v, safe='')}" for a, v in values.items() if a != key_attr]
    return "\t".join(["I", op.relation, op.key, *fields])


def parse_op(line: str, schema: SchemaGraph, lineno: int = 0) -> UpdateOp:
    parts = line.rstrip("\r\n").split("\t")
    kind = parts[0]
    if kind not in (INSERT, DELETE) or len(parts) < 3:
        raise LogError(lineno, f"malformed op {line.strip()!r}")
    rel, key = parts[1], parts[2]
    if rel not in schema.relations:
        raise LogError(lineno, f"unknown relation {rel!r}")
    if not key:
        raise LogError(lineno, "empty key")
    if kind == DELETE:
        if len(parts) != 3:
            raise LogError(lineno, "deletion takes no attributes")
        return UpdateOp.deletion(rel, key)
    rs = schema.relations[rel]
    values = {rs.key: key}
    for field in parts[3:]:
        attr, sep, raw = field.partition("=")
        if not sep or attr not in rs.attributes or attr == rs.key:
            raise LogError(lineno, f"bad attribute {field!r} for {rel}")
        values[attr] = unquote(raw)
    return UpdateOp(INSERT, rel, key, values)


def read_log(path, schema: SchemaGraph) -> Iterator[tuple[int, UpdateOp]]:
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, parse_op(line, schema, lineno)
