"""Embedded in-memory relational store.

Holds the schema graph, tuples, primary/foreign-key indexes, a per-relation
inverted index over text attributes and live corpus statistics
(tuple count, document frequencies, summed document length).
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

__all__ = [
    "SchemaError",
    "StoreError",
    "TraceError",
    "RelationSchema",
    "SchemaEdge",
    "SchemaGraph",
    "Tuple",
    "RelationStats",
    "Store",
    "tokenize",
    "load_schema",
    "parse_schema",
    "load_data_dir",
]

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class SchemaError(ValueError):
    """A schema descriptor is malformed; ``errors`` lists every violation."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class StoreError(ValueError):
    pass


class TraceError(StoreError):
    """The update stream references a tuple that does not exist."""


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on every non-alphanumeric character."""
    return [tok for tok in _TOKEN_SPLIT.split(text.lower()) if tok]


@dataclass(frozen=True)
class RelationSchema:
    name: str
    key: str
    text: tuple[str, ...] = ()
    plain: tuple[str, ...] = ()

    @property
    def attributes(self) -> tuple[str, ...]:
        return (self.key,) + self.text + self.plain


@dataclass(frozen=True, order=True)
class SchemaEdge:
    """Foreign key ``source.attr`` referencing the primary key of ``target``."""

    source: str
    attr: str
    target: str

    @property
    def id(self) -> str:
        return f"{self.source}.{self.attr}->{self.target}"

    def __str__(self) -> str:
        return self.id


@dataclass
class SchemaGraph:
    relations: dict[str, RelationSchema] = field(default_factory=dict)
    edges: list[SchemaEdge] = field(default_factory=list)

    def relation(self, name: str) -> RelationSchema:
        try:
            return self.relations[name]
        except KeyError:
            raise StoreError(f"unknown relation {name!r}") from None

    def incident(self, name: str) -> list[tuple[SchemaEdge, bool]]:
        """Edges touching ``name`` as ``(edge, name_is_source)``.

        A self-referencing edge is reported twice, once per side.
        """
        out = []
        for e in self.edges:
            if e.source == name:
                out.append((e, True))
            if e.target == name:
                out.append((e, False))
        return out

    def has_text(self, name: str) -> bool:
        return bool(self.relations[name].text)


_REL_LINE = re.compile(r"^relation\s+(\S+)((?:\s+\S+=\S*)*)\s*$")
_FK_LINE = re.compile(r"^fk\s+(\S+)\.(\S+)\s*->\s*(\S+)\s*$")


def parse_schema(descriptor: str) -> SchemaGraph:
    """Parse the line-oriented schema descriptor.

    ::

        relation Papers key=pid text=title plain=
        fk Writes.pid -> Papers
    """
    errors: list[str] = []
    rels: dict[str, RelationSchema] = {}
    fks: list[tuple[int, str, str, str]] = []
    for lineno, raw in enumerate(descriptor.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _REL_LINE.match(line)
        if m:
            name = m.group(1)
            opts = dict(tok.split("=", 1) for tok in m.group(2).split())
            unknown = set(opts) - {"key", "text", "plain"}
            if unknown:
                errors.append(f"line {lineno}: unknown option(s) {sorted(unknown)}")
            if "key" not in opts or not opts["key"]:
                errors.append(f"line {lineno}: relation {name!r} has no key")
                continue
            key = opts["key"]
            text = tuple(a for a in opts.get("text", "").split(",") if a)
            plain = tuple(a for a in opts.get("plain", "").split(",") if a)
            if key in text:
                errors.append(f"line {lineno}: key {key!r} of {name!r} is a text attribute")
            if name in rels:
                errors.append(f"line {lineno}: duplicate relation {name!r}")
                continue
            rels[name] = RelationSchema(name, key, text, plain)
            continue
        m = _FK_LINE.match(line)
        if m:
            fks.append((lineno, m.group(1), m.group(2), m.group(3)))
            continue
        errors.append(f"line {lineno}: cannot parse {raw.strip()!r}")

    edges = []
    for lineno, src, attr, dst in fks:
        ok = True
        if src not in rels:
            errors.append(f"line {lineno}: unknown relation {src!r} in fk")
            ok = False
        if dst not in rels:
            errors.append(f"line {lineno}: unknown relation {dst!r} in fk")
            ok = False
        if src in rels and attr not in rels[src].plain:
            errors.append(f"line {lineno}: fk attribute {src}.{attr} missing")
            ok = False
        if ok:
            edge = SchemaEdge(src, attr, dst)
            if edge in edges:
                errors.append(f"line {lineno}: duplicate fk {edge.id}")
            else:
                edges.append(edge)
    if errors:
        raise SchemaError(errors)
    return SchemaGraph(rels, edges)


def load_schema(path) -> SchemaGraph:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Tuple:
    """One row. ``values`` maps every attribute (key included) to a string."""

    relation: str
    id: str
    values: Mapping[str, str]
    dl: int
    tf: Mapping[str, int]

    @classmethod
    def build(cls, schema: RelationSchema, values: Mapping[str, str]) -> "Tuple":
        vals = {a: str(values.get(a, "")) for a in schema.attributes}
        texts = [vals[a] for a in schema.text]
        dl = sum(len(t) for t in texts)
        tf = Counter(tok for t in texts for tok in tokenize(t))
        return cls(schema.name, vals[schema.key], vals, dl, dict(tf))

    @property
    def ref(self) -> tuple[str, str]:
        return (self.relation, self.id)

    def text(self, schema: RelationSchema) -> str:
        return " ".join(self.values[a] for a in schema.text)


class RelationStats:
    """Live N, summed dl and document frequencies of one relation."""

    __slots__ = ("n", "dl_sum", "df")

    def __init__(self):
        self.n = 0
        self.dl_sum = 0
        self.df: Counter = Counter()

    @property
    def avdl(self) -> float:
        return self.dl_sum / self.n if self.n else 0.0

    def snapshot(self) -> tuple:
        return (self.n, self.dl_sum, tuple(sorted(self.df.items())))

    def __repr__(self):
        return f"RelationStats(N={self.n}, avdl={self.avdl:.4f}, df={len(self.df)} terms)"


class Store:
    """Tuples plus indexes; every join probe increments ``accesses``.

    Referential checking is off by default so update logs may reference
    tuples that arrive later; dangling foreign keys simply join nothing.
    """

    def __init__(self, schema: SchemaGraph, *, check_references: bool = False):
        self.schema = schema
        self.check_references = check_references
        self.tuples: dict[str, dict[str, Tuple]] = {r: {} for r in schema.relations}
        self.stats: dict[str, RelationStats] = {r: RelationStats() for r in schema.relations}
        # relation -> keyword -> {tuple id: tf}
        self.index: dict[str, dict[str, dict[str, int]]] = {r: {} for r in schema.relations}
        # edge -> referenced key -> set of referencing ids
        self.reverse: dict[SchemaEdge, dict[str, set[str]]] = {e: {} for e in schema.edges}
        self.accesses = 0

    # -- mutation -----------------------------------------------------------

    def make_tuple(self, relation: str, values: Mapping[str, str]) -> Tuple:
        return Tuple.build(self.schema.relation(relation), values)

    def insert(self, relation: str, values: Mapping[str, str] | Tuple) -> Tuple:
        rs = self.schema.relation(relation)
        t = values if isinstance(values, Tuple) else Tuple.build(rs, values)
        rows = self.tuples[relation]
        if t.id in rows:
            raise StoreError(f"duplicate id {t.id!r} in {relation}")
        if self.check_references:
            for e in self.schema.edges:
                if e.source == relation:
                    ref = t.values.get(e.attr, "")
                    if ref and ref not in self.tuples[e.target]:
                        raise StoreError(f"{relation}.{t.id}: dangling {e.id} = {ref!r}")
        rows[t.id] = t
        st = self.stats[relation]
        st.n += 1
        st.dl_sum += t.dl
        idx = self.index[relation]
        for kw, tf in t.tf.items():
            st.df[kw] += 1
            idx.setdefault(kw, {})[t.id] = tf
        for e in self.schema.edges:
            if e.source == relation:
                ref = t.values.get(e.attr, "")
                if ref:
                    self.reverse[e].setdefault(ref, set()).add(t.id)
        return t

    def delete(self, relation: str, tid: str) -> Tuple:
        self.schema.relation(relation)
        rows = self.tuples[relation]
        try:
            t = rows.pop(tid)
        except KeyError:
            raise TraceError(f"delete of unknown tuple {relation}.{tid}") from None
        st = self.stats[relation]
        st.n -= 1
        st.dl_sum -= t.dl
        idx = self.index[relation]
        for kw in t.tf:
            st.df[kw] -= 1
            if not st.df[kw]:
                del st.df[kw]
            postings = idx[kw]
            del postings[t.id]
            if not postings:
                del idx[kw]
        for e in self.schema.edges:
            if e.source == relation:
                ref = t.values.get(e.attr, "")
                if ref:
                    refs = self.reverse[e][ref]
                    refs.discard(t.id)
                    if not refs:
                        del self.reverse[e][ref]
        return t

    # -- reads --------------------------------------------------------------

    def get(self, relation: str, tid: str) -> Tuple | None:
        return self.tuples[relation].get(tid)

    def __contains__(self, ref) -> bool:
        rel, tid = ref
        return tid in self.tuples.get(rel, ())

    def __len__(self) -> int:
        return sum(len(r) for r in self.tuples.values())

    def relation_tuples(self, relation: str) -> Iterator[Tuple]:
        return iter(self.tuples[relation].values())

    def is_matched(self, t: Tuple, keywords: Iterable[str]) -> bool:
        return any(kw in t.tf for kw in keywords)

    def matched_tuples(self, relation: str, keywords: Iterable[str]) -> list[tuple[str, dict[str, int]]]:
        """Tuples of ``relation`` containing at least one keyword, with per-keyword tf."""
        idx = self.index[relation]
        hits: dict[str, dict[str, int]] = {}
        for kw in keywords:
            for tid, tf in idx.get(kw, {}).items():
                hits.setdefault(tid, {})[kw] = tf
        return sorted(hits.items())

    def join_neighbors(self, t: Tuple, edge: SchemaEdge, toward_referenced: bool) -> list[str]:
        """Ids in the other relation of ``edge`` that join ``t``.

        ``toward_referenced``: ``t`` is the foreign-key holder and the lookup
        follows its reference (0 or 1 id); otherwise ``t`` is the referenced
        side and the reverse index yields every referencing id.  ``t`` may
        already have been removed from the store.
        """
        self.accesses += 1
        if toward_referenced:
            ref = t.values.get(edge.attr, "")
            return [ref] if ref and ref in self.tuples[edge.target] else []
        return sorted(self.reverse[edge].get(t.id, ()))

    def recount(self, relation: str) -> tuple[RelationStats, dict[str, dict[str, int]]]:
        """Stats and postings recomputed from scratch (for consistency checks)."""
        st = RelationStats()
        idx: dict[str, dict[str, int]] = {}
        for t in self.tuples[relation].values():
            st.n += 1
            st.dl_sum += t.dl
            tf = Counter(tokenize(t.text(self.schema.relations[relation])))
            for kw, c in tf.items():
                st.df[kw] += 1
                idx.setdefault(kw, {})[t.id] = c
        return st, idx


def load_data_dir(store: Store, directory) -> int:
    """Load ``<relation>.tsv`` files (header row, key first) into ``store``."""
    directory = Path(directory)
    count = 0
    for name in store.schema.relations:
        path = directory / f"{name}.tsv"
        if not path.exists():
            continue
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
            for row in reader:
                store.insert(name, row)
                count += 1
    return count


def write_data_dir(store: Store, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, rs in store.schema.relations.items():
        with (directory / f"{name}.tsv").open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", quoting=csv.QUOTE_NONE, lineterminator="\n")
            w.writerow(rs.attributes)
            for t in store.tuples[name].values():
                w.writerow([t.values[a] for a in rs.attributes])
