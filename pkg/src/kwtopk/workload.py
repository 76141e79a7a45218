"""Synthetic corpora and update streams.

``generate_workload`` builds a deterministic corpus whose keywords hit
target match ratios (the fraction of tuples of a relation containing the
keyword) plus an interleaved insert/delete log.  ``random_instance`` and
``random_ops`` produce the small random databases used for differential
testing against the oracle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from .engine import UpdateOp
from .score import KeywordQuery
from .store import SchemaGraph, Store, parse_schema, write_data_dir
from .updatelog import format_op

__all__ = [
    "WorkloadError",
    "WorkloadSpec",
    "Workload",
    "generate_workload",
    "write_workload",
    "random_instance",
    "random_ops",
    "RandomInstance",
]


class WorkloadError(ValueError):
    pass


_BACKGROUND = [f"w{i:03d}" for i in range(400)]


@dataclass
class WorkloadSpec:
    """``sizes``: initial tuples per relation; ``keywords``: keyword -> target
    match ratio in each text relation; ``insert_ratio``: share of inserts in
    the log."""

    schema: str
    sizes: Mapping[str, int]
    keywords: Mapping[str, float]
    insert_ratio: float = 0.5
    ops: int = 1000
    seed: int = 0
    # text length in background words, drawn uniformly per tuple
    min_words: int = 2
    max_words: int = 14

    def validate(self, schema: SchemaGraph) -> None:
        for name in self.sizes:
            if name not in schema.relations:
                raise WorkloadError(f"unknown relation {name!r}")
            if self.sizes[name] < 0:
                raise WorkloadError(f"negative size for {name!r}")
        for kw, ratio in self.keywords.items():
            if not 0.0 < ratio < 1.0:
                raise WorkloadError(f"match ratio of {kw!r} must be in (0, 1), got {ratio}")
            for name, n in self.sizes.items():
                if schema.has_text(name) and n and round(ratio * n) > n:
                    raise WorkloadError(f"{kw!r}: {ratio} of {n} tuples is infeasible")
        if not 0 <= self.min_words <= self.max_words:
            raise WorkloadError("need 0 <= min_words <= max_words")
        if not 0.0 <= self.insert_ratio <= 1.0:
            raise WorkloadError("insert_ratio must be in [0, 1]")


@dataclass
class Workload:
    schema: SchemaGraph
    rows: dict[str, list[dict[str, str]]]
    ops: list[UpdateOp] = field(default_factory=list)

    def store(self) -> Store:
        store = Store(self.schema)
        for name, rows in self.rows.items():
            for row in rows:
                store.insert(name, row)
        return store


def _text(rng: random.Random, words: int, keywords: Sequence[str]) -> str:
    body = [rng.choice(_BACKGROUND) for _ in range(words)]
    for kw in keywords:
        body.insert(rng.randrange(len(body) + 1), kw)
    return " ".join(body)


def generate_workload(spec: WorkloadSpec) -> Workload:
    """Deterministic corpus and update log for ``spec``.

    Each keyword is placed in exactly round(ratio * N) tuples of every text
    relation; inserted tuples contain it with probability ``ratio``.
    Foreign keys point at uniformly chosen live tuples of the target.
    """
    schema = parse_schema(spec.schema)
    spec.validate(schema)
    rng = random.Random(spec.seed)
    order = _dependency_order(schema)
    rows: dict[str, list[dict[str, str]]] = {r: [] for r in schema.relations}
    live: dict[str, list[str]] = {r: [] for r in schema.relations}
    counters = {r: 0 for r in schema.relations}

    def make_row(name: str, kws: Sequence[str]) -> dict[str, str]:
        rs = schema.relations[name]
        counters[name] += 1
        row = {rs.key: f"{name[:1].lower()}{counters[name]}"}
        for i, a in enumerate(rs.text):
            row[a] = _text(rng, rng.randint(spec.min_words, spec.max_words), kws if i == 0 else ())
        for a in rs.plain:
            row[a] = ""
        for e in schema.edges:
            if e.source == name and live[e.target]:
                row[e.attr] = rng.choice(live[e.target])
        return row

    for name in order:
        n = spec.sizes.get(name, 0)
        holders: list[list[str]] = [[] for _ in range(n)]
        if schema.has_text(name):
            for kw, ratio in spec.keywords.items():
                for i in rng.sample(range(n), round(ratio * n)):
                    holders[i].append(kw)
        for i in range(n):
            row = make_row(name, holders[i])
            rows[name].append(row)
            live[name].append(row[schema.relations[name].key])

    ops: list[UpdateOp] = []
    weights = [max(spec.sizes.get(r, 0), 1) for r in order]
    for _ in range(spec.ops):
        insert = rng.random() < spec.insert_ratio
        if not insert and not any(live.values()):
            insert = True
        if insert:
            name = rng.choices(order, weights)[0]
            kws = [kw for kw, ratio in spec.keywords.items() if schema.has_text(name) and rng.random() < ratio]
            row = make_row(name, kws)
            live[name].append(row[schema.relations[name].key])
            ops.append(UpdateOp.insertion(name, row, schema.relations[name].key))
        else:
            name = rng.choices([r for r in order if live[r]], [len(live[r]) for r in order if live[r]])[0]
            pos = rng.randrange(len(live[name]))
            live[name][pos], live[name][-1] = live[name][-1], live[name][pos]
            ops.append(UpdateOp.deletion(name, live[name].pop()))
    return Workload(schema, rows, ops)


def _dependency_order(schema: SchemaGraph) -> list[str]:
    """Referenced relations before referencing ones where the graph allows."""
    names = list(schema.relations)
    deps = {r: {e.target for e in schema.edges if e.source == r and e.target != r} for r in names}
    out: list[str] = []
    while len(out) < len(names):
        ready = [r for r in names if r not in out and deps[r] <= set(out)]
        out.append(ready[0] if ready else next(r for r in names if r not in out))
    return out


def write_workload(workload: Workload, directory, schema_text: str) -> tuple[Path, Path]:
    """Write ``schema.txt``, one TSV per relation under ``data/`` and ``updates.log``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "schema.txt").write_text(schema_text, encoding="utf-8")
    write_data_dir(workload.store(), directory / "data")
    log = directory / "updates.log"
    with log.open("w", encoding="utf-8", newline="\n") as fh:
        for op in workload.ops:
            fh.write(format_op(op, workload.schema) + "\n")
    return directory / "data", log


# -- random instances for differential testing ------------------------------


@dataclass
class RandomInstance:
    schema_text: str
    store: Store
    query: KeywordQuery
    cn_max: int
    rng: random.Random


_VOCAB = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"]


def random_instance(seed: int, max_tuples: int = 120, k: int | None = None) -> RandomInstance:
    """A random schema (2-4 relations) and database with a 1-2 keyword query."""
    rng = random.Random(seed)
    nrel = rng.randint(2, 4)
    names = [f"R{i}" for i in range(nrel)]
    text_rels = [r for r in names if rng.random() < 0.7] or [names[0]]
    edges: list[tuple[str, str, str]] = []
    for i in range(1, nrel):
        a, b = names[i], names[rng.randrange(i)]
        if rng.random() < 0.5:
            a, b = b, a
        edges.append((a, f"f{len(edges)}", b))
    for _ in range(rng.randint(0, 2)):
        a, b = rng.choice(names), rng.choice(names)
        edges.append((a, f"f{len(edges)}", b))
    lines = []
    for r in names:
        fks = ",".join(attr for s, attr, _ in edges if s == r)
        text = "txt" if r in text_rels else ""
        lines.append(f"relation {r} key=id text={text} plain={fks}")
    for s, attr, t in edges:
        lines.append(f"fk {s}.{attr} -> {t}")
    schema_text = "\n".join(lines) + "\n"
    schema = parse_schema(schema_text)
    store = Store(schema)
    keywords = tuple(rng.sample(_VOCAB[:3], rng.randint(1, 2)))
    n = rng.randint(max_tuples // 3, max_tuples)
    ids = {r: 0 for r in names}
    for _ in range(n):
        _insert_random(rng, store, ids)
    query = KeywordQuery(keywords, k=k or rng.choice([1, 5, 10]), delta_k=rng.randint(0, 2))
    return RandomInstance(schema_text, store, query, rng.randint(2, 4), rng)


def _random_row(rng: random.Random, store: Store, ids: dict[str, int], name: str) -> dict[str, str]:
    schema = store.schema
    rs = schema.relations[name]
    ids[name] += 1
    row = {"id": f"{name.lower()}_{ids[name]}"}
    if rs.text:
        words = [rng.choice(_VOCAB) for _ in range(rng.randint(1, 4))]
        if rng.random() < 0.6:
            words = [w for w in words if w not in ("alpha", "beta", "gamma")] or ["eta"]
        row["txt"] = " ".join(words)
    for e in schema.edges:
        if e.source == name:
            live = list(store.tuples[e.target])
            if live and rng.random() < 0.9:
                row[e.attr] = rng.choice(live) if rng.random() < 0.95 else f"{e.target.lower()}_{ids[e.target] + 1}"
            else:
                row[e.attr] = ""
    return row


def _insert_random(rng, store, ids):
    name = rng.choice(list(store.schema.relations))
    store.insert(name, _random_row(rng, store, ids, name))


def random_ops(inst: RandomInstance, count: int, insert_ratio: float = 0.5) -> Iterator[UpdateOp]:
    """Random ops valid against ``inst.store`` at the moment each is drawn.

    The caller must apply each op before drawing the next.
    """
    rng = inst.rng
    store = inst.store
    ids = {r: max((int(t.split("_")[1]) for t in store.tuples[r]), default=0) for r in store.schema.relations}
    for _ in range(count):
        if rng.random() < insert_ratio or len(store) == 0:
            name = rng.choice(list(store.schema.relations))
            yield UpdateOp.insertion(name, _random_row(rng, store, ids, name), "id")
        else:
            rels = [r for r in store.schema.relations if store.tuples[r]]
            name = rng.choice(rels)
            yield UpdateOp.deletion(name, rng.choice(sorted(store.tuples[name])))
