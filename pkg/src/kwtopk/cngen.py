"""Tuple sets, candidate network (CN) enumeration and CN clustering."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from sortedcontainers import SortedList

from .score import KeywordQuery, ScoreEnvelope, size_normalized, tscore_upper
from .store import SchemaEdge, SchemaGraph, Store, Tuple
from .trees import canonical_key as _canonical, is_tree, safe

__all__ = [
    "TupleSetRef",
    "QueryTupleSet",
    "CandidateNetwork",
    "CNCluster",
    "compute_tuple_sets",
    "generate_cns",
    "canonical_key",
    "max_score",
    "cluster_feature",
    "cluster_cns",
    "kmeans_1d",
]


@dataclass(frozen=True, order=True)
class TupleSetRef:
    relation: str
    kind: str  # "Q" or "F"

    @property
    def label(self) -> str:
        return f"{self.relation}^{self.kind}"

    @property
    def is_query(self) -> bool:
        return self.kind == "Q"

    def __str__(self):
        return self.label


class QueryTupleSet:
    """Matched tuples of one relation ordered by tscore_u, descending.

    Ties are broken by tuple id so the order is deterministic.
    """

    def __init__(self, relation: str):
        self.relation = relation
        self.upper: dict[str, float] = {}
        self.tuples: dict[str, Tuple] = {}
        self.order = SortedList()

    def add(self, t: Tuple, u: float) -> None:
        self.tuples[t.id] = t
        self.upper[t.id] = u
        self.order.add((-u, t.id))

    def remove(self, tid: str) -> None:
        u = self.upper.pop(tid)
        del self.tuples[tid]
        self.order.remove((-u, tid))

    def rescore(self, upper: Mapping[str, float]) -> None:
        self.upper = dict(upper)
        self.order = SortedList((-u, tid) for tid, u in self.upper.items())

    def top(self) -> float | None:
        return -self.order[0][0] if self.order else None

    def ids(self) -> list[str]:
        return [tid for _, tid in self.order]

    def __len__(self):
        return len(self.tuples)

    def __contains__(self, tid):
        return tid in self.tuples

    def __repr__(self):
        return f"{self.relation}^Q[{', '.join(f'{tid}({-nu:.2f})' for nu, tid in self.order)}]"


def compute_tuple_sets(
    store: Store,
    query: KeywordQuery,
    envelopes: Mapping[str, ScoreEnvelope],
) -> dict[str, QueryTupleSet]:
    """Query tuple set of every relation with text attributes.

    Relations without text attributes only ever have a free tuple set and
    are absent from the result; free sets are never materialised.
    """
    out = {}
    for name in store.schema.relations:
        if not store.schema.has_text(name):
            continue
        qs = QueryTupleSet(name)
        env = envelopes[name]
        for tid, _ in store.matched_tuples(name, query.keywords):
            t = store.get(name, tid)
            qs.add(t, tscore_upper(t, query, env))
        out[name] = qs
    return out


@dataclass
class CandidateNetwork:
    """A join tree over tuple sets.

    ``edges`` holds ``(a, b, edge)`` with ``nodes[a]`` on the foreign-key
    side (``edge.source``) and ``nodes[b]`` the referenced side.
    """

    nodes: tuple[TupleSetRef, ...]
    edges: tuple[tuple[int, int, SchemaEdge], ...]
    id: str = ""
    cluster_id: int = -1
    max_score: float = 0.0
    key: str = field(init=False)

    def __post_init__(self):
        self.key = canonical_key(self)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def adjacency(self) -> list[list[tuple[int, str]]]:
        adj: list[list[tuple[int, str]]] = [[] for _ in self.nodes]
        for a, b, e in self.edges:
            adj[a].append((b, f"{safe(e.id)}>"))
            adj[b].append((a, f"{safe(e.id)}<"))
        return adj

    def leaves(self) -> list[int]:
        if self.size == 1:
            return [0]
        adj = self.adjacency()
        return [v for v in range(self.size) if len(adj[v]) == 1]

    def query_relations(self) -> list[str]:
        return [ts.relation for ts in self.nodes if ts.is_query]

    def describe(self) -> str:
        """Human-readable form, e.g. ``P^Q<-W->A^Q`` for paths."""
        if self.size == 1:
            return self.nodes[0].label
        return " ".join(f"{self.nodes[a]}-[{e.attr}]->{self.nodes[b]}" for a, b, e in self.edges)

    def __repr__(self):
        return f"CN({self.id or '?'}: {self.describe()})"


def canonical_key(cn: CandidateNetwork) -> str:
    return _canonical([safe(ts.label) for ts in cn.nodes], cn.adjacency())


def _violates_pruning(nodes: Sequence[TupleSetRef], edges: Sequence[tuple[int, int, SchemaEdge]]) -> bool:
    # a tuple holds one value per foreign key: two neighbours reached through
    # the same FK from the same node would have to be the same tuple
    seen = set()
    for a, _, e in edges:
        if (a, e) in seen:
            return True
        seen.add((a, e))
    return False


def is_valid_cn(cn: CandidateNetwork, schema: SchemaGraph, cn_max: int) -> bool:
    if cn.size < 1 or cn.size > cn_max:
        return False
    if not is_tree(cn.size, [(a, b) for a, b, _ in cn.edges]):
        return False
    for a, b, e in cn.edges:
        if cn.nodes[a].relation != e.source or cn.nodes[b].relation != e.target:
            return False
    for ts in cn.nodes:
        if ts.is_query and not schema.has_text(ts.relation):
            return False
    if any(not cn.nodes[v].is_query for v in cn.leaves()):
        return False
    return not _violates_pruning(cn.nodes, cn.edges)


def generate_cns(schema: SchemaGraph, query_sets: Iterable[str], cn_max: int) -> list[CandidateNetwork]:
    """All valid CNs of size <= ``cn_max`` over the non-empty query sets.

    Partial trees grow one tuple set at a time from every non-empty query
    set; each partial tree is expanded once (deduplicated by canonical key).
    Returned CNs are ordered by (size, key) and numbered ``C1, C2, ...``.
    """
    if cn_max < 1:
        raise ValueError("cn_max must be >= 1")
    qrels = sorted(set(query_sets))
    kinds = {r: (["Q", "F"] if r in qrels else ["F"]) for r in schema.relations}
    frontier = {}
    for r in qrels:
        cn = CandidateNetwork((TupleSetRef(r, "Q"),), ())
        frontier[cn.key] = cn
    seen = dict(frontier)
    for _ in range(cn_max - 1):
        nxt = {}
        for cn in frontier.values():
            for v, ts in enumerate(cn.nodes):
                for edge, v_is_source in schema.incident(ts.relation):
                    other = edge.target if v_is_source else edge.source
                    for kind in kinds[other]:
                        w = len(cn.nodes)
                        new_edge = (v, w, edge) if v_is_source else (w, v, edge)
                        nodes = cn.nodes + (TupleSetRef(other, kind),)
                        edges = cn.edges + (new_edge,)
                        if _violates_pruning(nodes, edges):
                            continue
                        grown = CandidateNetwork(nodes, edges)
                        if grown.key not in seen:
                            seen[grown.key] = grown
                            nxt[grown.key] = grown
        frontier = nxt
    valid = [cn for cn in seen.values() if all(cn.nodes[v].is_query for v in cn.leaves())]
    valid.sort(key=lambda c: (c.size, c.key))
    for i, cn in enumerate(valid, 1):
        cn.id = f"C{i}"
    return valid


def max_score(cn: CandidateNetwork, tops: Mapping[str, float | None]) -> float:
    """Largest score_u any JTT of ``cn`` can reach; 0 if a query slot is empty."""
    vals = []
    for rel in cn.query_relations():
        top = tops.get(rel)
        if top is None:
            return 0.0
        vals.append(top)
    return size_normalized(vals, cn.size)


def cluster_feature(cn: CandidateNetwork, tops: Mapping[str, float | None]) -> float:
    return max_score(cn, tops) * math.log(cn.size)


@dataclass
class CNCluster:
    cluster_id: int
    members: list[CandidateNetwork]
    centroid: float


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def kmeans_1d(values: Sequence[float], k: int, max_iter: int = 100) -> tuple[list[int], list[float]]:
    """Deterministic 1-D K-means.

    Centroids start at K evenly spaced quantiles of the sorted values.  An
    empty cluster is repaired by splitting the widest cluster at its median
    position.  Returns (label per value, centroid per cluster); cluster
    labels are ordered by centroid.
    """
    n = len(values)
    if n == 0:
        return [], []
    k = max(1, min(k, n))
    order = sorted(range(n), key=lambda i: (values[i], i))
    xs = [values[i] for i in order]

    def quantile(q):
        pos = q * (n - 1)
        lo = math.floor(pos)
        hi = min(lo + 1, n - 1)
        return xs[lo] + (xs[hi] - xs[lo]) * (pos - lo)

    centroids = [quantile((j + 0.5) / k) for j in range(k)]
    # labels indexed by sorted position
    labels = None
    for _ in range(max_iter):
        new = []
        for x in xs:
            best = min(range(k), key=lambda j: (abs(x - centroids[j]), j))
            new.append(best)
        new = _repair_empty(new, xs, k)
        if new == labels:
            break
        labels = new
        centroids = [
            math.fsum(x for x, lab in zip(xs, labels) if lab == j) / labels.count(j) for j in range(k)
        ]
    out = [0] * n
    for pos, i in enumerate(order):
        out[i] = labels[pos]
    return out, centroids


def _repair_empty(labels: list[int], xs: Sequence[float], k: int) -> list[int]:
    labels = list(labels)
    # 1-D clusters are contiguous in sorted order; relabel to keep them so
    while True:
        counts = [labels.count(j) for j in range(k)]
        empty = [j for j in range(k) if counts[j] == 0]
        if not empty:
            return _relabel_contiguous(labels)
        # widest cluster by value range, then by size
        def width(j):
            members = [x for x, lab in zip(xs, labels) if lab == j]
            return (max(members) - min(members) if members else -1.0, len(members), -j)

        wide = max(range(k), key=width)
        positions = [p for p, lab in enumerate(labels) if lab == wide]
        if len(positions) < 2:
            return _relabel_contiguous(labels)
        half = positions[len(positions) // 2:]
        for p in half:
            labels[p] = empty[0]
        labels = _relabel_contiguous(labels)


def _relabel_contiguous(labels: list[int]) -> list[int]:
    mapping: dict[int, int] = {}
    out = []
    for lab in labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    # clusters that vanished keep the highest labels (they are empty)
    return out


def cluster_cns(
    cns: Sequence[CandidateNetwork],
    kmean_ratio: float,
    features: Sequence[float] | None = None,
    tops: Mapping[str, float | None] | None = None,
) -> list[CNCluster]:
    """Cluster CNs on Max(C)*ln(size(C)).

    K = max(1, round(kmean_ratio * |cns|)); ratio 0 gives one cluster and
    ratio 1 one cluster per CN.  ``features`` overrides the computed values.
    """
    if not cns:
        return []
    if not 0.0 <= kmean_ratio <= 1.0:
        raise ValueError("kmean_ratio must be in [0, 1]")
    if features is None:
        features = [cluster_feature(cn, tops or {}) for cn in cns]
    for cn in cns:
        cn.max_score = max_score(cn, tops or {})
    k = max(1, _round_half_up(kmean_ratio * len(cns)))
    labels, centroids = kmeans_1d(list(features), k)
    clusters = [CNCluster(j, [], c) for j, c in enumerate(centroids)]
    for cn, lab, f in zip(cns, labels, features):
        cn.cluster_id = lab
        clusters[lab].members.append(cn)
    return [c for c in clusters if c.members]
