"""Canonical string encodings of small labelled, edge-labelled trees.

Used for candidate networks (labels are tuple sets), lattice subtrees and
joint-tuple-trees (labels are tuples).  Two trees get the same canonical
key iff they are isomorphic as unordered trees with labels and directed
edge labels preserved.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence
from urllib.parse import quote

# adjacency: adj[v] = [(neighbour, label of the edge as seen from v), ...]
Adjacency = Sequence[Sequence[tuple[int, str]]]


@lru_cache(maxsize=1 << 16)
def safe(label: str) -> str:
    return quote(label, safe="^.-_>")


def rooted_encoding(labels: Sequence[str], adj: Adjacency, root: int, parent: int = -1) -> str:
    parts = sorted(
        f"{elabel}:{rooted_encoding(labels, adj, child, root)}"
        for child, elabel in adj[root]
        if child != parent
    )
    return f"{labels[root]}({','.join(parts)})"


def centers(adj: Adjacency) -> list[int]:
    """The one or two nodes of minimum eccentricity."""
    n = len(adj)
    if n <= 2:
        return list(range(n))
    degree = [len(a) for a in adj]
    leaves = [v for v in range(n) if degree[v] <= 1]
    remaining = n
    removed = [False] * n
    while remaining > 2:
        nxt = []
        for v in leaves:
            removed[v] = True
            remaining -= 1
            for u, _ in adj[v]:
                if not removed[u]:
                    degree[u] -= 1
                    if degree[u] == 1:
                        nxt.append(u)
        leaves = nxt
    return [v for v in range(n) if not removed[v]]


def canonical_key(labels: Sequence[str], adj: Adjacency) -> str:
    if not labels:
        return "()"
    return min(rooted_encoding(labels, adj, c) for c in centers(adj))


def eccentricity(adj: Adjacency, v: int) -> int:
    seen = {v}
    frontier = [v]
    depth = -1
    while frontier:
        depth += 1
        nxt = []
        for x in frontier:
            for y, _ in adj[x]:
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return depth


def is_tree(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    if n == 0:
        return not edges
    if len(edges) != n - 1:
        return False
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True
