"""Joint-tuple-trees (query results) and their canonical identity."""

from __future__ import annotations

from dataclasses import dataclass, field

from .store import SchemaEdge
from .trees import canonical_key, safe

__all__ = ["JTT", "jtt_identity", "order_key"]


def jtt_identity(tuples, edges) -> str:
    labels = [safe(f"{rel}:{tid}") for rel, tid in tuples]
    adj: list[list[tuple[int, str]]] = [[] for _ in tuples]
    for a, b, e in edges:
        adj[a].append((b, f"{safe(e.id)}>"))
        adj[b].append((a, f"{safe(e.id)}<"))
    return canonical_key(labels, adj)


@dataclass(frozen=True)
class JTT:
    """``edges`` holds ``(a, b, edge)`` with ``tuples[a]`` holding the foreign key."""

    tuples: tuple[tuple[str, str], ...]
    edges: tuple[tuple[int, int, SchemaEdge], ...]
    cn_id: str = ""
    identity: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.identity:
            object.__setattr__(self, "identity", jtt_identity(self.tuples, self.edges))

    @property
    def size(self) -> int:
        return len(self.tuples)

    def leaves(self) -> list[int]:
        if self.size == 1:
            return [0]
        deg = [0] * self.size
        for a, b, _ in self.edges:
            deg[a] += 1
            deg[b] += 1
        return [i for i, d in enumerate(deg) if d == 1]

    def __str__(self):
        if self.size == 1:
            return self.tuples[0][1]
        return " ".join(f"{self.tuples[a][1]}->{self.tuples[b][1]}" for a, b, _ in self.edges)


def order_key(score: float, jtt: JTT):
    """Result order: score descending, then smaller trees, then identity."""
    return (-score, jtt.size, jtt.identity)
