"""The L-lattice: rooted CN trees collapsed on common subtrees.

Sharing only happens inside one CN cluster.  Every node carries an output
buffer; query-tuple-set nodes also carry their processed / unprocessed
tuples ordered by tscore_u (the cursor is the first unprocessed tuple).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from sortedcontainers import SortedList

from .cngen import CandidateNetwork, CNCluster, TupleSetRef
from .store import SchemaEdge
from .trees import eccentricity, rooted_encoding, safe

__all__ = ["Slot", "LatticeNode", "CNInfo", "Lattice", "root_of", "RootedTree", "rooted_tree"]


@dataclass(eq=False)
class Slot:
    """A child position of a node: ``multiplicity`` identical subtrees
    joined through ``edge``.  ``parent_is_source``: the parent tuple holds
    the foreign key."""

    child: "LatticeNode"
    edge: SchemaEdge
    parent_is_source: bool
    multiplicity: int = 1


@dataclass(eq=False)
class LatticeNode:
    id: int
    cluster: int
    tupleset: TupleSetRef
    key: str
    children: list[Slot] = field(default_factory=list)
    parents: list[tuple["LatticeNode", int]] = field(default_factory=list)
    cns: set[str] = field(default_factory=set)
    root_of: str | None = None
    output: set[str] = field(default_factory=set)
    # query nodes only; items are (-tscore_u, tuple id)
    processed: SortedList | None = None
    unprocessed: SortedList | None = None
    processed_ids: set[str] | None = None

    @property
    def relation(self) -> str:
        return self.tupleset.relation

    @property
    def is_query(self) -> bool:
        return self.tupleset.is_query

    def cur(self) -> tuple[float, str] | None:
        return self.unprocessed[0] if self.unprocessed else None

    def buffer_insert(self, tid: str) -> bool:
        if tid in self.output:
            return False
        self.output.add(tid)
        return True

    def buffer_remove(self, tid: str) -> bool:
        if tid not in self.output:
            return False
        self.output.discard(tid)
        return True

    def dump(self) -> str:
        cur = str(len(self.processed)) if self.is_query else "-"
        kind = self.tupleset.kind
        out = ",".join(sorted(self.output))
        cns = ",".join(sorted(self.cns, key=_cn_sort))
        return f"node {self.id} set={self.relation}/{kind} cur={cur} out=[{out}] cns=[{cns}]"

    def __repr__(self):
        kids = ",".join(f"{s.child.id}x{s.multiplicity}" for s in self.children)
        return f"V{self.id}<{self.tupleset}|{kids}>"


def _cn_sort(cid: str):
    return (len(cid), cid)


@dataclass(eq=False)
class RootedTree:
    tupleset: TupleSetRef
    children: list[tuple[SchemaEdge, bool, "RootedTree"]]
    key: str


def rooted_tree(cn: CandidateNetwork, root: int) -> RootedTree:
    adj = cn.adjacency()
    labels = [safe(ts.label) for ts in cn.nodes]
    src_of: dict[tuple[int, int], tuple[SchemaEdge, bool]] = {}
    for a, b, e in cn.edges:
        src_of[(a, b)] = (e, True)
        src_of[(b, a)] = (e, False)

    def build(v, parent):
        kids = []
        for c, _ in adj[v]:
            if c == parent:
                continue
            e, v_is_source = src_of[(v, c)]
            kids.append((e, v_is_source, build(c, v)))
        return RootedTree(cn.nodes[v], kids, rooted_encoding(labels, adj, v, parent))

    return build(root, -1)


def root_of(cn: CandidateNetwork) -> int:
    """Node minimising the longest path to the leaves.

    Ties prefer a free tuple set, then the smallest rooted encoding.
    """
    adj = cn.adjacency()
    labels = [safe(ts.label) for ts in cn.nodes]
    return min(
        range(cn.size),
        key=lambda v: (eccentricity(adj, v), cn.nodes[v].is_query, rooted_encoding(labels, adj, v)),
    )


@dataclass
class CNInfo:
    cn: CandidateNetwork
    root: LatticeNode
    cluster: int
    query_relations: list[str]

    @property
    def size(self) -> int:
        return self.cn.size


class Lattice:
    def __init__(self):
        self.nodes: list[LatticeNode] = []
        self.registry: dict[tuple[int, str], LatticeNode] = {}
        self.cns: dict[str, CNInfo] = {}
        self.centroids: dict[int, float] = {}
        self.theta = float("-inf")

    # -- construction ---------------------------------------------------------

    @classmethod
    def build(cls, clusters: Sequence[CNCluster], initial_members=None) -> "Lattice":
        lat = cls()
        for cl in clusters:
            lat.centroids[cl.cluster_id] = cl.centroid
            for cn in cl.members:
                lat.add_cn(cn, cl.cluster_id, initial_members)
        return lat

    def add_cn(self, cn: CandidateNetwork, cluster: int, initial_members=None) -> list[LatticeNode]:
        """Embed ``cn`` into ``cluster``, reusing identical subtrees.

        Returns the nodes that were created (children before parents).
        ``initial_members(relation)`` yields the (-u, id) items a new query
        node starts with, all unprocessed.
        """
        if cn.key in {info.cn.key for info in self.cns.values()}:
            return []
        created: list[LatticeNode] = []
        tree = rooted_tree(cn, root_of(cn))
        embedded: list[LatticeNode] = []

        def intern(rt: RootedTree) -> LatticeNode:
            kid_nodes = [(e, src, intern(sub)) for e, src, sub in rt.children]
            node = self.registry.get((cluster, rt.key))
            if node is None:
                node = LatticeNode(len(self.nodes), cluster, rt.tupleset, rt.key)
                slots: dict[tuple, Slot] = {}
                for e, src, child in kid_nodes:
                    sk = (e, src, child.id)
                    if sk in slots:
                        slots[sk].multiplicity += 1
                    else:
                        slots[sk] = Slot(child, e, src)
                node.children = sorted(slots.values(), key=lambda s: (s.edge.id, s.parent_is_source, s.child.id))
                for i, s in enumerate(node.children):
                    s.child.parents.append((node, i))
                if node.is_query:
                    items = list(initial_members(node.relation)) if initial_members else []
                    node.processed = SortedList()
                    node.unprocessed = SortedList(items)
                    node.processed_ids = set()
                self.nodes.append(node)
                self.registry[(cluster, rt.key)] = node
                created.append(node)
            embedded.append(node)
            return node

        root = intern(tree)
        for node in embedded:
            node.cns.add(cn.id)
        root.root_of = cn.id
        cn.cluster_id = cluster
        self.cns[cn.id] = CNInfo(cn, root, cluster, cn.query_relations())
        return created

    def nearest_cluster(self, feature: float) -> int:
        return min(self.centroids, key=lambda c: (abs(self.centroids[c] - feature), c))

    # -- queries --------------------------------------------------------------

    def query_nodes(self) -> list[LatticeNode]:
        return [n for n in self.nodes if n.is_query]

    def nodes_of(self, relation: str, kind: str | None = None) -> list[LatticeNode]:
        return [
            n for n in self.nodes if n.relation == relation and (kind is None or n.tupleset.kind == kind)
        ]

    def topological(self) -> list[LatticeNode]:
        """Children before parents (creation order already satisfies this)."""
        return list(self.nodes)

    def dump(self) -> str:
        return "\n".join(n.dump() for n in self.nodes) + ("\n" if self.nodes else "")

    def find(self, relation: str, kind: str, child_sets: Iterable[str] | None = None,
             cluster: int | None = None) -> list[LatticeNode]:
        """Nodes of a tuple set, optionally filtered by their children's tuple-set labels."""
        out = []
        want = None if child_sets is None else sorted(child_sets)
        for n in self.nodes:
            if n.relation != relation or n.tupleset.kind != kind:
                continue
            if cluster is not None and n.cluster != cluster:
                continue
            if want is not None:
                got = sorted(s.child.tupleset.label for s in n.children for _ in range(s.multiplicity))
                if got != want:
                    continue
            out.append(n)
        return out
