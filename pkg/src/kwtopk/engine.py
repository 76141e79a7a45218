"""Pipelined top-k evaluation over the lattice and its continual maintenance.

The engine owns the lattice, the query tuple sets, the score envelopes and
the ``topk`` result set.  Three invariants hold between operations:

* every node's output buffer is exactly its processed tuples that join at
  least one output tuple of every child;
* every unprocessed query tuple has a node bound strictly below ``theta``;
* ``results`` holds every valid JTT whose tuples are all processed at the
  lattice nodes of its CN.

Together they make the first k results with score >= theta the exact top-k.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from sortedcontainers import SortedList

from .cngen import (
    QueryTupleSet,
    cluster_cns,
    cluster_feature,
    compute_tuple_sets,
    generate_cns,
)
from .jtt import JTT, order_key
from .lattice import Lattice, LatticeNode, Slot
from .score import (
    KeywordQuery,
    ScoreEnvelope,
    cn_tuple_upper,
    size_normalized,
    tscore,
    tscore_upper,
)
from .store import SchemaEdge, Store, Tuple

__all__ = [
    "UpdateOp",
    "MaintenancePolicy",
    "OpMetrics",
    "Result",
    "Engine",
    "validate_jtt",
]

NEG = -math.inf
INSERT = "I"
DELETE = "D"


@dataclass(frozen=True)
class UpdateOp:
    kind: str
    relation: str
    key: str
    values: Mapping[str, str] | None = None

    @classmethod
    def insertion(cls, relation: str, values: Mapping[str, str], key_attr: str | None = None) -> "UpdateOp":
        key = values[key_attr] if key_attr else next(iter(values.values()))
        return cls(INSERT, relation, str(key), dict(values))

    @classmethod
    def deletion(cls, relation: str, key: str) -> "UpdateOp":
        return cls(DELETE, relation, str(key))


@dataclass
class MaintenancePolicy:
    """Initial envelope slack, growth steps and caps (fractions; Δk in results)."""

    delta_df: float = 0.01
    delta_avdl: float = 0.01
    df_growth: float = 0.02
    avdl_growth: float = 0.02
    dk_growth: int = 2
    df_max: float = 0.15
    avdl_max: float = 0.15
    dk_max: int = 20

    def __post_init__(self):
        if min(self.df_growth, self.avdl_growth, self.dk_growth) <= 0:
            raise ValueError("growth steps must be positive")
        if self.df_max < self.delta_df or self.avdl_max < self.delta_avdl:
            raise ValueError("caps must not be below the initial values")


@dataclass
class OpMetrics:
    op_seq: int = 0
    kind: str = ""
    store_accesses: int = 0
    inserts_recursed: int = 0
    deletes_recursed: int = 0
    scored: int = 0
    topk_ge_theta: int = 0
    theta: float = NEG
    delta_k: int = 0
    micros: int = 0
    enlargements: int = 0
    resumes: int = 0
    rollbacks: int = 0

    @property
    def work(self) -> int:
        """Deterministic cost: index probes, recursion steps and score computations."""
        return self.store_accesses + self.inserts_recursed + self.deletes_recursed + self.scored


@dataclass(eq=False)
class Result:
    jtt: JTT
    pairs: frozenset  # (lattice node id, tuple id)
    score: float
    score_u: float
    rels: frozenset = frozenset()  # relations of its matched tuples

    @property
    def identity(self) -> str:
        return self.jtt.identity

    def order_key(self):
        return order_key(self.score, self.jtt)


def validate_jtt(jtt: JTT, is_matched) -> bool:
    """Distinct tuples and keyword-bearing leaves."""
    if len(set(jtt.tuples)) != len(jtt.tuples):
        return False
    return all(is_matched(jtt.tuples[i]) for i in jtt.leaves())


class Engine:
    """Continual top-k keyword query over one store.

    >>> eng = Engine(store, KeywordQuery(("james", "p2p"), k=3, delta_k=0), cn_max=5, kmean=0)
    >>> eng.eval_static()        # doctest: +SKIP
    """

    def __init__(
        self,
        store: Store,
        query: KeywordQuery,
        *,
        cn_max: int = 6,
        kmean: float = 0.6,
        policy: MaintenancePolicy | None = None,
        cache: bool = True,
        rollback: bool = True,
        trace: bool = False,
    ):
        self.store = store
        self.query = query
        self.keywords = query.keywords
        self.k = query.k
        self.delta_k = query.delta_k
        self.cn_max = cn_max
        self.kmean = kmean
        self.policy = policy or MaintenancePolicy()
        self.cache_enabled = cache
        self.rollback_enabled = rollback
        # (event, payload) pairs: ("round", (node id, tuple id)), ("reject", JTT)
        self.trace: list | None = [] if trace else None
        schema = store.schema

        self.envelopes: dict[str, ScoreEnvelope] = {
            r: ScoreEnvelope.create(r, self.keywords, store.stats[r], self.policy.delta_df, self.policy.delta_avdl)
            for r in schema.relations
            if schema.has_text(r)
        }
        self.qsets: dict[str, QueryTupleSet] = compute_tuple_sets(store, query, self.envelopes)
        self._ever = {r for r, qs in self.qsets.items() if len(qs)}

        self.results: dict[str, Result] = {}
        self._by_u = SortedList()
        self._by_tuple: dict[tuple[str, str], set[str]] = {}
        self._by_pair: dict[tuple[int, str], set[str]] = {}
        self._ts: dict[str, dict[str, float]] = {r: {} for r in schema.relations}
        self._cache: dict = {}
        self._kheap: list[float] | None = None
        self._m = OpMetrics()
        self.op_seq = 0
        self.totals = OpMetrics(kind="total")

        cns = generate_cns(schema, self._ever, cn_max)
        self._next_cn = len(cns) + 1
        clusters = cluster_cns(cns, kmean, tops=self._tops())
        self.lattice = Lattice.build(clusters, self._initial_members)
        self._qnodes = self.lattice.query_nodes()
        self.evaluated = False
        # scoring every matched tuple is part of any from-scratch evaluation
        self.setup_work = sum(len(qs) for qs in self.qsets.values())

    # -- small helpers --------------------------------------------------------

    @property
    def theta(self) -> float:
        return self.lattice.theta

    @theta.setter
    def theta(self, value: float) -> None:
        self.lattice.theta = value

    def _tops(self) -> dict[str, float | None]:
        return {r: qs.top() for r, qs in self.qsets.items()}

    def _initial_members(self, relation: str):
        return list(self.qsets[relation].order)

    def is_matched(self, t: Tuple) -> bool:
        return any(kw in t.tf for kw in self.keywords)

    def _ref_matched(self, ref) -> bool:
        t = self.store.get(*ref)
        return t is not None and self.is_matched(t)

    def _neighbors(self, t: Tuple, edge: SchemaEdge, toward_referenced: bool) -> list[str]:
        if not self.cache_enabled:
            return self.store.join_neighbors(t, edge, toward_referenced)
        key = (t.relation, t.id, edge, toward_referenced)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self.store.join_neighbors(t, edge, toward_referenced)
        return hit

    def _processed_tuple(self, node: LatticeNode, tid: str) -> Tuple | None:
        if node.is_query:
            if tid in node.processed_ids:
                return self.qsets[node.relation].tuples[tid]
            return None
        t = self.store.get(node.relation, tid)
        if t is None or self.is_matched(t):
            return None
        return t

    def _tuple_at(self, node: LatticeNode, tid: str) -> Tuple:
        if node.is_query:
            return self.qsets[node.relation].tuples[tid]
        return self.store.get(node.relation, tid)

    def _tscore(self, rel: str, tid: str) -> float:
        cache = self._ts[rel]
        v = cache.get(tid)
        if v is None:
            t = self.store.get(rel, tid)
            v = tscore(t, self.keywords, self.store.stats[rel]) if self.is_matched(t) else 0.0
            cache[tid] = v
        return v

    def _tscore_u(self, rel: str, tid: str) -> float:
        qs = self.qsets.get(rel)
        return qs.upper.get(tid, 0.0) if qs is not None else 0.0

    def live_score(self, jtt: JTT) -> float:
        return size_normalized([self._tscore(r, i) for r, i in jtt.tuples], jtt.size)

    def upper_score(self, jtt: JTT) -> float:
        return size_normalized([self._tscore_u(r, i) for r, i in jtt.tuples], jtt.size)

    # -- bounds -----------------------------------------------------------------

    def _peer_tops(self, cn_id: str, relation: str) -> list[float] | None:
        info = self.lattice.cns[cn_id]
        peers = []
        skipped = False
        for r in info.query_relations:
            if r == relation and not skipped:
                skipped = True
                continue
            top = self.qsets[r].top()
            if top is None:
                return None
            peers.append(top)
        return peers

    def cn_tuple_upper(self, cn_id: str, relation: str, u: float) -> float:
        peers = self._peer_tops(cn_id, relation)
        if peers is None:
            raise ValueError(f"{cn_id} has an empty query tuple set")
        return cn_tuple_upper(u, peers, self.lattice.cns[cn_id].size)

    def node_upper(self, node: LatticeNode, u: float | None = None) -> float:
        """Best score_u a tuple with bound ``u`` (default: the cursor) can reach at ``node``.

        -inf when a child buffer is empty or the node is exhausted.
        """
        if u is None:
            cur = node.cur()
            if cur is None:
                return NEG
            u = -cur[0]
        for s in node.children:
            if not s.child.output:
                return NEG
        best = NEG
        for cid in node.cns:
            peers = self._peer_tops(cid, node.relation)
            if peers is None:
                continue
            b = cn_tuple_upper(u, peers, self.lattice.cns[cid].size)
            if b > best:
                best = b
        return best

    def _best_node(self) -> tuple[LatticeNode | None, float]:
        best, chosen = NEG, None
        for node in self._qnodes:
            b = self.node_upper(node)
            if b > best:
                best, chosen = b, node
        return chosen, best

    # -- Insert / EvalPath / Delete --------------------------------------------

    def can_join_one_output(self, slot: Slot, t: Tuple) -> bool:
        """Whether ``t`` (at the slot's parent) joins an output tuple of the slot's child."""
        output = slot.child.output
        for cid in self._neighbors(t, slot.edge, slot.parent_is_source):
            if cid in output:
                return True
        return False

    def insert_proc(self, node: LatticeNode, t: Tuple) -> None:
        self._insert(node, t, [], [])

    def _insert(self, node: LatticeNode, t: Tuple, path: list, slots: list) -> None:
        self._m.inserts_recursed += 1
        if t.id not in node.output:
            for s in node.children:
                if not self.can_join_one_output(s, t):
                    return
            node.buffer_insert(t.id)
        path.append((node, t))
        slots.append(None)
        if node.root_of is not None:
            self._collect(node, self.eval_path(node, t, path, slots))
        for parent, si in node.parents:
            s = parent.children[si]
            slots[-1] = si
            for pid in self._neighbors(t, s.edge, not s.parent_is_source):
                pt = self._processed_tuple(parent, pid)
                if pt is not None:
                    self._insert(parent, pt, path, slots)
        path.pop()
        slots.pop()

    def eval_path(self, node: LatticeNode, t: Tuple, path=None, slots=None) -> list:
        """Trees rooted at ``t`` built from output buffers.

        ``path[-1]`` is ``(node, t)``; earlier entries are the chain the
        insertion came up through, and ``slots[i]`` is the child slot of
        ``path[i + 1]`` holding ``path[i]``.  Along that chain exactly one copy
        of the slot is pinned to the recorded tuple.
        """
        chain = []
        if path:
            for i in range(len(path) - 2, -1, -1):
                chain.append((slots[i], path[i][0], path[i][1]))
        return self._expand(node, t, chain, 0)

    def _expand(self, node: LatticeNode, t: Tuple, chain, pos: int) -> list:
        forced = chain[pos] if pos < len(chain) else None
        combos = [()]
        for si, s in enumerate(node.children):
            for copy in range(s.multiplicity):
                if forced is not None and si == forced[0] and copy == 0:
                    opts = self._expand(forced[1], forced[2], chain, pos + 1)
                else:
                    opts = []
                    out = s.child.output
                    for cid in self._neighbors(t, s.edge, s.parent_is_source):
                        if cid in out:
                            opts.extend(self._expand(s.child, self._tuple_at(s.child, cid), chain, len(chain)))
                if not opts:
                    return []
                combos = [c + ((si, o),) for c in combos for o in opts]
        return [(node, t, c) for c in combos]

    def _flatten(self, tree, cn_id: str) -> tuple[JTT, frozenset]:
        tuples, edges, pairs = [], [], []

        def rec(tr):
            node, t, kids = tr
            i = len(tuples)
            tuples.append(t.ref)
            pairs.append((node.id, t.id))
            for si, sub in kids:
                s = node.children[si]
                j = rec(sub)
                edges.append((i, j, s.edge) if s.parent_is_source else (j, i, s.edge))
            return i

        rec(tree)
        return JTT(tuple(tuples), tuple(edges), cn_id), frozenset(pairs)

    def validate_jtt(self, jtt: JTT) -> bool:
        return validate_jtt(jtt, self._ref_matched)

    def _collect(self, root: LatticeNode, trees: Iterable) -> None:
        for tree in trees:
            jtt, pairs = self._flatten(tree, root.root_of)
            if jtt.identity in self.results:
                continue
            if not self.validate_jtt(jtt):
                if self.trace is not None:
                    self.trace.append(("reject", jtt))
                continue
            self._add_result(jtt, pairs)

    def _add_result(self, jtt: JTT, pairs: frozenset) -> None:
        rels = frozenset(rel for rel, tid in jtt.tuples if rel in self.qsets and tid in self.qsets[rel].tuples)
        r = Result(jtt, pairs, self.live_score(jtt), self.upper_score(jtt), rels)
        ident = jtt.identity
        self.results[ident] = r
        self._m.scored += 1
        self._by_u.add((-r.score_u, ident))
        for ref in jtt.tuples:
            self._by_tuple.setdefault(ref, set()).add(ident)
        for p in pairs:
            self._by_pair.setdefault(p, set()).add(ident)
        if self._kheap is not None:
            self._push_score(r.score)

    def _remove_result(self, ident: str) -> None:
        r = self.results.pop(ident)
        self._by_u.remove((-r.score_u, ident))
        for ref in r.jtt.tuples:
            s = self._by_tuple[ref]
            s.discard(ident)
            if not s:
                del self._by_tuple[ref]
        for p in r.pairs:
            s = self._by_pair[p]
            s.discard(ident)
            if not s:
                del self._by_pair[p]

    def delete_proc(self, node: LatticeNode, t: Tuple) -> None:
        """Remove ``t`` from ``node``'s buffer and cascade to parents that lose their only support."""
        self._m.deletes_recursed += 1
        if not node.buffer_remove(t.id):
            return
        for parent, si in node.parents:
            s = parent.children[si]
            for pid in self._neighbors(t, s.edge, not s.parent_is_source):
                if pid not in parent.output:
                    continue
                pt = self._tuple_at(parent, pid)
                if not self.can_join_one_output(s, pt):
                    self.delete_proc(parent, pt)

    # -- static evaluation ----------------------------------------------------

    def _push_score(self, score: float) -> None:
        heap = self._kheap
        if len(heap) < self.k + self.delta_k:
            heapq.heappush(heap, score)
        elif score > heap[0]:
            heapq.heapreplace(heap, score)

    def _kth_score(self) -> float:
        heap = self._kheap
        return heap[0] if len(heap) >= self.k + self.delta_k else NEG

    def _process_cur(self, node: LatticeNode) -> None:
        item = node.unprocessed.pop(0)
        if self.trace is not None:
            self.trace.append(("round", (node.id, item[1])))
        node.processed.add(item)
        node.processed_ids.add(item[1])
        self.insert_proc(node, self.qsets[node.relation].tuples[item[1]])

    def _pipeline(self, rounds: int | None = None) -> bool:
        """Process cursors in bound order until none can reach the (k+Δk)-th score.

        Stops early after ``rounds`` cursor steps; returns whether it finished.
        """
        self._kheap = heapq.nlargest(self.k + self.delta_k, (r.score for r in self.results.values()))
        heapq.heapify(self._kheap)
        done = False
        try:
            while rounds is None or rounds > 0:
                node, bound = self._best_node()
                if node is None or bound < self._kth_score():
                    done = True
                    break
                self._process_cur(node)
                if rounds is not None:
                    rounds -= 1
            if done:
                self.theta = self._kth_score()
        finally:
            self._kheap = None
        return done

    def eval_static(self, rounds: int | None = None) -> list[Result]:
        """Initial pipelined evaluation; returns the top-k.

        With ``rounds`` set, stops after that many cursor steps so the
        intermediate state can be inspected; calling again continues.
        """
        self._m = OpMetrics(kind="eval")
        start = time.perf_counter_ns()
        acc = self.store.accesses
        self.evaluated = self._pipeline(rounds)
        self._cache.clear()
        self.last_eval = self._finish(start, acc)
        return self.current_topk()

    # -- maintenance ----------------------------------------------------------

    def _partition(self):
        """Results with score_u >= theta, i.e. those whose score is kept live."""
        theta = self.theta
        for neg_u, ident in self._by_u:
            if -neg_u < theta:
                break
            yield self.results[ident]

    def _rescore_partition(self, rel: str) -> None:
        # a tuple score depends only on its own relation's statistics
        for r in self._partition():
            if rel in r.rels:
                r.score = self.live_score(r.jtt)
                self._m.scored += 1

    def _rescore_all(self) -> None:
        by_u = []
        for ident, r in self.results.items():
            r.score = self.live_score(r.jtt)
            r.score_u = self.upper_score(r.jtt)
            by_u.append((-r.score_u, ident))
        self._by_u = SortedList(by_u)
        self._m.scored += len(self.results)

    def _refresh_upper(self, rel: str) -> None:
        qs = self.qsets[rel]
        env = self.envelopes[rel]
        qs.rescore({tid: tscore_upper(t, self.keywords, env) for tid, t in qs.tuples.items()})
        self._m.scored += len(qs)
        for node in self._qnodes:
            if node.relation != rel:
                continue
            proc = [(-qs.upper[tid], tid) for tid in node.processed_ids]
            node.processed = SortedList(proc)
            node.unprocessed = SortedList(item for item in qs.order if item[1] not in node.processed_ids)

    def _purge_tuple(self, ref) -> None:
        for ident in sorted(self._by_tuple.get(ref, ())):
            self._remove_result(ident)

    def count_upper_ge_theta(self) -> int:
        return self._by_u.bisect_right((-self.theta, "\U0010ffff"))

    def count_ge_theta(self) -> int:
        theta = self.theta
        return sum(1 for r in self._partition() if r.score >= theta)

    def maintain(self, op: UpdateOp) -> OpMetrics:
        """Apply one insertion/deletion to the store and repair the top-k."""
        if not self.evaluated:
            raise RuntimeError("eval_static must run before maintain")
        self.op_seq += 1
        self._m = OpMetrics(op_seq=self.op_seq, kind=op.kind)
        start = time.perf_counter_ns()
        acc = self.store.accesses
        self._cache.clear()
        rel = op.relation
        if op.kind == INSERT:
            t = self.store.insert(rel, op.values)
        elif op.kind == DELETE:
            t = self.store.delete(rel, op.key)
        else:
            raise ValueError(f"unknown op kind {op.kind!r}")
        self._ts[rel] = {}
        matched = self.is_matched(t)

        if op.kind == DELETE:
            self._purge_tuple(t.ref)
            if matched:
                item = (-self.qsets[rel].upper[t.id], t.id)
                self.qsets[rel].remove(t.id)
                for node in self._qnodes:
                    if node.relation == rel:
                        if t.id in node.processed_ids:
                            node.processed_ids.discard(t.id)
                            node.processed.remove(item)
                        else:
                            node.unprocessed.remove(item)

        env = self.envelopes.get(rel)
        violations = env.check(self.store.stats[rel]) if env is not None else []
        if violations:
            p = self.policy
            env.enlarge(self.store.stats[rel], violations, p.df_growth, p.avdl_growth, p.df_max, p.avdl_max)
            self._refresh_upper(rel)
            self._rescore_all()
            self._m.enlargements += 1
        else:
            self._rescore_partition(rel)

        if op.kind == INSERT:
            if not matched:
                for node in self.lattice.nodes_of(rel, "F"):
                    self.insert_proc(node, t)
            else:
                self._insert_matched(t, env)
        else:
            for node in self.lattice.nodes_of(rel):
                if t.id in node.output:
                    self.delete_proc(node, t)

        self._drain()
        ge = self.count_ge_theta()
        if ge < self.k and self.theta > NEG:
            self.delta_k = min(self.delta_k + self.policy.dk_growth, max(self.policy.dk_max, self.delta_k))
            self._resume()
        elif self.rollback_enabled and self.count_upper_ge_theta() > self.k + self.delta_k:
            self.rollback()
        self._cache.clear()
        return self._finish(start, acc)

    def _insert_matched(self, t: Tuple, env: ScoreEnvelope) -> None:
        rel = t.relation
        u = tscore_upper(t, self.keywords, env)
        self._m.scored += 1
        self.qsets[rel].add(t, u)
        for node in self._qnodes:
            if node.relation == rel:
                node.unprocessed.add((-u, t.id))
        if rel not in self._ever:
            self._splice(rel)
        for node in self._qnodes:
            if node.relation != rel:
                continue
            if self.node_upper(node, u) >= self.theta:
                node.unprocessed.remove((-u, t.id))
                node.processed.add((-u, t.id))
                node.processed_ids.add(t.id)
                self.insert_proc(node, t)

    def _splice(self, rel: str) -> None:
        """Add the CNs made possible by a newly non-empty query tuple set."""
        self._ever.add(rel)
        known = {info.cn.key for info in self.lattice.cns.values()}
        fresh = [cn for cn in generate_cns(self.store.schema, self._ever, self.cn_max) if cn.key not in known]
        for cn in fresh:
            cn.id = f"C{self._next_cn}"
            self._next_cn += 1
        tops = self._tops()
        created = []
        if not self.lattice.centroids:
            for cl in cluster_cns(fresh, self.kmean, tops=tops):
                self.lattice.centroids[cl.cluster_id] = cl.centroid
                for cn in cl.members:
                    created += self.lattice.add_cn(cn, cl.cluster_id, self._initial_members)
        else:
            for cn in fresh:
                cl = self.lattice.nearest_cluster(cluster_feature(cn, tops))
                created += self.lattice.add_cn(cn, cl, self._initial_members)
        for node in created:
            if node.is_query:
                continue
            s0 = node.children[0]
            cands = set()
            for cid in s0.child.output:
                ct = self._tuple_at(s0.child, cid)
                cands.update(self._neighbors(ct, s0.edge, not s0.parent_is_source))
            for pid in sorted(cands):
                pt = self._processed_tuple(node, pid)
                if pt is not None and all(self.can_join_one_output(s, pt) for s in node.children):
                    node.output.add(pid)
        self._qnodes = self.lattice.query_nodes()

    def _drain(self) -> None:
        while True:
            node, bound = self._best_node()
            if node is None or bound < self.theta:
                return
            self._process_cur(node)

    def _resume(self) -> None:
        self._m.resumes += 1
        self._rescore_all()
        self._pipeline()

    def rollback(self) -> None:
        """Raise theta to the (k+Δk)-th score and un-process hopeless tuples.

        Only results in the live partition can reach theta, so the
        (k+Δk)-th score is taken there; theta never decreases here.
        """
        need = self.k + self.delta_k
        scores = sorted((r.score for r in self._partition()), reverse=True)
        if len(scores) < need or scores[need - 1] <= self.theta:
            return
        self._m.rollbacks += 1
        self.theta = scores[need - 1]
        for node in self._qnodes:
            qs = self.qsets[node.relation]
            while node.processed:
                item = node.processed[-1]
                if self.node_upper(node, -item[0]) >= self.theta:
                    break
                node.processed.pop()
                node.processed_ids.discard(item[1])
                node.unprocessed.add(item)
                if item[1] in node.output:
                    for ident in sorted(self._by_pair.get((node.id, item[1]), ())):
                        self._remove_result(ident)
                    self.delete_proc(node, qs.tuples[item[1]])

    def _finish(self, start: int, acc: int) -> OpMetrics:
        m = self._m
        m.store_accesses = self.store.accesses - acc
        m.topk_ge_theta = self.count_ge_theta()
        m.theta = self.theta
        m.delta_k = self.delta_k
        m.micros = (time.perf_counter_ns() - start) // 1000
        tot = self.totals
        for f in ("store_accesses", "inserts_recursed", "deletes_recursed", "scored", "micros",
                  "enlargements", "resumes", "rollbacks"):
            setattr(tot, f, getattr(tot, f) + getattr(m, f))
        return m

    # -- reporting --------------------------------------------------------------

    def current_topk(self, k: int | None = None) -> list[Result]:
        k = self.k if k is None else k
        theta = self.theta
        live = [r for r in self._partition() if r.score >= theta]
        live.sort(key=Result.order_key)
        return live[:k]

    def partitions(self) -> tuple[int, int, int]:
        """Sizes of (score >= θ), (score < θ <= score_u) and (score_u < θ)."""
        theta = self.theta
        top = pot = 0
        for r in self._partition():
            if r.score >= theta:
                top += 1
            else:
                pot += 1
        return top, pot, len(self.results) - top - pot

    # -- auditing -------------------------------------------------------------

    def audit(self) -> list[str]:
        """Check the engine invariants by recomputation; returns violations."""
        problems = []
        store = self.store
        saved = store.accesses
        expected: dict[int, set[str]] = {}
        for node in self.lattice.nodes:
            if node.is_query:
                processed = set(node.processed_ids)
                if processed != {tid for _, tid in node.processed}:
                    problems.append(f"V{node.id}: processed list/set mismatch")
                if processed & {tid for _, tid in node.unprocessed}:
                    problems.append(f"V{node.id}: tuple both processed and unprocessed")
                members = set(self.qsets[node.relation].tuples)
                if processed | {tid for _, tid in node.unprocessed} != members:
                    problems.append(f"V{node.id}: cursor lists do not cover the tuple set")
            else:
                processed = {t.id for t in store.relation_tuples(node.relation) if not self.is_matched(t)}
            out = set()
            for tid in processed:
                t = store.get(node.relation, tid)
                if all(
                    any(c in expected[s.child.id] for c in store.join_neighbors(t, s.edge, s.parent_is_source))
                    for s in node.children
                ):
                    out.add(tid)
            expected[node.id] = out
            if out != node.output:
                problems.append(
                    f"V{node.id} semi-join: missing {sorted(out - node.output)} extra {sorted(node.output - out)}"
                )
        for node in self._qnodes:
            b = self.node_upper(node)
            if b >= self.theta and b > NEG:
                problems.append(f"V{node.id}: unprocessed bound {b} >= theta {self.theta}")
        for ident, r in self.results.items():
            for ref in r.jtt.tuples:
                if ref not in store:
                    problems.append(f"result {r.jtt} holds dead tuple {ref}")
            for nid, tid in r.pairs:
                if tid not in self.lattice.nodes[nid].output:
                    problems.append(f"result {r.jtt} pair V{nid}/{tid} not in output")
        if not problems:
            for r in self.results.values():
                live = self.live_score(r.jtt)
                if live > r.score_u:
                    problems.append(f"result {r.jtt}: score {live} above score_u {r.score_u}")
                if r.score_u >= self.theta and live != r.score:
                    problems.append(f"result {r.jtt}: stale score in the live partition")
        store.accesses = saved
        return problems
