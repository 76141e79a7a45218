"""Brute-force reference evaluation of a keyword query.

Everything the engine maintains incrementally is recomputed here from the
raw tuples on every call: matched sets, corpus statistics and the joins
(hash joins built from foreign-key values).  Only the CN enumeration and
the scoring formula are shared with the engine.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .cngen import CandidateNetwork, generate_cns
from .jtt import JTT, order_key
from .score import KeywordQuery, size_normalized, tscore
from .store import RelationStats, Store, Tuple, tokenize

__all__ = ["ScoredJTT", "OracleResult", "enumerate_jtts", "brute_force_topk", "recount_stats"]


@dataclass(frozen=True)
class ScoredJTT:
    jtt: JTT
    score: float

    def order_key(self):
        return order_key(self.score, self.jtt)


@dataclass
class OracleResult:
    jtts: list[ScoredJTT] = field(default_factory=list)
    per_cn: Counter = field(default_factory=Counter)
    cns: list[CandidateNetwork] = field(default_factory=list)

    def top(self, k: int) -> list[ScoredJTT]:
        return self.jtts[:k] if k > 0 else []


def recount_stats(store: Store, relation: str) -> RelationStats:
    return _recount(store, relation)[0]


def _recount(store: Store, relation: str) -> tuple[RelationStats, dict[str, set[str]]]:
    st = RelationStats()
    tokens: dict[str, set[str]] = {}
    rs = store.schema.relations[relation]
    for t in store.tuples[relation].values():
        words = set(tokenize(t.text(rs)))
        tokens[t.id] = words
        st.n += 1
        st.dl_sum += sum(len(t.values[a]) for a in rs.text)
        for kw in words:
            st.df[kw] += 1
    return st, tokens


_CN_MEMO: dict = {}


def _cns(schema, qrels, cn_max) -> list[CandidateNetwork]:
    # enumeration depends only on these inputs; memoised because the oracle
    # runs after every op of long streams
    key = (id(schema), frozenset(qrels), cn_max)
    hit = _CN_MEMO.get(key)
    if hit is None or hit[0] is not schema:
        hit = _CN_MEMO[key] = (schema, generate_cns(schema, qrels, cn_max))
    return hit[1]


def enumerate_jtts(store: Store, query: KeywordQuery, cn_max: int) -> OracleResult:
    """Every valid JTT of size <= ``cn_max`` with its current score."""
    schema = store.schema
    kws = query.keywords
    kwset = set(kws)
    stats, tokens = {}, {}
    for r in schema.relations:
        stats[r], tokens[r] = _recount(store, r)
    matched: dict[str, list[Tuple]] = {}
    free: dict[str, list[Tuple]] = {}
    for r in schema.relations:
        rows = sorted(store.tuples[r].values(), key=lambda t: t.id)
        matched[r] = [t for t in rows if tokens[r][t.id] & kwset]
        ids = {t.id for t in matched[r]}
        free[r] = [t for t in rows if t.id not in ids]
    by_id = {r: {t.id: t for t in store.tuples[r].values()} for r in schema.relations}
    referencing: dict = {}
    for e in schema.edges:
        idx: dict[str, list[Tuple]] = {}
        for t in store.tuples[e.source].values():
            v = t.values.get(e.attr, "")
            if v:
                idx.setdefault(v, []).append(t)
        referencing[e] = idx

    out = OracleResult()
    out.cns = _cns(schema, [r for r in schema.relations if matched[r]], cn_max)
    seen: dict[str, ScoredJTT] = {}
    tscores: dict[tuple[str, str], float] = {}

    def tscore_of(t: Tuple) -> float:
        key = t.ref
        if key not in tscores:
            hit = tokens[t.relation][t.id] & kwset
            tscores[key] = tscore(t, kws, stats[t.relation]) if hit else 0.0
        return tscores[key]

    for cn in out.cns:
        for assignment in _join(cn, matched, free, by_id, referencing):
            refs = tuple(t.ref for t in assignment)
            if len(set(refs)) != len(refs):
                continue
            jtt = JTT(refs, cn.edges, cn.id)
            if jtt.identity in seen:
                continue
            seen[jtt.identity] = ScoredJTT(jtt, size_normalized([tscore_of(t) for t in assignment], cn.size))
            out.per_cn[cn.id] += 1
    out.jtts = sorted(seen.values(), key=ScoredJTT.order_key)
    return out


def _join(cn: CandidateNetwork, matched, free, by_id, referencing):
    """All tuple assignments to ``cn``'s nodes satisfying every join edge."""
    n = cn.size
    adj: list[list[tuple[int, object, bool]]] = [[] for _ in range(n)]
    for a, b, e in cn.edges:
        adj[a].append((b, e, True))  # a holds the FK
        adj[b].append((a, e, False))
    start = 0
    order, via, seen = [start], [None], {start}
    i = 0
    while i < len(order):
        v = order[i]
        for w, e, v_is_source in adj[v]:
            if w not in seen:
                seen.add(w)
                order.append(w)
                via.append((v, e, v_is_source))
        i += 1

    def pool(v):
        ts = cn.nodes[v]
        return matched[ts.relation] if ts.is_query else free[ts.relation]

    members = [{t.id for t in pool(v)} for v in range(n)]
    assigned: list[Tuple | None] = [None] * n

    def rec(pos):
        if pos == n:
            yield list(assigned)
            return
        v = order[pos]
        if pos == 0:
            cands = pool(v)
        else:
            u, e, u_is_source = via[pos]
            tu = assigned[u]
            if u_is_source:
                target = by_id[e.target].get(tu.values.get(e.attr, ""))
                cands = [target] if target is not None else []
            else:
                cands = referencing[e].get(tu.id, [])
        for t in cands:
            if t.id in members[v]:
                assigned[v] = t
                yield from rec(pos + 1)
        assigned[v] = None

    yield from rec(0)


def brute_force_topk(store: Store, query: KeywordQuery, k: int, cn_max: int) -> list[ScoredJTT]:
    return enumerate_jtts(store, query, cn_max).top(k)
