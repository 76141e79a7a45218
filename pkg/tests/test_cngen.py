import itertools
import random

import pytest

from kwtopk.cngen import (
    CandidateNetwork,
    QueryTupleSet,
    TupleSetRef,
    canonical_key,
    cluster_cns,
    generate_cns,
    is_valid_cn,
    kmeans_1d,
)
from kwtopk.fixtures import publication_schema
from kwtopk.store import Tuple, parse_schema

A_Q, A_F = TupleSetRef("Authors", "Q"), TupleSetRef("Authors", "F")
P_Q, P_F = TupleSetRef("Papers", "Q"), TupleSetRef("Papers", "F")
W = TupleSetRef("Writes", "F")


def _edges():
    g = publication_schema()
    wa = next(e for e in g.edges if e.target == "Authors")
    wp = next(e for e in g.edges if e.target == "Papers")
    return wa, wp


def expected_cns():
    """The seven CNs of the publication example, built by hand."""
    wa, wp = _edges()

    def path(end1, mid, end2):
        # end1 <- W -> mid <- W -> end2
        e_end = wp if end1.relation == "Papers" else wa
        e_mid = wa if mid.relation == "Authors" else wp
        return CandidateNetwork((end1, W, mid, W, end2), ((1, 0, e_end), (1, 2, e_mid), (3, 2, e_mid), (3, 4, e_end)))

    return [
        CandidateNetwork((A_Q,), ()),
        CandidateNetwork((P_Q,), ()),
        CandidateNetwork((A_Q, W, P_Q), ((1, 0, wa), (1, 2, wp))),
        path(P_Q, A_F, P_Q),
        path(P_Q, A_Q, P_Q),
        path(A_Q, P_F, A_Q),
        path(A_Q, P_Q, A_Q),
    ]


class TestExampleCNs:
    def test_exact_set(self):
        got = generate_cns(publication_schema(), ["Papers", "Authors"], 5)
        assert len(got) == 7
        assert {c.key for c in got} == {c.key for c in expected_cns()}

    def test_ids_are_sequential(self):
        got = generate_cns(publication_schema(), ["Papers", "Authors"], 5)
        assert [c.id for c in got] == [f"C{i}" for i in range(1, 8)]
        assert [c.size for c in got] == sorted(c.size for c in got)

    def test_size_limit(self):
        got = generate_cns(publication_schema(), ["Papers", "Authors"], 3)
        assert sorted(c.size for c in got) == [1, 1, 3]

    def test_single_query_set(self):
        got = generate_cns(publication_schema(), ["Papers"], 5)
        pub = expected_cns()
        assert {c.key for c in got} == {pub[1].key, pub[3].key}

    def test_no_query_sets(self):
        assert generate_cns(publication_schema(), [], 5) == []

    def test_bad_cn_max(self):
        with pytest.raises(ValueError):
            generate_cns(publication_schema(), ["Papers"], 0)

    def test_same_fk_twice_is_pruned(self):
        wa, wp = _edges()
        cn = CandidateNetwork((P_Q, W, P_Q), ((1, 0, wp), (1, 2, wp)))
        assert not is_valid_cn(cn, publication_schema(), 5)

    def test_free_leaf_invalid(self):
        wa, wp = _edges()
        cn = CandidateNetwork((A_Q, W, P_F), ((1, 0, wa), (1, 2, wp)))
        assert not is_valid_cn(cn, publication_schema(), 5)

    def test_canonical_key_ignores_numbering(self):
        wa, wp = _edges()
        a = CandidateNetwork((A_Q, W, P_Q), ((1, 0, wa), (1, 2, wp)))
        b = CandidateNetwork((P_Q, A_Q, W), ((2, 1, wa), (2, 0, wp)))
        assert canonical_key(a) == canonical_key(b)


class TestClustering:
    FEATURES = [5.15, 2.93, 5.39, 6.84, 5.32, 5.70, 3.03]

    def test_reference_split(self):
        labels, centroids = kmeans_1d(self.FEATURES, 2)
        low = {i + 1 for i, lab in enumerate(labels) if lab == labels[1]}
        assert low == {2, 7}
        assert centroids[0] < centroids[1]

    def test_k_bounds(self):
        assert kmeans_1d([], 3) == ([], [])
        labels, _ = kmeans_1d([1.0, 1.0, 1.0], 5)
        assert len(set(labels)) >= 1
        labels, _ = kmeans_1d(self.FEATURES, 7)
        assert len(set(labels)) == 7

    def test_deterministic(self):
        vals = [random.Random(3).random() for _ in range(50)]
        assert kmeans_1d(vals, 4) == kmeans_1d(list(vals), 4)

    def test_clusters_contiguous(self):
        rng = random.Random(8)
        vals = [rng.uniform(0, 10) for _ in range(40)]
        labels, _ = kmeans_1d(vals, 5)
        order = sorted(range(40), key=lambda i: vals[i])
        seq = [labels[i] for i in order]
        assert seq == sorted(seq)

    @pytest.mark.parametrize("ratio, k", [(0.0, 1), (1.0, 7), (0.6, 4)])
    def test_cluster_count(self, ratio, k):
        cns = generate_cns(publication_schema(), ["Papers", "Authors"], 5)
        clusters = cluster_cns(cns, ratio, features=self.FEATURES)
        assert len(clusters) == k
        assert sorted(c.id for cl in clusters for c in cl.members) == sorted(c.id for c in cns)

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            cluster_cns(expected_cns(), 1.5)


class TestQueryTupleSet:
    def test_order_and_rescore(self):
        qs = QueryTupleSet("R")
        for tid, u in [("a", 1.0), ("b", 3.0), ("c", 3.0)]:
            qs.add(Tuple("R", tid, {}, 1, {}), u)
        assert qs.ids() == ["b", "c", "a"] and qs.top() == 3.0
        qs.rescore({"a": 5.0})
        assert qs.ids()[0] == "a"
        qs.remove("a")
        assert "a" not in qs and len(qs) == 2


# -- exhaustive oracle over labelled trees -----------------------------------


def brute_force_cns(schema, qrels, cn_max):
    sets = [TupleSetRef(r, "Q") for r in sorted(qrels)] + [TupleSetRef(r, "F") for r in schema.relations]
    keys = set()
    for n in range(1, cn_max + 1):
        for parents in itertools.product(*[range(i) for i in range(1, n)]):
            for labels in itertools.product(sets, repeat=n):
                options = []
                for child, parent in enumerate(parents, 1):
                    pr, cr = labels[parent].relation, labels[child].relation
                    opts = [(parent, child, e) for e in schema.edges if e.source == pr and e.target == cr]
                    opts += [(child, parent, e) for e in schema.edges if e.source == cr and e.target == pr]
                    options.append(opts)
                for edges in itertools.product(*options):
                    cn = CandidateNetwork(tuple(labels), tuple(edges))
                    if is_valid_cn(cn, schema, cn_max):
                        keys.add(cn.key)
    return keys


def random_schema(rng):
    names = [f"R{i}" for i in range(rng.randint(2, 3))]
    lines, edges = [], []
    for i in range(1, len(names)):
        edges.append((names[i], f"f{i}", names[rng.randrange(i)]))
    if rng.random() < 0.6:
        edges.append((rng.choice(names), "g", rng.choice(names)))
    for r in names:
        fks = ",".join(a for s, a, _ in edges if s == r)
        text = "t" if r == names[0] or rng.random() < 0.5 else ""
        lines.append(f"relation {r} key=id text={text} plain={fks}")
    lines += [f"fk {s}.{a} -> {t}" for s, a, t in edges]
    return parse_schema("\n".join(lines))


@pytest.mark.parametrize("seed", range(12))
def test_generation_matches_exhaustive_enumeration(seed):
    rng = random.Random(seed)
    schema = random_schema(rng)
    text_rels = [r for r in schema.relations if schema.has_text(r)]
    qrels = rng.sample(text_rels, rng.randint(1, len(text_rels)))
    cn_max = 4 if len(schema.relations) == 2 else 3
    got = generate_cns(schema, qrels, cn_max)
    assert len({c.key for c in got}) == len(got)
    assert {c.key for c in got} == brute_force_cns(schema, qrels, cn_max)
