import pytest

from kwtopk.bench import DEFAULT_MODES, AblationMismatch, Mode, bench_ablation
from kwtopk.fixtures import PUBLICATION_SCHEMA
from kwtopk.score import KeywordQuery
from kwtopk.workload import WorkloadSpec, generate_workload


@pytest.fixture(scope="module")
def workload():
    return generate_workload(WorkloadSpec(PUBLICATION_SCHEMA, {"Papers": 300, "Authors": 300, "Writes": 600},
                                          {"james": 0.05, "p2p": 0.05}, insert_ratio=0.7, ops=150, seed=2))


def test_modes_agree(workload):
    rep = bench_ablation(workload.store, KeywordQuery(("james", "p2p"), k=10), workload.ops, cn_max=4,
                         reeval_every=50)
    assert [m.mode.name for m in rep.modes] == [m.name for m in DEFAULT_MODES]
    assert all(len(m.op_work) == 150 for m in rep.modes)
    assert len(rep.modes[0].reeval_work) == 3
    assert rep.by_name("cache+clustered").total_accesses <= rep.by_name("nocache+clustered").total_accesses
    assert "norollback" in rep.format()


def test_mismatch_detected(workload):
    def flaky():
        flaky.calls += 1
        store = workload.store()
        if flaky.calls == 2:
            store.delete("Papers", next(t.id for t in store.relation_tuples("Papers") if "p2p" in t.tf))
        return store

    flaky.calls = 0
    with pytest.raises(AblationMismatch):
        bench_ablation(flaky, KeywordQuery(("p2p",), k=50), workload.ops[:5], [Mode("a"), Mode("b")], cn_max=3)
