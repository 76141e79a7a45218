import pytest

from kwtopk.engine import Engine, MaintenancePolicy
from kwtopk.fixtures import publication_store
from kwtopk.score import KeywordQuery

# envelope used by the worked example: 20% df slack, 10% avdl slack
EXAMPLE_POLICY = dict(delta_df=0.2, delta_avdl=0.1, df_max=0.3, avdl_max=0.2)


@pytest.fixture
def pub_store():
    return publication_store()


@pytest.fixture
def query():
    return KeywordQuery(("james", "p2p"), k=3, delta_k=0)


def example_engine(store=None, **kw):
    store = store or publication_store()
    opts = dict(cn_max=5, kmean=0, policy=MaintenancePolicy(**EXAMPLE_POLICY))
    opts.update(kw)
    return Engine(store, KeywordQuery(("james", "p2p"), k=3, delta_k=0), **opts)


@pytest.fixture
def engine():
    return example_engine()
