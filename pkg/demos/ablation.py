"""Replay one synthetic stream under the cache / clustering / rollback toggles.

Run: python3 demos/ablation.py [scale] [ops]
(defaults 2000 and 2000; the acceptance suite uses 10000 and 10000)
"""

import sys

from kwtopk.bench import DEFAULT_MODES, bench_ablation
from kwtopk.fixtures import PUBLICATION_SCHEMA
from kwtopk.score import KeywordQuery
from kwtopk.workload import WorkloadSpec, generate_workload


def main(scale=2000, ops=2000):
    spec = WorkloadSpec(PUBLICATION_SCHEMA, {"Papers": scale, "Authors": scale, "Writes": 2 * scale},
                        {"kwa": 0.01, "kwb": 0.005}, insert_ratio=0.8, ops=ops, seed=1)
    w = generate_workload(spec)
    rep = bench_ablation(w.store, KeywordQuery(("kwa", "kwb"), k=20, delta_k=1), w.ops, DEFAULT_MODES,
                         cn_max=5, reeval_every=max(1, ops // 5))
    print(rep.format(), end="")
    first = rep.modes[0]
    print(f"per-op work {first.mean_work:.1f} vs from-scratch evaluation {first.mean_reeval_work:.1f}")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:3]))
