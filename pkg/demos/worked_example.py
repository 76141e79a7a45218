"""Evaluate "james p2p" on the publication database, then maintain it.

Prints each pipelined round, the final top-3, and the answer after a
deletion and an insertion.  Run: python3 demos/worked_example.py
"""

from kwtopk import Engine, KeywordQuery, MaintenancePolicy, UpdateOp
from kwtopk.fixtures import publication_store


def show(engine, label):
    print(f"{label}: theta={engine.theta:.4f}")
    for rank, r in enumerate(engine.current_topk(), 1):
        print(f"  {rank}. {r.score:.2f}  {r.jtt}  ({r.jtt.cn_id})")


def main():
    policy = MaintenancePolicy(delta_df=0.2, delta_avdl=0.1, df_max=0.3)
    engine = Engine(publication_store(), KeywordQuery(("james", "p2p"), k=3, delta_k=0),
                    cn_max=5, kmean=0, policy=policy, trace=True)
    for cid, info in engine.lattice.cns.items():
        print(f"{cid}: {info.cn.describe()}")
    engine.eval_static()
    for kind, payload in engine.trace:
        if kind == "round":
            print(f"round: node {payload[0]} takes {payload[1]}")
        else:
            print(f"  rejected {payload} (repeats a tuple)")
    show(engine, "after evaluation")
    print(engine.lattice.dump(), end="")

    engine.maintain(UpdateOp.deletion("Authors", "a3"))
    show(engine, "after deleting a3")
    engine.maintain(UpdateOp.insertion("Writes", {"wid": "w9", "aid": "a5", "pid": "p2"}, "wid"))
    show(engine, "after inserting w9 (a5 wrote p2)")


if __name__ == "__main__":
    main()
