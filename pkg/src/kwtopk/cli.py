"""Command-line harness.

``python -m kwtopk run``       load data, register a query, replay an update log
``python -m kwtopk generate``  write a synthetic corpus and update log
``python -m kwtopk bench``     replay one stream under the ablation modes
``python -m kwtopk fixture``   write the built-in publication example database
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from .bench import DEFAULT_MODES, AblationMismatch, bench_ablation
from .engine import Engine, MaintenancePolicy, OpMetrics, Result
from .fixtures import PUBLICATION_SCHEMA, publication_store
from .oracle import brute_force_topk
from .score import KeywordQuery
from .store import SchemaError, Store, StoreError, load_data_dir, load_schema, write_data_dir
from .updatelog import LogError, read_log
from .workload import WorkloadError, WorkloadSpec, generate_workload, write_workload

__all__ = ["RunConfig", "run_continual", "snapshot_lines", "METRIC_COLUMNS", "main"]

METRIC_COLUMNS = (
    "op_seq", "kind", "store_accesses", "inserts_recursed", "deletes_recursed",
    "topk_ge_theta", "theta", "delta_k", "micros",
)


@dataclass
class RunConfig:
    schema: Path
    data: Path | None
    query: str
    k: int = 100
    delta_k: int = 1
    cn_max: int = 6
    kmean: float = 0.6
    policy: MaintenancePolicy = field(default_factory=MaintenancePolicy)
    log: Path | None = None
    cadence: int = 0
    oracle_check: bool = False
    cache: bool = True
    rollback: bool = True
    metrics: Path | None = None
    snapshots: Path | None = None
    deterministic: bool = False
    lattice_dump: Path | None = None


def _fmt(x: float) -> str:
    if x == -math.inf:
        return "-inf"
    return f"{x:.6f}"


def snapshot_lines(op_seq: int, results: list[Result]) -> list[str]:
    """``op_seq rank score cn_id tree`` per result; an empty top-k is rank 0."""
    if not results:
        return [f"{op_seq}\t0\t\t\t"]
    return [
        f"{op_seq}\t{rank}\t{_fmt(r.score)}\t{r.jtt.cn_id}\t{r.jtt.identity}"
        for rank, r in enumerate(results, 1)
    ]


def _metric_row(m: OpMetrics, deterministic: bool) -> str:
    vals = [
        m.op_seq, m.kind, m.store_accesses, m.inserts_recursed, m.deletes_recursed,
        m.topk_ge_theta, _fmt(m.theta), m.delta_k, 0 if deterministic else m.micros,
    ]
    return "\t".join(str(v) for v in vals)


def _oracle_mismatch(engine: Engine) -> str | None:
    got = [(r.jtt.identity, r.score) for r in engine.current_topk()]
    want = [(r.jtt.identity, r.score) for r in brute_force_topk(engine.store, engine.query, engine.k, engine.cn_max)]
    if got == want:
        return None
    return f"engine {got} != oracle {want}"


def run_continual(cfg: RunConfig, out: TextIO | None = None, err: TextIO | None = None) -> int:
    """Returns 0 on success, 1 on an oracle mismatch, 2 on bad input."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        schema = load_schema(cfg.schema)
        store = Store(schema)
        if cfg.data is not None:
            load_data_dir(store, cfg.data)
        query = KeywordQuery.parse(cfg.query, cfg.k, cfg.delta_k)
        log = list(read_log(cfg.log, schema)) if cfg.log else []
    except (SchemaError, StoreError, LogError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return 2

    engine = Engine(store, query, cn_max=cfg.cn_max, kmean=cfg.kmean, policy=cfg.policy,
                    cache=cfg.cache, rollback=cfg.rollback)
    if not engine.lattice.cns:
        print("warning: the query has no candidate networks; waiting for matching tuples", file=err)
    engine.eval_static()

    snap_fh = cfg.snapshots.open("w", encoding="utf-8", newline="\n") if cfg.snapshots else out
    met_fh = cfg.metrics.open("w", encoding="utf-8", newline="\n") if cfg.metrics else None
    status = 0
    try:
        if met_fh:
            met_fh.write("\t".join(METRIC_COLUMNS) + "\n")
            met_fh.write(_metric_row(engine.last_eval, cfg.deterministic) + "\n")
        last = [r.jtt.identity for r in engine.current_topk()]
        for line in snapshot_lines(0, engine.current_topk()):
            snap_fh.write(line + "\n")
        if cfg.oracle_check and (msg := _oracle_mismatch(engine)):
            print(f"oracle mismatch after initial evaluation: {msg}", file=err)
            return 1
        for lineno, op in log:
            try:
                m = engine.maintain(op)
            except StoreError as exc:
                print(f"error: line {lineno}: {exc}", file=err)
                return 2
            if met_fh:
                met_fh.write(_metric_row(m, cfg.deterministic) + "\n")
            top = engine.current_topk()
            ids = [r.jtt.identity for r in top]
            if ids != last or (cfg.cadence and m.op_seq % cfg.cadence == 0):
                for line in snapshot_lines(m.op_seq, top):
                    snap_fh.write(line + "\n")
                last = ids
                if cfg.oracle_check and (msg := _oracle_mismatch(engine)):
                    print(f"oracle mismatch at op {m.op_seq} (line {lineno}): {msg}", file=err)
                    status = 1
                    break
        if cfg.lattice_dump:
            cfg.lattice_dump.write_text(engine.lattice.dump(), encoding="utf-8")
    finally:
        if cfg.snapshots:
            snap_fh.close()
        if met_fh:
            met_fh.close()
    return status


# -- argument parsing ---------------------------------------------------------


def _policy_args(p: argparse.ArgumentParser) -> None:
    d = MaintenancePolicy()
    g = p.add_argument_group("adaptation policy")
    g.add_argument("--delta-df", type=float, default=d.delta_df, help="initial df slack (fraction)")
    g.add_argument("--delta-avdl", type=float, default=d.delta_avdl, help="initial avdl slack (fraction)")
    g.add_argument("--df-growth", type=float, default=d.df_growth)
    g.add_argument("--avdl-growth", type=float, default=d.avdl_growth)
    g.add_argument("--dk-growth", type=int, default=d.dk_growth)
    g.add_argument("--df-max", type=float, default=d.df_max)
    g.add_argument("--avdl-max", type=float, default=d.avdl_max)
    g.add_argument("--dk-max", type=int, default=d.dk_max)


def _query_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schema", type=Path, required=True, help="schema descriptor file")
    p.add_argument("--data", type=Path, help="directory of <relation>.tsv files")
    p.add_argument("--query", required=True, help="keywords, e.g. 'james p2p'")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--delta-k", type=int, default=1)
    p.add_argument("--cn-max", type=int, default=6)
    p.add_argument("--kmean", type=float, default=0.6, help="clusters per CN (0: one cluster)")
    p.add_argument("--log", type=Path, help="update log to replay")
    _policy_args(p)


def _policy(ns) -> MaintenancePolicy:
    return MaintenancePolicy(
        delta_df=ns.delta_df, delta_avdl=ns.delta_avdl, df_growth=ns.df_growth, avdl_growth=ns.avdl_growth,
        dk_growth=ns.dk_growth, df_max=ns.df_max, avdl_max=ns.avdl_max, dk_max=ns.dk_max,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kwtopk", description="Continual top-k keyword search")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a query and maintain it over an update log")
    _query_args(run)
    run.add_argument("--cadence", type=int, default=0, help="also snapshot every N ops")
    run.add_argument("--oracle-check", action="store_true", help="compare every snapshot with brute force")
    run.add_argument("--no-cache", action="store_true")
    run.add_argument("--no-rollback", action="store_true")
    run.add_argument("--metrics", type=Path, help="per-op metrics TSV")
    run.add_argument("--snapshots", type=Path, help="snapshot output (default stdout)")
    run.add_argument("--deterministic", action="store_true", help="write 0 for wall-clock columns")
    run.add_argument("--lattice-dump", type=Path)

    gen = sub.add_parser("generate", help="write a synthetic corpus and update log")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--schema", type=Path, help="schema descriptor (default: publication schema)")
    gen.add_argument("--size", action="append", default=[], metavar="REL=N", required=True)
    gen.add_argument("--keyword", action="append", default=[], metavar="WORD=RATIO", required=True)
    gen.add_argument("--ops", type=int, default=1000)
    gen.add_argument("--insert-ratio", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench", help="ablation over cache, clustering and rollback")
    _query_args(bench)
    bench.add_argument("--reeval-every", type=int, default=0)

    fix = sub.add_parser("fixture", help="write the publication example database")
    fix.add_argument("--out", type=Path, required=True)
    return parser


def _pairs(items, conv, what):
    out = {}
    for item in items:
        name, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"expected {what}, got {item!r}")
        out[name] = conv(val)
    return out


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "run":
            cfg = RunConfig(
                schema=ns.schema, data=ns.data, query=ns.query, k=ns.k, delta_k=ns.delta_k,
                cn_max=ns.cn_max, kmean=ns.kmean, policy=_policy(ns), log=ns.log, cadence=ns.cadence,
                oracle_check=ns.oracle_check, cache=not ns.no_cache, rollback=not ns.no_rollback,
                metrics=ns.metrics, snapshots=ns.snapshots, deterministic=ns.deterministic,
                lattice_dump=ns.lattice_dump,
            )
            return run_continual(cfg)
        if ns.command == "generate":
            schema_text = ns.schema.read_text(encoding="utf-8") if ns.schema else PUBLICATION_SCHEMA
            spec = WorkloadSpec(
                schema_text, _pairs(ns.size, int, "REL=N"), _pairs(ns.keyword, float, "WORD=RATIO"),
                insert_ratio=ns.insert_ratio, ops=ns.ops, seed=ns.seed,
            )
            write_workload(generate_workload(spec), ns.out, schema_text)
            return 0
        if ns.command == "bench":
            schema = load_schema(ns.schema)

            def make_store():
                store = Store(schema)
                if ns.data:
                    load_data_dir(store, ns.data)
                return store

            ops = [op for _, op in read_log(ns.log, schema)] if ns.log else []
            query = KeywordQuery.parse(ns.query, ns.k, ns.delta_k)
            report = bench_ablation(make_store, query, ops, DEFAULT_MODES, cn_max=ns.cn_max,
                                    policy=_policy(ns), reeval_every=ns.reeval_every)
            sys.stdout.write(report.format())
            return 0
        if ns.command == "fixture":
            ns.out.mkdir(parents=True, exist_ok=True)
            (ns.out / "schema.txt").write_text(PUBLICATION_SCHEMA, encoding="utf-8")
            write_data_dir(publication_store(), ns.out / "data")
            return 0
    except (SchemaError, StoreError, LogError, WorkloadError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AblationMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2
