"""Ablation runs: the same update stream under different engine toggles.

Cost is counted in deterministic work units (store probes, Insert/Delete
recursion steps and scored results); wall time is reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .engine import Engine, MaintenancePolicy, UpdateOp
from .score import KeywordQuery
from .store import Store

__all__ = ["Mode", "ModeReport", "AblationReport", "AblationMismatch", "DEFAULT_MODES", "bench_ablation"]


class AblationMismatch(AssertionError):
    pass


@dataclass(frozen=True)
class Mode:
    name: str
    cache: bool = True
    kmean: float = 0.6
    rollback: bool = True


DEFAULT_MODES = (
    Mode("cache+clustered", True, 0.6, True),
    Mode("nocache+clustered", False, 0.6, True),
    Mode("cache+unclustered", True, 0.0, True),
    Mode("nocache+unclustered", False, 0.0, True),
    Mode("norollback", True, 0.6, False),
)


@dataclass
class ModeReport:
    mode: Mode
    initial_work: int = 0
    op_work: list[int] = field(default_factory=list)
    op_accesses: list[int] = field(default_factory=list)
    op_micros: list[int] = field(default_factory=list)
    snapshots: list[tuple] = field(default_factory=list)
    # (op index, work of eval_static from scratch at that point)
    reeval_work: list[tuple[int, int]] = field(default_factory=list)

    @property
    def total_work(self) -> int:
        return sum(self.op_work)

    @property
    def total_accesses(self) -> int:
        return sum(self.op_accesses)

    @property
    def mean_work(self) -> float:
        return self.total_work / len(self.op_work) if self.op_work else 0.0

    @property
    def mean_reeval_work(self) -> float:
        return sum(w for _, w in self.reeval_work) / len(self.reeval_work) if self.reeval_work else 0.0


@dataclass
class AblationReport:
    modes: list[ModeReport]

    def by_name(self, name: str) -> ModeReport:
        return next(m for m in self.modes if m.mode.name == name)

    def format(self) -> str:
        lines = ["mode\tops\ttotal_work\ttotal_accesses\tmean_work\tmean_reeval_work\ttotal_micros"]
        for m in self.modes:
            reeval = f"{m.mean_reeval_work:.2f}" if m.reeval_work else "-"
            lines.append(
                f"{m.mode.name}\t{len(m.op_work)}\t{m.total_work}\t{m.total_accesses}\t"
                f"{m.mean_work:.2f}\t{reeval}\t{sum(m.op_micros)}"
            )
        return "\n".join(lines) + "\n"


def _snapshot(engine: Engine) -> tuple:
    return tuple((r.jtt.identity, r.score) for r in engine.current_topk())


def bench_ablation(
    make_store: Callable[[], Store],
    query: KeywordQuery,
    ops: Sequence[UpdateOp],
    modes: Sequence[Mode] = DEFAULT_MODES,
    *,
    cn_max: int = 6,
    policy: MaintenancePolicy | None = None,
    reeval_every: int = 0,
    check: bool = True,
) -> AblationReport:
    """Replay ``ops`` once per mode on a fresh store.

    With ``reeval_every`` > 0 the first mode also measures a from-scratch
    evaluation on the current store every that many ops.  With ``check``,
    snapshots must agree across modes after every op.
    """
    reports = []
    for i, mode in enumerate(modes):
        store = make_store()
        eng = Engine(store, query, cn_max=cn_max, kmean=mode.kmean, policy=policy,
                     cache=mode.cache, rollback=mode.rollback)
        eng.eval_static()
        rep = ModeReport(mode, initial_work=eng.setup_work + eng.last_eval.work)
        rep.snapshots.append(_snapshot(eng))
        for n, op in enumerate(ops, 1):
            m = eng.maintain(op)
            rep.op_work.append(m.work)
            rep.op_accesses.append(m.store_accesses)
            rep.op_micros.append(m.micros)
            rep.snapshots.append(_snapshot(eng))
            if i == 0 and reeval_every and n % reeval_every == 0:
                fresh = Engine(store, query, cn_max=cn_max, kmean=mode.kmean, policy=policy,
                               cache=mode.cache, rollback=mode.rollback)
                fresh.eval_static()
                rep.reeval_work.append((n, fresh.setup_work + fresh.last_eval.work))
        reports.append(rep)
        if check and reports[0].snapshots != rep.snapshots:
            first = next(j for j, (a, b) in enumerate(zip(reports[0].snapshots, rep.snapshots)) if a != b)
            raise AblationMismatch(f"mode {mode.name} diverges from {modes[0].name} at op {first}")
    return AblationReport(reports)

