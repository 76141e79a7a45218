"""TF-IDF tuple/JTT scores, their future upper bounds and the adaptive
envelopes that keep those bounds valid while statistics drift."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .store import RelationStats, Tuple, tokenize

__all__ = [
    "S",
    "KeywordQuery",
    "ScoreEnvelope",
    "StatsCorruption",
    "idf",
    "tscore",
    "tscore_upper",
    "size_normalized",
    "cn_tuple_upper",
]

S = 0.2


class StatsCorruption(ArithmeticError):
    pass


@dataclass(frozen=True)
class KeywordQuery:
    keywords: tuple[str, ...]
    k: int = 100
    delta_k: int = 1

    def __post_init__(self):
        kws = tuple(dict.fromkeys(kw.lower() for kw in self.keywords))
        object.__setattr__(self, "keywords", kws)
        if not kws:
            raise ValueError("query needs at least one keyword")
        if self.k < 1 or self.delta_k < 0:
            raise ValueError("k must be >= 1 and delta_k >= 0")

    @classmethod
    def parse(cls, text: str, k: int = 100, delta_k: int = 1) -> "KeywordQuery":
        return cls(tuple(tokenize(text)), k, delta_k)

    @property
    def l(self) -> int:
        return len(self.keywords)


def idf(n: int, df: int) -> float:
    """ln(N / (df + 1)); an empty relation has no finite idf."""
    return math.log(n / (df + 1)) if n > 0 else -math.inf


def _tf_factor(tf: int) -> float:
    return 1.0 + math.log(1.0 + math.log(tf))


def _terms(t: Tuple, keywords: Iterable[str]):
    for kw in keywords:
        tf = t.tf.get(kw)
        if tf:
            yield kw, tf


def tscore(t: Tuple, query: KeywordQuery | Sequence[str], stats: RelationStats, s: float = S) -> float:
    keywords = query.keywords if isinstance(query, KeywordQuery) else query
    terms = list(_terms(t, keywords))
    if not terms:
        return 0.0
    avdl = stats.avdl
    if avdl <= 0:
        raise StatsCorruption(f"avdl={avdl} for matched tuple {t.ref}")
    norm = (1 - s) + s * t.dl / avdl
    return math.fsum(_tf_factor(tf) / norm * idf(stats.n, stats.df.get(kw, 0)) for kw, tf in terms)


def tscore_upper(t: Tuple, query: KeywordQuery | Sequence[str], envelope: "ScoreEnvelope", s: float = S) -> float:
    """Tuple score with idf and avdl replaced by their envelope bounds.

    A negative idf bound is clamped at 0 so the result stays an upper bound
    when the normalisation factor itself is only bounded from above.
    """
    keywords = query.keywords if isinstance(query, KeywordQuery) else query
    terms = list(_terms(t, keywords))
    if not terms:
        return 0.0
    avdl_u = envelope.avdl_upper
    if avdl_u <= 0:
        raise StatsCorruption(f"avdl_upper={avdl_u} for matched tuple {t.ref}")
    norm = (1 - s) + s * t.dl / avdl_u
    return math.fsum(
        _tf_factor(tf) / norm * max(envelope.idf_upper[kw], 0.0) for kw, tf in terms
    )


def size_normalized(values: Iterable[float], size: int) -> float:
    """Sum of member scores divided by the tree size (JTT score and its bound)."""
    return math.fsum(values) / size


def cn_tuple_upper(own: float, peer_tops: Sequence[float], size: int) -> float:
    """Best score_u reachable by a JTT of a CN containing a tuple with bound ``own``.

    ``peer_tops`` holds the maximum tscore_u of every *other* query slot.
    """
    return size_normalized([own, *peer_tops], size)


@dataclass
class Violation:
    relation: str
    keyword: str | None  # None: the avdl bound
    live: float
    bound: float


@dataclass
class ScoreEnvelope:
    """Per-relation bounds on ln(N/(df+1)) per keyword and on avdl."""

    relation: str
    keywords: tuple[str, ...]
    delta_df: dict[str, float] = field(default_factory=dict)
    delta_avdl: float = 0.01
    idf_upper: dict[str, float] = field(default_factory=dict)
    avdl_upper: float = 0.0

    @classmethod
    def create(
        cls,
        relation: str,
        keywords: Sequence[str],
        stats: RelationStats,
        delta_df: float | Mapping[str, float] = 0.01,
        delta_avdl: float = 0.01,
    ) -> "ScoreEnvelope":
        if isinstance(delta_df, Mapping):
            ddf = {kw: float(delta_df[kw]) for kw in keywords}
        else:
            ddf = {kw: float(delta_df) for kw in keywords}
        env = cls(relation, tuple(keywords), ddf, float(delta_avdl))
        for kw in env.keywords:
            env._refresh_idf(kw, stats)
        env._refresh_avdl(stats)
        return env

    def _refresh_idf(self, kw: str, stats: RelationStats) -> None:
        df = stats.df.get(kw, 0)
        n = stats.n
        self.idf_upper[kw] = math.log(n / (df * (1 - self.delta_df[kw]) + 1)) if n > 0 else -math.inf

    def _refresh_avdl(self, stats: RelationStats) -> None:
        self.avdl_upper = stats.avdl * (1 + self.delta_avdl)

    def check(self, stats: RelationStats) -> list[Violation]:
        out = []
        for kw in self.keywords:
            live = idf(stats.n, stats.df.get(kw, 0))
            if live > self.idf_upper[kw]:
                out.append(Violation(self.relation, kw, live, self.idf_upper[kw]))
        if stats.avdl > self.avdl_upper:
            out.append(Violation(self.relation, None, stats.avdl, self.avdl_upper))
        return out

    def enlarge(
        self,
        stats: RelationStats,
        violations: Iterable[Violation],
        df_growth: float = 0.02,
        avdl_growth: float = 0.02,
        df_max: float = 0.15,
        avdl_max: float = 0.15,
    ) -> None:
        """Grow the slack of every violated bound and rebuild it from live stats."""
        for v in violations:
            if v.keyword is None:
                self.delta_avdl = min(self.delta_avdl + avdl_growth, max(avdl_max, self.delta_avdl))
                self._refresh_avdl(stats)
            else:
                d = self.delta_df[v.keyword]
                self.delta_df[v.keyword] = min(d + df_growth, max(df_max, d))
                self._refresh_idf(v.keyword, stats)


def check_envelopes(relation: str, query: KeywordQuery, envelope: ScoreEnvelope, stats: RelationStats) -> list[Violation]:
    return envelope.check(stats)
