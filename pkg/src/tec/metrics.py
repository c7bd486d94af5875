"""Topic coherence (NPMI), topic diversity and topic quality.

Co-occurrence is counted per document: an entity counts once per document
it appears in, and a pair co-occurs when both appear in the same document.
No smoothing is applied; a pair that never co-occurs scores -1.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

from tec.entitizer import EntityDocument
from tec.errors import ConfigError, VocabularyError
from tec.kb_store import EntityId

if TYPE_CHECKING:
    from tec.model_store import TopicModel

logger = logging.getLogger(__name__)

DIVERSITY_TOP = 25
COHERENCE_N = 10


@dataclass(frozen=True)
class CooccurrenceStats:
    num_docs: int
    df: dict[EntityId, int]
    joint_df: dict[tuple[EntityId, EntityId], int]

    def joint(self, a: EntityId, b: EntityId) -> int:
        key = (a, b) if a <= b else (b, a)
        return self.joint_df.get(key, 0)

    def merge(self, other: CooccurrenceStats) -> CooccurrenceStats:
        df = Counter(self.df)
        df.update(other.df)
        joint = Counter(self.joint_df)
        joint.update(other.joint_df)
        return CooccurrenceStats(self.num_docs + other.num_docs, dict(df), dict(joint))


def build_stats(corpus: Iterable[EntityDocument]) -> CooccurrenceStats:
    """Document frequencies and pairwise co-document frequencies.

    Documents without entities still count toward the document total.
    """
    num_docs = 0
    df: Counter = Counter()
    joint: Counter = Counter()
    for doc in corpus:
        num_docs += 1
        unique = sorted(set(doc.entities))
        df.update(unique)
        joint.update(itertools.combinations(unique, 2))
    if num_docs == 0 or not df:
        raise ConfigError("co-occurrence statistics need at least one non-empty document")
    return CooccurrenceStats(num_docs, dict(df), dict(joint))


def npmi(stats: CooccurrenceStats, e_i: EntityId, e_j: EntityId) -> float:
    """Normalized PMI of two entities, in [-1, 1]."""
    for e in (e_i, e_j):
        if stats.df.get(e, 0) == 0:
            raise VocabularyError(f"entity {e!r} does not occur in the corpus")
    n = stats.num_docs
    c_i, c_j = stats.df[e_i], stats.df[e_j]
    c_ij = c_i if e_i == e_j else stats.joint(e_i, e_j)
    if c_ij == 0:
        return -1.0
    if c_ij == c_i == c_j:
        # covers c_ij == n, where -log P(i, j) is zero
        return 1.0
    p_ij = c_ij / n
    pmi = math.log(p_ij / ((c_i / n) * (c_j / n)))
    value = pmi / -math.log(p_ij)
    return min(1.0, max(-1.0, value))


def _top_ids(topic: Sequence, n: int) -> list[EntityId]:
    return [item[0] if isinstance(item, (tuple, list)) else item for item in topic[:n]]


def topic_coherence(
    topics: Sequence[Sequence], stats: CooccurrenceStats, n: int = COHERENCE_N
) -> tuple[list[float], float]:
    """Per-topic mean pairwise NPMI over each topic's top ``n`` entities, and their mean.

    Entities absent from the corpus are left out of the pairs; a topic with
    fewer than two remaining entities scores 0.
    """
    if n < 2:
        raise ConfigError("coherence needs n >= 2")
    if not topics:
        raise ConfigError("no topics to score")
    per_topic = []
    for t, topic in enumerate(topics):
        ids = [e for e in _top_ids(topic, n) if stats.df.get(e, 0) > 0]
        if len(ids) < 2:
            logger.warning("topic %d has fewer than 2 entities in the corpus; coherence set to 0", t)
            per_topic.append(0.0)
            continue
        pairs = list(itertools.combinations(ids, 2))
        per_topic.append(math.fsum(npmi(stats, a, b) for a, b in pairs) / len(pairs))
    return per_topic, math.fsum(per_topic) / len(per_topic)


def topic_diversity(topics: Sequence[Sequence], top: int = DIVERSITY_TOP) -> float:
    """Unique entities over total entities across the per-topic top lists."""
    lists = [_top_ids(topic, top) for topic in topics]
    if not lists or any(not ids for ids in lists):
        raise ConfigError("every topic needs at least one entity")
    total = sum(len(ids) for ids in lists)
    return len(set(itertools.chain.from_iterable(lists))) / total


@dataclass(frozen=True)
class EvalReport:
    tc: float
    td: float
    tq: float
    per_topic_tc: list[float]
    n: int
    top_diversity: int
    window: str = "document"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def evaluate_topics(
    topics: Sequence[Sequence],
    corpus: Iterable[EntityDocument],
    n: int = COHERENCE_N,
    top: int = DIVERSITY_TOP,
) -> EvalReport:
    stats = build_stats(corpus)
    per_topic, tc = topic_coherence(topics, stats, n)
    td = topic_diversity(topics, top)
    return EvalReport(tc, td, tc * td, per_topic, n, top)


def evaluate(
    model: TopicModel, corpus: Iterable[EntityDocument], n: int = COHERENCE_N, top: int = DIVERSITY_TOP
) -> EvalReport:
    return evaluate_topics(model.top_entities, corpus, n, top)
