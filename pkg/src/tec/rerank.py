"""Corpus-driven reranking of the representative entities of each topic.

Every topic starts from its nearest entities with a tiny proximity score.
Each document then votes for its single most likely topic: every entity in
the document gains ``max(w) * tf`` in that topic. Scores are finally turned
into relative frequencies over the top ``n`` entities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from tec.clustering import Centroids
from tec.entitizer import EntityDocument
from tec.errors import ConfigError
from tec.inference import document_embedding, infer_vector
from tec.kb_store import EmbeddingStore, EntityId

logger = logging.getLogger(__name__)

TopicEntityList = list[list[tuple[EntityId, float]]]

INIT_MODES = ("distance", "flat")


@dataclass(frozen=True)
class RerankConfig:
    n: int = 25
    epsilon: float = 1e-6
    n_track: int | None = None
    init: str = "distance"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.n_track is None:
            object.__setattr__(self, "n_track", 10 * self.n)
        if self.n_track < self.n:
            raise ConfigError("n_track must be >= n")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}, got {self.init!r}")

    def to_dict(self) -> dict:
        return {"n": self.n, "epsilon": self.epsilon, "n_track": self.n_track, "init": self.init}


class _ExactSum:
    """Running float sum whose value does not depend on insertion order.

    Keeps Shewchuk's non-overlapping partials (as math.fsum does); the
    value is the correctly rounded total.
    """

    __slots__ = ("partials",)

    def __init__(self, x: float = 0.0) -> None:
        self.partials: list[float] = [x] if x else []

    def add(self, x: float) -> None:
        i = 0
        for y in self.partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                self.partials[i] = lo
                i += 1
            x = hi
        self.partials[i:] = [x]

    @property
    def value(self) -> float:
        return math.fsum(self.partials)


def _rank_key(item: tuple[EntityId, float]) -> tuple[float, EntityId]:
    return (-item[1], item[0])


def closest_entities(
    topic_id: int,
    centroids: Centroids,
    store: EmbeddingStore,
    n: int,
    epsilon: float,
    init: str = "distance",
) -> list[tuple[EntityId, float]]:
    """The ``n`` entities nearest to a centroid with their seed scores.

    Seed score is ``epsilon / (1 + d**2)`` (or flat ``epsilon``), so seeds
    keep their proximity order but any real corpus evidence dominates.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon must be > 0")
    if init not in INIT_MODES:
        raise ConfigError(f"init must be one of {INIT_MODES}, got {init!r}")
    if len(store) == 0:
        raise ConfigError("entity store is empty")
    if n > len(store):
        logger.warning("topic %d: only %d entities available for %d seeds", topic_id, len(store), n)
    center = centroids.vectors[topic_id]
    sq = ((store.matrix - center) ** 2).sum(axis=1)
    # stable sort keeps sorted-id order among equal distances
    order = np.argsort(sq, kind="stable")[:n]
    if init == "flat":
        return [(store.ids[i], epsilon) for i in order]
    return [(store.ids[i], epsilon / (1.0 + float(sq[i]))) for i in order]


def relative_frequency(scores: Mapping[EntityId, float]) -> list[tuple[EntityId, float]]:
    """Normalize scores to sum to one; descending, ties by entity id."""
    if any(s < 0 or not math.isfinite(s) for s in scores.values()):
        raise ConfigError("scores must be finite and non-negative")
    total = math.fsum(scores.values())
    if total <= 0:
        raise ConfigError("cannot normalize: all scores are zero")
    return sorted(((eid, s / total) for eid, s in scores.items()), key=_rank_key)


class _TopicAccumulator:
    """Scores for one topic, holding at most ``capacity`` entities."""

    def __init__(self, seeds: list[tuple[EntityId, float]], capacity: int) -> None:
        self.capacity = capacity
        self.sums = {eid: _ExactSum(score) for eid, score in seeds}

    def add(self, eid: EntityId, amount: float) -> None:
        acc = self.sums.get(eid)
        if acc is None:
            self.sums[eid] = _ExactSum(amount)
            if len(self.sums) > self.capacity:
                weakest = min(self.sums.items(), key=lambda kv: (kv[1].value, _neg_key(kv[0])))
                del self.sums[weakest[0]]
        else:
            acc.add(amount)

    def scores(self) -> dict[EntityId, float]:
        return {eid: acc.value for eid, acc in self.sums.items()}


def _neg_key(eid: str) -> tuple[int, ...]:
    # among equal scores evict the largest id, i.e. the one ranked last
    return tuple(-ord(c) for c in eid) + (1,)


def rerank(
    centroids: Centroids,
    store: EmbeddingStore,
    corpus: Iterable[EntityDocument],
    config: RerankConfig | None = None,
) -> TopicEntityList:
    """Top entities per topic as ``[(entity_id, relative score), ...]``.

    ``store`` is the fused store the centroids live in. Documents without
    entities are skipped. Output is independent of corpus order as long as
    no topic tracks more than ``config.n_track`` entities.
    """
    config = config or RerankConfig()
    accs = [
        _TopicAccumulator(
            closest_entities(t, centroids, store, config.n, config.epsilon, config.init),
            config.n_track,
        )
        for t in range(centroids.k)
    ]
    used = skipped = 0
    for doc in corpus:
        if doc.length == 0:
            skipped += 1
            continue
        weights = infer_vector(document_embedding(doc, store), centroids)
        acc = accs[weights.top_topic]
        confidence = weights.confidence
        for eid in sorted(doc.tf):
            acc.add(eid, confidence * doc.tf[eid])
        used += 1
    if skipped:
        logger.warning("skipped %d documents without entities", skipped)
    if used == 0:
        logger.warning("no document contributed evidence; topics reflect centroid proximity only")

    topics = []
    for acc in accs:
        top = sorted(acc.scores().items(), key=_rank_key)[: config.n]
        topics.append(relative_frequency(dict(top)))
    return topics
