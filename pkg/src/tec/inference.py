"""Document embeddings and inverse-distance-squared topic weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from tec.clustering import Centroids, distances
from tec.entitizer import EntityDocument
from tec.errors import ConfigError, TECError
from tec.kb_store import EmbeddingStore

if TYPE_CHECKING:
    from tec.model_store import TopicModel


class EmptyDocumentError(TECError):
    """The document has no entities, so it has no embedding."""


@dataclass(frozen=True, eq=False)
class TopicWeights:
    w: np.ndarray

    @property
    def top_topic(self) -> int:
        # np.argmax returns the first maximum: lowest index wins ties
        return int(np.argmax(self.w))

    @property
    def confidence(self) -> float:
        return float(self.w.max())


def document_embedding(doc: EntityDocument, store: EmbeddingStore) -> np.ndarray:
    """Term-frequency weighted mean of the document's entity vectors.

    The weights tf/length sum to one, so the result lies in the convex hull
    of the entity vectors. It is not renormalized.
    """
    if doc.length == 0:
        raise EmptyDocumentError(f"empty entity document {doc.doc_id!r}")
    acc = np.zeros(store.dim, dtype=np.float64)
    for eid in sorted(doc.tf):
        acc += doc.tf[eid] * store.vector(eid)
    return acc / doc.length


def topic_weights(d: np.ndarray) -> TopicWeights:
    """Shepard weights ``d_i**-2 / sum_j d_j**-2``.

    Zero distances take the continuity limit: the mass is split evenly over
    the zero-distance topics. The ratio ``(d_min / d_i)**2`` is used instead
    of raw inverses so tiny distances cannot overflow.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1 or d.size == 0:
        raise ConfigError("distance vector must be one-dimensional and non-empty")
    if not np.all(np.isfinite(d)):
        raise ConfigError("distances must be finite")
    if np.any(d < 0):
        raise ConfigError("distances must be non-negative")
    zero = d == 0.0
    if zero.any():
        w = zero / zero.sum()
    else:
        ratio = (d.min() / d) ** 2
        w = ratio / ratio.sum()
    return TopicWeights(w)


def infer_vector(v: np.ndarray, centroids: Centroids) -> TopicWeights:
    return topic_weights(distances(v, centroids))


def infer(doc: EntityDocument, model: TopicModel, store: EmbeddingStore) -> TopicWeights:
    """Topic weights of ``doc`` under ``model``; ``store`` is the fused store."""
    return infer_vector(document_embedding(doc, store), model.centroids)
