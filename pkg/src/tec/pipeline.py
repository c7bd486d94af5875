"""End-to-end training: fuse, cluster the corpus entities, rerank."""

from __future__ import annotations

import logging
from typing import Sequence

from tec.clustering import KMeansConfig, train_kmeans
from tec.entitizer import EntityDocument
from tec.errors import ConfigError, VocabularyError
from tec.fusion import FusionConfig, fuse_store
from tec.kb_store import EmbeddingStore
from tec.model_store import TopicModel, vocab_hash
from tec.rerank import RerankConfig, rerank

logger = logging.getLogger(__name__)


def corpus_vocabulary(corpus: Sequence[EntityDocument], store: EmbeddingStore) -> list[str]:
    """Sorted entities of the corpus; raises on the first one missing from ``store``."""
    seen: set[str] = set()
    for doc in corpus:
        for eid in doc.entities:
            if eid not in seen:
                if eid not in store:
                    raise VocabularyError(
                        f"document {doc.doc_id!r} mentions {eid!r}, which has no fused embedding"
                    )
                seen.add(eid)
    return sorted(seen)


def train_model(
    corpus: Sequence[EntityDocument],
    lm: EmbeddingStore,
    graph: EmbeddingStore,
    alpha: float,
    k: int,
    kmeans: KMeansConfig | None = None,
    rerank_config: RerankConfig | None = None,
    created_at: str | None = None,
) -> tuple[TopicModel, EmbeddingStore]:
    """Train a topic model; returns it with the full fused store."""
    kmeans = kmeans or KMeansConfig()
    rerank_config = rerank_config or RerankConfig()
    if k < 1:
        raise ConfigError(f"number of topics must be >= 1, got {k}")
    fusion = FusionConfig(alpha, lm.dim, graph.dim)
    fused = fuse_store(lm, graph, fusion.alpha)
    vocab = corpus_vocabulary(corpus, fused)
    if not vocab:
        raise ConfigError("training corpus contains no entities")
    if k > len(vocab):
        raise ConfigError(f"{k} topics requested but the corpus has only {len(vocab)} distinct entities")
    train_store = fused.subset(vocab)
    logger.info("clustering %d entities into %d topics", len(vocab), k)
    centroids = train_kmeans(train_store, k, kmeans)
    topics = rerank(centroids, train_store, corpus, rerank_config)
    model = TopicModel(
        fusion=fusion,
        centroids=centroids,
        top_entities=topics,
        vocab_hash=vocab_hash(fused.ids),
        kmeans=kmeans,
        rerank=rerank_config,
        created_at=created_at,
    )
    return model, fused
