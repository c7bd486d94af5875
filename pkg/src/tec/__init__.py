"""Topics as entity clusters.

Entity extraction with Aho-Corasick automata, fusion of language-model and
knowledge-graph entity embeddings, K-Means topic centroids, inverse-distance
topic inference, corpus-driven reranking of topic entities and NPMI based
evaluation.
"""

from tec.clustering import Centroids, KMeansConfig, assign, distances, train_kmeans
from tec.entitizer import (
    Automaton,
    CandidateMatch,
    EntityDocument,
    Pipeline,
    build_automaton,
    disambiguate,
    entitize,
    match_patterns,
)
from tec.errors import ConfigError, FormatError, ModelError, TECError, VocabularyError
from tec.fusion import INFINITY, FusionConfig, fuse_entity, fuse_store
from tec.inference import TopicWeights, document_embedding, infer, topic_weights
from tec.kb_store import (
    EmbeddingStore,
    Lexicon,
    LexiconEntry,
    SourceTag,
    load_embeddings,
    load_lexicon,
    save_embeddings,
    save_lexicon,
    vocabulary_intersection,
)
from tec.metrics import (
    CooccurrenceStats,
    EvalReport,
    build_stats,
    evaluate,
    npmi,
    topic_coherence,
    topic_diversity,
)
from tec.model_store import TopicModel, load_model, save_model, vocab_hash
from tec.rerank import RerankConfig, closest_entities, relative_frequency, rerank

__version__ = "0.1.0"
