"""Weighted concatenation of language-model and graph entity embeddings.

Each fused vector is ``[sqrt(1/(1+a)) * lm ; sqrt(a/(1+a)) * graph]``. With
unit inputs the result is unit-norm and the fused cosine between two
entities is the ``1/(1+a) : a/(1+a)`` blend of the per-source cosines.
``alpha = INFINITY`` keeps only the graph block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tec.errors import ConfigError
from tec.kb_store import UNIT_TOL, EmbeddingStore, SourceTag, vocabulary_intersection

INFINITY = math.inf


def parse_alpha(value: str | float) -> float:
    """Accept a non-negative number or ``inf``/``infinity``."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf"):
            return INFINITY
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"alpha must be a number or 'inf', got {value!r}") from None
    alpha = float(value)
    if math.isnan(alpha) or alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {value!r}")
    return alpha


def format_alpha(alpha: float) -> float | str:
    return "inf" if alpha == INFINITY else alpha


def block_weights(alpha: float) -> tuple[float, float]:
    """Scale factors applied to the LM and graph blocks."""
    alpha = parse_alpha(alpha)
    if alpha == INFINITY:
        return 0.0, 1.0
    return math.sqrt(1.0 / (1.0 + alpha)), math.sqrt(alpha / (1.0 + alpha))


@dataclass(frozen=True)
class FusionConfig:
    alpha: float
    dim_lm: int
    dim_graph: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", parse_alpha(self.alpha))
        if self.dim_lm <= 0 or self.dim_graph <= 0:
            raise ConfigError("fusion dimensions must be positive")

    @property
    def dim(self) -> int:
        return self.dim_lm + self.dim_graph

    def to_dict(self) -> dict:
        return {"alpha": format_alpha(self.alpha), "dim_lm": self.dim_lm, "dim_graph": self.dim_graph}

    @classmethod
    def from_dict(cls, data: dict) -> FusionConfig:
        return cls(parse_alpha(data["alpha"]), int(data["dim_lm"]), int(data["dim_graph"]))


def fuse_entity(e_lm: np.ndarray, e_g: np.ndarray, alpha: float) -> np.ndarray:
    e_lm = np.asarray(e_lm, dtype=np.float64)
    e_g = np.asarray(e_g, dtype=np.float64)
    for name, vec in (("language-model", e_lm), ("graph", e_g)):
        if abs(float(np.linalg.norm(vec)) - 1.0) > UNIT_TOL:
            raise ConfigError(f"{name} embedding is not unit-norm")
    w_lm, w_g = block_weights(alpha)
    return np.concatenate([w_lm * e_lm, w_g * e_g])


def fuse_store(lm: EmbeddingStore, graph: EmbeddingStore, alpha: float) -> EmbeddingStore:
    """Fuse every entity known to both stores."""
    ids = vocabulary_intersection([lm, graph])
    w_lm, w_g = block_weights(alpha)
    lm_rows = lm.matrix[[lm.index_of(e) for e in ids]]
    g_rows = graph.matrix[[graph.index_of(e) for e in ids]]
    matrix = np.hstack([w_lm * lm_rows, w_g * g_rows])
    return EmbeddingStore(lm.dim + graph.dim, tuple(ids), matrix, SourceTag.FUSED)
