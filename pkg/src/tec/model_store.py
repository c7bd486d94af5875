"""Persisted topic model: one self-describing JSON file."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from tec.clustering import Centroids, KMeansConfig
from tec.errors import ModelError
from tec.fusion import FusionConfig
from tec.kb_store import EmbeddingStore, EntityId
from tec.rerank import RerankConfig, TopicEntityList

FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)


def vocab_hash(ids: Iterable[EntityId]) -> str:
    digest = hashlib.sha256()
    for eid in sorted(set(ids)):
        digest.update(eid.encode("utf-8"))
        digest.update(b"\n")
    return "sha256:" + digest.hexdigest()


@dataclass(frozen=True, eq=False)
class TopicModel:
    fusion: FusionConfig
    centroids: Centroids
    top_entities: TopicEntityList
    vocab_hash: str
    kmeans: KMeansConfig
    rerank: RerankConfig
    created_at: str | None = None
    version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if self.centroids.k != len(self.top_entities):
            raise ModelError(
                f"inconsistent K: {self.centroids.k} centroids but {len(self.top_entities)} topic lists"
            )
        if self.centroids.dim != self.fusion.dim:
            raise ModelError(
                f"centroid dim {self.centroids.dim} does not match fusion dim {self.fusion.dim}"
            )

    @property
    def k(self) -> int:
        return self.centroids.k

    def check_store(self, store: EmbeddingStore) -> None:
        """Raise if ``store`` is not the fused vocabulary the model was trained on."""
        if store.dim != self.fusion.dim:
            raise ModelError(f"store dim {store.dim} does not match model dim {self.fusion.dim}")
        actual = vocab_hash(store.ids)
        if actual != self.vocab_hash:
            raise ModelError(
                "store vocabulary differs from the one the model was trained on; retrain the model"
            )

    def to_dict(self) -> dict:
        c = self.centroids
        return {
            "version": self.version,
            "fusion": self.fusion.to_dict(),
            "kmeans": {
                "k": c.k,
                "seed": self.kmeans.seed,
                "max_iters": self.kmeans.max_iters,
                "tol": self.kmeans.tol,
                "n_redo": self.kmeans.n_redo,
                "iterations_run": c.iterations_run,
                "inertia": c.inertia,
            },
            "centroids": c.vectors.tolist(),
            "topics": {
                "config": self.rerank.to_dict(),
                "entities": [[[eid, score] for eid, score in topic] for topic in self.top_entities],
            },
            "vocab_hash": self.vocab_hash,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TopicModel:
        if not isinstance(data, dict):
            raise ModelError("model file must contain a JSON object")
        version = data.get("version")
        if version not in SUPPORTED_VERSIONS:
            raise ModelError(f"unsupported version {version!r}")
        try:
            km = data["kmeans"]
            topics = data["topics"]
            centroids = Centroids(
                np.asarray(data["centroids"], dtype=np.float64),
                seed=int(km["seed"]),
                iterations_run=int(km["iterations_run"]),
                inertia=float(km["inertia"]),
            )
            if int(km["k"]) != centroids.k:
                raise ModelError(f"inconsistent K: header says {km['k']}, found {centroids.k} centroids")
            return cls(
                fusion=FusionConfig.from_dict(data["fusion"]),
                centroids=centroids,
                top_entities=[
                    [(str(eid), float(score)) for eid, score in topic] for topic in topics["entities"]
                ],
                vocab_hash=str(data["vocab_hash"]),
                kmeans=KMeansConfig(
                    seed=int(km["seed"]),
                    max_iters=int(km["max_iters"]),
                    tol=float(km["tol"]),
                    n_redo=int(km["n_redo"]),
                ),
                rerank=RerankConfig(**topics["config"]),
                created_at=data.get("created_at"),
                version=version,
            )
        except ModelError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed model file: {exc!r}") from None


def save_model(model: TopicModel, path: str | Path) -> None:
    """Write the model atomically (temporary file in the target dir, then rename)."""
    path = Path(path)
    text = json.dumps(model.to_dict(), indent=1, allow_nan=False) + "\n"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path: str | Path) -> TopicModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ModelError(f"{path}: not a UTF-8 model file") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: corrupted or truncated model file ({exc.msg})") from None
    return TopicModel.from_dict(data)
