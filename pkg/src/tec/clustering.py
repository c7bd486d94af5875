"""Euclidean K-Means over fused entity vectors.

Lloyd iterations from k-means++ seeds, best of ``n_redo`` restarts by
inertia. Points are visited in store order (sorted entity ids), so a given
(store, K, config) always yields the same centroids.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from tec.errors import ConfigError
from tec.kb_store import EmbeddingStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KMeansConfig:
    seed: int = 0
    max_iters: int = 100
    tol: float = 1e-6
    n_redo: int = 3

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.n_redo < 1:
            raise ConfigError("n_redo must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be >= 0")


@dataclass(frozen=True, eq=False)
class Centroids:
    vectors: np.ndarray
    seed: int = 0
    iterations_run: int = 0
    inertia: float = 0.0
    # inertia after each assignment step of the winning restart
    history: tuple[float, ...] = field(default=(), repr=False)
    labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 1:
            raise ConfigError("centroids must be a non-empty K x dim matrix")
        if not np.all(np.isfinite(vectors)):
            raise ConfigError("centroids contain NaN or infinite values")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _pairwise_sq(points, points[chosen[0]][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # remaining points duplicate chosen ones; pick any unchosen index
            pool = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(pool))
        chosen.append(idx)
        closest = np.minimum(closest, _pairwise_sq(points, points[idx][None, :])[:, 0])
    return points[chosen].copy()


def _assign_all(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sq = _pairwise_sq(points, centers)
    labels = np.argmin(sq, axis=1)
    return labels, sq[np.arange(points.shape[0]), labels]


def _repair_empty(labels: np.ndarray, point_sq: np.ndarray, k: int) -> None:
    """Move the worst-served point into each empty cluster, in place."""
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        movable = sizes[labels] > 1
        cost = np.where(movable, point_sq, -1.0)
        idx = int(np.argmax(cost))
        labels[idx] = j
        point_sq[idx] = 0.0


def _lloyd(points: np.ndarray, centers: np.ndarray, k: int, config: KMeansConfig):
    history = []
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        labels, point_sq = _assign_all(points, centers)
        _repair_empty(labels, point_sq, k)
        history.append(float(point_sq.sum()))
        new_centers = np.empty_like(centers)
        for j in range(k):
            new_centers[j] = points[labels == j].mean(axis=0)
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum()))
        centers = new_centers
        if shift < config.tol:
            break
    labels, point_sq = _assign_all(points, centers)
    inertia = float(point_sq.sum())
    history.append(inertia)
    return centers, labels, inertia, iterations, tuple(history)


def train_kmeans(store: EmbeddingStore, k: int, config: KMeansConfig | None = None) -> Centroids:
    config = config or KMeansConfig()
    if k < 1:
        raise ConfigError(f"number of topics must be >= 1, got {k}")
    if len(store) < k:
        raise ConfigError(f"cannot fit {k} centroids to {len(store)} entities")
    points = store.matrix
    rng = np.random.default_rng(config.seed)
    best = None
    for redo in range(config.n_redo):
        seeds = _kmeans_pp(points, k, rng)
        result = _lloyd(points, seeds, k, config)
        logger.debug("k-means restart %d: inertia %.6g after %d iterations", redo, result[2], result[3])
        if best is None or result[2] < best[2]:
            best = result
    centers, labels, inertia, iterations, history = best
    return Centroids(centers, config.seed, iterations, inertia, history, labels)


def distances(v: np.ndarray, centroids: Centroids | np.ndarray) -> np.ndarray:
    matrix = centroids.vectors if isinstance(centroids, Centroids) else np.asarray(centroids, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (matrix.shape[1],):
        raise ConfigError(f"vector of shape {v.shape} does not match centroid dim {matrix.shape[1]}")
    return np.sqrt(((matrix - v) ** 2).sum(axis=1))


def assign(v: np.ndarray, centroids: Centroids | np.ndarray) -> tuple[int, float]:
    """Nearest centroid and its distance; ties go to the lowest index."""
    d = distances(v, centroids)
    idx = int(np.argmin(d))
    return idx, float(d[idx])
