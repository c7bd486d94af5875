"""Knowledge-base inputs: the surface-form lexicon and entity embedding files.

Lexicon files are UTF-8 TSV with three columns (surface form, entity id,
ISO 639-1 language). Embedding files start with a ``dim <D>`` line followed
by one ``entity_id v1 ... vD`` row per entity. Lines starting with ``#`` are
comments in both formats; an embedding file may carry a ``# source_tag X``
comment naming the knowledge source it came from.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from tec.errors import FormatError, VocabularyError

logger = logging.getLogger(__name__)

EntityId = str

# Unit-norm tolerance used by every consumer of normalized vectors.
UNIT_TOL = 1e-6


class SourceTag(str, enum.Enum):
    LM = "LM"
    GRAPH = "GRAPH"
    FUSED = "FUSED"


@dataclass(frozen=True, order=True)
class LexiconEntry:
    surface: str
    entity_id: EntityId
    language: str


@dataclass(frozen=True)
class Lexicon:
    """Deduplicated surface-form entries, in first-seen order."""

    entries: tuple[LexiconEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[LexiconEntry]:
        return iter(self.entries)

    def languages(self) -> list[str]:
        return sorted({e.language for e in self.entries})

    def for_language(self, language: str) -> list[LexiconEntry]:
        return [e for e in self.entries if e.language == language]


def _collapse(text: str) -> str:
    return " ".join(text.split())


def load_lexicon(path: str | Path) -> Lexicon:
    """Parse a lexicon TSV, dropping exact duplicate rows.

    Raises FormatError naming the 1-based line number of the first malformed
    row, or when the file contains no entries at all.
    """
    path = Path(path)
    seen: set[LexiconEntry] = set()
    entries: list[LexiconEntry] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise FormatError(
                    f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}"
                )
            surface, entity_id, language = (_collapse(c) for c in cols)
            if not surface or not entity_id or not language:
                raise FormatError(f"{path}:{lineno}: empty field")
            entry = LexiconEntry(surface, entity_id, language)
            if entry not in seen:
                seen.add(entry)
                entries.append(entry)
    if not entries:
        raise FormatError(f"{path}: lexicon is empty")
    return Lexicon(tuple(entries))


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in lexicon.entries:
            fh.write(f"{e.surface}\t{e.entity_id}\t{e.language}\n")


@dataclass(frozen=True, eq=False)
class EmbeddingStore:
    """Unit-normalized entity vectors from a single knowledge source.

    Rows of ``matrix`` follow ``ids``, which is sorted by entity id so that
    any traversal of the store is reproducible.
    """

    dim: int
    ids: tuple[EntityId, ...]
    matrix: np.ndarray
    source_tag: SourceTag
    _index: dict[EntityId, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise FormatError(f"dim must be positive, got {self.dim}")
        if self.matrix.shape != (len(self.ids), self.dim):
            raise FormatError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{len(self.ids)} ids x dim {self.dim}"
            )
        if list(self.ids) != sorted(set(self.ids)):
            raise FormatError("ids must be unique and sorted")
        self.matrix.setflags(write=False)
        object.__setattr__(self, "_index", {e: i for i, e in enumerate(self.ids)})

    @classmethod
    def from_vectors(
        cls, vectors: dict[EntityId, Sequence[float]], dim: int, source_tag: SourceTag
    ) -> EmbeddingStore:
        """Build a store from raw vectors, normalizing each to unit length."""
        ids = tuple(sorted(vectors))
        matrix = np.zeros((len(ids), dim), dtype=np.float64)
        for row, eid in enumerate(ids):
            matrix[row] = _normalized(eid, vectors[eid], dim)
        return cls(dim, ids, matrix, SourceTag(source_tag))

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self._index

    def index_of(self, entity_id: EntityId) -> int:
        try:
            return self._index[entity_id]
        except KeyError:
            raise VocabularyError(
                f"entity {entity_id!r} is not in the {self.source_tag.value} store"
            ) from None

    def vector(self, entity_id: EntityId) -> np.ndarray:
        return self.matrix[self.index_of(entity_id)]

    @property
    def vectors(self) -> dict[EntityId, np.ndarray]:
        return {eid: self.matrix[i] for i, eid in enumerate(self.ids)}

    def subset(self, entity_ids: Iterable[EntityId]) -> EmbeddingStore:
        """Restrict the store to the given ids (all must be present)."""
        ids = sorted(set(entity_ids))
        rows = [self.index_of(e) for e in ids]
        return EmbeddingStore(self.dim, tuple(ids), self.matrix[rows].copy(), self.source_tag)


def _normalized(entity_id: str, values: Sequence[float], dim: int) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.shape != (dim,):
        raise FormatError(f"entity {entity_id}: expected {dim} components, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise FormatError(f"entity {entity_id}: NaN or infinite component")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise FormatError(f"entity {entity_id}: zero vector cannot be normalized")
    return vec / norm


def load_embeddings(path: str | Path, source_tag: SourceTag | str | None = None) -> EmbeddingStore:
    """Read an embedding file and L2-normalize every vector.

    When ``source_tag`` is omitted the file's ``# source_tag`` comment is
    used; a file without one is then rejected.
    """
    path = Path(path)
    dim: int | None = None
    file_tag: str | None = None
    vectors: dict[str, list[float]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "source_tag":
                    file_tag = parts[1]
                continue
            if dim is None:
                parts = line.split()
                if len(parts) != 2 or parts[0] != "dim":
                    raise FormatError(f"{path}:{lineno}: expected header 'dim <D>'")
                try:
                    dim = int(parts[1])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad dimension {parts[1]!r}") from None
                if dim <= 0:
                    raise FormatError(f"{path}:{lineno}: dimension must be positive")
                continue
            entity_id, *values = line.split()
            if entity_id in vectors:
                raise FormatError(f"{path}:{lineno}: duplicate entity {entity_id}")
            try:
                floats = [float(v) for v in values]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: entity {entity_id}: non-numeric component") from None
            if len(floats) != dim:
                raise FormatError(
                    f"{path}:{lineno}: entity {entity_id}: expected {dim} components, got {len(floats)}"
                )
            vectors[entity_id] = floats
    if dim is None:
        raise FormatError(f"{path}: missing 'dim <D>' header")
    tag = source_tag if source_tag is not None else file_tag
    if tag is None:
        raise FormatError(f"{path}: no source_tag given and none recorded in the file")
    try:
        tag = SourceTag(tag)
    except ValueError:
        raise FormatError(f"{path}: unknown source tag {tag!r}") from None
    return EmbeddingStore.from_vectors(vectors, dim, tag)


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    # repr() gives the shortest string that round-trips a float64 exactly.
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"dim {store.dim}\n# source_tag {store.source_tag.value}\n")
        for eid, row in zip(store.ids, store.matrix):
            fh.write(eid + " " + " ".join(repr(float(x)) for x in row) + "\n")


def vocabulary_intersection(stores: Sequence[EmbeddingStore]) -> list[EntityId]:
    """Entity ids present in every store, sorted."""
    if not stores:
        raise VocabularyError("vocabulary_intersection needs at least one store")
    common = set(stores[0].ids)
    for store in stores[1:]:
        common &= set(store.ids)
    if not common:
        raise VocabularyError("no common entities across stores")
    return sorted(common)

