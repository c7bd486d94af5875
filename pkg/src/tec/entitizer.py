"""Two-stage entity extraction: pattern matching, then disambiguation.

Surface forms are matched over normalized token sequences by an
Aho-Corasick automaton built per language, so patterns always align with
token boundaries. Overlapping hits are resolved leftmost-longest. A surface
form can name several entities; the survivor is the candidate whose fused
embedding is most cosine-similar to a document context vector, provided the
similarity clears a threshold.
"""

from __future__ import annotations

import logging
import re
import shlex
import subprocess
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from tec.errors import ConfigError, TECError, VocabularyError
from tec.kb_store import EmbeddingStore, EntityId, Lexicon

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.3

Normalizer = Callable[[str], list[str]]

_EDGE_PUNCT = re.compile(r"^[\W_]+|[\W_]+$")


def default_normalizer(text: str) -> list[str]:
    """Lowercase, split on whitespace, trim punctuation at token edges."""
    tokens = []
    for raw in text.lower().split():
        tok = _EDGE_PUNCT.sub("", raw)
        if tok:
            tokens.append(tok)
    return tokens


class CommandNormalizer:
    """Normalizer backed by an external program (e.g. a lemmatizer).

    The program receives the text on stdin and must print normalized text on
    stdout; the output is lowercased and whitespace-tokenized.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 60.0) -> None:
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise ConfigError("normalizer command is empty")
        self.timeout = timeout

    def __call__(self, text: str) -> list[str]:
        proc = subprocess.run(
            self.argv,
            input=text,
            capture_output=True,
            text=True,
            encoding="utf-8",
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            raise TECError(
                f"normalizer {self.argv[0]!r} exited with {proc.returncode}: {proc.stderr.strip()}"
            )
        return proc.stdout.lower().split()


@dataclass(frozen=True)
class CandidateMatch:
    surface: str
    start: int
    end: int
    candidates: tuple[EntityId, ...]

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(f"empty span [{self.start}, {self.end})")
        if not self.candidates:
            raise ValueError(f"match {self.surface!r} has no candidates")

    @property
    def ambiguous(self) -> bool:
        return len(self.candidates) > 1


@dataclass(frozen=True)
class EntityDocument:
    doc_id: str
    entities: tuple[EntityId, ...]
    language: str = ""
    tf: dict[EntityId, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "tf", dict(Counter(self.entities)))

    @property
    def length(self) -> int:
        return len(self.entities)


class Automaton:
    """Token-level Aho-Corasick automaton for one language.

    States are integers; ``_goto[s]`` maps a token to the next state,
    ``_fail[s]`` is the failure link and ``_out[s]`` lists the ids of the
    patterns recognised on arrival at ``s`` (own and inherited through the
    failure chain).
    """

    def __init__(self, language: str, patterns: dict[tuple[str, ...], tuple[EntityId, ...]]) -> None:
        self.language = language
        self.patterns = dict(sorted(patterns.items()))
        self._keys: list[tuple[str, ...]] = list(self.patterns)
        self._goto: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._out: list[list[int]] = [[]]
        for pid, key in enumerate(self._keys):
            self._insert(pid, key)
        self._link()

    def __len__(self) -> int:
        return len(self._keys)

    def _insert(self, pid: int, key: tuple[str, ...]) -> None:
        state = 0
        for tok in key:
            nxt = self._goto[state].get(tok)
            if nxt is None:
                nxt = len(self._goto)
                self._goto.append({})
                self._fail.append(0)
                self._out.append([])
                self._goto[state][tok] = nxt
            state = nxt
        self._out[state].append(pid)

    def _link(self) -> None:
        queue: deque[int] = deque()
        for child in self._goto[0].values():
            self._fail[child] = 0
            queue.append(child)
        while queue:
            state = queue.popleft()
            for tok, child in self._goto[state].items():
                queue.append(child)
                fallback = self._fail[state]
                while fallback and tok not in self._goto[fallback]:
                    fallback = self._fail[fallback]
                target = self._goto[fallback].get(tok, 0)
                self._fail[child] = target if target != child else 0
                self._out[child] = self._out[child] + self._out[self._fail[child]]

    def scan(self, tokens: Sequence[str]) -> list[tuple[int, int, int]]:
        """All pattern occurrences as ``(start, end, pattern_id)``, overlaps included."""
        hits = []
        state = 0
        for pos, tok in enumerate(tokens):
            while state and tok not in self._goto[state]:
                state = self._fail[state]
            state = self._goto[state].get(tok, 0)
            for pid in self._out[state]:
                hits.append((pos + 1 - len(self._keys[pid]), pos + 1, pid))
        return hits

    def pattern(self, pid: int) -> tuple[tuple[str, ...], tuple[EntityId, ...]]:
        key = self._keys[pid]
        return key, self.patterns[key]


def build_automaton(
    lexicon: Lexicon, language: str, normalizer: Normalizer = default_normalizer
) -> Automaton:
    """Compile the lexicon's surface forms for ``language``.

    Surface forms go through the same normalizer as document text.
    """
    entries = lexicon.for_language(language)
    if not entries:
        raise ConfigError(f"lexicon has no entries for language {language!r}")
    grouped: dict[tuple[str, ...], set[EntityId]] = {}
    for entry in entries:
        key = tuple(normalizer(entry.surface))
        if not key:
            logger.warning("surface form %r normalizes to nothing; skipped", entry.surface)
            continue
        grouped.setdefault(key, set()).add(entry.entity_id)
    if not grouped:
        raise ConfigError(f"no usable surface forms for language {language!r}")
    return Automaton(language, {k: tuple(sorted(v)) for k, v in grouped.items()})


def match_patterns(automaton: Automaton, tokens: Sequence[str]) -> list[CandidateMatch]:
    """Leftmost-longest, non-overlapping matches in text order."""
    hits = sorted(automaton.scan(tokens), key=lambda h: (h[0], -(h[1] - h[0])))
    matches = []
    cursor = 0
    for start, end, pid in hits:
        if start < cursor:
            continue
        key, candidates = automaton.pattern(pid)
        matches.append(CandidateMatch(" ".join(key), start, end, candidates))
        cursor = end
    return matches


class ContextProvider(Protocol):
    def __call__(
        self, matches: Sequence[CandidateMatch], store: EmbeddingStore
    ) -> np.ndarray | None: ...


def unambiguous_context(matches: Sequence[CandidateMatch], store: EmbeddingStore) -> np.ndarray | None:
    """Normalized mean of the fused vectors of single-candidate matches.

    Returns None when there is no unambiguous match or the mean vanishes.
    """
    rows = [store.vector(m.candidates[0]) for m in matches if not m.ambiguous]
    if not rows:
        return None
    mean = np.mean(rows, axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        return None
    return mean / norm


def disambiguate(
    matches: Sequence[CandidateMatch],
    context: np.ndarray | None,
    store: EmbeddingStore,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[EntityId]:
    """Pick one entity per match, or drop the match.

    The best candidate by cosine to ``context`` is kept when its similarity
    is at least ``threshold``; ties go to the smaller entity id. Without a
    context, unambiguous matches are kept and ambiguous ones dropped.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must lie in [-1, 1], got {threshold}")
    for m in matches:
        for eid in m.candidates:
            if eid not in store:
                raise VocabularyError(f"candidate entity {eid!r} for {m.surface!r} is not in the store")
    if context is not None:
        context = np.asarray(context, dtype=np.float64)
        if context.shape != (store.dim,):
            raise ConfigError(f"context vector has shape {context.shape}, store dim is {store.dim}")

    chosen = []
    for m in matches:
        if context is None:
            if not m.ambiguous:
                chosen.append(m.candidates[0])
            continue
        # vectors and context are unit-norm, so the dot product is the cosine
        sims = [float(store.vector(eid) @ context) for eid in m.candidates]
        best = int(np.argmax(sims))
        if sims[best] >= threshold:
            chosen.append(m.candidates[best])
    return chosen


@dataclass(frozen=True)
class Pipeline:
    automaton: Automaton
    store: EmbeddingStore
    normalizer: Normalizer = default_normalizer
    threshold: float = DEFAULT_THRESHOLD
    context_provider: ContextProvider = unambiguous_context


def entitize(doc_id: str, raw_text: str, language: str, pipeline: Pipeline) -> EntityDocument:
    if language != pipeline.automaton.language:
        raise ConfigError(
            f"document {doc_id!r} is {language!r} but the automaton is {pipeline.automaton.language!r}"
        )
    tokens = pipeline.normalizer(raw_text)
    matches = match_patterns(pipeline.automaton, tokens)
    context = pipeline.context_provider(matches, pipeline.store) if matches else None
    entities = disambiguate(matches, context, pipeline.store, pipeline.threshold)
    return EntityDocument(doc_id, tuple(entities), language)
