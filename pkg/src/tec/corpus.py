"""JSONL readers and writers for raw and entitized corpora."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from tec.entitizer import EntityDocument
from tec.errors import FormatError


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    language: str
    text: str


def _records(path: str | Path, required: dict[str, type]) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object")
            for key, typ in required.items():
                if not isinstance(obj.get(key), typ):
                    raise FormatError(f"{path}:{lineno}: field {key!r} missing or not {typ.__name__}")
            yield lineno, obj


def read_raw_corpus(path: str | Path) -> list[RawDocument]:
    return [
        RawDocument(obj["id"], obj["lang"], obj["text"])
        for _, obj in _records(path, {"id": str, "lang": str, "text": str})
    ]


def read_entity_corpus(path: str | Path) -> list[EntityDocument]:
    docs = []
    for lineno, obj in _records(path, {"id": str, "lang": str, "entities": list}):
        if not all(isinstance(e, str) and e for e in obj["entities"]):
            raise FormatError(f"{path}:{lineno}: entities must be non-empty strings")
        docs.append(EntityDocument(obj["id"], tuple(obj["entities"]), obj["lang"]))
    return docs


def write_entity_corpus(docs: Iterable[EntityDocument], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            record = {"id": doc.doc_id, "lang": doc.language, "entities": list(doc.entities)}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
