from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from tec.kb_store import EmbeddingStore, SourceTag


def write_vectors(path: Path, vectors: dict[str, list[float]], tag: str | None = None) -> Path:
    dim = len(next(iter(vectors.values())))
    lines = [f"dim {dim}"]
    if tag:
        lines.append(f"# source_tag {tag}")
    lines += [eid + " " + " ".join(repr(float(x)) for x in vec) for eid, vec in vectors.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_store(vectors: dict[str, list[float]], tag: SourceTag = SourceTag.FUSED) -> EmbeddingStore:
    dim = len(next(iter(vectors.values())))
    return EmbeddingStore.from_vectors(vectors, dim, tag)


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, text = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, text = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {text}")
