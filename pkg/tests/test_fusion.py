import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tec.errors import ConfigError, VocabularyError
from tec.fusion import INFINITY, FusionConfig, fuse_entity, fuse_store, parse_alpha
from tec.kb_store import SourceTag

from conftest import make_store, random_unit


@pytest.mark.parametrize(
    "alpha, expected",
    [
        (1.0, [math.sqrt(0.5), 0, 0, math.sqrt(0.5)]),
        (0.0, [1, 0, 0, 0]),
        # sqrt(1/3), sqrt(2/3) by hand
        (2.0, [0.5773502691896257, 0, 0, 0.816496580927726]),
        (INFINITY, [0, 0, 0, 1]),
    ],
)
def test_fuse_entity_examples(alpha, expected):
    out = fuse_entity(np.array([1.0, 0.0]), np.array([0.0, 1.0]), alpha)
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_fuse_entity_rejects_bad_input():
    with pytest.raises(ConfigError):
        fuse_entity(np.array([2.0, 0.0]), np.array([0.0, 1.0]), 1.0)
    with pytest.raises(ConfigError):
        fuse_entity(np.array([1.0, 0.0]), np.array([0.0, 1.0]), -0.5)


@pytest.mark.parametrize("text, value", [("inf", INFINITY), ("Infinity", INFINITY), ("0.5", 0.5), (2, 2.0)])
def test_parse_alpha(text, value):
    assert parse_alpha(text) == value


@pytest.mark.parametrize("text", ["-1", "nan", "abc"])
def test_parse_alpha_rejects(text):
    with pytest.raises(ConfigError):
        parse_alpha(text)


def test_fusion_config_round_trip():
    cfg = FusionConfig(INFINITY, 3, 4)
    assert cfg.to_dict() == {"alpha": "inf", "dim_lm": 3, "dim_graph": 4}
    assert FusionConfig.from_dict(cfg.to_dict()) == cfg


def test_fuse_store_intersection():
    lm = make_store({"Q1": [1, 0], "Q2": [0, 1]}, SourceTag.LM)
    g = make_store({"Q2": [1, 0], "Q3": [0, 1]}, SourceTag.GRAPH)
    fused = fuse_store(lm, g, 1.0)
    assert fused.ids == ("Q2",) and fused.dim == 4 and fused.source_tag is SourceTag.FUSED
    with pytest.raises(VocabularyError):
        fuse_store(make_store({"Q1": [1.0]}), make_store({"Q9": [1.0]}), 1.0)


def test_fuse_store_graph_only(rng):
    lm = make_store({"A": list(random_unit(rng, 3)), "B": list(random_unit(rng, 3))}, SourceTag.LM)
    shared = list(random_unit(rng, 2))
    g = make_store({"A": shared, "B": shared}, SourceTag.GRAPH)
    fused = fuse_store(lm, g, INFINITY)
    assert np.all(fused.matrix[:, :3] == 0)
    np.testing.assert_array_equal(fused.vector("A"), fused.vector("B"))


alphas = st.one_of(st.floats(0, 1e6), st.just(INFINITY))


@settings(max_examples=200)
@given(alphas, st.integers(0, 2**32 - 1))
def test_fused_cosine_is_blend(alpha, seed):
    rng = np.random.default_rng(seed)
    lm_a, lm_b = random_unit(rng, 5), random_unit(rng, 5)
    g_a, g_b = random_unit(rng, 3), random_unit(rng, 3)
    fa, fb = fuse_entity(lm_a, g_a, alpha), fuse_entity(lm_b, g_b, alpha)
    assert abs(np.linalg.norm(fa) - 1) <= 1e-6
    if alpha == INFINITY:
        lm_w, g_w = 0.0, 1.0
    else:
        lm_w, g_w = 1 / (1 + alpha), alpha / (1 + alpha)
    expected = lm_w * (lm_a @ lm_b) + g_w * (g_a @ g_b)
    assert abs(fa @ fb - expected) <= 1e-9
    if alpha == 0:
        assert abs(fa @ fb - lm_a @ lm_b) <= 1e-12
