import json
import subprocess
import sys

import numpy as np
import pytest

from tec.cli import main
from tec.corpus import read_entity_corpus
from tec.model_store import load_model

from synthetic import make_planted, purity


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    return make_planted(tmp_path_factory.mktemp("planted"), seed=0)


@pytest.fixture(scope="module")
def pipeline(planted, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["fuse", "--lm-embeddings", str(planted.lm), "--graph-embeddings", str(planted.graph),
                 "--out", str(out / "fused.txt")]) == 0
    assert main(["extract", "--lexicon", str(planted.lexicon), "--corpus", str(planted.corpus),
                 "--embeddings", str(out / "fused.txt"), "--out", str(out / "ent.jsonl")]) == 0
    assert main(["train", "--corpus", str(out / "ent.jsonl"), "--lm-embeddings", str(planted.lm),
                 "--graph-embeddings", str(planted.graph), "--topics", "3", "--seed", "1",
                 "--top-entities", "15", "--out", str(out / "model.json")]) == 0
    return out


def test_extract_smoke(tmp_path, planted):
    raw = tmp_path / "raw.jsonl"
    raw.write_text(
        "\n".join(
            json.dumps({"id": f"d{i}", "lang": "en", "text": t})
            for i, t in enumerate(["the ent000 and ent002", "nothing here", "big ent101 ent102"])
        )
        + "\n"
    )
    fused = tmp_path / "fused.txt"
    main(["fuse", "--lm-embeddings", str(planted.lm), "--graph-embeddings", str(planted.graph), "--out", str(fused)])
    proc = subprocess.run(
        [sys.executable, "-m", "tec.cli", "extract", "--lexicon", str(planted.lexicon), "--lang", "en",
         "--corpus", str(raw), "--embeddings", str(fused), "--out", str(tmp_path / "ent.jsonl")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    lines = (tmp_path / "ent.jsonl").read_text().splitlines()
    assert len(lines) == 3
    records = [json.loads(line) for line in lines]
    assert records[0] == {"id": "d0", "lang": "en", "entities": ["Q000", "Q002"]}
    assert records[1]["entities"] == []
    assert records[2]["entities"] == ["Q101", "Q102"]
    assert "document 'd1': no entities extracted" in proc.stderr


def test_extract_parallel_matches_serial(tmp_path, planted, pipeline):
    code = main(["extract", "--lexicon", str(planted.lexicon), "--corpus", str(planted.corpus),
                 "--embeddings", str(pipeline / "fused.txt"), "--jobs", "2", "--out", str(tmp_path / "p.jsonl")])
    assert code == 0
    assert (tmp_path / "p.jsonl").read_bytes() == (pipeline / "ent.jsonl").read_bytes()


def test_shared_surface_disambiguated(planted, pipeline):
    for doc in read_entity_corpus(pipeline / "ent.jsonl"):
        groups = {planted.group_of[e] for e in doc.entities}
        assert len(groups) == 1


def test_missing_lexicon_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["extract", "--corpus", "c", "--embeddings", "e", "--out", str(tmp_path / "o")])
    assert exc.value.code == 2
    assert "--lexicon" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_zero_topics_is_usage_error(planted, pipeline):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--corpus", str(pipeline / "ent.jsonl"), "--lm-embeddings", str(planted.lm),
              "--graph-embeddings", str(planted.graph), "--topics", "0", "--out", "m.json"])
    assert exc.value.code == 2


def test_runtime_error_exit_code(tmp_path, planted, pipeline, capsys):
    code = main(["train", "--corpus", str(pipeline / "ent.jsonl"), "--lm-embeddings", str(planted.lm),
                 "--graph-embeddings", str(planted.graph), "--topics", "500", "--out", str(tmp_path / "m.json")])
    assert code == 1
    assert "500 topics" in capsys.readouterr().err
    assert not (tmp_path / "m.json").exists()


def test_train_reports_missing_entity(tmp_path, planted):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"id": "x", "lang": "en", "entities": ["Q000", "Q999"]}) + "\n")
    code = main(["train", "--corpus", str(corpus), "--lm-embeddings", str(planted.lm),
                 "--graph-embeddings", str(planted.graph), "--topics", "1", "--out", str(tmp_path / "m.json")])
    assert code == 1


def test_train_recovers_planted_groups(planted, pipeline):
    model = load_model(pipeline / "model.json")
    assert model.k == 3
    assert purity(model.top_entities, planted.group_of) == 1.0
    majority = sorted(planted.group_of[t[0][0]] for t in model.top_entities)
    assert majority == [0, 1, 2]


def test_alpha_variants_deterministic(tmp_path, planted, pipeline):
    outs = {}
    for alpha in ("inf", "0"):
        for run in range(2):
            path = tmp_path / f"m-{alpha}-{run}.json"
            main(["train", "--corpus", str(pipeline / "ent.jsonl"), "--lm-embeddings", str(planted.lm),
                  "--graph-embeddings", str(planted.graph), "--topics", "3", "--alpha", alpha,
                  "--seed", "5", "--out", str(path)])
            outs[alpha, run] = path.read_bytes()
    assert outs["inf", 0] == outs["inf", 1] and outs["0", 0] == outs["0", 1]
    inf_model = load_model(tmp_path / "m-inf-0.json")
    zero_model = load_model(tmp_path / "m-0-0.json")
    assert not np.array_equal(inf_model.centroids.vectors, zero_model.centroids.vectors)
    assert np.all(inf_model.centroids.vectors[:, :16] == 0)


def test_runs_use_sequential_seeds(tmp_path, planted, pipeline):
    main(["train", "--corpus", str(pipeline / "ent.jsonl"), "--lm-embeddings", str(planted.lm),
          "--graph-embeddings", str(planted.graph), "--topics", "3", "--seed", "3", "--runs", "2",
          "--out", str(tmp_path / "m.json")])
    seeds = [load_model(tmp_path / f"m.seed{s}.json").kmeans.seed for s in (3, 4)]
    assert seeds == [3, 4]


def test_infer_weights_sum_to_one(tmp_path, pipeline):
    code = main(["infer", "--model", str(pipeline / "model.json"), "--corpus", str(pipeline / "ent.jsonl"),
                 "--embeddings", str(pipeline / "fused.txt"), "--out", str(tmp_path / "w.jsonl")])
    assert code == 0
    rows = [json.loads(line) for line in (tmp_path / "w.jsonl").read_text().splitlines()]
    assert len(rows) == 300
    for row in rows:
        assert len(row["weights"]) == 3
        assert abs(sum(row["weights"]) - 1) <= 1e-9


def test_infer_document_on_centroid(tmp_path, planted, pipeline):
    # K equals the number of distinct entities, so every centroid is an entity vector
    corpus = tmp_path / "c.jsonl"
    corpus.write_text("".join(
        json.dumps({"id": e, "lang": "en", "entities": [e]}) + "\n" for e in ("Q000", "Q100", "Q200")
    ))
    main(["train", "--corpus", str(corpus), "--lm-embeddings", str(planted.lm),
          "--graph-embeddings", str(planted.graph), "--topics", "3", "--out", str(tmp_path / "m.json")])
    main(["infer", "--model", str(tmp_path / "m.json"), "--corpus", str(corpus),
          "--embeddings", str(pipeline / "fused.txt"), "--out", str(tmp_path / "w.jsonl")])
    rows = [json.loads(line) for line in (tmp_path / "w.jsonl").read_text().splitlines()]
    tops = set()
    for row in rows:
        w = np.array(row["weights"])
        assert w.max() == pytest.approx(1.0, abs=1e-12)
        tops.add(int(w.argmax()))
    assert tops == {0, 1, 2}


def test_infer_with_separate_embeddings_and_stale_check(tmp_path, planted, pipeline, capsys):
    code = main(["infer", "--model", str(pipeline / "model.json"), "--corpus", str(pipeline / "ent.jsonl"),
                 "--lm-embeddings", str(planted.lm), "--graph-embeddings", str(planted.graph),
                 "--out", str(tmp_path / "w.jsonl")])
    assert code == 0
    lines = (pipeline / "fused.txt").read_text().splitlines()
    (tmp_path / "stale.txt").write_text("\n".join(lines[:-1]) + "\n")
    code = main(["infer", "--model", str(pipeline / "model.json"), "--corpus", str(pipeline / "ent.jsonl"),
                 "--embeddings", str(tmp_path / "stale.txt"), "--out", str(tmp_path / "w2.jsonl")])
    assert code == 1 and not (tmp_path / "w2.jsonl").exists()
    assert "retrain" in capsys.readouterr().err


def test_topics_output(tmp_path, pipeline, capsys):
    assert main(["topics", "--model", str(pipeline / "model.json"), "--top", "10",
                 "--out", str(tmp_path / "topics.jsonl")]) == 0
    out = capsys.readouterr().out
    blocks = out.split("topic ")[1:]
    assert len(blocks) == 3
    for block in blocks:
        assert len(block.strip().splitlines()) - 1 <= 10
    records = [json.loads(x) for x in (tmp_path / "topics.jsonl").read_text().splitlines()]
    assert [r["topic"] for r in records] == [0, 1, 2]
    assert all(len(r["entities"]) == 15 for r in records)


def test_eval_planted(tmp_path, pipeline, capsys):
    assert main(["eval", "--model", str(pipeline / "model.json"), "--corpus", str(pipeline / "ent.jsonl"),
                 "--out", str(tmp_path / "report.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["td"] == 1.0
    assert report["tq"] == report["tc"] * report["td"]
    assert set(report) >= {"tc", "td", "tq", "per_topic_tc", "n", "top_diversity"}
    assert json.loads((tmp_path / "report.json").read_text()) == report


def test_config_file_fills_flags(tmp_path, pipeline):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": str(pipeline / "model.json"), "corpus": str(pipeline / "ent.jsonl"),
                               "n": 5, "top-diversity": 10}))
    assert main(["--config", str(cfg), "eval", "--out", str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["n"] == 5 and report["top_diversity"] == 10
    cfg.write_text(json.dumps({"model": "m", "bogus": 1}))
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "eval", "--corpus", "c"])
    assert exc.value.code == 2
    cfg.write_text(json.dumps({"model": "m", "n": 0}))
    with pytest.raises(SystemExit):
        main(["--config", str(cfg), "eval", "--corpus", "c"])


def test_console_script_and_log_env(tmp_path, pipeline):
    proc = subprocess.run(
        [sys.executable, "-m", "tec.cli", "topics", "--model", str(pipeline / "model.json"), "--top", "2"],
        capture_output=True, text=True, env={"TEC_LOG": "info", "PATH": ""},
    )
    assert proc.returncode == 0
    assert "topics:" in proc.stderr
    assert proc.stdout.startswith("topic 0")
