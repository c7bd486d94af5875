"""Command line entry point: ``tec <subcommand> ...``.

Stages only talk through files: ``fuse`` writes a fused embedding file,
``extract`` turns a raw JSONL corpus into an entitized one, ``train`` writes a
model JSON, and ``infer``/``topics``/``eval`` read it back.

Exit status is 0 on success, 1 on runtime errors and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

from tec.clustering import KMeansConfig
from tec.corpus import read_entity_corpus, read_raw_corpus, write_entity_corpus
from tec.entitizer import (
    DEFAULT_THRESHOLD,
    CommandNormalizer,
    EntityDocument,
    Pipeline,
    build_automaton,
    default_normalizer,
    entitize,
)
from tec.errors import TECError
from tec.fusion import fuse_store, parse_alpha
from tec.inference import document_embedding, infer_vector
from tec.kb_store import Lexicon, SourceTag, load_embeddings, load_lexicon, save_embeddings
from tec.metrics import evaluate
from tec.model_store import load_model, save_model
from tec.pipeline import train_model
from tec.rerank import INIT_MODES, RerankConfig

logger = logging.getLogger("tec")

# Defaults live here rather than in argparse so that --config values can
# fill any flag not given on the command line.
DEFAULTS: dict[str, dict[str, Any]] = {
    "fuse": {"alpha": "1"},
    "extract": {"threshold": DEFAULT_THRESHOLD, "jobs": 1, "normalizer_cmd": []},
    "train": {
        "alpha": "1",
        "seed": 0,
        "runs": 1,
        "max_iters": 100,
        "tol": 1e-6,
        "n_redo": 3,
        "top_entities": 25,
        "epsilon": 1e-6,
        "n_track": None,
        "init": "distance",
    },
    "infer": {},
    "topics": {"top": 10},
    "eval": {"n": 10, "top_diversity": 25},
}

REQUIRED: dict[str, list[str]] = {
    "fuse": ["lm_embeddings", "graph_embeddings", "out"],
    "extract": ["lexicon", "corpus", "embeddings", "out"],
    "train": ["corpus", "lm_embeddings", "graph_embeddings", "topics", "out"],
    "infer": ["model", "corpus", "out"],
    "topics": ["model"],
    "eval": ["model", "corpus"],
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _alpha(text: str) -> str:
    try:
        parse_alpha(text)
    except TECError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tec", description="Topics as entity clusters.")
    parser.add_argument("--log-level", default=None, help="logging level (default: $TEC_LOG or WARNING)")
    parser.add_argument("--config", type=Path, help="JSON file whose keys fill flags not given explicitly")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    parser.set_defaults(_subparsers=sub.choices)

    p = sub.add_parser("fuse", help="fuse LM and graph embeddings into one file")
    p.add_argument("--lm-embeddings", type=Path)
    p.add_argument("--graph-embeddings", type=Path)
    p.add_argument("--alpha", type=_alpha, help="graph/LM weight ratio, or 'inf' (default 1)")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("extract", help="entitize a raw JSONL corpus")
    p.add_argument("--lexicon", type=Path)
    p.add_argument("--lang", help="comma-separated languages to process (default: all in lexicon)")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--embeddings", type=Path, help="fused embedding file")
    p.add_argument("--threshold", type=float)
    p.add_argument(
        "--normalizer-cmd",
        action="append",
        metavar="[LANG=]CMD",
        help="external normalizer reading stdin, writing stdout; repeatable per language",
    )
    p.add_argument("--jobs", type=_positive_int)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("train", help="fuse, cluster and rerank; write a model")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--lm-embeddings", type=Path)
    p.add_argument("--graph-embeddings", type=Path)
    p.add_argument("--alpha", type=_alpha)
    p.add_argument("--topics", type=_positive_int, help="number of topics K")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=_positive_int, help="train R models with seeds seed..seed+R-1")
    p.add_argument("--max-iters", type=_positive_int)
    p.add_argument("--tol", type=float)
    p.add_argument("--n-redo", type=_positive_int)
    p.add_argument("--top-entities", type=_positive_int, help="entities kept per topic")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n-track", type=_positive_int)
    p.add_argument("--init", choices=INIT_MODES)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("infer", help="topic weights for an entitized corpus")
    p.add_argument("--model", type=Path)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--embeddings", type=Path, help="fused embedding file used in training")
    p.add_argument("--lm-embeddings", type=Path)
    p.add_argument("--graph-embeddings", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("topics", help="print top entities per topic")
    p.add_argument("--model", type=Path)
    p.add_argument("--top", type=_positive_int)
    p.add_argument("--out", type=Path, help="also write topics as JSONL")

    p = sub.add_parser("eval", help="coherence, diversity and quality of a model")
    p.add_argument("--model", type=Path)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--n", type=_positive_int, help="top entities per topic for coherence")
    p.add_argument("--top-diversity", type=_positive_int)
    p.add_argument("--out", type=Path, help="write the report here as well as to stdout")
    return parser


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    overrides: dict[str, Any] = {}
    if args.config is not None:
        try:
            overrides = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read --config {args.config}: {exc}")
        if not isinstance(overrides, dict):
            parser.error("--config must hold a JSON object")
        overrides = {k.replace("-", "_"): v for k, v in overrides.items()}
    actions = {a.dest: a for a in args._subparsers[args.command]._actions}
    for key, value in overrides.items():
        if key in ("log_level",) and args.log_level is None:
            args.log_level = value
            continue
        action = actions.get(key)
        if action is None or key == "help":
            parser.error(f"--config key {key!r} is not a flag of '{args.command}'")
        if getattr(args, key) is not None:
            continue
        convert = action.type or str
        try:
            if isinstance(action, argparse._AppendAction):
                values = value if isinstance(value, list) else [value]
                value = [convert(str(v)) for v in values]
            else:
                value = convert(str(value))
        except (argparse.ArgumentTypeError, ValueError) as exc:
            parser.error(f"--config key {key!r}: {exc}")
        if action.choices is not None and value not in action.choices:
            parser.error(f"--config key {key!r}: {value!r} not in {list(action.choices)}")
        setattr(args, key, value)
    for key, value in DEFAULTS[args.command].items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    missing = [k for k in REQUIRED[args.command] if getattr(args, k) is None]
    if missing:
        parser.error("missing required flags: " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _atomic_write(path: Path, write: Callable[[Path], None]) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    os.close(fd)
    try:
        write(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _created_at() -> str | None:
    # Reproducible builds convention; without it the model carries no timestamp
    # so that identical inputs give byte-identical files.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


def _write_jsonl(records: list[dict]) -> Callable[[Path], None]:
    def write(path: Path) -> None:
        with path.open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    return write


# ---------------------------------------------------------------- fuse


def cmd_fuse(args: argparse.Namespace) -> int:
    lm = load_embeddings(args.lm_embeddings, SourceTag.LM)
    graph = load_embeddings(args.graph_embeddings, SourceTag.GRAPH)
    fused = fuse_store(lm, graph, parse_alpha(args.alpha))
    _atomic_write(args.out, lambda p: save_embeddings(fused, p))
    logger.info("wrote %d fused vectors of dim %d to %s", len(fused), fused.dim, args.out)
    return 0


# ---------------------------------------------------------------- extract

_WORKER_PIPELINES: dict[str, Pipeline] = {}


def _init_worker(pipelines: dict[str, Pipeline]) -> None:
    _WORKER_PIPELINES.update(pipelines)


def _entitize_one(task: tuple[str, str, str]) -> EntityDocument:
    doc_id, text, lang = task
    return entitize(doc_id, text, lang, _WORKER_PIPELINES[lang])


def _normalizers(specs: list[str], languages: list[str]) -> dict[str, Callable[[str], list[str]]]:
    chosen: dict[str, Callable[[str], list[str]]] = {lang: default_normalizer for lang in languages}
    for spec in specs:
        lang, sep, cmd = spec.partition("=")
        if sep and " " not in lang and lang:
            if lang in chosen:
                chosen[lang] = CommandNormalizer(cmd)
        else:
            for lang in languages:
                chosen[lang] = CommandNormalizer(spec)
    return chosen


def cmd_extract(args: argparse.Namespace) -> int:
    lexicon = load_lexicon(args.lexicon)
    store = load_embeddings(args.embeddings, SourceTag.FUSED)
    docs = read_raw_corpus(args.corpus)

    languages = args.lang.split(",") if args.lang else lexicon.languages()
    languages = [lang.strip() for lang in languages if lang.strip()]
    known = [e for e in lexicon if e.entity_id in store]
    if len(known) < len(lexicon):
        logger.warning(
            "%d lexicon entries name entities without a fused embedding; ignored",
            len(lexicon) - len(known),
        )
    lexicon = Lexicon(tuple(known))
    normalizers = _normalizers(args.normalizer_cmd, languages)
    pipelines = {
        lang: Pipeline(
            build_automaton(lexicon, lang, normalizers[lang]),
            store,
            normalizers[lang],
            args.threshold,
        )
        for lang in languages
    }

    tasks = []
    for doc in docs:
        if doc.language not in pipelines:
            logger.warning("document %r: language %r not selected; skipped", doc.doc_id, doc.language)
            continue
        tasks.append((doc.doc_id, doc.text, doc.language))

    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(args.jobs, initializer=_init_worker, initargs=(pipelines,)) as pool:
            results = list(pool.map(_entitize_one, tasks, chunksize=max(1, len(tasks) // (4 * args.jobs))))
    else:
        _init_worker(pipelines)
        results = [_entitize_one(t) for t in tasks]

    for doc in results:
        if doc.length == 0:
            logger.warning("document %r: no entities extracted", doc.doc_id)
    _atomic_write(args.out, lambda p: write_entity_corpus(results, p))
    logger.info("entitized %d documents into %s", len(results), args.out)
    return 0


# ---------------------------------------------------------------- train


def _run_path(out: Path, seed: int, runs: int) -> Path:
    if runs == 1:
        return out
    return out.with_name(f"{out.stem}.seed{seed}{out.suffix}")


def cmd_train(args: argparse.Namespace) -> int:
    corpus = read_entity_corpus(args.corpus)
    lm = load_embeddings(args.lm_embeddings, SourceTag.LM)
    graph = load_embeddings(args.graph_embeddings, SourceTag.GRAPH)
    alpha = parse_alpha(args.alpha)
    rerank_config = RerankConfig(args.top_entities, args.epsilon, args.n_track, args.init)
    created_at = _created_at()
    for seed in range(args.seed, args.seed + args.runs):
        kmeans = KMeansConfig(seed=seed, max_iters=args.max_iters, tol=args.tol, n_redo=args.n_redo)
        model, _ = train_model(corpus, lm, graph, alpha, args.topics, kmeans, rerank_config, created_at)
        out = _run_path(args.out, seed, args.runs)
        save_model(model, out)
        logger.info("seed %d: inertia %.6g, model written to %s", seed, model.centroids.inertia, out)
    return 0


# ---------------------------------------------------------------- infer


def _fused_store_for(args: argparse.Namespace, model):
    if args.embeddings is not None:
        store = load_embeddings(args.embeddings, SourceTag.FUSED)
    elif args.lm_embeddings is not None and args.graph_embeddings is not None:
        lm = load_embeddings(args.lm_embeddings, SourceTag.LM)
        graph = load_embeddings(args.graph_embeddings, SourceTag.GRAPH)
        store = fuse_store(lm, graph, model.fusion.alpha)
    else:
        raise TECError("infer needs --embeddings, or both --lm-embeddings and --graph-embeddings")
    model.check_store(store)
    return store


def cmd_infer(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    store = _fused_store_for(args, model)
    corpus = read_entity_corpus(args.corpus)
    records = []
    for doc in corpus:
        if doc.length == 0:
            logger.warning("document %r has no entities; skipped", doc.doc_id)
            continue
        weights = infer_vector(document_embedding(doc, store), model.centroids)
        records.append({"id": doc.doc_id, "weights": weights.w.tolist()})
    _atomic_write(args.out, _write_jsonl(records))
    return 0


# ---------------------------------------------------------------- topics / eval


def cmd_topics(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    records = []
    for t, topic in enumerate(model.top_entities):
        records.append({"topic": t, "entities": [[eid, score] for eid, score in topic]})
    if args.out is not None:
        _atomic_write(args.out, _write_jsonl(records))
    for rec in records:
        print(f"topic {rec['topic']}")
        for eid, score in rec["entities"][: args.top]:
            print(f"  {eid}\t{score:.6f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    corpus = read_entity_corpus(args.corpus)
    report = evaluate(model, corpus, args.n, args.top_diversity)
    text = report.to_json() + "\n"
    if args.out is not None:
        _atomic_write(args.out, lambda p: p.write_text(text, encoding="utf-8"))
    sys.stdout.write(text)
    return 0


COMMANDS = {
    "fuse": cmd_fuse,
    "extract": cmd_extract,
    "train": cmd_train,
    "infer": cmd_infer,
    "topics": cmd_topics,
    "eval": cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _merge_config(args, parser)

    level = (args.log_level or os.environ.get("TEC_LOG") or "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        parser.error(f"unknown log level {level!r}")
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logger.setLevel(level)
    del args._subparsers
    logger.info("%s: %s", args.command, {k: str(v) for k, v in sorted(vars(args).items())})
    try:
        return COMMANDS[args.command](args)
    except (TECError, OSError, ValueError) as exc:
        print(f"tec {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
