"""Command-line entry point: ``qedl <subcommand> [--config run.json] [flags]``.

Subcommands::

    gen-fixture     write a synthetic data set (plus a pipeline.json pointing at it)
    train-qed       train the CRF (method crf) or the KG-feature ensemble
    discover        find mentions in questions (one-step lexicon iteration unless --no-iteration)
    fit-similarity  fit TF-IDF / LSI / LDA on the background corpus
    train-ranker    train the pairwise ranking model on gold mentions
    link            rank KG candidates for discovered mentions
    eval            QED / EL / overall reports (JSON, text, PNG)
    ablate          ranking feature ablation on train/test gold mentions
    sweep           training-size sweep (CSV, text, PNG)

Flags override values from the config file. Every output directory gets a
``manifest.json`` recording the config hash and library versions.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from qedl import __version__
from qedl.config import ConfigError, PipelineConfig
from qedl.crf import CrfModel, CrfModelError
from qedl.evaluation import convergence_sweep, el_ablation, evaluate_links
from qedl.fixtures import FixtureConfig, FixtureError, generate_fixture
from qedl.kg import KgError, load_kg
from qedl.qed import Discoverer, Mention, train_qed
from qedl.questions import SchemaError, dumps_line, iter_jsonl, read_questions
from qedl.ranker import (
    FEATURE_SETS,
    RankModel,
    SimilarityContext,
    build_examples,
    feature_mask,
    link_mention,
    train_ranker,
)
from qedl.similarity import CorpusModels, EmbeddingTable, IdfTable, TextModelConfig, read_corpus

log = logging.getLogger("qedl")

EXPECTED_ERRORS = (ConfigError, KgError, SchemaError, CrfModelError, FixtureError, ValueError, OSError)


class CliError(RuntimeError):
    pass


# -- helpers --------------------------------------------------------------------


def ordered_map(fn, items, jobs: int):
    """``map`` that keeps input order; threads when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _versions() -> dict:
    out = {"qedl": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "numba", "matplotlib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, cfg: PipelineConfig | None, outputs: dict[str, Path],
                   extra: dict | None = None) -> Path:
    """Merge this command's entry into ``out_dir/manifest.json``."""
    path = out_dir / "manifest.json"
    manifest = {}
    if path.exists():
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            manifest = {}
    manifest["versions"] = _versions()
    entry = {
        "config_sha256": cfg.digest() if cfg else None,
        "outputs": {name: {"file": p.name, "sha256": _sha256(p)} for name, p in sorted(outputs.items())},
    }
    if extra:
        entry.update(extra)
    manifest.setdefault("commands", {})[command] = entry
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    cfg.override("jobs", getattr(args, "jobs", None))
    cfg.override("paths.output_dir", getattr(args, "output_dir", None))
    cfg.override("paths.model_dir", getattr(args, "model_dir", None))
    for name in ("kg", "lexicon", "stopwords", "embeddings", "corpus", "questions"):
        cfg.override(f"paths.{name}", getattr(args, name, None))
    cfg.validate()
    return cfg


def _dir(p: str) -> Path:
    d = Path(p)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _store(cfg: PipelineConfig):
    cfg.require("kg")
    for opt in ("lexicon", "stopwords"):
        if getattr(cfg.paths, opt):
            cfg.require(opt)
    return load_kg(cfg.paths.kg, cfg.paths.lexicon, cfg.paths.stopwords)


def _df_table(cfg: PipelineConfig):
    if not cfg.paths.corpus:
        return None
    cfg.require("corpus")
    return IdfTable.from_documents(read_corpus(cfg.paths.corpus)).df


def _questions(cfg: PipelineConfig, override: str | None, *prefer: str):
    if override:
        return read_questions(override)
    for name in prefer + ("questions",):
        if getattr(cfg.paths, name):
            cfg.require(name)
            return read_questions(getattr(cfg.paths, name))
    raise ConfigError("paths.questions: required by this command but not set")


def _write_lines(path: Path, records) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_line(rec))
    return path


def _text_model_config(cfg: PipelineConfig) -> TextModelConfig:
    s = cfg.similarity
    return TextModelConfig(s.lsi_rank, s.lda_topics, s.lda_alpha, s.lda_beta, s.lda_seed,
                           s.lda_sweeps, s.lda_infer_sweeps)


def _similarity_context(cfg: PipelineConfig, store, model_path: Path) -> SimilarityContext:
    if model_path.exists():
        corpus = CorpusModels.load(model_path)
    elif cfg.paths.corpus:
        log.info("no similarity model at %s; fitting from %s", model_path, cfg.paths.corpus)
        cfg.require("corpus")
        corpus = CorpusModels.fit(read_corpus(cfg.paths.corpus), store.stopwords, _text_model_config(cfg))
    else:
        raise CliError(f"no similarity model at {model_path} and paths.corpus is not set; "
                       "run fit-similarity or set paths.corpus")
    cfg.require("embeddings")
    emb = EmbeddingTable.load(cfg.paths.embeddings)
    s = cfg.similarity
    return SimilarityContext(store, emb, corpus, s.k1, s.b, s.avge_mode)


def _model_path(cfg: PipelineConfig, given: str | None, default: str) -> Path:
    return Path(given) if given else Path(cfg.paths.model_dir) / default


def _read_mention_records(path: str) -> list[dict]:
    """Discover/link output: ``{"id", "text", "mentions": [...]}`` per line."""
    out = []
    for where, rec in iter_jsonl(path):
        if not isinstance(rec, dict) or not isinstance(rec.get("id"), str) or not isinstance(rec.get("text"), str):
            raise SchemaError(f"{where}: expected an object with string 'id' and 'text'")
        ms = rec.get("mentions")
        if not isinstance(ms, list):
            raise SchemaError(f"{where}: 'mentions' must be a list")
        for m in ms:
            if not isinstance(m, dict) or not all(isinstance(m.get(k), int) for k in ("start", "end")):
                raise SchemaError(f"{where}: mention needs integer 'start' and 'end'")
            if not 0 <= m["start"] < m["end"] <= len(rec["text"]):
                raise SchemaError(f"{where}: mention span {m['start']}:{m['end']} outside the text")
        out.append(rec)
    return out


# -- subcommands ----------------------------------------------------------------


def cmd_gen_fixture(args) -> int:
    fc = FixtureConfig(seed=args.seed, n_entities=args.n_entities, n_questions=args.n_questions,
                       vocab_size=args.vocab_size, embedding_dim=args.embedding_dim,
                       ambiguity_rate=args.ambiguity_rate)
    out = _dir(args.out)
    paths = generate_fixture(fc, out)
    pipeline = {
        "paths": {"kg": "kg.jsonl", "lexicon": "lexicon.txt", "stopwords": "stopwords.txt",
                  "embeddings": "embeddings.txt", "corpus": "corpus.txt", "questions": "questions.jsonl",
                  "train": "train.jsonl", "test": "test.jsonl", "model_dir": "models", "output_dir": "run"},
        "similarity": {"lsi_rank": 50, "lda_topics": fc.n_topics * 2, "lda_sweeps": 200},
    }
    (out / "pipeline.json").write_text(json.dumps(pipeline, indent=2) + "\n", encoding="utf-8")
    write_manifest(out, "gen-fixture", None, paths, {"fixture": fc.__dict__})
    print(f"wrote fixture to {out} (config: {out / 'pipeline.json'})")
    return 0


def cmd_train_qed(args) -> int:
    cfg = load_config(args)
    c = cfg.crf
    for name in ("method", "epochs", "l2", "seed"):
        cfg.override(f"crf.{name}", getattr(args, name))
    cfg.validate()
    cfg.require("lexicon")
    store = _store(cfg)
    questions = _questions(cfg, args.questions_file, "train")
    model = train_qed(questions, store, _df_table(cfg), method=c.method, l2=c.l2, epochs=c.epochs,
                      seed=c.seed, max_n=c.max_n, df_buckets=c.df_buckets, step=c.step)
    out = _model_path(cfg, args.model, "qed.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    log_path = out.with_suffix(".log.csv")
    log_path.write_text("epoch,objective\n" + "".join(
        f"{i},{v:.10g}\n" for i, v in enumerate(model.history)), encoding="utf-8")
    write_manifest(out.parent, "train-qed", cfg, {"model": out, "log": log_path})
    print(f"trained {c.method} model on {len(questions)} questions -> {out}")
    return 0


def cmd_discover(args) -> int:
    cfg = load_config(args)
    store = _store(cfg)
    model_path = _model_path(cfg, args.model, "qed.json")
    model = CrfModel.load(model_path)
    questions = _questions(cfg, args.questions_file, "test")
    # the model itself decides whether the KG tag column is used
    method = model.meta.get("method", "crf") if args.no_iteration else "iteration"
    discover = Discoverer(store, model, _df_table(cfg), cfg.crf.max_n)

    def run(q):
        return {"id": q.id, "text": q.text, "mentions": [m.to_dict() for m in discover(q.text, method)]}

    out_dir = _dir(cfg.paths.output_dir)
    out = Path(args.out) if args.out else out_dir / "mentions.jsonl"
    _write_lines(out, ordered_map(run, questions, cfg.jobs))
    write_manifest(out.parent, "discover", cfg, {"mentions": out}, {"method": method})
    print(f"discovered mentions for {len(questions)} questions -> {out}")
    return 0


def cmd_fit_similarity(args) -> int:
    cfg = load_config(args)
    cfg.require("corpus")
    stop = []
    if cfg.paths.stopwords:
        cfg.require("stopwords")
        stop = [w.strip() for w in Path(cfg.paths.stopwords).read_text(encoding="utf-8").splitlines() if w.strip()]
    from qedl.text import normalize
    models = CorpusModels.fit(read_corpus(cfg.paths.corpus), [normalize(w) for w in stop],
                              _text_model_config(cfg))
    out = _model_path(cfg, args.model, "similarity.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    models.save(out)
    write_manifest(out.parent, "fit-similarity", cfg, {"similarity": out})
    print(f"fitted similarity models ({len(models.vocab)} terms) -> {out}")
    return 0


def _feature_sets(arg: str | None):
    if arg is None:
        return None
    sets = [s.strip() for s in arg.split(",") if s.strip()]
    feature_mask(sets)  # validates names
    return sets


def cmd_train_ranker(args) -> int:
    cfg = load_config(args)
    r = cfg.ranker
    for name in ("epochs", "l2", "seed", "eta0"):
        cfg.override(f"ranker.{name}", getattr(args, name))
    cfg.override("ranker.features", _feature_sets(args.features))
    cfg.validate()
    store = _store(cfg)
    ctx = _similarity_context(cfg, store, _model_path(cfg, args.similarity, "similarity.json"))
    questions = _questions(cfg, args.questions_file, "train")
    examples = build_examples(questions, ctx)
    model = train_ranker(examples, l2=r.l2, epochs=r.epochs, seed=r.seed, eta0=r.eta0,
                         feature_sets=r.features)
    out = _model_path(cfg, args.model, "ranker.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    write_manifest(out.parent, "train-ranker", cfg, {"ranker": out})
    print(f"trained ranker on {len(examples)} mentions ({model.meta.get('skipped', 0)} skipped) -> {out}")
    return 0


def cmd_link(args) -> int:
    cfg = load_config(args)
    store = _store(cfg)
    ctx = _similarity_context(cfg, store, _model_path(cfg, args.similarity, "similarity.json"))
    model = RankModel.load(_model_path(cfg, args.ranker, "ranker.json"))
    sets = _feature_sets(args.features)
    if sets is not None:
        mask = feature_mask(sets)
        model = RankModel(np.where(mask, model.weights, 0.0), model.mean, model.std, mask, model.meta)
    out_dir = _dir(cfg.paths.output_dir)
    src = args.mentions or str(out_dir / "mentions.jsonl")
    records = _read_mention_records(src)

    def run(rec):
        mentions = []
        for m in rec["mentions"]:
            mention = Mention(m["start"], m["end"], rec["text"][m["start"]:m["end"]], m.get("source", "CRF"))
            ranked = link_mention(rec["text"], mention, model, ctx)
            mentions.append({**mention.to_dict(), "candidates": ranked})
        return {"id": rec["id"], "text": rec["text"], "mentions": mentions}

    out = Path(args.out) if args.out else out_dir / "links.jsonl"
    _write_lines(out, ordered_map(run, records, cfg.jobs))
    write_manifest(out.parent, "link", cfg, {"links": out})
    print(f"linked mentions of {len(records)} questions -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args)
    out_dir = _dir(cfg.paths.output_dir)
    gold = _questions(cfg, args.gold, "test")
    src = args.predictions or str(out_dir / "links.jsonl")
    links = {}
    for rec in _read_mention_records(src):
        if rec["id"] in links:
            raise SchemaError(f"{src}: duplicate prediction id {rec['id']!r}")
        links[rec["id"]] = [(m["start"], m["end"],
                             m["candidates"][0]["entity_id"] if m.get("candidates") else None)
                            for m in rec["mentions"]]
    report = evaluate_links(links, gold)
    outputs = {"json": out_dir / "report.json", "text": out_dir / "report.txt"}
    outputs["json"].write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    outputs["text"].write_text(report.to_text(), encoding="utf-8")
    if not args.no_plot:
        from qedl.plotting import plot_report
        outputs["figure"] = plot_report(report, out_dir / "report.png")
    write_manifest(out_dir, "eval", cfg, outputs)
    print(report.to_text(), end="")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args)
    r = cfg.ranker
    store = _store(cfg)
    ctx = _similarity_context(cfg, store, _model_path(cfg, args.similarity, "similarity.json"))
    train = build_examples(_questions(cfg, None, "train"), ctx)
    test = build_examples(_questions(cfg, None, "test"), ctx)
    result = el_ablation(train, test, l2=r.l2, epochs=r.epochs, seed=r.seed, eta0=r.eta0)
    out_dir = _dir(cfg.paths.output_dir)
    out = out_dir / "ablation.json"
    out.write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    write_manifest(out_dir, "ablate", cfg, {"ablation": out})
    for row in result["cumulative"]:
        print(f"{row['features']:<40} {100 * row['accuracy']:6.2f}")
    for row in result["leave_one_out"]:
        print(f"{'-' + row['omitted']:<40} {100 * row['accuracy']:6.2f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    c = cfg.crf
    for name in ("epochs", "l2", "seed"):
        cfg.override(f"crf.{name}", getattr(args, name))
    cfg.validate()
    cfg.require("lexicon")
    store = _store(cfg)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise CliError(f"--sizes: expected comma-separated integers, got {args.sizes!r}") from None
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    questions = _questions(cfg, args.questions_file)
    holdout = float(args.holdout) if "." in args.holdout else int(args.holdout)
    report = convergence_sweep(questions, store, sizes, methods, seed=c.seed, df_table=_df_table(cfg),
                               holdout=holdout, l2=c.l2, epochs=c.epochs, max_n=c.max_n,
                               df_buckets=c.df_buckets, step=c.step)
    out_dir = _dir(cfg.paths.output_dir)
    outputs = {"csv": out_dir / "sweep.csv", "text": out_dir / "sweep.txt"}
    outputs["csv"].write_text(report.to_csv(), encoding="utf-8")
    outputs["text"].write_text(report.to_text(), encoding="utf-8")
    if not args.no_plot:
        from qedl.plotting import plot_sweep
        outputs["figure"] = plot_sweep(report, out_dir / "sweep.png")
    write_manifest(out_dir, "sweep", cfg, outputs)
    print(report.to_text(), end="")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qedl", description="Question entity discovery and linking.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, questions=True):
        sp.add_argument("--config", help="pipeline JSON config")
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--model-dir", dest="model_dir")
        sp.add_argument("--jobs", type=int)
        for name in ("kg", "lexicon", "stopwords", "embeddings", "corpus"):
            sp.add_argument(f"--{name}")
        if questions:
            sp.add_argument("--questions", dest="questions_file", help="questions JSONL to process")

    g = sub.add_parser("gen-fixture", help="write a synthetic data set")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-entities", type=int, default=50)
    g.add_argument("--n-questions", type=int, default=200)
    g.add_argument("--vocab-size", type=int, default=200)
    g.add_argument("--embedding-dim", type=int, default=32)
    g.add_argument("--ambiguity-rate", type=float, default=0.2)
    g.set_defaults(func=cmd_gen_fixture)

    t = sub.add_parser("train-qed", help="train the discovery CRF")
    common(t)
    t.add_argument("--method", choices=("crf", "ensemble"))
    t.add_argument("--epochs", type=int)
    t.add_argument("--l2", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--model", help="output model path")
    t.set_defaults(func=cmd_train_qed)

    d = sub.add_parser("discover", help="find entity mentions")
    common(d)
    d.add_argument("--model")
    d.add_argument("--no-iteration", action="store_true", help="skip the one-step lexicon iteration")
    d.add_argument("--out")
    d.set_defaults(func=cmd_discover)

    f = sub.add_parser("fit-similarity", help="fit TF-IDF/LSI/LDA on the corpus")
    common(f, questions=False)
    f.add_argument("--model", help="output path")
    f.set_defaults(func=cmd_fit_similarity)

    feats = f"comma-separated subset of {','.join(FEATURE_SETS)}"
    r = sub.add_parser("train-ranker", help="train the ranking model")
    common(r)
    r.add_argument("--similarity")
    r.add_argument("--features", help=feats)
    r.add_argument("--epochs", type=int)
    r.add_argument("--l2", type=float)
    r.add_argument("--eta0", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--model", help="output path")
    r.set_defaults(func=cmd_train_ranker)

    lk = sub.add_parser("link", help="rank candidates for mentions")
    common(lk, questions=False)
    lk.add_argument("--mentions")
    lk.add_argument("--similarity")
    lk.add_argument("--ranker")
    lk.add_argument("--features", help=feats)
    lk.add_argument("--out")
    lk.set_defaults(func=cmd_link)

    e = sub.add_parser("eval", help="score predictions against gold")
    common(e, questions=False)
    e.add_argument("--predictions")
    e.add_argument("--gold")
    e.add_argument("--no-plot", action="store_true")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="ranking feature ablation")
    common(a, questions=False)
    a.add_argument("--similarity")
    a.set_defaults(func=cmd_ablate)

    s = sub.add_parser("sweep", help="training-size sweep")
    common(s)
    s.add_argument("--sizes", required=True, help="e.g. 20,50,100")
    s.add_argument("--methods", default="crf,ensemble")
    s.add_argument("--holdout", default="0.2", help="fraction (with a dot) or count of held-out questions")
    s.add_argument("--epochs", type=int)
    s.add_argument("--l2", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, *EXPECTED_ERRORS) as exc:
        print(f"qedl {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
