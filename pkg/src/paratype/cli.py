"""Command-line front end.

One binary, six subcommands (ingest, train, analyze, baseline, lede
generate, lede eval), wired by an optional JSON config file with flag
overrides (flags win). Progress goes to stderr; data goes to files, so
outputs are pipeline-safe. Every command is reproducible from
(inputs, config, seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace

from . import analysis as ana
from . import baseline as base
from . import corpus as corp
from . import ledegen as lede
from . import sampler as smp
from .errors import ParatypeError, ValidationError

DEFAULT_KEYWORD = "crime"
DEFAULT_NGRAM = 2


def load_run_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict):
        raise ValidationError(f"config {path}: top level must be an object")
    return payload


def _cfg(config: dict, section: str, key: str, default=None):
    value = config.get(section)
    if isinstance(value, dict):
        return value.get(key, default)
    return default


def _pick(flag_value, config: dict, section: str, key: str, default=None):
    # flags win over config; config wins over defaults
    if flag_value is not None:
        return flag_value
    return _cfg(config, section, key, default)


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ValidationError(f"no {what} path given (use a flag or config)")
    if not os.path.isfile(path):
        raise ValidationError(f"{what} file not found: {path}")
    return path


def _out_dir(args, config: dict) -> str:
    out = _pick(args.out, config, "paths", "out", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _hyperparams(args, config: dict) -> smp.HyperParams:
    hp_cfg = dict(config.get("hyperparams") or {})
    overrides = {
        "seed": args.seed,
        "gamma": args.gamma,
        "n_topics": args.topics,
        "n_types": args.types,
        "n_sweeps": args.sweeps,
        "burn_in": args.burn_in,
        "sample_lag": args.lag,
    }
    for key, value in overrides.items():
        if value is not None:
            hp_cfg[key] = value
    return smp.HyperParams(**hp_cfg)


# -- subcommands ---------------------------------------------------------


def cmd_ingest(args, config: dict) -> int:
    articles = _require_file(
        _pick(args.articles, config, "paths", "articles"), "articles"
    )
    stopwords_path = _require_file(
        _pick(args.stopwords, config, "paths", "stopwords"), "stopwords"
    )
    out = _out_dir(args, config)
    keyword = _pick(args.keyword, config, "ingest", "keyword", DEFAULT_KEYWORD)
    min_count = _pick(args.min_count, config, "ingest", "min_count", corp.DEFAULT_MIN_COUNT)

    with open(stopwords_path, encoding="utf-8") as fh:
        stopwords = {line.strip() for line in fh if line.strip()}

    docs = corp.load_collection(articles)
    _log(f"loaded {len(docs)} documents")
    docs = corp.filter_keyword(docs, keyword)
    _log(f"keyword '{keyword}': {len(docs)} documents")
    docs = corp.filter_weekday(docs)
    _log(f"weekday filter: {len(docs)} documents")
    corpus = corp.build_corpus(docs, stopwords, min_count=min_count)
    _log(
        f"corpus: {corpus.n_docs} documents, {corpus.n_paragraphs} paragraphs, "
        f"{corpus.n_tokens} tokens, vocabulary {len(corpus.vocabulary)}"
    )
    corpus_path = os.path.join(out, "corpus.json")
    corp.save_corpus(corpus, corpus_path)
    _log(f"wrote {corpus_path}")
    return 0


def _train_one_chain(corpus_path: str, hp_dict: dict, samples_path: str, logprob_path: str) -> str:
    corpus = corp.load_corpus(corpus_path)
    ps = smp.run(corpus, smp.HyperParams(**hp_dict))
    smp.save_samples(ps, samples_path)
    smp.write_logprob_csv(ps, logprob_path)
    return samples_path


def cmd_train(args, config: dict) -> int:
    out = _out_dir(args, config)
    corpus_path = _require_file(
        _pick(args.corpus, config, "paths", "corpus", os.path.join(out, "corpus.json")),
        "corpus",
    )
    hp = _hyperparams(args, config)
    chains = args.chains if args.chains is not None else 1
    if chains < 1:
        raise ValidationError("--chains must be >= 1")

    if chains == 1:
        corpus = corp.load_corpus(corpus_path)
        _log(
            f"training: {corpus.n_docs} docs, {corpus.n_tokens} tokens, "
            f"K={hp.n_topics}, T={hp.n_types}, {hp.n_sweeps} sweeps, seed={hp.seed}"
        )
        ps = smp.run(corpus, hp)
        samples_path = os.path.join(out, "samples.bin")
        logprob_path = os.path.join(out, "logprob.csv")
        smp.save_samples(ps, samples_path)
        smp.write_logprob_csv(ps, logprob_path)
        _log(
            f"retained {len(ps.samples)} samples, final logprob "
            f"{ps.logprob_trace[-1]:.3f}"
        )
        _log(f"wrote {samples_path} and {logprob_path}")
        return 0

    jobs = []
    for i in range(chains):
        hp_i = replace(hp, seed=hp.seed + i)
        jobs.append(
            (
                corpus_path,
                asdict(hp_i),
                os.path.join(out, f"samples_{i}.bin"),
                os.path.join(out, f"logprob_{i}.csv"),
            )
        )
    _log(f"training {chains} chains with seeds {hp.seed}..{hp.seed + chains - 1}")
    with ProcessPoolExecutor(max_workers=min(chains, os.cpu_count() or 1)) as pool:
        futures = [pool.submit(_train_one_chain, *job) for job in jobs]
        for future in futures:
            _log(f"wrote {future.result()}")
    return 0


def cmd_analyze(args, config: dict) -> int:
    out = _out_dir(args, config)
    corpus_path = _require_file(
        _pick(args.corpus, config, "paths", "corpus", os.path.join(out, "corpus.json")),
        "corpus",
    )
    samples_path = _require_file(
        _pick(args.samples, config, "paths", "samples", os.path.join(out, "samples.bin")),
        "samples",
    )
    lexicon_path = _pick(args.lexicon, config, "paths", "lexicon")
    lexicon = ana.load_pos_lexicon(_require_file(lexicon_path, "lexicon")) if lexicon_path else {}

    corpus = corp.load_corpus(corpus_path)
    samples = smp.load_samples(samples_path)
    report = ana.build_report(
        corpus,
        samples,
        lexicon=lexicon,
        min_count=_cfg(config, "analysis", "min_count", ana.DEFAULT_REPORT_MIN_COUNT),
        topics_per_type=_cfg(config, "analysis", "topics_per_type", 3),
        words_per_topic=_cfg(config, "analysis", "words_per_topic", 10),
    )
    report_dir = os.path.join(out, "report")
    ana.write_report(report, report_dir)
    _log(
        f"first-paragraph entropy {report.first_para_entropy:.4f} nats "
        f"(max {math.log(samples.hp.n_types):.4f})"
    )
    _log(f"wrote report to {report_dir}")
    return 0


def cmd_baseline(args, config: dict) -> int:
    out = _out_dir(args, config)
    corpus_path = _require_file(
        _pick(args.corpus, config, "paths", "corpus", os.path.join(out, "corpus.json")),
        "corpus",
    )
    embeddings_path = _require_file(
        _pick(args.embeddings, config, "paths", "embeddings"), "embeddings"
    )
    corpus = corp.load_corpus(corpus_path)
    emb = base.load_embeddings(embeddings_path)
    if emb.duplicates:
        _log(f"warning: {emb.duplicates} duplicate embedding entries (last wins)")
    vectors, zero_flags = base.corpus_paragraph_vectors(corpus, emb)
    if zero_flags.any():
        _log(f"warning: {int(zero_flags.sum())} paragraphs have no in-table words")
    t = _pick(args.types, config, "baseline", "t", 10)
    seed = _pick(args.seed, config, "baseline", "seed", 0)
    result = base.kmeans(
        vectors,
        t,
        seed=seed,
        max_iter=_cfg(config, "baseline", "max_iter", 100),
        tol=_cfg(config, "baseline", "tol", 1e-6),
    )
    _log(f"kmeans objective {result.objective:.6f} after {result.n_iter} iterations")

    baseline_dir = os.path.join(out, "baseline")
    os.makedirs(baseline_dir, exist_ok=True)
    clusters_path = os.path.join(baseline_dir, "clusters.csv")
    base.write_clusters_csv(corpus, result, clusters_path)
    assignments = ana.cluster_type_assignments(corpus, result)
    ana.write_structure_report(assignments, t, baseline_dir)
    _log(f"wrote {clusters_path} and structure report in {baseline_dir}")
    return 0


def cmd_lede_generate(args, config: dict) -> int:
    out = _out_dir(args, config)
    reports_path = _require_file(
        _pick(args.reports, config, "paths", "reports"), "crime reports"
    )
    table_path = _require_file(
        _pick(args.code_table, config, "paths", "code_table"), "code table"
    )
    config_path = _require_file(
        _pick(args.lede_config, config, "paths", "lede_config"), "lede config"
    )
    parsed = lede.parse_reports(reports_path)
    for lineno, message in parsed.errors:
        _log(f"skipped row at line {lineno}: {message}")
    table = lede.load_code_table(table_path)
    lcfg = lede.load_lede_config(config_path)

    items = []
    failures = 0
    for report in parsed.reports:
        try:
            result = lede.fill_slots(
                report, lcfg.templates, table, lcfg.clusters,
                lcfg.verbs, lcfg.fallback_spans,
            )
        except ValidationError as exc:
            _log(f"report {report.id}: {exc}")
            failures += 1
            continue
        for warning in result.warnings:
            _log(f"report {report.id}: warning: {warning}")
        items.append((report, result))

    ledes_path = os.path.join(out, "ledes.jsonl")
    lede.write_ledes_jsonl(items, ledes_path)
    _log(f"generated {len(items)} ledes ({failures} failed), wrote {ledes_path}")
    if not items:
        raise ValidationError("no lede could be generated")
    return 0


def cmd_lede_eval(args, config: dict) -> int:
    out = _out_dir(args, config)
    pairs_path = _require_file(
        _pick(args.pairs, config, "paths", "eval_pairs"), "evaluation pairs"
    )
    n = _pick(args.ngram, config, "analysis", "ngram", DEFAULT_NGRAM)
    pairs = []
    with open(pairs_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"crime_type", "generated", "truth"}
        if reader.fieldnames is None or not needed.issubset(reader.fieldnames):
            raise ValidationError(
                "pairs file must have columns crime_type, generated, truth"
            )
        for row in reader:
            pairs.append((row["crime_type"], row["generated"], row["truth"]))
    result = lede.evaluate_corpus(pairs, n)
    eval_path = os.path.join(out, "lede_eval.csv")
    lede.write_eval_csv(result, eval_path)
    _log(f"overall {n}-gram overlap {result.overall:.4f} across {len(result.per_type)} crime types")
    _log(f"wrote {eval_path}")
    return 0


# -- parser --------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run-config path")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--keyword", help="ingest keyword filter")
    common.add_argument("--gamma", type=float, help="switching probability")
    common.add_argument("--topics", type=int, help="word-topic count K")
    common.add_argument("--types", type=int, help="paragraph-type count T")
    common.add_argument("--sweeps", type=int, help="Gibbs sweeps")
    common.add_argument("--burn-in", type=int, dest="burn_in", help="burn-in sweeps")
    common.add_argument("--lag", type=int, help="sample retention lag")
    common.add_argument("--ngram", type=int, help="n-gram order for lede eval")
    common.add_argument("--chains", type=int, help="independent chains to train")
    common.add_argument("--min-count", type=int, dest="min_count", help="vocabulary threshold")
    # input-path overrides, same precedence as the cross-cutting flags
    common.add_argument("--articles", help="articles JSONL path")
    common.add_argument("--stopwords", help="stopword list path")
    common.add_argument("--corpus", help="serialized corpus path")
    common.add_argument("--samples", help="serialized samples path")
    common.add_argument("--embeddings", help="embedding table path")
    common.add_argument("--lexicon", help="POS lexicon path")
    common.add_argument("--reports", help="crime reports CSV path")
    common.add_argument("--code-table", dest="code_table", help="code table CSV path")
    common.add_argument("--lede-config", dest="lede_config", help="lede config JSON path")
    common.add_argument("--pairs", help="evaluation pairs CSV path")

    parser = argparse.ArgumentParser(
        prog="paratype",
        description="Paragraph-type modeling and crime-lede generation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="build the token corpus")
    sub.add_parser("train", parents=[common], help="run the Gibbs sampler")
    sub.add_parser("analyze", parents=[common], help="write the analysis report")
    sub.add_parser("baseline", parents=[common], help="k-means paragraph clustering")
    p_lede = sub.add_parser("lede", help="lede generation and evaluation")
    lede_sub = p_lede.add_subparsers(dest="mode", required=True)
    lede_sub.add_parser("generate", parents=[common], help="fill templates")
    lede_sub.add_parser("eval", parents=[common], help="score n-gram overlap")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config) if args.config else {}
        if args.command == "ingest":
            return cmd_ingest(args, config)
        if args.command == "train":
            return cmd_train(args, config)
        if args.command == "analyze":
            return cmd_analyze(args, config)
        if args.command == "baseline":
            return cmd_baseline(args, config)
        if args.command == "lede":
            if args.mode == "generate":
                return cmd_lede_generate(args, config)
            return cmd_lede_eval(args, config)
        raise ValidationError(f"unknown command {args.command!r}")
    except ParatypeError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
