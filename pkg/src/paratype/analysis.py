"""Diagnostics over posterior samples: type transition structure, entropy,
switching-word posteriors, PMI-ranked topics, topic top-words, and POS
histograms. Everything is read-only over immutable samples."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .baseline import ClusterResult
from .corpus import Corpus, Vocabulary
from .errors import ValidationError
from .sampler import PosteriorSamples

PMI_EPSILON = 1e-12
DEFAULT_REPORT_MIN_COUNT = 50


@dataclass(frozen=True)
class TypeAssignments:
    """One type id per paragraph, grouped by document in corpus order."""

    by_doc: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.by_doc:
            raise ValidationError("no documents in assignments")

    @property
    def n_paragraphs(self) -> int:
        return sum(len(doc) for doc in self.by_doc)


def majority_type_assignments(samples: PosteriorSamples) -> TypeAssignments:
    """Per-paragraph majority vote across retained samples; ties go to the
    lowest type id."""
    if not samples.samples:
        raise ValidationError("no retained samples")
    t = samples.hp.n_types
    votes = np.zeros((samples.n_paragraphs, t), dtype=np.int64)
    for s in samples.samples:
        votes[np.arange(samples.n_paragraphs), s.par_types] += 1
    winners = np.argmax(votes, axis=1)  # argmax takes the lowest id on ties
    by_doc = []
    starts = samples.doc_par_start
    for d in range(samples.n_docs):
        by_doc.append(tuple(int(x) for x in winners[starts[d]:starts[d + 1]]))
    return TypeAssignments(by_doc=tuple(by_doc))


def cluster_type_assignments(corpus: Corpus, result: ClusterResult) -> TypeAssignments:
    """Adapt k-means cluster ids to the same per-document layout."""
    if len(result.assignments) != corpus.n_paragraphs:
        raise ValidationError("cluster count does not match corpus paragraphs")
    by_doc = []
    g = 0
    for doc in corpus.documents:
        by_doc.append(tuple(int(result.assignments[g + p]) for p in range(len(doc))))
        g += len(doc)
    return TypeAssignments(by_doc=tuple(by_doc))


def transition_matrix(assignments: TypeAssignments, t: int) -> np.ndarray:
    """Row-normalized counts of adjacent within-document type pairs.
    A type with no outgoing transitions keeps an all-zero row."""
    counts = np.zeros((t, t), dtype=np.float64)
    for doc in assignments.by_doc:
        for a, b in zip(doc, doc[1:]):
            if not (0 <= a < t and 0 <= b < t):
                raise ValidationError(f"type id outside [0, {t})")
            counts[a, b] += 1
    sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        matrix = np.where(sums > 0, counts / np.where(sums > 0, sums, 1.0), 0.0)
    return matrix


def empty_transition_rows(matrix: np.ndarray) -> tuple[int, ...]:
    """Row indices with no outgoing transitions (all-zero rows)."""
    return tuple(int(i) for i in np.where(matrix.sum(axis=1) == 0)[0])


def first_paragraph_distribution(assignments: TypeAssignments, t: int) -> np.ndarray:
    counts = np.zeros(t, dtype=np.float64)
    for doc in assignments.by_doc:
        first = doc[0]
        if not 0 <= first < t:
            raise ValidationError(f"type id outside [0, {t})")
        counts[first] += 1
    return counts / counts.sum()


def first_paragraph_entropy(assignments: TypeAssignments, t: int) -> float:
    """Entropy (nats) of the empirical first-paragraph type distribution."""
    q = first_paragraph_distribution(assignments, t)
    return float(-sum(qi * math.log(qi) for qi in q if qi > 0))


@dataclass(frozen=True)
class SwitchWordTable:
    """Per-word posterior probability of drawing from the document side."""

    rows: tuple[tuple[str, float], ...]  # descending p(s=doc)

    def descending(self) -> list[tuple[str, float]]:
        return list(self.rows)

    def ascending(self) -> list[tuple[str, float]]:
        return list(reversed(self.rows))


def switch_word_posterior(
    samples: PosteriorSamples,
    corpus: Corpus,
    min_count: int = DEFAULT_REPORT_MIN_COUNT,
) -> SwitchWordTable:
    """p(s=doc) per word with corpus frequency strictly above min_count,
    averaged over token instances and retained samples."""
    _check_alignment(samples, corpus)
    if not samples.samples:
        raise ValidationError("no retained samples")
    v = samples.vocab_size
    instances = np.bincount(samples.token_word, minlength=v)
    doc_counts = np.zeros(v, dtype=np.float64)
    for s in samples.samples:
        doc_counts += np.bincount(
            samples.token_word, weights=(s.s_par == 0).astype(np.float64), minlength=v
        )
    rows = []
    n_samples = len(samples.samples)
    for w in range(v):
        if corpus.vocabulary.counts[w] > min_count:
            p = doc_counts[w] / (instances[w] * n_samples)
            rows.append((corpus.vocabulary.word_of(w), float(p)))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return SwitchWordTable(rows=tuple(rows))


def _pooled_type_topic_counts(samples: PosteriorSamples) -> np.ndarray:
    """Joint (topic, type) counts over par-assigned tokens, pooled across
    retained samples."""
    k, t = samples.hp.n_topics, samples.hp.n_types
    joint = np.zeros((k, t), dtype=np.float64)
    for s in samples.samples:
        mask = s.s_par == 1
        types = s.par_types[samples.token_par[mask]]
        topics = s.topics[mask]
        np.add.at(joint, (topics, types), 1.0)
    return joint


def top_topics_by_pmi(
    samples: PosteriorSamples, t_type: int, n: int
) -> list[tuple[int, float]]:
    """Top-n topics for a paragraph type, ranked by PMI over the pooled
    (topic, type) joint of par-assigned tokens; ties break on topic id.
    A type with no par-assigned tokens yields an empty list."""
    k = samples.hp.n_topics
    if not 0 <= t_type < samples.hp.n_types:
        raise ValidationError(f"type id {t_type} out of range")
    if n > k:
        raise ValidationError(f"n={n} exceeds topic count {k}")
    if not samples.samples:
        raise ValidationError("no retained samples")
    joint = _pooled_type_topic_counts(samples)
    if joint[:, t_type].sum() == 0:
        return []
    smoothed = joint + PMI_EPSILON
    total = smoothed.sum()
    p_joint = smoothed / total
    p_topic = p_joint.sum(axis=1)
    p_type = p_joint.sum(axis=0)
    pmi = np.log(p_joint[:, t_type]) - np.log(p_topic) - math.log(p_type[t_type])
    order = sorted(range(k), key=lambda kk: (-pmi[kk], kk))
    return [(kk, float(pmi[kk])) for kk in order[:n]]


def top_words_per_topic(
    samples: PosteriorSamples, vocab: Vocabulary, k: int, n: int
) -> list[tuple[str, int]]:
    """Top-n words for a topic by pooled count descending, ties lexicographic."""
    if not 0 <= k < samples.hp.n_topics:
        raise ValidationError(f"topic id {k} out of range")
    if n > len(vocab):
        raise ValidationError(f"n={n} exceeds vocabulary size {len(vocab)}")
    if not samples.samples:
        raise ValidationError("no retained samples")
    counts = np.zeros(samples.vocab_size, dtype=np.int64)
    for s in samples.samples:
        counts += np.bincount(
            samples.token_word[s.topics == k], minlength=samples.vocab_size
        )
    order = sorted(
        (w for w in range(len(vocab)) if counts[w] > 0),
        key=lambda w: (-counts[w], vocab.word_of(w)),
    )
    return [(vocab.word_of(w), int(counts[w])) for w in order[:n]]


def pos_distribution(words: list[str], lexicon: dict[str, str]) -> dict[str, float]:
    """Tag proportions for a word list; out-of-lexicon words tag as X."""
    if not words:
        return {}
    counts: dict[str, int] = {}
    for w in words:
        tag = lexicon.get(w, "X")
        counts[tag] = counts.get(tag, 0) + 1
    total = len(words)
    return {tag: c / total for tag, c in sorted(counts.items())}


def _weighted_pos_distribution(
    weights: np.ndarray, vocab: Vocabulary, lexicon: dict[str, str]
) -> dict[str, float]:
    # same rule as pos_distribution, but over per-word instance weights so
    # the report never materializes token lists
    total = float(weights.sum())
    if total == 0:
        return {}
    counts: dict[str, float] = {}
    for w in range(len(vocab)):
        if weights[w]:
            tag = lexicon.get(vocab.word_of(w), "X")
            counts[tag] = counts.get(tag, 0.0) + float(weights[w])
    return {tag: c / total for tag, c in sorted(counts.items())}


def load_pos_lexicon(path: str) -> dict[str, str]:
    """word<whitespace>TAG per line; later duplicates win."""
    lexicon: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) >= 2:
                lexicon[parts[0]] = parts[1]
    return lexicon


def _check_alignment(samples: PosteriorSamples, corpus: Corpus) -> None:
    if samples.vocab_size != len(corpus.vocabulary):
        raise ValidationError("samples and corpus vocabulary sizes differ")
    if samples.n_tokens != corpus.n_tokens:
        raise ValidationError("samples and corpus token counts differ")
    if samples.n_docs != corpus.n_docs:
        raise ValidationError("samples and corpus document counts differ")


@dataclass(frozen=True)
class AnalysisReport:
    """Everything the report directory serializes, already computed."""

    n_types: int
    transition: np.ndarray
    empty_rows: tuple[int, ...]
    first_para_dist: np.ndarray
    first_para_entropy: float
    switch_words: SwitchWordTable
    type_topics: tuple[tuple[tuple[int, float], ...], ...]  # per type
    empty_types: tuple[int, ...]
    topic_words: tuple[tuple[tuple[str, int], ...], ...]  # per topic
    pos_par: dict[str, float]
    pos_doc: dict[str, float]
    assignments: TypeAssignments


def build_report(
    corpus: Corpus,
    samples: PosteriorSamples,
    lexicon: dict[str, str] | None = None,
    min_count: int = DEFAULT_REPORT_MIN_COUNT,
    topics_per_type: int = 3,
    words_per_topic: int = 10,
) -> AnalysisReport:
    """Run the full diagnostic suite over one sampler output."""
    _check_alignment(samples, corpus)
    lexicon = lexicon or {}
    t, k = samples.hp.n_types, samples.hp.n_topics
    assignments = majority_type_assignments(samples)
    matrix = transition_matrix(assignments, t)
    type_topics = tuple(
        tuple(top_topics_by_pmi(samples, tt, min(topics_per_type, k)))
        for tt in range(t)
    )
    empty_types = tuple(tt for tt in range(t) if not type_topics[tt])
    topic_words = tuple(
        tuple(
            top_words_per_topic(
                samples, corpus.vocabulary, kk, min(words_per_topic, len(corpus.vocabulary))
            )
        )
        for kk in range(k)
    )
    v = samples.vocab_size
    par_w = np.zeros(v, dtype=np.float64)
    doc_w = np.zeros(v, dtype=np.float64)
    for s in samples.samples:
        par_w += np.bincount(
            samples.token_word, weights=(s.s_par == 1).astype(np.float64), minlength=v
        )
        doc_w += np.bincount(
            samples.token_word, weights=(s.s_par == 0).astype(np.float64), minlength=v
        )
    return AnalysisReport(
        n_types=t,
        transition=matrix,
        empty_rows=empty_transition_rows(matrix),
        first_para_dist=first_paragraph_distribution(assignments, t),
        first_para_entropy=first_paragraph_entropy(assignments, t),
        switch_words=switch_word_posterior(samples, corpus, min_count),
        type_topics=type_topics,
        empty_types=empty_types,
        topic_words=topic_words,
        pos_par=_weighted_pos_distribution(par_w, corpus.vocabulary, lexicon),
        pos_doc=_weighted_pos_distribution(doc_w, corpus.vocabulary, lexicon),
        assignments=assignments,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_report(report: AnalysisReport, out_dir: str) -> None:
    """Serialize the report as a directory of CSV/text files with stable,
    byte-reproducible formatting."""
    os.makedirs(out_dir, exist_ok=True)
    t = report.n_types

    path = os.path.join(out_dir, "transition_matrix.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("from_type," + ",".join(f"to_{j}" for j in range(t)) + ",empty\n")
        for i in range(t):
            row = ",".join(_fmt(report.transition[i, j]) for j in range(t))
            empty = "1" if i in report.empty_rows else "0"
            fh.write(f"{i},{row},{empty}\n")

    # plot-ready raw matrix, one row per from-type, no header
    path = os.path.join(out_dir, "transition_plot.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(t):
            fh.write(",".join(_fmt(report.transition[i, j]) for j in range(t)) + "\n")

    path = os.path.join(out_dir, "first_para_entropy.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_fmt(report.first_para_entropy) + "\n")

    path = os.path.join(out_dir, "switch_words.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("word,p_doc\n")
        for word, p in report.switch_words.descending():
            fh.write(f"{word},{_fmt(p)}\n")

    path = os.path.join(out_dir, "type_topics.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("type,rank,topic,pmi\n")
        for tt, entries in enumerate(report.type_topics):
            for rank, (kk, pmi) in enumerate(entries, start=1):
                fh.write(f"{tt},{rank},{kk},{_fmt(pmi)}\n")

    path = os.path.join(out_dir, "topic_words.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("topic,rank,word,count\n")
        for kk, entries in enumerate(report.topic_words):
            for rank, (word, count) in enumerate(entries, start=1):
                fh.write(f"{kk},{rank},{word},{count}\n")

    path = os.path.join(out_dir, "pos_hist.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("side,tag,proportion\n")
        for side, hist in (("par", report.pos_par), ("doc", report.pos_doc)):
            for tag, prop in hist.items():
                fh.write(f"{side},{tag},{_fmt(prop)}\n")


def write_structure_report(
    assignments: TypeAssignments, t: int, out_dir: str
) -> None:
    """The structural subset (transitions + first-paragraph entropy) for
    assignment sources without topics, such as the clustering baseline."""
    os.makedirs(out_dir, exist_ok=True)
    matrix = transition_matrix(assignments, t)
    empty = empty_transition_rows(matrix)

    path = os.path.join(out_dir, "transition_matrix.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("from_type," + ",".join(f"to_{j}" for j in range(t)) + ",empty\n")
        for i in range(t):
            row = ",".join(_fmt(matrix[i, j]) for j in range(t))
            fh.write(f"{i},{row},{'1' if i in empty else '0'}\n")

    path = os.path.join(out_dir, "transition_plot.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(t):
            fh.write(",".join(_fmt(matrix[i, j]) for j in range(t)) + "\n")

    path = os.path.join(out_dir, "first_para_entropy.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_fmt(first_paragraph_entropy(assignments, t)) + "\n")
