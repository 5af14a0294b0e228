"""Corpus ingestion.

Loads raw article collections from JSON lines, tokenizes and filters them,
and builds the immutable token-id corpus consumed by the sampler and the
clustering baseline.
"""

from __future__ import annotations

import datetime
import json
import re
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

# Lowercase first, then keep maximal runs of letters. Digits, underscores and
# punctuation all act as separators, so no token contains anything but letters.
_TOKEN_RE = re.compile(r"[^\W\d_]+", re.UNICODE)

DEFAULT_MIN_COUNT = 5


@dataclass(frozen=True)
class RawDocument:
    """One article as read from disk, before any tokenization."""

    id: str
    paragraphs: tuple[str, ...]
    headline: str = ""
    date: datetime.date | None = None

    def __post_init__(self) -> None:
        if not self.paragraphs:
            raise ValidationError(f"document {self.id!r} has no paragraphs")


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between words and dense integer ids, with corpus frequencies.

    Ids are assigned in descending frequency order, ties broken
    lexicographically, so identical inputs always yield identical ids.
    """

    words: tuple[str, ...]
    counts: tuple[int, ...]
    _ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.words) == 0:
            raise ValidationError("vocabulary is empty")
        if len(self.words) != len(self.counts):
            raise ValidationError("words and counts length mismatch")
        object.__setattr__(self, "_ids", {w: i for i, w in enumerate(self.words)})
        if len(self._ids) != len(self.words):
            raise ValidationError("vocabulary contains duplicate words")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def id_of(self, word: str) -> int:
        return self._ids[word]

    def word_of(self, token_id: int) -> str:
        return self.words[token_id]


@dataclass(frozen=True)
class Corpus:
    """Ordered documents, each an ordered list of paragraphs of token ids."""

    documents: tuple[tuple[tuple[int, ...], ...], ...]
    vocabulary: Vocabulary
    doc_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.documents) < 1:
            raise ValidationError("corpus has no documents")
        if len(self.doc_ids) != len(self.documents):
            raise ValidationError("doc_ids and documents length mismatch")
        v = len(self.vocabulary)
        for doc in self.documents:
            for par in doc:
                for tok in par:
                    if not 0 <= tok < v:
                        raise ValidationError(f"token id {tok} outside [0, {v})")

    @property
    def n_docs(self) -> int:
        return len(self.documents)

    @property
    def n_paragraphs(self) -> int:
        return sum(len(doc) for doc in self.documents)

    @property
    def n_tokens(self) -> int:
        return sum(len(par) for doc in self.documents for par in doc)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphabetic characters, dropping empties.

    "K-pop star's" -> ["k", "pop", "star", "s"]
    """
    return _TOKEN_RE.findall(text.lower())


def load_collection(path: str, format: str = "jsonl") -> list[RawDocument]:
    """Read one RawDocument per line from a JSON-lines file.

    Each line must be an object with "id" and a non-empty "paragraphs" list;
    "headline" and ISO-8601 "date" are optional. Documents come back in file
    order. Malformed lines raise ParseError naming the line; a duplicate id
    raises ValidationError.
    """
    if format != "jsonl":
        raise ValidationError(f"unsupported collection format {format!r}")
    docs: list[RawDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ParseError(f"line {lineno}: record is not an object")
            doc_id = record.get("id")
            if not isinstance(doc_id, str) or not doc_id:
                raise ParseError(f"line {lineno}: missing or invalid 'id'")
            paragraphs = record.get("paragraphs")
            if (
                not isinstance(paragraphs, list)
                or not paragraphs
                or not all(isinstance(p, str) for p in paragraphs)
            ):
                raise ParseError(f"line {lineno}: missing or invalid 'paragraphs'")
            headline = record.get("headline", "")
            if not isinstance(headline, str):
                raise ParseError(f"line {lineno}: 'headline' is not a string")
            date = None
            raw_date = record.get("date")
            if raw_date is not None:
                if not isinstance(raw_date, str):
                    raise ParseError(f"line {lineno}: 'date' is not a string")
                try:
                    date = datetime.date.fromisoformat(raw_date)
                except ValueError as exc:
                    raise ParseError(
                        f"line {lineno}: invalid date {raw_date!r}"
                    ) from exc
            if doc_id in seen:
                raise ValidationError(f"duplicate document id {doc_id!r}")
            seen.add(doc_id)
            docs.append(
                RawDocument(
                    id=doc_id,
                    paragraphs=tuple(paragraphs),
                    headline=headline,
                    date=date,
                )
            )
    return docs


def filter_keyword(docs: list[RawDocument], keyword: str) -> list[RawDocument]:
    """Keep documents whose headline or any paragraph contains the keyword.

    Matching is whole-token after tokenization: keyword "crime" does not
    match "crimes". Order is preserved.
    """
    if not keyword:
        raise ValidationError("keyword is empty")
    if keyword != keyword.lower():
        raise ValidationError("keyword must be lowercase")
    kept = []
    for doc in docs:
        if keyword in tokenize(doc.headline):
            kept.append(doc)
            continue
        if any(keyword in tokenize(par) for par in doc.paragraphs):
            kept.append(doc)
    return kept


def filter_weekday(docs: list[RawDocument]) -> list[RawDocument]:
    """Keep documents dated Monday through Friday; undated documents pass."""
    return [d for d in docs if d.date is None or d.date.weekday() < 5]


def build_corpus(
    docs: list[RawDocument],
    stopwords: set[str],
    min_count: int = DEFAULT_MIN_COUNT,
) -> Corpus:
    """Tokenize documents and build the token-id corpus.

    Stopwords are removed before counting; words with corpus frequency below
    min_count are dropped; paragraphs and documents emptied by filtering are
    removed. Vocabulary ids follow descending frequency, ties lexicographic.
    """
    if min_count < 1:
        raise ValidationError("min_count must be >= 1")
    tokenized: list[tuple[str, list[list[str]]]] = []
    counts: dict[str, int] = {}
    for doc in docs:
        pars = []
        for par in doc.paragraphs:
            toks = [t for t in tokenize(par) if t not in stopwords]
            for t in toks:
                counts[t] = counts.get(t, 0) + 1
            pars.append(toks)
        tokenized.append((doc.id, pars))

    kept = sorted(
        (w for w, c in counts.items() if c >= min_count),
        key=lambda w: (-counts[w], w),
    )
    if not kept:
        raise ValidationError("no document survives filtering")
    vocabulary = Vocabulary(
        words=tuple(kept), counts=tuple(counts[w] for w in kept)
    )

    documents: list[tuple[tuple[int, ...], ...]] = []
    doc_ids: list[str] = []
    for doc_id, pars in tokenized:
        id_pars = []
        for toks in pars:
            ids = tuple(vocabulary.id_of(t) for t in toks if t in vocabulary)
            if ids:
                id_pars.append(ids)
        if id_pars:
            documents.append(tuple(id_pars))
            doc_ids.append(doc_id)
    if not documents:
        raise ValidationError("no document survives filtering")
    return Corpus(
        documents=tuple(documents),
        vocabulary=vocabulary,
        doc_ids=tuple(doc_ids),
    )


def save_corpus(corpus: Corpus, path: str) -> None:
    """Write the corpus as canonical JSON; identical corpora give identical bytes."""
    payload = {
        "version": 1,
        "vocabulary": {
            "words": list(corpus.vocabulary.words),
            "counts": list(corpus.vocabulary.counts),
        },
        "doc_ids": list(corpus.doc_ids),
        "documents": [
            [list(par) for par in doc] for doc in corpus.documents
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_corpus(path: str) -> Corpus:
    """Read a corpus written by save_corpus."""
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"corpus file {path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict) or payload.get("version") != 1:
        raise ParseError(f"corpus file {path}: unknown format version")
    try:
        vocabulary = Vocabulary(
            words=tuple(payload["vocabulary"]["words"]),
            counts=tuple(payload["vocabulary"]["counts"]),
        )
        documents = tuple(
            tuple(tuple(int(t) for t in par) for par in doc)
            for doc in payload["documents"]
        )
        doc_ids = tuple(payload["doc_ids"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"corpus file {path}: missing field ({exc})") from exc
    return Corpus(documents=documents, vocabulary=vocabulary, doc_ids=doc_ids)
