"""Clustering baseline: mean word embedding per paragraph, k-means into T types."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Vocabulary
from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class EmbeddingTable:
    """word -> fixed-dimension vector, plus how many duplicate lines were
    overwritten while loading (last entry wins)."""

    vectors: dict[str, np.ndarray]
    dim: int
    duplicates: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValidationError("embedding dimension must be >= 1")

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[word]

    def __len__(self) -> int:
        return len(self.vectors)


def load_embeddings(path: str) -> EmbeddingTable:
    """Read a text embedding file: word then space-separated decimals, one
    entry per line. Ragged dimensions raise ParseError naming the line."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if not values:
                raise ParseError(f"line {lineno}: no vector components")
            try:
                vec = np.array([float(x) for x in values], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: non-numeric component") from exc
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ParseError(
                    f"line {lineno}: dimension {len(vec)} != {dim}"
                )
            if word in vectors:
                duplicates += 1
            vec.setflags(write=False)
            vectors[word] = vec
    if dim is None:
        raise ParseError(f"embedding file {path} has no entries")
    return EmbeddingTable(vectors=vectors, dim=dim, duplicates=duplicates)


def paragraph_vector(
    paragraph: tuple[int, ...], vocab: Vocabulary, emb: EmbeddingTable
) -> np.ndarray:
    """Arithmetic mean of the embeddings of in-table words; repeats count.
    A paragraph with no in-table word maps to the zero vector."""
    acc = np.zeros(emb.dim, dtype=np.float64)
    n = 0
    for tok in paragraph:
        word = vocab.word_of(tok)
        if word in emb:
            acc += emb[word]
            n += 1
    if n == 0:
        return acc
    return acc / n


def corpus_paragraph_vectors(
    corpus: Corpus, emb: EmbeddingTable
) -> tuple[np.ndarray, np.ndarray]:
    """One mean vector per paragraph, in corpus order, plus a flag per
    paragraph marking the all-out-of-table (zero vector) ones."""
    rows = []
    flags = []
    for doc in corpus.documents:
        for par in doc:
            vec = paragraph_vector(par, corpus.vocabulary, emb)
            rows.append(vec)
            flags.append(not vec.any())
    return np.array(rows), np.array(flags, dtype=bool)


@dataclass(frozen=True)
class ClusterResult:
    """K-means output: assignment per point, centroids, final objective, and
    the per-iteration objective history."""

    assignments: np.ndarray  # int64[n]
    centroids: np.ndarray  # float64[t, dim]
    objective: float
    objective_history: tuple[float, ...]
    n_iter: int

    def __post_init__(self) -> None:
        if self.objective < 0:
            raise ValidationError("objective must be >= 0")


def _sq_dists(points: np.ndarray, centroid: np.ndarray) -> np.ndarray:
    diff = points - centroid
    return np.einsum("ij,ij->i", diff, diff)


def _kmeanspp_init(points: np.ndarray, t: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((t, points.shape[1]), dtype=np.float64)
    first = int(rng.random() * n)
    centroids[0] = points[first]
    d2 = _sq_dists(points, centroids[0])
    for j in range(1, t):
        total = d2.sum()
        if total > 0:
            # inverse CDF over the squared-distance weights
            cum = np.cumsum(d2)
            pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
            pick = min(pick, n - 1)
        else:
            pick = int(rng.random() * n)
        centroids[j] = points[pick]
        d2 = np.minimum(d2, _sq_dists(points, centroids[j]))
    return centroids


def kmeans(
    vectors: np.ndarray,
    t: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> ClusterResult:
    """Seeded k-means++ then Lloyd iterations until the objective improves by
    less than tol or max_iter is reached. An empty cluster is repaired by
    moving in the point currently farthest from its centroid. Deterministic
    given (vectors, t, seed)."""
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2:
        raise ValidationError("vectors must form a 2-d array")
    n = points.shape[0]
    if t < 1:
        raise ValidationError("cluster count must be >= 1")
    if t > n:
        raise ValidationError(f"cluster count {t} exceeds point count {n}")
    if max_iter < 1:
        raise ValidationError("max_iter must be >= 1")
    if tol < 0:
        raise ValidationError("tol must be >= 0")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, t, rng)
    history: list[float] = []
    prev_obj = np.inf
    assignments = np.zeros(n, dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dists = np.stack([_sq_dists(points, centroids[j]) for j in range(t)], axis=1)
        assignments = np.argmin(dists, axis=1)
        # repair empty clusters with the globally farthest point, skipping
        # clusters that would be emptied in turn
        for j in range(t):
            if not np.any(assignments == j):
                point_d2 = dists[np.arange(n), assignments]
                counts = np.bincount(assignments, minlength=t)
                movable = counts[assignments] > 1
                if not movable.any():
                    continue
                candidates = np.where(movable)[0]
                far = candidates[np.argmax(point_d2[candidates])]
                assignments[far] = j
                centroids[j] = points[far]
        for j in range(t):
            members = points[assignments == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        obj = float(np.sum((points - centroids[assignments]) ** 2))
        history.append(obj)
        if prev_obj - obj < tol:
            break
        prev_obj = obj

    return ClusterResult(
        assignments=assignments,
        centroids=centroids,
        objective=history[-1],
        objective_history=tuple(history),
        n_iter=n_iter,
    )


def write_clusters_csv(corpus: Corpus, result: ClusterResult, path: str) -> None:
    """Emit one row per paragraph: doc_id, paragraph_index, cluster."""
    if len(result.assignments) != corpus.n_paragraphs:
        raise ValidationError("assignment count does not match corpus paragraphs")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("doc_id,paragraph_index,cluster\n")
        g = 0
        for doc_id, doc in zip(corpus.doc_ids, corpus.documents):
            for p in range(len(doc)):
                fh.write(f"{doc_id},{p},{int(result.assignments[g])}\n")
                g += 1
