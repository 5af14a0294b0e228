"""Embedding loading, paragraph vectors, and the k-means baseline."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import make_corpus
from paratype.baseline import (
    EmbeddingTable,
    corpus_paragraph_vectors,
    kmeans,
    load_embeddings,
    paragraph_vector,
    write_clusters_csv,
)
from paratype.corpus import Vocabulary
from paratype.errors import ParseError, ValidationError


class TestLoadEmbeddings:
    def _write(self, tmp_path, text):
        path = tmp_path / "emb.txt"
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_loads_vectors(self, tmp_path):
        path = self._write(tmp_path, "cat 1.0 0.0\ndog 0.5 -0.5\n\n")
        emb = load_embeddings(path)
        assert len(emb) == 2
        assert emb.dim == 2
        np.testing.assert_array_equal(emb["dog"], [0.5, -0.5])

    def test_duplicates_counted_last_wins(self, tmp_path):
        path = self._write(tmp_path, "cat 1.0\ncat 2.0\n")
        emb = load_embeddings(path)
        assert emb.duplicates == 1
        np.testing.assert_array_equal(emb["cat"], [2.0])

    def test_ragged_dimension_names_line(self, tmp_path):
        path = self._write(tmp_path, "cat 1.0 0.0\ndog 0.5\n")
        with pytest.raises(ParseError, match="line 2"):
            load_embeddings(path)

    def test_non_numeric_rejected(self, tmp_path):
        path = self._write(tmp_path, "cat one two\n")
        with pytest.raises(ParseError, match="non-numeric"):
            load_embeddings(path)

    def test_word_without_vector_rejected(self, tmp_path):
        path = self._write(tmp_path, "cat\n")
        with pytest.raises(ParseError, match="no vector"):
            load_embeddings(path)

    def test_empty_file_rejected(self, tmp_path):
        path = self._write(tmp_path, "\n\n")
        with pytest.raises(ParseError, match="no entries"):
            load_embeddings(path)


class TestParagraphVector:
    def _table(self):
        return EmbeddingTable(
            vectors={
                "a": np.array([1.0, 0.0]),
                "b": np.array([0.0, 1.0]),
            },
            dim=2,
        )

    def test_mean_of_in_table_words(self):
        """(a, b) averages to (0.5, 0.5)."""
        vocab = Vocabulary(words=("a", "b", "c"), counts=(1, 1, 1))
        vec = paragraph_vector((0, 1), vocab, self._table())
        np.testing.assert_allclose(vec, [0.5, 0.5])

    def test_repeats_count(self):
        """(a, a, b) averages to (2/3, 1/3)."""
        vocab = Vocabulary(words=("a", "b", "c"), counts=(1, 1, 1))
        vec = paragraph_vector((0, 0, 1), vocab, self._table())
        np.testing.assert_allclose(vec, [2 / 3, 1 / 3])

    def test_out_of_table_words_skipped(self):
        vocab = Vocabulary(words=("a", "b", "c"), counts=(1, 1, 1))
        vec = paragraph_vector((0, 2, 2), vocab, self._table())
        np.testing.assert_allclose(vec, [1.0, 0.0])

    def test_all_out_of_table_is_zero_vector(self):
        vocab = Vocabulary(words=("a", "b", "c"), counts=(1, 1, 1))
        vec = paragraph_vector((2, 2), vocab, self._table())
        np.testing.assert_array_equal(vec, [0.0, 0.0])

    def test_corpus_vectors_and_zero_flags(self):
        corpus = make_corpus((((0, 1), (2,)), ((1,),)), 3)
        emb = EmbeddingTable(
            vectors={"w0": np.array([2.0]), "w1": np.array([4.0])}, dim=1
        )
        vectors, flags = corpus_paragraph_vectors(corpus, emb)
        np.testing.assert_allclose(vectors, [[3.0], [0.0], [4.0]])
        np.testing.assert_array_equal(flags, [False, True, False])


class TestKMeans:
    def test_objective_history_never_increases(self):
        """Lloyd iterations cannot worsen the within-cluster sum of squares."""
        rng = np.random.default_rng(59)
        for _ in range(50):
            n = int(rng.integers(8, 60))
            dim = int(rng.integers(1, 8))
            t = int(rng.integers(1, min(n, 7)))
            points = rng.normal(size=(n, dim))
            result = kmeans(points, t, seed=int(rng.integers(0, 1000)))
            diffs = np.diff(result.objective_history)
            assert (diffs <= 1e-9).all()
            assert result.objective == result.objective_history[-1]

    def test_recovers_separated_clusters(self):
        """Two tight blobs 10 apart must come back as the exact partition."""
        rng = np.random.default_rng(7)
        blob_a = rng.normal(scale=0.05, size=(12, 2))
        blob_b = rng.normal(scale=0.05, size=(15, 2)) + 10.0
        points = np.vstack([blob_a, blob_b])
        result = kmeans(points, 2, seed=0)
        labels_a = set(result.assignments[:12].tolist())
        labels_b = set(result.assignments[12:].tolist())
        assert len(labels_a) == 1
        assert len(labels_b) == 1
        assert labels_a != labels_b

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(61)
        points = rng.normal(size=(40, 3))
        a = kmeans(points, 4, seed=9)
        b = kmeans(points, 4, seed=9)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        np.testing.assert_array_equal(a.centroids, b.centroids)
        assert a.objective_history == b.objective_history
        assert a.n_iter == b.n_iter

    def test_single_cluster_objective(self):
        """t=1: centroid is the mean; objective is the total squared spread.
        Points (0,0), (2,0), (1,3) have mean (1,1) and spread 8."""
        points = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]])
        result = kmeans(points, 1, seed=0)
        np.testing.assert_allclose(result.centroids, [[1.0, 1.0]])
        assert result.objective == pytest.approx(8.0)

    def test_t_equals_n_reaches_zero(self):
        points = np.array([[0.0], [5.0], [9.0], [14.0]])
        result = kmeans(points, 4, seed=3)
        assert result.objective == pytest.approx(0.0, abs=1e-12)
        assert sorted(result.assignments.tolist()) == [0, 1, 2, 3]

    def test_identical_points_survive_empty_cluster_repair(self):
        points = np.zeros((6, 2))
        result = kmeans(points, 2, seed=1)
        assert result.objective == pytest.approx(0.0)
        assert set(result.assignments.tolist()) <= {0, 1}

    @pytest.mark.parametrize(
        "kw, message",
        [
            (dict(t=0), "cluster count"),
            (dict(t=5), "exceeds"),
            (dict(max_iter=0), "max_iter"),
            (dict(tol=-1.0), "tol"),
        ],
    )
    def test_rejects_bad_arguments(self, kw, message):
        points = np.zeros((4, 2))
        params = dict(t=2, seed=0)
        params.update(kw)
        with pytest.raises(ValidationError, match=message):
            kmeans(points, **params)

    def test_rejects_non_2d_input(self):
        with pytest.raises(ValidationError, match="2-d"):
            kmeans(np.zeros(4), 2)


class TestClustersCsv:
    def test_rows_follow_corpus_order(self, tmp_path):
        corpus = make_corpus((((0,), (1,)), ((0, 1),)), 2)
        result = kmeans(np.array([[0.0], [10.0], [0.5]]), 2, seed=0)
        path = tmp_path / "clusters.csv"
        write_clusters_csv(corpus, result, str(path))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "doc_id,paragraph_index,cluster"
        assert len(lines) == 4
        assert lines[1].startswith("d0,0,")
        assert lines[2].startswith("d0,1,")
        assert lines[3].startswith("d1,0,")

    def test_mismatched_assignments_rejected(self, tmp_path):
        corpus = make_corpus((((0,), (1,)),), 2)
        result = kmeans(np.zeros((3, 1)), 1, seed=0)
        with pytest.raises(ValidationError, match="match"):
            write_clusters_csv(corpus, result, str(tmp_path / "x.csv"))
