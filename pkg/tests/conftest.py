"""Shared fixtures and oracle helpers.

chain_rule_log_prob recomputes the collapsed joint through sequential
posterior-predictive factors (a Polya urn per Dirichlet block) in pure
Python, so it shares no code path with the closed-form implementation it
checks against.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from paratype import sampler as smp
from paratype.corpus import Corpus, Vocabulary

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def make_corpus(documents, vocab_size: int) -> Corpus:
    """Corpus over an artificial vocabulary w0..w{V-1}; counts are dummies."""
    words = tuple(f"w{i}" for i in range(vocab_size))
    vocab = Vocabulary(words=words, counts=(1,) * vocab_size)
    docs = tuple(tuple(tuple(par) for par in doc) for doc in documents)
    ids = tuple(f"d{i}" for i in range(len(docs)))
    return Corpus(documents=docs, vocabulary=vocab, doc_ids=ids)


def random_corpus(
    rng: np.random.Generator,
    n_docs: int,
    max_pars: int = 4,
    max_tokens: int = 8,
    vocab_size: int = 12,
) -> Corpus:
    docs = []
    for _ in range(n_docs):
        pars = []
        for _ in range(int(rng.integers(1, max_pars + 1))):
            n = int(rng.integers(1, max_tokens + 1))
            pars.append(tuple(int(w) for w in rng.integers(0, vocab_size, size=n)))
        docs.append(tuple(pars))
    return make_corpus(tuple(docs), vocab_size)


def make_state(corpus, hp, par_types, s_par, topics) -> smp.SamplerState:
    """State with the given assignments and freshly tallied counts."""
    state = smp.SamplerState(corpus, hp)
    state.par_type[:] = np.asarray(par_types, dtype=np.int64)
    state.s_par[:] = np.asarray(s_par, dtype=np.int8)
    state.topics[:] = np.asarray(topics, dtype=np.int64)
    state.recount()
    return state


def random_assignments(rng: np.random.Generator, n_paragraphs: int, n_tokens: int, t: int, k: int):
    par_types = rng.integers(0, t, size=n_paragraphs)
    s_par = (rng.random(n_tokens) < 0.5).astype(np.int8)
    topics = rng.integers(0, k, size=n_tokens)
    return par_types, s_par, topics


def chain_rule_log_prob(corpus, hp, par_types, s_par, topics) -> float:
    """Collapsed joint via the sequential predictive factorization.

    Paragraphs and tokens are processed in corpus order; each factor is the
    Polya-urn predictive of its Dirichlet block given everything before it.
    Exchangeability makes the product order-independent and equal to the
    closed-form joint.
    """
    t, k = hp.n_types, hp.n_topics
    v = len(corpus.vocabulary)
    n_docs = corpus.n_docs
    flat_types = [int(x) for x in par_types]
    lp = 0.0

    type_counts = [0] * t
    g = 0
    for doc in corpus.documents:
        for _ in doc:
            ty = flat_types[g]
            lp += math.log((hp.h_t + type_counts[ty]) / (t * hp.h_t + g))
            type_counts[ty] += 1
            g += 1

    ptopic = [[0] * t for _ in range(k)]
    ptopic_sum = [0] * t
    dtopic = [[0] * n_docs for _ in range(k)]
    dtopic_sum = [0] * n_docs
    wordtopic = [[0] * v for _ in range(k)]
    wordtopic_sum = [0] * k

    i = 0
    g = 0
    for d, doc in enumerate(corpus.documents):
        for par in doc:
            ty = flat_types[g]
            for w in par:
                s = int(s_par[i])
                z = int(topics[i])
                if s == 1:
                    if hp.gamma == 0.0:
                        return float("-inf")
                    lp += math.log(hp.gamma)
                    lp += math.log((hp.h_p + ptopic[z][ty]) / (k * hp.h_p + ptopic_sum[ty]))
                    ptopic[z][ty] += 1
                    ptopic_sum[ty] += 1
                else:
                    if hp.gamma == 1.0:
                        return float("-inf")
                    lp += math.log(1.0 - hp.gamma)
                    lp += math.log((hp.alpha + dtopic[z][d]) / (k * hp.alpha + dtopic_sum[d]))
                    dtopic[z][d] += 1
                    dtopic_sum[d] += 1
                lp += math.log((hp.beta + wordtopic[z][w]) / (v * hp.beta + wordtopic_sum[z]))
                wordtopic[z][w] += 1
                wordtopic_sum[z] += 1
                i += 1
            g += 1
    return lp


def exact_type_distribution(state: smp.SamplerState, g: int) -> np.ndarray:
    """Posterior over paragraph g's type by evaluating the joint at every
    value, holding all other assignments fixed."""
    t = state.hp.n_types
    old = int(state.par_type[g])
    logps = np.empty(t, dtype=np.float64)
    for ty in range(t):
        state.par_type[g] = ty
        state.recount()
        logps[ty] = smp.joint_log_prob(state)
    state.par_type[g] = old
    state.recount()
    weights = np.exp(logps - logps.max())
    return weights / weights.sum()


def exact_token_distribution(state: smp.SamplerState, i: int) -> np.ndarray:
    """Posterior over token i's (switch, topic) block by joint evaluation;
    cells [0, K) are (par, k) and [K, 2K) are (doc, k)."""
    k = state.hp.n_topics
    old_s, old_z = int(state.s_par[i]), int(state.topics[i])
    logps = np.empty(2 * k, dtype=np.float64)
    for cell in range(2 * k):
        state.s_par[i] = 1 if cell < k else 0
        state.topics[i] = cell % k
        state.recount()
        logps[cell] = smp.joint_log_prob(state)
    state.s_par[i] = old_s
    state.topics[i] = old_z
    state.recount()
    finite = np.isfinite(logps)
    weights = np.zeros(2 * k, dtype=np.float64)
    weights[finite] = np.exp(logps[finite] - logps[finite].max())
    return weights / weights.sum()


def make_samples(corpus, hp, assigns) -> smp.PosteriorSamples:
    """PosteriorSamples with hand-chosen retained assignments.

    assigns is a sequence of (par_types, s_par, topics) triples; sweeps are
    numbered from 1 and the trace is zeroed.
    """
    layout = smp.SamplerState(corpus, hp)
    samples = tuple(
        smp.SampleAssignments(
            sweep=i + 1,
            par_types=np.asarray(pt, dtype=np.int32),
            s_par=np.asarray(sp, dtype=np.int8),
            topics=np.asarray(z, dtype=np.int32),
        )
        for i, (pt, sp, z) in enumerate(assigns)
    )
    return smp.PosteriorSamples(
        hp=hp,
        n_docs=layout.n_docs,
        vocab_size=layout.vocab_size,
        token_word=layout.token_word.astype(np.int32),
        token_par=layout.token_par.astype(np.int32),
        par_doc=layout.par_doc.astype(np.int32),
        par_tok_start=layout.par_tok_start.copy(),
        doc_par_start=layout.doc_par_start.copy(),
        samples=samples,
        logprob_trace=np.zeros(max(len(samples), 1), dtype=np.float64),
    )


@pytest.fixture(scope="session")
def tiny_corpus() -> Corpus:
    """2 documents x 2 paragraphs with token counts (2, 1) and (1, 2), V=4."""
    return make_corpus((((0, 1), (2,)), ((3,), (0, 1))), 4)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile every jit kernel once so timed tests measure runtime only."""
    corpus = make_corpus((((0, 1), (2,)), ((3,), (0, 1))), 4)
    hp = smp.HyperParams(
        n_topics=2, n_types=2, n_sweeps=2, burn_in=0, sample_lag=1, seed=1
    )
    smp.run(corpus, hp)
    state = smp.init_random(corpus, hp)
    state.verify_counts()
    smp.paragraph_type_distribution(state, 0, 0)
    smp.token_block_distribution(state, 0, 0, 0)
    smp.sample_paragraph_type(state, 0, 0)
    smp.sample_token_block(state, 0, 0, 0)
    from paratype._kernels import splitmix64_stream

    splitmix64_stream(np.uint64(1), 2)
