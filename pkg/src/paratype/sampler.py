"""Collapsed Gibbs sampler for the paragraph-type topic model.

Latent state per corpus: one type assignment per paragraph, and per token a
switch (paragraph-level vs document-level) plus a topic. Dirichlet priors
are integrated out, so the kernels work on count arrays only. The joint
log-probability is exposed in closed form for oracle checks.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels as _k
from .corpus import Corpus
from .errors import ParseError, ValidationError

TYPE_KERNELS = ("exact", "static")


@dataclass(frozen=True)
class HyperParams:
    """Model and schedule parameters.

    alpha, beta, h_p, h_t are Dirichlet concentrations (document-topic,
    topic-word, type-topic, type prior); gamma is the probability that a
    token draws its topic from the paragraph side. type_kernel selects the
    paragraph-type weight form: "exact" is the incremental form whose
    weights are exact conditionals of the collapsed joint; "static" holds
    counts fixed across the within-paragraph product.
    """

    alpha: float = 0.1
    beta: float = 0.1
    h_p: float = 0.1
    h_t: float = 1.0
    gamma: float = 0.7
    n_topics: int = 20
    n_types: int = 10
    n_sweeps: int = 200
    burn_in: int = 100
    sample_lag: int = 10
    seed: int = 0
    type_kernel: str = "exact"

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "h_p", "h_t"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError("gamma must lie in [0, 1]")
        if self.n_topics < 1:
            raise ValidationError("n_topics must be >= 1")
        if self.n_types < 1:
            raise ValidationError("n_types must be >= 1")
        if self.n_sweeps < 1:
            raise ValidationError("n_sweeps must be >= 1")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be >= 0")
        if self.burn_in >= self.n_sweeps:
            raise ValidationError("burn_in must be < n_sweeps")
        if self.sample_lag < 1:
            raise ValidationError("sample_lag must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")
        if self.type_kernel not in TYPE_KERNELS:
            raise ValidationError(f"type_kernel must be one of {TYPE_KERNELS}")


class SamplerState:
    """Mutable chain state: assignments, cached counts, and the rng.

    Single-owner during mutation; run independent chains on separate states.
    Construct through init_random.
    """

    def __init__(self, corpus: Corpus, hp: HyperParams) -> None:
        self.hp = hp
        self.n_docs = corpus.n_docs
        self.n_paragraphs = corpus.n_paragraphs
        self.n_tokens = corpus.n_tokens
        self.vocab_size = len(corpus.vocabulary)

        token_word: list[int] = []
        token_par: list[int] = []
        par_doc: list[int] = []
        par_tok_start = [0]
        doc_par_start = [0]
        for d, doc in enumerate(corpus.documents):
            for par in doc:
                g = len(par_doc)
                par_doc.append(d)
                token_word.extend(par)
                token_par.extend([g] * len(par))
                par_tok_start.append(len(token_word))
            doc_par_start.append(len(par_doc))
        self.token_word = np.array(token_word, dtype=np.int64)
        self.token_par = np.array(token_par, dtype=np.int64)
        self.par_doc = np.array(par_doc, dtype=np.int64)
        self.par_tok_start = np.array(par_tok_start, dtype=np.int64)
        self.doc_par_start = np.array(doc_par_start, dtype=np.int64)

        self.par_type = np.zeros(self.n_paragraphs, dtype=np.int64)
        self.s_par = np.zeros(self.n_tokens, dtype=np.int8)
        self.topics = np.zeros(self.n_tokens, dtype=np.int64)

        k, t = hp.n_topics, hp.n_types
        self.c_type = np.zeros(t, dtype=np.int64)
        self.c_ptopic = np.zeros((k, t), dtype=np.int64)
        self.c_ptopic_sum = np.zeros(t, dtype=np.int64)
        self.c_dtopic = np.zeros((k, self.n_docs), dtype=np.int64)
        self.c_dtopic_sum = np.zeros(self.n_docs, dtype=np.int64)
        self.c_wordtopic = np.zeros((k, self.vocab_size), dtype=np.int64)
        self.c_wordtopic_sum = np.zeros(k, dtype=np.int64)

        self.rng = np.array([hp.seed], dtype=np.uint64)
        # scratch buffers reused by every kernel call
        self._used = np.zeros(k, dtype=np.int64)
        self._logw_t = np.empty(t, dtype=np.float64)
        self._logw_2k = np.empty(2 * k, dtype=np.float64)

    # -- index helpers -------------------------------------------------

    def paragraph_index(self, d: int, p: int) -> int:
        if not 0 <= d < self.n_docs:
            raise ValidationError(f"document index {d} out of range")
        g = self.doc_par_start[d] + p
        if not (p >= 0 and g < self.doc_par_start[d + 1]):
            raise ValidationError(f"paragraph index {p} out of range for document {d}")
        return int(g)

    def token_index(self, d: int, p: int, n: int) -> int:
        g = self.paragraph_index(d, p)
        i = self.par_tok_start[g] + n
        if not (n >= 0 and i < self.par_tok_start[g + 1]):
            raise ValidationError(f"token position {n} out of range")
        return int(i)

    # -- invariants ----------------------------------------------------

    def recount(self) -> None:
        """Rebuild all count arrays from the raw assignments."""
        _k._recount(
            self.token_word, self.token_par, self.par_doc,
            self.par_type, self.s_par, self.topics,
            self.c_type, self.c_ptopic, self.c_ptopic_sum,
            self.c_dtopic, self.c_dtopic_sum,
            self.c_wordtopic, self.c_wordtopic_sum,
        )

    def verify_counts(self) -> None:
        """Raise ValidationError if any cached count disagrees with a tally
        recomputed from scratch."""
        k, t = self.hp.n_topics, self.hp.n_types
        fresh = {
            "c_type": np.zeros(t, dtype=np.int64),
            "c_ptopic": np.zeros((k, t), dtype=np.int64),
            "c_ptopic_sum": np.zeros(t, dtype=np.int64),
            "c_dtopic": np.zeros((k, self.n_docs), dtype=np.int64),
            "c_dtopic_sum": np.zeros(self.n_docs, dtype=np.int64),
            "c_wordtopic": np.zeros((k, self.vocab_size), dtype=np.int64),
            "c_wordtopic_sum": np.zeros(k, dtype=np.int64),
        }
        _k._recount(
            self.token_word, self.token_par, self.par_doc,
            self.par_type, self.s_par, self.topics,
            fresh["c_type"], fresh["c_ptopic"], fresh["c_ptopic_sum"],
            fresh["c_dtopic"], fresh["c_dtopic_sum"],
            fresh["c_wordtopic"], fresh["c_wordtopic_sum"],
        )
        for name, expected in fresh.items():
            cached = getattr(self, name)
            if not np.array_equal(cached, expected):
                raise ValidationError(f"count array {name} desynchronized")
        if int(self.c_type.sum()) != self.n_paragraphs:
            raise ValidationError("c_type does not sum to the paragraph count")


def init_random(corpus: Corpus, hp: HyperParams) -> SamplerState:
    """Draw the initial assignments: types uniform, switches Bernoulli(gamma),
    topics uniform. Deterministic given hp.seed."""
    state = SamplerState(corpus, hp)
    _k._init_assignments(
        state.par_type, state.s_par, state.topics,
        hp.n_types, hp.n_topics, hp.gamma, state.rng,
    )
    state.recount()
    return state


def sample_paragraph_type(state: SamplerState, d: int, p: int) -> int:
    """Resample the type of paragraph p of document d; returns the new type."""
    g = state.paragraph_index(d, p)
    return int(
        _k._sample_ptype(
            g, state.par_tok_start, state.s_par, state.topics, state.par_type,
            state.c_type, state.c_ptopic, state.c_ptopic_sum,
            state.hp.h_t, state.hp.h_p, state.hp.type_kernel == "exact",
            state._used, state._logw_t, state.rng,
        )
    )


def sample_token_block(state: SamplerState, d: int, p: int, n: int) -> tuple[str, int]:
    """Resample (s, z) jointly for token n of paragraph p of document d."""
    i = state.token_index(d, p, n)
    cell = int(
        _k._sample_token(
            i, state.token_word, state.token_par, state.par_doc,
            state.par_type, state.s_par, state.topics,
            state.c_ptopic, state.c_ptopic_sum,
            state.c_dtopic, state.c_dtopic_sum,
            state.c_wordtopic, state.c_wordtopic_sum,
            state.hp.gamma, state.hp.alpha, state.hp.h_p, state.hp.beta,
            state._logw_2k, state.rng,
        )
    )
    k = state.hp.n_topics
    return ("par", cell) if cell < k else ("doc", cell - k)


def paragraph_type_distribution(state: SamplerState, d: int, p: int) -> np.ndarray:
    """The kernel's normalized categorical weights for paragraph (d, p),
    computed without mutating the state."""
    g = state.paragraph_index(d, p)
    probs = np.empty(state.hp.n_types, dtype=np.float64)
    _k._ptype_distribution(
        g, state.par_tok_start, state.s_par, state.topics, state.par_type,
        state.c_type, state.c_ptopic, state.c_ptopic_sum,
        state.hp.h_t, state.hp.h_p, state.hp.type_kernel == "exact",
        state._used, probs,
    )
    return probs


def token_block_distribution(state: SamplerState, d: int, p: int, n: int) -> np.ndarray:
    """Normalized 2K-cell weights for the block draw at token (d, p, n);
    cells [0, K) are (par, k), cells [K, 2K) are (doc, k)."""
    i = state.token_index(d, p, n)
    probs = np.empty(2 * state.hp.n_topics, dtype=np.float64)
    _k._token_distribution(
        i, state.token_word, state.token_par, state.par_doc,
        state.par_type, state.s_par, state.topics,
        state.c_ptopic, state.c_ptopic_sum,
        state.c_dtopic, state.c_dtopic_sum,
        state.c_wordtopic, state.c_wordtopic_sum,
        state.hp.gamma, state.hp.alpha, state.hp.h_p, state.hp.beta,
        probs,
    )
    return probs


def gibbs_sweep(state: SamplerState, corpus: Corpus | None = None) -> SamplerState:
    """One full sweep in document/paragraph/token order: a type draw per
    paragraph, then a block draw per token. Mutates and returns the state.

    The corpus argument is accepted for call-site symmetry; the state
    already carries the flattened corpus.
    """
    hp = state.hp
    _k._sweep(
        state.token_word, state.token_par, state.par_doc,
        state.par_tok_start, state.doc_par_start,
        state.par_type, state.s_par, state.topics,
        state.c_type, state.c_ptopic, state.c_ptopic_sum,
        state.c_dtopic, state.c_dtopic_sum,
        state.c_wordtopic, state.c_wordtopic_sum,
        hp.gamma, hp.alpha, hp.beta, hp.h_p, hp.h_t,
        hp.type_kernel == "exact",
        state._used, state._logw_t, state._logw_2k, state.rng,
    )
    return state


def joint_log_prob(state: SamplerState, hp: HyperParams | None = None) -> float:
    """Log of the collapsed joint probability of the current assignments."""
    hp = state.hp if hp is None else hp
    return float(
        _k._joint_log_prob(
            state.c_type, state.c_ptopic, state.c_ptopic_sum,
            state.c_dtopic, state.c_dtopic_sum,
            state.c_wordtopic, state.c_wordtopic_sum,
            hp.gamma, hp.alpha, hp.beta, hp.h_p, hp.h_t,
        )
    )


@dataclass(frozen=True)
class SampleAssignments:
    """Assignments retained at one sweep."""

    sweep: int
    par_types: np.ndarray  # int32[P]
    s_par: np.ndarray  # int8[N], 1 = par
    topics: np.ndarray  # int32[N]


@dataclass(frozen=True)
class PosteriorSamples:
    """Immutable bundle of retained samples plus the corpus layout needed to
    interpret them and the per-sweep joint log-probability trace."""

    hp: HyperParams
    n_docs: int
    vocab_size: int
    token_word: np.ndarray  # int32[N]
    token_par: np.ndarray  # int32[N]
    par_doc: np.ndarray  # int32[P]
    par_tok_start: np.ndarray  # int64[P+1]
    doc_par_start: np.ndarray  # int64[D+1]
    samples: tuple[SampleAssignments, ...]
    logprob_trace: np.ndarray  # float64[n_sweeps]

    @property
    def n_paragraphs(self) -> int:
        return len(self.par_doc)

    @property
    def n_tokens(self) -> int:
        return len(self.token_word)


def run(corpus: Corpus, hp: HyperParams) -> PosteriorSamples:
    """Initialize, sweep n_sweeps times, and retain assignments every
    sample_lag sweeps after burn_in; the trace has one entry per sweep."""
    state = init_random(corpus, hp)
    trace = np.empty(hp.n_sweeps, dtype=np.float64)
    samples: list[SampleAssignments] = []
    for sweep in range(1, hp.n_sweeps + 1):
        gibbs_sweep(state)
        trace[sweep - 1] = joint_log_prob(state)
        if sweep > hp.burn_in and (sweep - hp.burn_in) % hp.sample_lag == 0:
            samples.append(
                SampleAssignments(
                    sweep=sweep,
                    par_types=state.par_type.astype(np.int32),
                    s_par=state.s_par.copy(),
                    topics=state.topics.astype(np.int32),
                )
            )
    for arr in (trace,):
        arr.setflags(write=False)
    return PosteriorSamples(
        hp=hp,
        n_docs=state.n_docs,
        vocab_size=state.vocab_size,
        token_word=state.token_word.astype(np.int32),
        token_par=state.token_par.astype(np.int32),
        par_doc=state.par_doc.astype(np.int32),
        par_tok_start=state.par_tok_start.copy(),
        doc_par_start=state.doc_par_start.copy(),
        samples=tuple(samples),
        logprob_trace=trace,
    )


# -- persistence -------------------------------------------------------

_SAMPLES_KIND = "paratype-samples"
_SAMPLES_VERSION = 1


def _array_specs(ps: PosteriorSamples) -> list[tuple[str, str, np.ndarray]]:
    specs = [
        ("token_word", "<i4", ps.token_word),
        ("token_par", "<i4", ps.token_par),
        ("par_doc", "<i4", ps.par_doc),
        ("par_tok_start", "<i8", ps.par_tok_start),
        ("doc_par_start", "<i8", ps.doc_par_start),
        ("logprob_trace", "<f8", ps.logprob_trace),
    ]
    for idx, s in enumerate(ps.samples):
        specs.append((f"sample{idx}.par_types", "<i4", s.par_types))
        specs.append((f"sample{idx}.s_par", "|i1", s.s_par))
        specs.append((f"sample{idx}.topics", "<i4", s.topics))
    return specs


def save_samples(ps: PosteriorSamples, path: str) -> None:
    """Write retained samples as a one-line JSON header followed by raw
    little-endian array bytes. Identical samples give identical bytes."""
    specs = _array_specs(ps)
    header = {
        "version": _SAMPLES_VERSION,
        "kind": _SAMPLES_KIND,
        "hp": asdict(ps.hp),
        "n_docs": ps.n_docs,
        "vocab_size": ps.vocab_size,
        "retained_sweeps": [s.sweep for s in ps.samples],
        "arrays": [[name, dtype, int(arr.size)] for name, dtype, arr in specs],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        for _, dtype, arr in specs:
            fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def load_samples(path: str) -> PosteriorSamples:
    """Read a file written by save_samples."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"samples file {path}: invalid header") from exc
        if header.get("kind") != _SAMPLES_KIND or header.get("version") != _SAMPLES_VERSION:
            raise ParseError(f"samples file {path}: unknown format")
        arrays: dict[str, np.ndarray] = {}
        for name, dtype, size in header["arrays"]:
            n_bytes = int(size) * np.dtype(dtype).itemsize
            buf = fh.read(n_bytes)
            if len(buf) != n_bytes:
                raise ParseError(f"samples file {path}: truncated array {name}")
            arrays[name] = np.frombuffer(buf, dtype=dtype).copy()
        if fh.read(1):
            raise ParseError(f"samples file {path}: trailing bytes")
    hp = HyperParams(**header["hp"])
    samples = []
    for idx, sweep in enumerate(header["retained_sweeps"]):
        samples.append(
            SampleAssignments(
                sweep=int(sweep),
                par_types=arrays[f"sample{idx}.par_types"],
                s_par=arrays[f"sample{idx}.s_par"],
                topics=arrays[f"sample{idx}.topics"],
            )
        )
    trace = arrays["logprob_trace"]
    trace.setflags(write=False)
    return PosteriorSamples(
        hp=hp,
        n_docs=int(header["n_docs"]),
        vocab_size=int(header["vocab_size"]),
        token_word=arrays["token_word"],
        token_par=arrays["token_par"],
        par_doc=arrays["par_doc"],
        par_tok_start=arrays["par_tok_start"],
        doc_par_start=arrays["doc_par_start"],
        samples=tuple(samples),
        logprob_trace=trace,
    )


def write_logprob_csv(ps: PosteriorSamples, path: str) -> None:
    """Per-sweep trace as CSV (sweep, logprob), floats via repr round-trip."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sweep,logprob\n")
        for sweep, lp in enumerate(ps.logprob_trace, start=1):
            fh.write(f"{sweep},{float(lp)!r}\n")
