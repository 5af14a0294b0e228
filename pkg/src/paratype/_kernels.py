"""Jitted inner loops for the collapsed Gibbs sampler.

Everything in here operates on flat numpy arrays so numba can compile it.
The Python-facing wrappers live in sampler.py. Cell layout for the token
block: index k in [0, K) means (s=par, topic k), index K + k means
(s=doc, topic k).
"""

import math

import numpy as np
from numba import njit

# SplitMix64 constants. All uint64 so numba never promotes to a signed type.
_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True)
def _rng_next(rng):
    rng[0] = rng[0] + _SM_GAMMA
    z = rng[0]
    z = (z ^ (z >> _S30)) * _SM_MUL1
    z = (z ^ (z >> _S27)) * _SM_MUL2
    return z ^ (z >> _S31)


@njit(cache=True)
def _rng_unit(rng):
    # 53 random bits -> [0, 1)
    return float(_rng_next(rng) >> _S11) * _INV53


@njit(cache=True)
def splitmix64_stream(seed, n):
    """Expose the raw unit stream so tests can pin the generator down."""
    rng = np.empty(1, dtype=np.uint64)
    rng[0] = seed
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _rng_unit(rng)
    return out


@njit(cache=True)
def _draw_from_logweights(logw, n, rng):
    # Inverse CDF over exp(logw - max). -inf cells carry zero mass.
    m = -np.inf
    for i in range(n):
        if logw[i] > m:
            m = logw[i]
    if m == -np.inf:
        raise RuntimeError("no positive sampling weight")
    total = 0.0
    for i in range(n):
        total += np.exp(logw[i] - m)
    u = _rng_unit(rng) * total
    acc = 0.0
    pick = -1
    for i in range(n):
        p = np.exp(logw[i] - m)
        if p > 0.0:
            pick = i
        acc += p
        if u < acc:
            return i
    return pick  # rounding pushed u to the top; take the last live cell


@njit(cache=True)
def _init_assignments(par_type, s_par, topics, t_count, k_count, gamma, rng):
    for g in range(par_type.shape[0]):
        par_type[g] = int(_rng_unit(rng) * t_count)
    for i in range(s_par.shape[0]):
        s_par[i] = 1 if _rng_unit(rng) < gamma else 0
        topics[i] = int(_rng_unit(rng) * k_count)


@njit(cache=True)
def _recount(
    token_word,
    token_par,
    par_doc,
    par_type,
    s_par,
    topics,
    c_type,
    c_ptopic,
    c_ptopic_sum,
    c_dtopic,
    c_dtopic_sum,
    c_wordtopic,
    c_wordtopic_sum,
):
    c_type[:] = 0
    c_ptopic[:, :] = 0
    c_ptopic_sum[:] = 0
    c_dtopic[:, :] = 0
    c_dtopic_sum[:] = 0
    c_wordtopic[:, :] = 0
    c_wordtopic_sum[:] = 0
    for g in range(par_type.shape[0]):
        c_type[par_type[g]] += 1
    for i in range(token_word.shape[0]):
        g = token_par[i]
        k = topics[i]
        w = token_word[i]
        if s_par[i] == 1:
            t = par_type[g]
            c_ptopic[k, t] += 1
            c_ptopic_sum[t] += 1
        else:
            d = par_doc[g]
            c_dtopic[k, d] += 1
            c_dtopic_sum[d] += 1
        c_wordtopic[k, w] += 1
        c_wordtopic_sum[k] += 1


@njit(cache=True)
def _ptype_logweights(
    g,
    par_tok_start,
    s_par,
    topics,
    c_type,
    c_ptopic,
    c_ptopic_sum,
    h_t,
    h_p,
    exact,
    used,
    logw,
):
    """Log weights for the paragraph-type draw, paragraph g already removed.

    exact=True uses the sequential Polya-urn form, whose weights are exact
    conditionals of the collapsed joint. exact=False holds counts static
    across the within-paragraph token product. `used` is a zeroed scratch
    array of length K; it is restored to zero before returning.
    """
    k_count = c_ptopic.shape[0]
    t_count = c_type.shape[0]
    ts = par_tok_start[g]
    te = par_tok_start[g + 1]
    for t in range(t_count):
        acc = np.log(h_t + c_type[t])
        if exact:
            j = 0
            for i in range(ts, te):
                if s_par[i] == 1:
                    k = topics[i]
                    acc += np.log(c_ptopic[k, t] + h_p + used[k])
                    acc -= np.log(c_ptopic_sum[t] + k_count * h_p + j)
                    used[k] += 1
                    j += 1
            for i in range(ts, te):
                if s_par[i] == 1:
                    used[topics[i]] = 0
        else:
            den = np.log(c_ptopic_sum[t] + k_count * h_p)
            for i in range(ts, te):
                if s_par[i] == 1:
                    acc += np.log(c_ptopic[topics[i], t] + h_p) - den
        logw[t] = acc


@njit(cache=True)
def _remove_paragraph(g, par_tok_start, s_par, topics, par_type, c_type, c_ptopic, c_ptopic_sum):
    t_old = par_type[g]
    c_type[t_old] -= 1
    for i in range(par_tok_start[g], par_tok_start[g + 1]):
        if s_par[i] == 1:
            c_ptopic[topics[i], t_old] -= 1
            c_ptopic_sum[t_old] -= 1


@njit(cache=True)
def _insert_paragraph(g, t_new, par_tok_start, s_par, topics, par_type, c_type, c_ptopic, c_ptopic_sum):
    c_type[t_new] += 1
    for i in range(par_tok_start[g], par_tok_start[g + 1]):
        if s_par[i] == 1:
            c_ptopic[topics[i], t_new] += 1
            c_ptopic_sum[t_new] += 1
    par_type[g] = t_new


@njit(cache=True)
def _sample_ptype(
    g,
    par_tok_start,
    s_par,
    topics,
    par_type,
    c_type,
    c_ptopic,
    c_ptopic_sum,
    h_t,
    h_p,
    exact,
    used,
    logw_t,
    rng,
):
    _remove_paragraph(g, par_tok_start, s_par, topics, par_type, c_type, c_ptopic, c_ptopic_sum)
    _ptype_logweights(
        g, par_tok_start, s_par, topics, c_type, c_ptopic, c_ptopic_sum,
        h_t, h_p, exact, used, logw_t,
    )
    t_new = _draw_from_logweights(logw_t, c_type.shape[0], rng)
    _insert_paragraph(g, t_new, par_tok_start, s_par, topics, par_type, c_type, c_ptopic, c_ptopic_sum)
    return t_new


@njit(cache=True)
def _ptype_distribution(
    g,
    par_tok_start,
    s_par,
    topics,
    par_type,
    c_type,
    c_ptopic,
    c_ptopic_sum,
    h_t,
    h_p,
    exact,
    used,
    probs,
):
    """Normalized kernel weights without sampling; state is left unchanged."""
    t_old = par_type[g]
    _remove_paragraph(g, par_tok_start, s_par, topics, par_type, c_type, c_ptopic, c_ptopic_sum)
    _ptype_logweights(
        g, par_tok_start, s_par, topics, c_type, c_ptopic, c_ptopic_sum,
        h_t, h_p, exact, used, probs,
    )
    _insert_paragraph(g, t_old, par_tok_start, s_par, topics, par_type, c_type, c_ptopic, c_ptopic_sum)
    t_count = c_type.shape[0]
    m = -np.inf
    for t in range(t_count):
        if probs[t] > m:
            m = probs[t]
    total = 0.0
    for t in range(t_count):
        probs[t] = np.exp(probs[t] - m)
        total += probs[t]
    for t in range(t_count):
        probs[t] /= total


@njit(cache=True)
def _token_logweights(
    d,
    t,
    w,
    c_ptopic,
    c_ptopic_sum,
    c_dtopic,
    c_dtopic_sum,
    c_wordtopic,
    c_wordtopic_sum,
    gamma,
    alpha,
    h_p,
    beta,
    logw,
):
    """2K log weights for the block (s, z) draw, token already removed."""
    k_count = c_ptopic.shape[0]
    v = c_wordtopic.shape[1]
    pden = c_ptopic_sum[t] + k_count * h_p
    dden = c_dtopic_sum[d] + k_count * alpha
    for k in range(k_count):
        wterm = (c_wordtopic[k, w] + beta) / (c_wordtopic_sum[k] + v * beta)
        wp = gamma * ((c_ptopic[k, t] + h_p) / pden) * wterm
        wd = (1.0 - gamma) * ((c_dtopic[k, d] + alpha) / dden) * wterm
        logw[k] = np.log(wp) if wp > 0.0 else -np.inf
        logw[k_count + k] = np.log(wd) if wd > 0.0 else -np.inf


@njit(cache=True)
def _remove_token(
    i, token_word, token_par, par_doc, par_type, s_par, topics,
    c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
):
    g = token_par[i]
    k = topics[i]
    if s_par[i] == 1:
        t = par_type[g]
        c_ptopic[k, t] -= 1
        c_ptopic_sum[t] -= 1
    else:
        d = par_doc[g]
        c_dtopic[k, d] -= 1
        c_dtopic_sum[d] -= 1
    c_wordtopic[k, token_word[i]] -= 1
    c_wordtopic_sum[k] -= 1


@njit(cache=True)
def _insert_token(
    i, cell, token_word, token_par, par_doc, par_type, s_par, topics,
    c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
):
    k_count = c_ptopic.shape[0]
    g = token_par[i]
    if cell < k_count:
        k = cell
        t = par_type[g]
        c_ptopic[k, t] += 1
        c_ptopic_sum[t] += 1
        s_par[i] = 1
    else:
        k = cell - k_count
        d = par_doc[g]
        c_dtopic[k, d] += 1
        c_dtopic_sum[d] += 1
        s_par[i] = 0
    c_wordtopic[k, token_word[i]] += 1
    c_wordtopic_sum[k] += 1
    topics[i] = k


@njit(cache=True)
def _sample_token(
    i,
    token_word,
    token_par,
    par_doc,
    par_type,
    s_par,
    topics,
    c_ptopic,
    c_ptopic_sum,
    c_dtopic,
    c_dtopic_sum,
    c_wordtopic,
    c_wordtopic_sum,
    gamma,
    alpha,
    h_p,
    beta,
    logw_2k,
    rng,
):
    g = token_par[i]
    _remove_token(
        i, token_word, token_par, par_doc, par_type, s_par, topics,
        c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
    )
    _token_logweights(
        par_doc[g], par_type[g], token_word[i],
        c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
        gamma, alpha, h_p, beta, logw_2k,
    )
    cell = _draw_from_logweights(logw_2k, 2 * c_ptopic.shape[0], rng)
    _insert_token(
        i, cell, token_word, token_par, par_doc, par_type, s_par, topics,
        c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
    )
    return cell


@njit(cache=True)
def _token_distribution(
    i,
    token_word,
    token_par,
    par_doc,
    par_type,
    s_par,
    topics,
    c_ptopic,
    c_ptopic_sum,
    c_dtopic,
    c_dtopic_sum,
    c_wordtopic,
    c_wordtopic_sum,
    gamma,
    alpha,
    h_p,
    beta,
    probs,
):
    """Normalized 2K-cell weights without sampling; state is left unchanged."""
    g = token_par[i]
    k_count = c_ptopic.shape[0]
    cell_old = topics[i] if s_par[i] == 1 else k_count + topics[i]
    _remove_token(
        i, token_word, token_par, par_doc, par_type, s_par, topics,
        c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
    )
    _token_logweights(
        par_doc[g], par_type[g], token_word[i],
        c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
        gamma, alpha, h_p, beta, probs,
    )
    _insert_token(
        i, cell_old, token_word, token_par, par_doc, par_type, s_par, topics,
        c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum, c_wordtopic, c_wordtopic_sum,
    )
    n = 2 * k_count
    m = -np.inf
    for c in range(n):
        if probs[c] > m:
            m = probs[c]
    total = 0.0
    for c in range(n):
        probs[c] = np.exp(probs[c] - m)
        total += probs[c]
    for c in range(n):
        probs[c] /= total


@njit(cache=True)
def _sweep(
    token_word,
    token_par,
    par_doc,
    par_tok_start,
    doc_par_start,
    par_type,
    s_par,
    topics,
    c_type,
    c_ptopic,
    c_ptopic_sum,
    c_dtopic,
    c_dtopic_sum,
    c_wordtopic,
    c_wordtopic_sum,
    gamma,
    alpha,
    beta,
    h_p,
    h_t,
    exact,
    used,
    logw_t,
    logw_2k,
    rng,
):
    # Document, then paragraph, then token order: one type draw per
    # paragraph followed by one block draw per token.
    for d in range(doc_par_start.shape[0] - 1):
        for g in range(doc_par_start[d], doc_par_start[d + 1]):
            _sample_ptype(
                g, par_tok_start, s_par, topics, par_type,
                c_type, c_ptopic, c_ptopic_sum,
                h_t, h_p, exact, used, logw_t, rng,
            )
            for i in range(par_tok_start[g], par_tok_start[g + 1]):
                _sample_token(
                    i, token_word, token_par, par_doc, par_type, s_par, topics,
                    c_ptopic, c_ptopic_sum, c_dtopic, c_dtopic_sum,
                    c_wordtopic, c_wordtopic_sum,
                    gamma, alpha, h_p, beta, logw_2k, rng,
                )


@njit(cache=True)
def _joint_log_prob(
    c_type,
    c_ptopic,
    c_ptopic_sum,
    c_dtopic,
    c_dtopic_sum,
    c_wordtopic,
    c_wordtopic_sum,
    gamma,
    alpha,
    beta,
    h_p,
    h_t,
):
    """Collapsed joint over all assignments, one Dirichlet-multinomial block
    per integrated prior plus the Bernoulli switch term (0 log 0 = 0)."""
    t_count = c_type.shape[0]
    k_count = c_ptopic.shape[0]
    d_count = c_dtopic.shape[1]
    v = c_wordtopic.shape[1]

    n_par = 0
    for t in range(t_count):
        n_par += c_ptopic_sum[t]
    n_doc = 0
    for d in range(d_count):
        n_doc += c_dtopic_sum[d]

    lp = 0.0
    if n_par > 0:
        if gamma <= 0.0:
            return -np.inf
        lp += n_par * np.log(gamma)
    if n_doc > 0:
        if gamma >= 1.0:
            return -np.inf
        lp += n_doc * np.log(1.0 - gamma)

    # zero counts contribute lgamma(a) - lgamma(a) = 0 exactly, so skip them
    n_pars = 0
    for t in range(t_count):
        n_pars += c_type[t]
    lp += math.lgamma(t_count * h_t) - math.lgamma(t_count * h_t + n_pars)
    for t in range(t_count):
        if c_type[t] != 0:
            lp += math.lgamma(h_t + c_type[t]) - math.lgamma(h_t)

    for t in range(t_count):
        lp += math.lgamma(k_count * h_p) - math.lgamma(k_count * h_p + c_ptopic_sum[t])
        for k in range(k_count):
            if c_ptopic[k, t] != 0:
                lp += math.lgamma(h_p + c_ptopic[k, t]) - math.lgamma(h_p)

    for d in range(d_count):
        lp += math.lgamma(k_count * alpha) - math.lgamma(k_count * alpha + c_dtopic_sum[d])
        for k in range(k_count):
            if c_dtopic[k, d] != 0:
                lp += math.lgamma(alpha + c_dtopic[k, d]) - math.lgamma(alpha)

    for k in range(k_count):
        lp += math.lgamma(v * beta) - math.lgamma(v * beta + c_wordtopic_sum[k])
        for w in range(v):
            if c_wordtopic[k, w] != 0:
                lp += math.lgamma(beta + c_wordtopic[k, w]) - math.lgamma(beta)

    return lp
