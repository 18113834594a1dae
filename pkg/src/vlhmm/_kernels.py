"""Compiled inner loops over block states.

Block states are radix-N codes of k symbols (most recent least significant).
Transitions are kept in successor form: ``trans[w, a]`` is the probability of
moving from block ``w`` to ``(w * N) % S + a``.  The predecessors of ``v`` are
``v // N + c * (S // N)`` for ``c`` in the alphabet.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def sample_block_chain(cum, start, u, N):
    """Walk the block chain from ``start``; returns the emitted (newest) symbols.

    ``cum`` holds row-wise cumulative transition probabilities.
    """
    S = cum.shape[0]
    n = u.shape[0]
    out = np.empty(n, dtype=np.int64)
    w = start
    for t in range(n):
        row = cum[w]
        a = 0
        while a < N - 1 and u[t] >= row[a]:
            a += 1
        out[t] = a
        w = (w * N) % S + a
    return out


@njit(cache=True)
def forward(pi, trans, emit, N):
    """Scaled forward pass.  Returns ``(alpha, scale, failed_step)``.

    ``alpha[r]`` is normalised to sum to one and ``scale[r]`` is the
    normaliser, so the log-likelihood is ``sum(log(scale))``.  ``failed_step``
    is -1 unless some step had zero probability.
    """
    R, S = emit.shape
    alpha = np.zeros((R, S))
    scale = np.zeros(R)
    block = S // N
    tot = 0.0
    for w in range(S):
        alpha[0, w] = pi[w] * emit[0, w]
        tot += alpha[0, w]
    if not tot > 0.0:
        return alpha, scale, 0
    for w in range(S):
        alpha[0, w] /= tot
    scale[0] = tot
    for r in range(1, R):
        tot = 0.0
        for v in range(S):
            a = v % N
            base = v // N
            acc = 0.0
            for c in range(N):
                w = base + c * block
                acc += alpha[r - 1, w] * trans[w, a]
            acc *= emit[r, v]
            alpha[r, v] = acc
            tot += acc
        if not tot > 0.0:
            return alpha, scale, r
        for v in range(S):
            alpha[r, v] /= tot
        scale[r] = tot
    return alpha, scale, -1


@njit(cache=True)
def backward(trans, emit, scale, N):
    """Backward pass sharing the forward normalisers (sum(alpha*beta) == 1)."""
    R, S = emit.shape
    beta = np.zeros((R, S))
    for w in range(S):
        beta[R - 1, w] = 1.0
    for r in range(R - 2, -1, -1):
        for w in range(S):
            shifted = (w * N) % S
            acc = 0.0
            for a in range(N):
                v = shifted + a
                acc += trans[w, a] * emit[r + 1, v] * beta[r + 1, v]
            beta[r, w] = acc / scale[r + 1]
    return beta


@njit(cache=True)
def transition_counts(alpha, beta, scale, trans, emit, N):
    """Expected transition counts ``sum_r delta_r(w, a)`` in successor form."""
    R, S = emit.shape
    counts = np.zeros((S, N))
    for r in range(R - 1):
        inv = 1.0 / scale[r + 1]
        for w in range(S):
            aw = alpha[r, w] * inv
            if aw == 0.0:
                continue
            shifted = (w * N) % S
            for a in range(N):
                v = shifted + a
                counts[w, a] += aw * trans[w, a] * emit[r + 1, v] * beta[r + 1, v]
    return counts


@njit(cache=True)
def em_pass(pi, trans, emit, obs, ncol, N, want_emis):
    """Fused forward-backward returning only the sufficient statistics of one EM update.

    Returns ``(loglik, trans_counts, occupancy, gamma0, emission_counts, failed_step)``.
    Only the forward table is stored; beta is carried as a single vector.
    """
    R, S = emit.shape
    block = S // N
    alpha = np.empty((R, S))
    scale = np.empty(R)
    tot = 0.0
    for w in range(S):
        v = pi[w] * emit[0, w]
        alpha[0, w] = v
        tot += v
    if not tot > 0.0:
        return 0.0, np.zeros((S, N)), np.zeros(S), np.zeros(S), np.zeros((S, ncol)), 0
    inv = 1.0 / tot
    for w in range(S):
        alpha[0, w] *= inv
    scale[0] = tot
    for r in range(1, R):
        prev = alpha[r - 1]
        cur = alpha[r]
        er = emit[r]
        tot = 0.0
        for v in range(S):
            a = v % N
            base = v // N
            acc = 0.0
            for c in range(N):
                w = base + c * block
                acc += prev[w] * trans[w, a]
            acc *= er[v]
            cur[v] = acc
            tot += acc
        if not tot > 0.0:
            return 0.0, np.zeros((S, N)), np.zeros(S), np.zeros(S), np.zeros((S, ncol)), r
        inv = 1.0 / tot
        for v in range(S):
            cur[v] *= inv
        scale[r] = tot
    counts = np.zeros((S, N))
    occ = np.zeros(S)
    ecounts = np.zeros((S, ncol))
    beta = np.ones(S)
    nb = np.empty(S)
    tmp = np.empty(S)
    ar = alpha[R - 1]
    for w in range(S):
        occ[w] += ar[w]
        if want_emis:
            ecounts[w, obs[R - 1]] += ar[w]
    for r in range(R - 2, -1, -1):
        inv = 1.0 / scale[r + 1]
        er = emit[r + 1]
        for v in range(S):
            tmp[v] = er[v] * beta[v] * inv
        ar = alpha[r]
        for w in range(S):
            shifted = (w * N) % S
            acc = 0.0
            aw = ar[w]
            for a in range(N):
                x = trans[w, a] * tmp[shifted + a]
                acc += x
                counts[w, a] += aw * x
            nb[w] = acc
        for w in range(S):
            beta[w] = nb[w]
            g = ar[w] * nb[w]
            occ[w] += g
            if want_emis:
                ecounts[w, obs[r]] += g
    gamma0 = alpha[0] * beta
    gamma0 /= gamma0.sum()
    ll = 0.0
    for r in range(R):
        ll += np.log(scale[r])
    return ll, counts, occ, gamma0, ecounts, -1


@njit(cache=True)
def pair_posteriors(alpha, beta, scale, trans, emit, N):
    """Per-step pair posteriors ``delta[r, w, a]`` for the move w -> successor(w, a)."""
    R, S = emit.shape
    delta = np.zeros((max(R - 1, 0), S, N))
    for r in range(R - 1):
        inv = 1.0 / scale[r + 1]
        for w in range(S):
            shifted = (w * N) % S
            for a in range(N):
                v = shifted + a
                delta[r, w, a] = alpha[r, w] * inv * trans[w, a] * emit[r + 1, v] * beta[r + 1, v]
    return delta


@njit(cache=True)
def viterbi(log_pi, log_trans, log_emit, N):
    """Max-product decoding in log space.

    Ties go to the lower state index: predecessors are scanned in increasing
    order and only a strictly better score replaces the incumbent.
    """
    R, S = log_emit.shape
    block = S // N
    score = np.empty((R, S))
    back = np.zeros((R, S), dtype=np.int64)
    for w in range(S):
        score[0, w] = log_pi[w] + log_emit[0, w]
    for r in range(1, R):
        for v in range(S):
            a = v % N
            base = v // N
            best = -np.inf
            arg = base
            for c in range(N):
                w = base + c * block
                s = score[r - 1, w] + log_trans[w, a]
                if s > best:
                    best = s
                    arg = w
            score[r, v] = best + log_emit[r, v]
            back[r, v] = arg
    path = np.empty(R, dtype=np.int64)
    best = -np.inf
    arg = 0
    for w in range(S):
        if score[R - 1, w] > best:
            best = score[R - 1, w]
            arg = w
    path[R - 1] = arg
    for r in range(R - 1, 0, -1):
        path[r - 1] = back[r, path[r]]
    return path, best
