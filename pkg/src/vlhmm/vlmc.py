"""Sampling a VLMC and empirical transition estimates from observed strings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .context_tree import ContextTree, block_transitions, validate
from .sequences import SymbolSequence

DEFAULT_BURN_IN = 1000


@dataclass(frozen=True)
class VlmcModel:
    tree: ContextTree
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self) -> None:
        diag = validate(self.tree)
        if not diag.suffix_free:
            raise ValueError(f"tree is not suffix-free: {diag.suffix_violations[:3]}")
        if not diag.complete:
            raise ValueError(f"tree is not complete, e.g. history {diag.uncovered[0]} is uncovered")
        if diag.unset:
            raise ValueError(f"transition laws unset for contexts {diag.unset}")
        if diag.nonstochastic:
            raise ValueError(f"non-stochastic transition rows for {diag.nonstochastic}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


def _cumulative(rows: NDArray) -> NDArray:
    cum = np.cumsum(rows, axis=1)
    cum[:, -1] = 1.0
    return cum


def sample_vlmc(model: VlmcModel, T: int, seed: int | np.random.SeedSequence | None) -> SymbolSequence:
    """Draw ``x_1^T``: uniform random initial block, ``burn_in`` discarded steps, then ``T`` symbols."""
    tree = model.tree
    N = tree.alphabet.size
    k = max(tree.depth, 1)
    if T < tree.depth or T < 1:
        raise ValueError(f"T={T} must be at least the tree depth {tree.depth}")
    rng = np.random.default_rng(seed)
    table = block_transitions(tree, k)
    prefix = rng.integers(0, N, size=k)
    start = 0
    for s in prefix:
        start = start * N + int(s)
    u = rng.random(model.burn_in + T)
    out = _kernels.sample_block_chain(_cumulative(table), start, u, N)
    return SymbolSequence(out[model.burn_in:], tree.alphabet)


def empirical_transitions(sample: SymbolSequence, k: int) -> NDArray[np.float64]:
    """Row ``w`` holds ``N(w, a) / N(w)`` for every length-k block ``w`` (uniform if unseen).

    The result is in successor form, shape ``(N**k, N)``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    T = len(sample)
    if T <= k:
        raise ValueError(f"sample of length {T} is too short for order {k}")
    N = sample.alphabet.size
    x = sample.as_int64()
    codes = np.zeros(T - k, dtype=np.int64)
    for j in range(k):
        codes = codes * N + x[j:T - k + j]
    counts = np.bincount(codes * N + x[k:], minlength=N ** (k + 1)).reshape(N ** k, N).astype(float)
    tot = counts.sum(axis=1, keepdims=True)
    return np.where(tot > 0, counts / np.where(tot > 0, tot, 1.0), 1.0 / N)


def successor_to_dense(trans: NDArray, N: int) -> NDArray[np.float64]:
    """Expand a successor-form block transition table into the square matrix over blocks."""
    S = trans.shape[0]
    dense = np.zeros((S, S))
    w = np.arange(S)
    for a in range(N):
        dense[w, (w * N) % S + a] = trans[:, a]
    return dense


def stationary_distribution(P: NDArray, tol: float = 1e-12, max_iter: int = 100_000) -> NDArray[np.float64]:
    """Left fixed vector of a row-stochastic matrix.

    Iterates the lazy chain ``v <- (v + v P) / 2`` (same fixed points as ``P``,
    but aperiodic) until the residual ``|v P - v|_1`` drops below ``tol``.
    Raises if the chain has more than one closed class.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-10):
        raise ValueError("rows must be non-negative and sum to 1")
    n = P.shape[0]
    ncomp, labels = connected_components(P > 0, directed=True, connection="strong")
    closed = 0
    for c in range(ncomp):
        members = labels == c
        if not np.any(P[np.ix_(members, ~members)] > 0):
            closed += 1
    if closed != 1:
        raise ValueError(f"chain is reducible: {closed} closed classes, stationary law is not unique")
    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        vp = v @ P
        if np.abs(vp - v).sum() < tol:
            return vp / vp.sum()
        v = 0.5 * (v + vp)
    raise RuntimeError(f"power iteration did not converge in {max_iter} iterations")
