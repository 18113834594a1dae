"""Bootstrap sampling from a block chain and BIC context-tree pruning.

Scores are kept in log space.  For a candidate context ``w`` with counts
``N(w, a)`` taken over positions ``D < i <= m``:

    ml(w)  = sum_a N(w, a) log(N(w, a) / N(w))
    pen(w) = ml(w) - (N - 1) / 2 * log m

The tree-maximizing recursion assigns ``V(w) = max(pen(w), sum_a V(aw))`` over
seen children, with ``chi(w) = 1`` only when the children's sum is strictly
larger.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .context_tree import ContextTree
from .sequences import Alphabet, Context, SymbolSequence, count_pattern, decode_context

ORACLE_MAX_DEPTH = 4


@dataclass(frozen=True)
class BootstrapConfig:
    m: int
    D: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if self.m <= self.D:
            raise ValueError(f"bootstrap length m={self.m} must exceed D={self.D}")


@dataclass
class PrunedTreeResult:
    tree: ContextTree
    node_values: dict[Context, float]
    node_flags: dict[Context, int]
    bic_score: float

    def to_json(self) -> dict:
        return {
            "tree": self.tree.to_json(),
            "bic_score": self.bic_score,
            "nodes": [
                {"context": list(c), "value": v, "chi": self.node_flags[c]}
                for c, v in sorted(self.node_values.items(), key=lambda kv: (len(kv[0]), kv[0]))
            ],
        }


@dataclass(frozen=True)
class ContextCounts:
    """``tables[l][code, a]`` = number of window positions whose length-l past has ``code`` and next symbol ``a``."""

    tables: tuple[NDArray[np.int64], ...]
    alphabet_size: int
    offset: int
    m: int

    @property
    def depth(self) -> int:
        return len(self.tables) - 1

    def count(self, context: Context, next: int | None = None) -> int:
        code = 0
        for s in context:
            code = code * self.alphabet_size + s
        row = self.tables[len(context)][code]
        return int(row.sum() if next is None else row[next])


def count_contexts(sample: SymbolSequence, D: int, offset: int | None = None) -> ContextCounts:
    """Counts of every context up to length ``D`` over positions ``offset < i <= m`` (default offset D)."""
    offset = D if offset is None else offset
    m = len(sample)
    if offset < D:
        raise ValueError("the window must start at or after D")
    if m <= offset:
        raise ValueError(f"sample of length {m} leaves no positions after offset {offset}")
    N = sample.alphabet.size
    x = sample.as_int64()
    nxt = x[offset:]
    code = np.zeros(m - offset, dtype=np.int64)
    tables = []
    for length in range(D + 1):
        if length:
            # prepend the symbol ``length`` steps back as the new oldest digit
            code = code + x[offset - length: m - length] * N ** (length - 1)
        flat = np.bincount(code * N + nxt, minlength=N ** (length + 1))
        tables.append(flat.reshape(N ** length, N))
    return ContextCounts(tuple(tables), N, offset, m)


def _ml_rows(table: NDArray) -> NDArray[np.float64]:
    counts = table.astype(float)
    tot = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, counts * np.log(counts / tot), 0.0)
    return terms.sum(axis=1)


def _ml_from_counts(counts) -> float:
    tot = sum(counts)
    return math.fsum(c * math.log(c / tot) for c in counts if c > 0)


def ml_term(sample: SymbolSequence, context: Context, offset: int = 0) -> float:
    """Maximised log-likelihood of the symbols following ``context`` (0 if unseen)."""
    N = sample.alphabet.size
    return _ml_from_counts([count_pattern(sample, context, a, offset) for a in range(N)])


def penalized_term(sample: SymbolSequence, context: Context, m: int | None = None, offset: int = 0) -> float:
    m = len(sample) if m is None else m
    if m < 1:
        raise ValueError("m must be positive")
    N = sample.alphabet.size
    return ml_term(sample, context, offset) - (N - 1) / 2 * math.log(m)


def default_depth(m: int, alphabet: Alphabet | int = 2, override: int | None = None) -> int:
    """``max(1, floor(log m / (2 log N)))`` unless overridden."""
    if override is not None:
        if override < 1:
            raise ValueError("depth override must be >= 1")
        return int(override)
    N = alphabet.size if isinstance(alphabet, Alphabet) else int(alphabet)
    if m < N * N:
        raise ValueError(f"m={m} is smaller than N^2={N * N}")
    return max(1, int(math.floor(math.log(m) / (2 * math.log(N)) + 1e-12)))


def bootstrap_sample(
    trans: NDArray,
    pi: NDArray,
    cfg: BootstrapConfig | int,
    seed=None,
) -> SymbolSequence:
    """Run the block chain from a draw of ``pi`` and keep each block's newest symbol.

    ``trans`` is in successor form ``(N**k, N)``.  Passing an integer instead
    of a config gives the length ``m`` directly.
    """
    if isinstance(cfg, BootstrapConfig):
        m, seed = cfg.m, cfg.seed
    else:
        m = int(cfg)
    trans = np.asarray(trans, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if trans.ndim != 2:
        raise ValueError("transition table must be two-dimensional")
    S, N = trans.shape
    k = round(math.log(S, N)) if N > 1 else 0
    if N < 2 or N ** k != S:
        raise ValueError("transition table must have shape (N**k, N)")
    if pi.shape != (S,):
        raise ValueError("initial law does not match the number of block states")
    for name, arr in (("transition rows", trans), ("initial law", pi[None, :])):
        if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-8):
            raise ValueError(f"{name} must be non-negative and sum to 1")
    if m < 1:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed)
    start = int(rng.choice(S, p=pi / pi.sum()))
    cum = np.cumsum(trans, axis=1)
    cum[:, -1] = 1.0
    rest = _kernels.sample_block_chain(cum, start, rng.random(m - 1), N)
    return SymbolSequence(np.concatenate([[start % N], rest]), Alphabet(N))


def ctm_prune(sample: SymbolSequence, D: int, m: int | None = None) -> PrunedTreeResult:
    """BIC tree over candidates of depth <= D via the bottom-up maximizing recursion."""
    m = len(sample) if m is None else m
    if D < 1:
        raise ValueError("D must be >= 1")
    if not len(sample) >= m > D:
        raise ValueError(f"need len(sample) >= m > D, got {len(sample)}, {m}, {D}")
    N = sample.alphabet.size
    counts = count_contexts(sample[:m], D)
    penalty = (N - 1) / 2 * math.log(m)
    seen = [t.sum(axis=1) > 0 for t in counts.tables]
    pen = [_ml_rows(t) - penalty for t in counts.tables]

    values = [None] * (D + 1)
    flags = [None] * (D + 1)
    values[D] = pen[D]
    flags[D] = np.zeros(N ** D, dtype=np.int8)
    for length in range(D - 1, -1, -1):
        width = N ** length
        # child a.w has code a * N**length + code(w)
        child_v = np.where(seen[length + 1], values[length + 1], 0.0).reshape(N, width)
        kids = child_v.sum(axis=0)
        chi = kids > pen[length]
        values[length] = np.where(chi, kids, pen[length])
        flags[length] = chi.astype(np.int8)

    node_values: dict[Context, float] = {}
    node_flags: dict[Context, int] = {}
    for length in range(D + 1):
        for code in np.flatnonzero(seen[length]):
            ctx = decode_context(length, int(code), N)
            node_values[ctx] = float(values[length][code])
            node_flags[ctx] = int(flags[length][code])

    contexts: list[Context] = []
    stack: list[Context] = [()]
    while stack:
        w = stack.pop()
        if node_flags[w]:
            stack.extend((a,) + w for a in range(N) if (a,) + w in node_flags)
        else:
            contexts.append(w)
    return PrunedTreeResult(ContextTree(sample.alphabet, contexts), node_values, node_flags, -node_values[()])


def _complete_trees(N: int, D: int, prefix: Context = ()):
    """Every complete tree of depth <= D below ``prefix`` (each internal node has all N children)."""
    yield [prefix]
    if len(prefix) < D:
        for combo in itertools.product(*[list(_complete_trees(N, D, (a,) + prefix)) for a in range(N)]):
            yield [c for sub in combo for c in sub]


def exhaustive_bic(sample: SymbolSequence, D: int, m: int | None = None) -> tuple[ContextTree, float]:
    """Brute-force BIC minimiser over feasible trees (binary, D <= 4).

    Every feasible tree is a complete tree with its unseen contexts removed,
    so the search runs over complete trees of depth <= D and scores each with
    direct pattern counts.  Ties keep the tree with fewer contexts.
    """
    m = len(sample) if m is None else m
    N = sample.alphabet.size
    if N != 2:
        raise ValueError("exhaustive search is limited to the binary alphabet")
    if not 1 <= D <= ORACLE_MAX_DEPTH:
        raise ValueError(f"exhaustive search is limited to 1 <= D <= {ORACLE_MAX_DEPTH}")
    if not len(sample) >= m > D:
        raise ValueError(f"need len(sample) >= m > D, got {len(sample)}, {m}, {D}")
    x = sample[:m]
    penalty = (N - 1) / 2 * math.log(m)
    cache: dict[Context, tuple[int, float]] = {}

    def node(ctx: Context) -> tuple[int, float]:
        if ctx not in cache:
            nab = [count_pattern(x, ctx, a, offset=D) for a in range(N)]
            cache[ctx] = (sum(nab), _ml_from_counts(nab))
        return cache[ctx]

    best: tuple[float, int] | None = None
    best_tree: list[Context] = []
    for tree in _complete_trees(N, D):
        kept = [c for c in tree if node(c)[0] >= 1]
        score = -math.fsum(node(c)[1] for c in kept) + penalty * len(kept)
        key = (score, len(kept))
        if best is None or score < best[0] - 1e-9 or (abs(score - best[0]) <= 1e-9 and len(kept) < best[1]):
            best, best_tree = key, kept
    return ContextTree(sample.alphabet, best_tree), best[0]
