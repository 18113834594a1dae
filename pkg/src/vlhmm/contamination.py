"""Additive and multiplicative contamination of a hidden symbol string.

Sum regime:      z_t = (x_t + xi_t) mod N
Product regime:  z_t = x_t * xi_t   (binary natively; larger alphabets need an
                 explicit closed operation table)

A scalar noise level ``eps`` is the probability that the noise symbol is not
the neutral element of the operation (0 for sums, 1 for products), spread
evenly over the remaining symbols.  For binary sums that is the usual flip
probability; for binary products it is the probability of zeroing a 1.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .context_tree import ContextTree, InitialLaw
from .sequences import Alphabet, SymbolSequence

ORACLE_MAX_T = 12


class Regime(str, enum.Enum):
    SUM = "sum"
    PRODUCT = "product"


@dataclass(frozen=True)
class NoiseSpec:
    regime: Regime
    weights: tuple[float, ...]
    # closed product table op[a][b] for alphabets larger than 2
    table: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "regime", Regime(self.regime))
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("noise weights must be a vector over an alphabet of size >= 2")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("noise weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if self.table is not None:
            tab = np.asarray(self.table)
            N = w.size
            if tab.shape != (N, N) or tab.min() < 0 or tab.max() >= N:
                raise ValueError("operation table must be N x N with entries in the alphabet")
            object.__setattr__(self, "table", tuple(tuple(int(v) for v in row) for row in tab))

    @classmethod
    def scalar(cls, regime: Regime | str, eps: float, alphabet: Alphabet | int = 2, table=None) -> "NoiseSpec":
        N = alphabet.size if isinstance(alphabet, Alphabet) else int(alphabet)
        if not 0.0 <= eps <= 1.0:
            raise ValueError("noise level must lie in [0, 1]")
        regime = Regime(regime)
        neutral = 0 if regime is Regime.SUM else 1
        w = np.full(N, eps / (N - 1))
        w[neutral] = 1.0 - eps
        return cls(regime, tuple(w), table)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def level(self) -> float:
        """Probability mass off the neutral element."""
        neutral = 0 if self.regime is Regime.SUM else 1
        return 1.0 - self.weights[neutral]

    def operation(self) -> NDArray[np.int64]:
        """The ``N x N`` table of ``a (+) b`` or ``a * b``."""
        N = self.size
        a = np.arange(N)[:, None]
        b = np.arange(N)[None, :]
        if self.regime is Regime.SUM:
            return (a + b) % N
        if self.table is not None:
            return np.asarray(self.table, dtype=np.int64)
        if N == 2:
            return a * b
        raise ValueError(
            f"the integer product is not closed on an alphabet of size {N}; "
            "supply an explicit operation table"
        )


def emission_matrix(noise: NoiseSpec, alphabet: Alphabet | int | None = None) -> NDArray[np.float64]:
    """``B[a, z] = P(Z = z | X = a)`` induced by the noise law."""
    N = noise.size
    if alphabet is not None:
        size = alphabet.size if isinstance(alphabet, Alphabet) else int(alphabet)
        if size != N:
            raise ValueError("noise weights and alphabet differ in size")
    op = noise.operation()
    w = np.asarray(noise.weights)
    B = np.zeros((N, N))
    for a in range(N):
        for b in range(N):
            B[a, op[a, b]] += w[b]
    return B


def contaminate(x: SymbolSequence, noise: NoiseSpec, seed) -> SymbolSequence:
    """Apply i.i.d. noise drawn independently of ``x``."""
    N = x.alphabet.size
    if noise.size != N:
        raise ValueError("noise weights and alphabet differ in size")
    op = noise.operation()
    rng = np.random.default_rng(seed)
    xi = rng.choice(N, size=len(x), p=np.asarray(noise.weights))
    z = op[x.as_int64(), xi]
    return SymbolSequence(z, x.alphabet)


def brute_force_likelihood(
    z: SymbolSequence,
    tree: ContextTree,
    initial: InitialLaw,
    noise: NoiseSpec,
    head: str = "all",
) -> float:
    """Exact log P(z) by summing over every hidden path (test oracle, T <= 12).

    ``head="all"`` emits every observation; ``head="after_k"`` skips the
    emissions of the first ``k`` symbols, where ``k`` is the block length of
    ``initial``.
    """
    T = len(z)
    if T > ORACLE_MAX_T:
        raise ValueError(f"brute-force likelihood is limited to T <= {ORACLE_MAX_T}")
    if head not in ("all", "after_k"):
        raise ValueError("head must be 'all' or 'after_k'")
    k = initial.k
    if k < tree.depth:
        raise ValueError("initial law must cover blocks at least as long as the tree depth")
    if T < k:
        raise ValueError("sample shorter than the initial block")
    N = z.alphabet.size
    B = emission_matrix(noise, N)
    obs = list(z)
    first_emit = 0 if head == "all" else k
    terms = []
    for path in itertools.product(range(N), repeat=T):
        p = initial.prob(path[:k])
        if p == 0.0:
            continue
        for t in range(k, T):
            p *= tree.next_law(path[:t])[path[t]]
            if p == 0.0:
                break
        else:
            for t in range(first_emit, T):
                p *= B[path[t], obs[t]]
            terms.append(p)
    total = math.fsum(terms)
    return math.log(total) if total > 0 else -math.inf
