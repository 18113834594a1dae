"""Context trees: suffix lookup, validation, truncation and full trees."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .sequences import Alphabet, Context, format_context

STOCHASTIC_TOL = 1e-12
SIBLING_TOL = 1e-9


class IncompleteTreeError(LookupError):
    """No context of the tree is a suffix of the requested history."""


@dataclass
class TreeDiagnostics:
    suffix_violations: list[tuple[Context, Context]] = field(default_factory=list)
    nonstochastic: list[Context] = field(default_factory=list)
    unset: list[Context] = field(default_factory=list)
    complete: bool = True
    uncovered: list[Context] = field(default_factory=list)
    # parents whose |E| children all carry the same next-symbol law
    reducible_splits: list[Context] = field(default_factory=list)

    @property
    def suffix_free(self) -> bool:
        return not self.suffix_violations

    @property
    def ok(self) -> bool:
        return self.suffix_free and not self.nonstochastic and self.complete

    @property
    def warnings(self) -> list[str]:
        return [
            f"children of {format_context(p)} share one transition law (not irreducible)"
            for p in self.reducible_splits
        ]


class ContextTree:
    """A set of contexts with an optional next-symbol law per context.

    The contexts are stored in a suffix trie keyed by context tuple; walking the
    trie from the root follows the history backwards in time.  Trees that are
    incomplete or not suffix-free can be represented (``validate`` reports the
    problems) but :meth:`lookup` refuses histories no context covers.
    """

    def __init__(
        self,
        alphabet: Alphabet | int,
        contexts: Iterable[Sequence[int]],
        transitions: Mapping[Context, Sequence[float]] | Sequence[Sequence[float] | None] | None = None,
    ):
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        self.alphabet = alphabet
        ctxs = [tuple(int(s) for s in c) for c in contexts]
        for c in ctxs:
            if any(s < 0 or s >= alphabet.size for s in c):
                raise ValueError(f"context {c} has symbols outside the alphabet")
        if len(set(ctxs)) != len(ctxs):
            raise ValueError("duplicate contexts")
        rows: dict[Context, NDArray | None] = {c: None for c in ctxs}
        if transitions is not None:
            if isinstance(transitions, Mapping):
                items = [(tuple(k), v) for k, v in transitions.items()]
            else:
                if len(transitions) != len(ctxs):
                    raise ValueError("need one transition row per context")
                items = list(zip(ctxs, transitions))
            for c, row in items:
                if c not in rows:
                    raise ValueError(f"transition given for unknown context {c}")
                if row is None:
                    continue
                arr = np.asarray(row, dtype=float)
                if arr.shape != (alphabet.size,):
                    raise ValueError(f"row for {c} must have {alphabet.size} entries")
                arr.setflags(write=False)
                rows[c] = arr
        self._rows = rows
        self._order = sorted(ctxs, key=lambda c: (len(c), c))

    # basic accessors ----------------------------------------------------------

    @property
    def contexts(self) -> list[Context]:
        return list(self._order)

    @property
    def context_set(self) -> frozenset[Context]:
        return frozenset(self._rows)

    @property
    def depth(self) -> int:
        return max((len(c) for c in self._rows), default=0)

    @property
    def has_transitions(self) -> bool:
        return bool(self._rows) and all(r is not None for r in self._rows.values())

    def transition(self, context: Sequence[int]) -> NDArray | None:
        return self._rows[tuple(context)]

    @property
    def transitions(self) -> dict[Context, NDArray | None]:
        return dict(self._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, context: object) -> bool:
        return tuple(context) in self._rows  # type: ignore[arg-type]

    def __iter__(self):
        return iter(self._order)

    def __repr__(self) -> str:
        names = ", ".join(format_context(c) for c in self._order)
        return f"ContextTree(alphabet={self.alphabet.size}, contexts={{{names}}})"

    def with_transitions(self, transitions: Mapping[Context, Sequence[float]]) -> "ContextTree":
        return ContextTree(self.alphabet, self._order, transitions)

    # lookup -------------------------------------------------------------------

    def lookup(self, history: Sequence[int]) -> Context:
        """The context of the tree that is a suffix of ``history``.

        Suffixes are tried from the shortest upwards; for a suffix-free tree at
        most one can match.
        """
        h = tuple(history)
        for length in range(0, min(len(h), self.depth) + 1):
            cand = h[len(h) - length:] if length else ()
            if cand in self._rows:
                return cand
        raise IncompleteTreeError(
            f"no context of {self!r} is a suffix of history {format_context(h)}"
        )

    def next_law(self, history: Sequence[int]) -> NDArray:
        row = self._rows[self.lookup(history)]
        if row is None:
            raise ValueError(f"transition law of context {self.lookup(history)} is unset")
        return row

    # serialization --------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "alphabet": self.alphabet.size,
            "contexts": [list(c) for c in self._order],
            "transitions": [
                None if self._rows[c] is None else [float(p) for p in self._rows[c]]
                for c in self._order
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ContextTree":
        trans = data.get("transitions")
        return cls(int(data["alphabet"]), [tuple(c) for c in data["contexts"]], trans)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "ContextTree":
        return cls.from_json(json.loads(Path(path).read_text()))


def lookup_context(tree: ContextTree, history: Sequence[int]) -> Context:
    return tree.lookup(history)


def validate(tree: ContextTree) -> TreeDiagnostics:
    """Report suffix-freeness, stochasticity of rows and completeness."""
    diag = TreeDiagnostics()
    ctxs = tree.contexts
    by_len: dict[int, list[Context]] = {}
    for c in ctxs:
        by_len.setdefault(len(c), []).append(c)
    cset = tree.context_set
    for c in ctxs:
        for length in range(len(c)):
            suf = c[len(c) - length:] if length else ()
            if suf in cset:
                diag.suffix_violations.append((suf, c))
    for c in ctxs:
        row = tree.transition(c)
        if row is None:
            diag.unset.append(c)
        elif np.any(row < 0) or abs(row.sum() - 1.0) > STOCHASTIC_TOL:
            diag.nonstochastic.append(c)

    N = tree.alphabet.size
    depth = tree.depth
    if not ctxs:
        diag.complete = False
    else:
        for hist in itertools.product(range(N), repeat=depth):
            try:
                tree.lookup(hist)
            except IncompleteTreeError:
                diag.complete = False
                if len(diag.uncovered) < 16:
                    diag.uncovered.append(hist)

    parents = {c[1:] for c in ctxs if c}
    for p in sorted(parents, key=lambda c: (len(c), c)):
        kids = [(a,) + p for a in range(N)]
        if all(k in cset and tree.transition(k) is not None for k in kids):
            first = tree.transition(kids[0])
            if all(np.max(np.abs(tree.transition(k) - first)) <= SIBLING_TOL for k in kids[1:]):
                diag.reducible_splits.append(p)
    return diag


def full_tree(alphabet: Alphabet | int, L: int, uniform: bool = False) -> ContextTree:
    """The order-``L`` full tree with all ``|E|**L`` contexts."""
    if isinstance(alphabet, int):
        alphabet = Alphabet(alphabet)
    if L < 1:
        raise ValueError("L must be a positive integer")
    ctxs = list(itertools.product(range(alphabet.size), repeat=L))
    trans = None
    if uniform:
        trans = [np.full(alphabet.size, 1.0 / alphabet.size) for _ in ctxs]
    return ContextTree(alphabet, ctxs, trans)


def truncate(tree: ContextTree, k: int) -> ContextTree:
    """Keep contexts of length <= k; longer ones collapse onto their length-k suffix.

    Collapsed contexts lose their transition law (it has to be re-estimated).
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    kept: dict[Context, NDArray | None] = {}
    for c in tree.contexts:
        if len(c) <= k:
            kept[c] = tree.transition(c)
        else:
            kept[c[len(c) - k:]] = None
    return ContextTree(tree.alphabet, list(kept), kept)


def tree_equal(a: ContextTree, b: ContextTree) -> bool:
    """Same context set (transition laws are not compared)."""
    if a.alphabet != b.alphabet:
        raise ValueError("trees are over different alphabets")
    return a.context_set == b.context_set


def block_transitions(tree: ContextTree, k: int) -> NDArray[np.float64]:
    """Next-symbol law for every length-``k`` history, shape ``(N**k, N)``.

    Row ``code`` is the history whose radix-N reading is ``code`` (most recent
    symbol least significant).
    """
    N = tree.alphabet.size
    if k < tree.depth:
        raise ValueError(f"k={k} is smaller than the tree depth {tree.depth}")
    out = np.empty((N ** k, N))
    for code, hist in enumerate(itertools.product(range(N), repeat=k)):
        out[code] = tree.next_law(hist)
    return out


@dataclass(frozen=True)
class InitialLaw:
    """Law of the first ``k`` hidden symbols, keyed by length-``k`` blocks."""

    probs: Mapping[Context, float]

    def __post_init__(self) -> None:
        if not self.probs:
            raise ValueError("empty initial law")
        lengths = {len(c) for c in self.probs}
        if len(lengths) != 1:
            raise ValueError("initial law must be over blocks of one common length")
        vals = np.array(list(self.probs.values()), dtype=float)
        if np.any(vals < 0) or abs(vals.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError("initial law must be non-negative and sum to 1")

    @property
    def k(self) -> int:
        return len(next(iter(self.probs)))

    def prob(self, block: Sequence[int]) -> float:
        return float(self.probs.get(tuple(block), 0.0))

    def vector(self, alphabet_size: int) -> NDArray[np.float64]:
        v = np.zeros(alphabet_size ** self.k)
        for block, p in self.probs.items():
            code = 0
            for s in block:
                code = code * alphabet_size + s
            v[code] = p
        return v

    @classmethod
    def from_vector(cls, vec: Sequence[float], alphabet_size: int, k: int) -> "InitialLaw":
        blocks = itertools.product(range(alphabet_size), repeat=k)
        return cls({b: float(p) for b, p in zip(blocks, vec)})

    @classmethod
    def uniform(cls, alphabet_size: int, k: int) -> "InitialLaw":
        n = alphabet_size ** k
        return cls.from_vector(np.full(n, 1.0 / n), alphabet_size, k)
