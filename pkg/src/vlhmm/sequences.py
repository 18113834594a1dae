"""Alphabets, symbol sequences and transition counting.

Contexts are plain tuples of symbols, oldest first, so ``(0, 1, 0)`` is the
string "010" whose most recent symbol is the trailing 0.  For table lookups a
context of length ``l`` is encoded as the radix-N integer that reads the tuple
as a number, i.e. the most recent symbol is the least significant digit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

Context = tuple[int, ...]


@dataclass(frozen=True)
class Alphabet:
    """The finite alphabet ``{0, ..., size - 1}``."""

    size: int

    def __post_init__(self) -> None:
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"alphabet size must be an integer >= 2, got {self.size!r}")

    @property
    def symbols(self) -> range:
        return range(self.size)

    def __len__(self) -> int:
        return self.size


def _dtype_for(size: int) -> np.dtype:
    return np.dtype(np.uint8) if size <= 256 else np.dtype(np.uint16)


class SymbolSequence:
    """An immutable string over an :class:`Alphabet`, stored as small unsigned ints."""

    __slots__ = ("_symbols", "alphabet")

    def __init__(self, symbols: Iterable[int] | NDArray, alphabet: Alphabet | int):
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        arr = np.asarray(list(symbols) if not isinstance(symbols, np.ndarray) else symbols)
        if arr.ndim != 1:
            raise ValueError("a symbol sequence must be one-dimensional")
        if arr.size:
            if not np.issubdtype(arr.dtype, np.integer):
                if not np.all(np.equal(np.mod(arr, 1), 0)):
                    raise ValueError("symbols must be integers")
            if arr.min() < 0 or arr.max() >= alphabet.size:
                raise ValueError(f"symbols must lie in 0..{alphabet.size - 1}")
        arr = arr.astype(_dtype_for(alphabet.size))
        arr.setflags(write=False)
        self._symbols = arr
        self.alphabet = alphabet

    @property
    def symbols(self) -> NDArray:
        return self._symbols

    def as_int64(self) -> NDArray[np.int64]:
        return self._symbols.astype(np.int64)

    def __len__(self) -> int:
        return int(self._symbols.size)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return SymbolSequence(self._symbols[item], self.alphabet)
        return int(self._symbols[item])

    def __iter__(self):
        return (int(s) for s in self._symbols)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymbolSequence):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self._symbols, other._symbols)

    def __repr__(self) -> str:
        head = " ".join(str(int(s)) for s in self._symbols[:20])
        more = " ..." if len(self) > 20 else ""
        return f"SymbolSequence([{head}{more}], alphabet={self.alphabet.size}, length={len(self)})"


def parse_context(text: str) -> Context:
    """``"010"`` -> ``(0, 1, 0)``.  Only single-digit symbols are supported."""
    return tuple(int(c) for c in text.strip())


def format_context(context: Sequence[int]) -> str:
    if not context:
        return "()"
    if max(context) < 10:
        return "".join(str(s) for s in context)
    return ".".join(str(s) for s in context)


def encode_context(context: Sequence[int], size: int) -> tuple[int, int]:
    """Return the ``(length, radix code)`` key of a context."""
    code = 0
    for s in context:
        code = code * size + int(s)
    return len(context), code


def decode_context(length: int, code: int, size: int) -> Context:
    out = []
    for _ in range(length):
        code, s = divmod(code, size)
        out.append(s)
    return tuple(reversed(out))


def is_suffix(candidate: Sequence[int], target: Sequence[int], proper: bool = False) -> bool:
    """True iff ``target = eta + candidate`` for some (possibly empty) ``eta``.

    With ``proper=True`` the prefix ``eta`` must be non-empty.
    """
    lc, lt = len(candidate), len(target)
    if lc > lt or (proper and lc == lt):
        return False
    return lc == 0 or tuple(target[lt - lc:]) == tuple(candidate)


def count_pattern(
    sample: SymbolSequence,
    pattern: Sequence[int],
    next: int | None = None,
    offset: int = 0,
) -> int:
    """Count occurrences of ``pattern`` (optionally followed by ``next``).

    Uses 1-based positions: counts ``i`` with ``offset < i <= m`` such that
    ``x[i-l .. i-1] == pattern`` and ``x[i] == next``.  Without ``next`` the
    count is over positions ``i`` in the window, so the pattern is always
    followed by a successor and ``sum_a count(pattern, a) == count(pattern)``.
    """
    m = len(sample)
    lw = len(pattern)
    if offset < 0:
        raise ValueError("offset must be non-negative")
    if offset + lw > m:
        raise ValueError(
            f"pattern of length {lw} does not fit in the window ({offset}, {m}]"
        )
    x = sample.symbols
    # 0-based index j = i - 1 of the predicted symbol
    start = max(offset, lw)
    if start >= m:
        return 0
    mask = np.ones(m - start, dtype=bool)
    for s, sym in enumerate(pattern):
        # pattern[s] sits at x[j - lw + s]
        mask &= x[start - lw + s: m - lw + s] == sym
    if next is not None:
        if not 0 <= next < sample.alphabet.size:
            raise ValueError("next symbol outside the alphabet")
        mask &= x[start:m] == next
    return int(mask.sum())


def read_sequence(path: str | Path, alphabet: int | None = None) -> SymbolSequence:
    """Read the whitespace-separated plain-text format (optional ``alphabet=N`` header)."""
    text = Path(path).read_text()
    tokens = text.split()
    size = alphabet
    if tokens and tokens[0].startswith("alphabet="):
        header = int(tokens[0].split("=", 1)[1])
        if size is not None and size != header:
            raise ValueError(f"alphabet={header} in file but {size} requested")
        size = header
        tokens = tokens[1:]
    values = np.array([int(t) for t in tokens], dtype=np.int64)
    if size is None:
        size = max(2, int(values.max()) + 1 if values.size else 2)
    return SymbolSequence(values, Alphabet(size))


def write_sequence(path: str | Path, seq: SymbolSequence, per_line: int = 100) -> None:
    lines = [f"alphabet={seq.alphabet.size}"]
    s = seq.symbols
    for i in range(0, len(s), per_line):
        lines.append(" ".join(str(int(v)) for v in s[i:i + per_line]))
    Path(path).write_text("\n".join(lines) + "\n")
