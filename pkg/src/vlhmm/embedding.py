"""Recode a depth-k hidden VLMC plus noise as an HMM over length-k blocks.

Two observation modes are supported:

``SYMBOL``  each block state emits only its newest symbol (the first block
            emits all k of its symbols).  Consecutive emissions are then
            conditionally independent given the hidden blocks and the forward
            likelihood is the exact likelihood of ``z``.
``BLOCK``   each block state emits the whole overlapping observed block
            ``z_r .. z_{r+k-1}``.  Overlapping observations make this a
            pseudo-likelihood; kept for replication of block-on-block fits.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .contamination import NoiseSpec, emission_matrix
from .context_tree import ContextTree, InitialLaw, block_transitions, validate
from .sequences import Context, SymbolSequence

ROW_TOL = 1e-10


class Mode(str, enum.Enum):
    BLOCK = "block"
    SYMBOL = "symbol"


def encode_block(block: Sequence[int], N: int) -> int:
    code = 0
    for s in block:
        code = code * N + int(s)
    return code


def decode_block(code: int, k: int, N: int) -> Context:
    out = []
    for _ in range(k):
        code, s = divmod(int(code), N)
        out.append(s)
    return tuple(reversed(out))


def successor(w: int, a: int, N: int, k: int) -> int:
    return (w * N) % (N ** k) + a


@dataclass(frozen=True)
class Observations:
    """Observed string recoded for the block HMM.

    ``values[r]`` is the newest symbol ``z_{r+k-1}`` (SYMBOL) or the block code
    of ``z_r .. z_{r+k-1}`` (BLOCK), for ``r = 0 .. T-k``.  ``head`` keeps the
    first k observed symbols for the initial emission.
    """

    values: NDArray[np.int64]
    mode: Mode
    k: int
    alphabet_size: int
    head: tuple[int, ...]

    def __len__(self) -> int:
        return int(self.values.size)


def embed_observations(z: SymbolSequence, k: int, mode: Mode | str = Mode.SYMBOL) -> Observations:
    mode = Mode(mode)
    T = len(z)
    if k < 1:
        raise ValueError("k must be positive")
    if T < k:
        raise ValueError(f"sample of length {T} is shorter than the block length {k}")
    N = z.alphabet.size
    x = z.as_int64()
    if mode is Mode.SYMBOL:
        values = x[k - 1:].copy()
    else:
        values = np.zeros(T - k + 1, dtype=np.int64)
        for j in range(k):
            values = values * N + x[j:T - k + 1 + j]
    return Observations(values, mode, k, N, tuple(int(s) for s in x[:k]))


def embed_tree(tree: ContextTree, k: int) -> NDArray[np.float64]:
    """Block transition table in successor form: ``trans[w, a] = p(a | context of w)``.

    The dense matrix ``A*`` has ``A*[w, v] = trans[w, v % N]`` when ``v`` drops
    the oldest symbol of ``w`` and appends ``v % N``, and 0 otherwise.
    """
    diag = validate(tree)
    if not diag.complete:
        raise ValueError("cannot embed an incomplete tree")
    return block_transitions(tree, k)


def embed_emissions(noise: NoiseSpec, k: int, mode: Mode | str = Mode.SYMBOL) -> NDArray[np.float64]:
    """Emission block: ``(N**k, N)`` for SYMBOL, ``(N**k, N**k)`` for BLOCK."""
    mode = Mode(mode)
    B = emission_matrix(noise)
    N = B.shape[0]
    if mode is Mode.SYMBOL:
        return np.tile(B, (N ** (k - 1), 1))
    return reduce(np.kron, [B] * k)


@dataclass(frozen=True)
class HmmParams:
    """Block-HMM parameters ``(A*, B*, pi*)``.

    ``trans`` is ``A*`` in successor form ``(S, N)``; ``emis`` is ``B*``;
    ``head_emission`` is the per-symbol emission matrix used for the k-1 older
    symbols of the first block in SYMBOL mode.  ``head="after_k"`` drops all
    emissions of the first block instead.
    """

    k: int
    alphabet_size: int
    mode: Mode
    trans: NDArray[np.float64]
    emis: NDArray[np.float64]
    pi: NDArray[np.float64]
    head_emission: NDArray[np.float64]
    head: str = "all"

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        N, k = self.alphabet_size, self.k
        S = N ** k
        ncol = N if self.mode is Mode.SYMBOL else S
        checks = [
            ("trans", self.trans, (S, N)),
            ("emis", self.emis, (S, ncol)),
            ("pi", self.pi, (S,)),
            ("head_emission", self.head_emission, (N, N)),
        ]
        for name, arr, shape in checks:
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        if self.head not in ("all", "after_k"):
            raise ValueError("head must be 'all' or 'after_k'")

    @property
    def n_states(self) -> int:
        return self.alphabet_size ** self.k

    def dense_transitions(self) -> NDArray[np.float64]:
        from .vlmc import successor_to_dense

        return successor_to_dense(self.trans, self.alphabet_size)

    def check(self, tol: float = ROW_TOL) -> list[str]:
        problems = []
        for name, arr in (("A*", self.trans), ("B*", self.emis), ("head emission", self.head_emission)):
            if np.any(arr < 0):
                problems.append(f"{name} has negative entries")
            bad = np.flatnonzero(np.abs(arr.sum(axis=1) - 1.0) > tol)
            if bad.size:
                problems.append(f"{name} rows {bad.tolist()[:5]} do not sum to 1")
        if np.any(self.pi < 0) or abs(self.pi.sum() - 1.0) > tol:
            problems.append("pi* is not a probability vector")
        return problems

    def emission_table(self, obs: Observations) -> NDArray[np.float64]:
        """Per-step emission likelihoods ``e[r, w]`` including the first-block head."""
        if obs.mode is not self.mode or obs.k != self.k:
            raise ValueError("observations were embedded with a different mode or block length")
        e = np.ascontiguousarray(self.emis[:, obs.values].T)
        if self.head == "after_k":
            e[0] = 1.0
        elif self.mode is Mode.SYMBOL and self.k > 1:
            N = self.alphabet_size
            older = np.ones(self.n_states)
            blocks = np.arange(self.n_states)
            for i, zi in enumerate(obs.head[:-1]):
                sym = (blocks // N ** (self.k - 1 - i)) % N
                older *= self.head_emission[sym, zi]
            e[0] = e[0] * older
        return e

    @classmethod
    def from_model(
        cls,
        tree: ContextTree,
        noise: NoiseSpec,
        k: int,
        mode: Mode | str = Mode.SYMBOL,
        initial: InitialLaw | NDArray | None = None,
        head: str = "all",
    ) -> "HmmParams":
        N = tree.alphabet.size
        if isinstance(initial, InitialLaw):
            if initial.k != k:
                raise ValueError("initial law block length differs from k")
            pi = initial.vector(N)
        elif initial is None:
            pi = np.full(N ** k, 1.0 / N ** k)
        else:
            pi = np.asarray(initial, dtype=float)
        return cls(
            k=k,
            alphabet_size=N,
            mode=Mode(mode),
            trans=embed_tree(tree, k),
            emis=embed_emissions(noise, k, mode),
            pi=pi,
            head_emission=emission_matrix(noise),
            head=head,
        )

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "alphabet": self.alphabet_size,
            "mode": self.mode.value,
            "head": self.head,
            # successor form: row w lists p(w -> (w*N) % S + a) for a = 0..N-1
            "transitions": self.trans.tolist(),
            "emissions": self.emis.tolist(),
            "initial": self.pi.tolist(),
            "head_emission": self.head_emission.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "HmmParams":
        return cls(
            k=int(data["k"]),
            alphabet_size=int(data["alphabet"]),
            mode=Mode(data["mode"]),
            trans=np.asarray(data["transitions"], dtype=float),
            emis=np.asarray(data["emissions"], dtype=float),
            pi=np.asarray(data["initial"], dtype=float),
            head_emission=np.asarray(data["head_emission"], dtype=float),
            head=data.get("head", "all"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "HmmParams":
        return cls.from_json(json.loads(Path(path).read_text()))

    def replace(self, **changes) -> "HmmParams":
        return replace(self, **changes)
