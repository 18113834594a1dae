"""Scaled forward-backward, EM updates, multi-start fitting and Viterbi decoding."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .contamination import NoiseSpec, Regime, emission_matrix
from .embedding import HmmParams, Mode, Observations, embed_emissions, embed_observations
from .sequences import SymbolSequence
from .vlmc import empirical_transitions

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-8


class ImpossibleObservationError(ValueError):
    """The observations have probability zero under the parameters."""

    def __init__(self, step: int):
        super().__init__(f"observation at block step {step} is impossible under the parameters")
        self.step = step


def default_noise_grid(regime: Regime | str = Regime.SUM, alphabet_size: int = 2) -> tuple[float, ...]:
    """Noise levels ``j/100`` in (0, 1).

    Under sums the noise level is only identifiable up to ``(N-1)/N`` (for
    binary data ``eps`` and ``1 - eps`` give the same law once the hidden
    symbols are relabelled), so the sum grid stops there.
    """
    regime = Regime(regime)
    if regime is Regime.SUM:
        top = math.floor(100 * (alphabet_size - 1) / alphabet_size + 1e-9)
    else:
        top = 99
    return tuple(j / 100 for j in range(1, top + 1))


@dataclass(frozen=True)
class FitConfig:
    k: int
    regime: Regime = Regime.SUM
    noise_grid: tuple[float, ...] | None = None
    max_iter: int = 500
    rel_tol: float = 1e-6
    mode: Mode = Mode.SYMBOL
    # "fixed": B* stays at the grid point's noise law, "free": B* is re-estimated
    emission_update: str = "fixed"
    head: str = "all"

    def __post_init__(self) -> None:
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.emission_update not in ("fixed", "free"):
            raise ValueError("emission_update must be 'fixed' or 'free'")
        if self.noise_grid is not None:
            grid = tuple(float(e) for e in self.noise_grid)
            if not grid:
                raise ValueError("empty noise grid")
            if any(not 0.0 < e < 1.0 for e in grid):
                raise ValueError("noise grid values must lie in the open interval (0, 1)")
            object.__setattr__(self, "noise_grid", grid)

    def grid(self, alphabet_size: int) -> tuple[float, ...]:
        return self.noise_grid if self.noise_grid is not None else default_noise_grid(self.regime, alphabet_size)


@dataclass
class PosteriorTables:
    """State posteriors ``gamma[r, w]`` and pair posteriors ``delta[r, w, a]``.

    ``delta[r, w, a]`` is the posterior of moving from block ``w`` at step r to
    its successor with newest symbol ``a``; the dense pair table is never built.
    """

    gamma: NDArray[np.float64]
    log_scale: NDArray[np.float64]
    stalled_states: tuple[int, ...]
    _alpha: NDArray = field(repr=False)
    _beta: NDArray = field(repr=False)
    _trans: NDArray = field(repr=False)
    _emit: NDArray = field(repr=False)
    _N: int = field(repr=False)

    @cached_property
    def delta(self) -> NDArray[np.float64]:
        return _kernels.pair_posteriors(
            self._alpha, self._beta, np.exp(self.log_scale), self._trans, self._emit, self._N
        )

    @property
    def loglik(self) -> float:
        return float(self.log_scale.sum())


@dataclass
class RestartRecord:
    eps: float
    loglik: float
    n_iter: int
    converged: bool
    error: str | None = None


@dataclass
class FitResult:
    params: HmmParams
    eps_hat: float
    loglik: float
    trace: list[float]
    restart_table: list[RestartRecord]
    state_occupancy: NDArray[np.float64]
    implied_eps: float
    converged: bool

    def traces_monotone(self, slack: float = MONOTONE_SLACK) -> bool:
        return bool(np.all(np.diff(self.trace) >= -slack))

    def to_json(self) -> dict:
        return {
            "eps_hat": self.eps_hat,
            "loglik": self.loglik,
            "implied_eps": self.implied_eps,
            "converged": self.converged,
            "trace": list(self.trace),
            "restart_table": [vars(r) for r in self.restart_table],
            "state_occupancy": self.state_occupancy.tolist(),
            "params": self.params.to_json(),
        }


def _check_obs(params: HmmParams, obs: Observations) -> None:
    if obs.alphabet_size != params.alphabet_size:
        raise ValueError("observations and parameters use different alphabets")
    if len(obs) < 1:
        raise ValueError("no observations")


def forward(params: HmmParams, obs: Observations) -> tuple[NDArray, NDArray, float]:
    """Normalised forward table, per-step normalisers and the log-likelihood."""
    _check_obs(params, obs)
    emit = params.emission_table(obs)
    alpha, scale, failed = _kernels.forward(params.pi, params.trans, emit, params.alphabet_size)
    if failed >= 0:
        raise ImpossibleObservationError(int(failed))
    return alpha, scale, float(np.log(scale).sum())


def backward(params: HmmParams, obs: Observations, scale: NDArray) -> NDArray:
    _check_obs(params, obs)
    emit = params.emission_table(obs)
    return _kernels.backward(params.trans, emit, np.asarray(scale, dtype=float), params.alphabet_size)


def loglikelihood(params: HmmParams, obs: Observations) -> float:
    return forward(params, obs)[2]


def _e_step(params: HmmParams, obs: Observations, emit: NDArray | None = None):
    if emit is None:
        emit = params.emission_table(obs)
    N = params.alphabet_size
    alpha, scale, failed = _kernels.forward(params.pi, params.trans, emit, N)
    if failed >= 0:
        raise ImpossibleObservationError(int(failed))
    beta = _kernels.backward(params.trans, emit, scale, N)
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    counts = _kernels.transition_counts(alpha, beta, scale, params.trans, emit, N)
    return alpha, beta, scale, emit, gamma, counts


def _emission_counts(gamma: NDArray, obs: Observations, ncol: int) -> NDArray:
    counts = np.zeros((gamma.shape[1], ncol))
    for v in np.unique(obs.values):
        counts[:, v] = gamma[obs.values == v].sum(axis=0)
    return counts


def _m_step(params: HmmParams, trans_counts, gamma0, emis_counts=None):
    """Re-estimate (A*, B*, pi*) from expected counts; empty rows keep their old values."""
    stalled = []
    occ = trans_counts.sum(axis=1)
    trans = params.trans.copy()
    ok = occ > 0
    trans[ok] = trans_counts[ok] / occ[ok, None]
    stalled.extend(np.flatnonzero(~ok).tolist())
    emis = params.emis
    if emis_counts is not None:
        tot = emis_counts.sum(axis=1)
        emis = params.emis.copy()
        good = tot > 0
        emis[good] = emis_counts[good] / tot[good, None]
        stalled.extend(np.flatnonzero(~good).tolist())
    pi = gamma0 / gamma0.sum()
    new = params.replace(trans=trans, emis=emis, pi=pi)
    return new, tuple(sorted(set(stalled)))


def em_step(params: HmmParams, obs: Observations, update_emissions: bool = True):
    """One Baum-Welch update.

    Returns ``(new_params, loglik_of_input_params, posteriors)``.  States that
    received no posterior mass keep their old rows and are listed in
    ``posteriors.stalled_states``.  Structural zeros of ``A*`` survive because
    the successor-form table has no slot for them.
    """
    _check_obs(params, obs)
    alpha, beta, scale, emit, gamma, counts = _e_step(params, obs)
    ecounts = _emission_counts(gamma, obs, params.emis.shape[1]) if update_emissions else None
    new, stalled = _m_step(params, counts, gamma[0], ecounts)
    post = PosteriorTables(gamma, np.log(scale), stalled, alpha, beta, params.trans, emit, params.alphabet_size)
    return new, float(np.log(scale).sum()), post


def run_em(
    params: HmmParams,
    obs: Observations,
    max_iter: int = 500,
    rel_tol: float = 1e-6,
    update_emissions: bool = True,
) -> tuple[HmmParams, list[float], bool, NDArray]:
    """Iterate EM until the relative log-likelihood change drops below ``rel_tol``.

    Returns the last parameters whose likelihood was evaluated, the trace of
    log-likelihoods, a convergence flag and the expected state occupancy
    ``sum_r gamma_r`` under the returned parameters.
    """
    _check_obs(params, obs)
    N = params.alphabet_size
    ncol = params.emis.shape[1]
    emit = params.emission_table(obs)
    trace: list[float] = []
    current = params
    occupancy = None
    converged = False
    for _ in range(max_iter):
        ll, counts, occ, gamma0, ecounts, failed = _kernels.em_pass(
            current.pi, current.trans, emit, obs.values, ncol, N, update_emissions
        )
        if failed >= 0:
            raise ImpossibleObservationError(int(failed))
        trace.append(ll)
        occupancy = occ
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= rel_tol * abs(trace[-1]):
            converged = True
            break
        if len(trace) == max_iter:
            break
        current, _ = _m_step(current, counts, gamma0, ecounts if update_emissions else None)
        if update_emissions:
            emit = current.emission_table(obs)
    return current, trace, converged, occupancy


def implied_noise(params: HmmParams, occupancy: NDArray, regime: Regime | str) -> float:
    """Noise level read back from ``B*``: occupancy-weighted mass off the neutral outcome.

    Under products, states whose newest symbol absorbs every noise value
    (0 for binary data) carry no information and are skipped.
    """
    regime = Regime(regime)
    N = params.alphabet_size
    S = params.n_states
    B = params.emis
    if params.mode is Mode.BLOCK:
        last_obs = np.arange(S) % N
        B = np.stack([B[:, last_obs == z].sum(axis=1) for z in range(N)], axis=1)
    newest = np.arange(S) % N
    keep = np.ones(S, dtype=bool)
    if regime is Regime.PRODUCT:
        ops = NoiseSpec.scalar(regime, 0.5, N).operation() if N == 2 else None
        if ops is not None:
            absorbing = [a for a in range(N) if len(set(ops[a])) == 1]
            keep &= ~np.isin(newest, absorbing)
    stay = B[np.arange(S), newest]
    w = occupancy * keep
    if w.sum() <= 0:
        return float("nan")
    return float(1.0 - (w * stay).sum() / w.sum())


def initial_params(z: SymbolSequence, cfg: FitConfig, eps: float) -> HmmParams:
    """Start point for one grid value: empirical order-k transitions of z, uniform pi, noise law at eps."""
    N = z.alphabet.size
    noise = NoiseSpec.scalar(cfg.regime, eps, N)
    return HmmParams(
        k=cfg.k,
        alphabet_size=N,
        mode=cfg.mode,
        trans=empirical_transitions(z, cfg.k),
        emis=embed_emissions(noise, cfg.k, cfg.mode),
        pi=np.full(N ** cfg.k, 1.0 / N ** cfg.k),
        head_emission=emission_matrix(noise),
        head=cfg.head,
    )


def fit(z: SymbolSequence, cfg: FitConfig) -> FitResult:
    """Run EM from every grid value and keep the run with the largest likelihood.

    The noise estimate is the grid value of the winning run; ties go to the
    smaller value.
    """
    if len(z) <= cfg.k:
        raise ValueError(f"sample of length {len(z)} is too short for k={cfg.k}")
    obs = embed_observations(z, cfg.k, cfg.mode)
    update = cfg.emission_update == "free"
    table: list[RestartRecord] = []
    best = None
    for eps in cfg.grid(z.alphabet.size):
        start = initial_params(z, cfg, eps)
        try:
            params, trace, conv, occ = run_em(start, obs, cfg.max_iter, cfg.rel_tol, update)
        except ImpossibleObservationError as exc:
            table.append(RestartRecord(eps, -math.inf, 0, False, str(exc)))
            continue
        table.append(RestartRecord(eps, trace[-1], len(trace), conv))
        if best is None or trace[-1] > best[1][-1]:
            best = (eps, trace, params, occ, conv)
    if best is None:
        raise RuntimeError("every grid restart failed: " + "; ".join(r.error or "" for r in table))
    eps, trace, params, occ, conv = best
    return FitResult(
        params=params,
        eps_hat=eps,
        loglik=trace[-1],
        trace=trace,
        restart_table=table,
        state_occupancy=occ,
        implied_eps=implied_noise(params, occ, cfg.regime),
        converged=conv,
    )


def viterbi(params: HmmParams, obs: Observations) -> tuple[NDArray[np.int64], float]:
    """Most probable hidden block path and its joint log-probability."""
    _check_obs(params, obs)
    emit = params.emission_table(obs)
    with np.errstate(divide="ignore"):
        path, score = _kernels.viterbi(
            np.log(params.pi), np.log(params.trans), np.log(emit), params.alphabet_size
        )
    if not np.isfinite(score):
        raise ImpossibleObservationError(-1)
    return path, float(score)


def blocks_to_symbols(path: NDArray, k: int, N: int) -> NDArray[np.int64]:
    """Hidden symbol string ``x_1^T`` from a block path (first block, then newest symbols)."""
    path = np.asarray(path, dtype=np.int64)
    first = [(int(path[0]) // N ** (k - 1 - i)) % N for i in range(k)]
    return np.concatenate([np.array(first, dtype=np.int64), path[1:] % N])
