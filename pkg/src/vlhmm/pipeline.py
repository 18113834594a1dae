"""Two-step estimator (noisy fit, then bootstrap BIC pruning) and the Monte Carlo harness."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .baum_welch import FitConfig, FitResult, fit
from .bic_ctm import BootstrapConfig, PrunedTreeResult, bootstrap_sample, ctm_prune, default_depth
from .contamination import NoiseSpec, Regime, contaminate
from .context_tree import ContextTree, tree_equal, validate
from .sequences import Context, SymbolSequence, encode_context, format_context, parse_context
from .vlmc import VlmcModel, sample_vlmc

log = logging.getLogger(__name__)

DESK_SWEEP = (0.01, 0.05, 0.10, 0.25, 0.45)
PRODUCT_CAP = 0.90


@dataclass(frozen=True)
class EstimateConfig:
    fit: FitConfig
    # bootstrap length m = round(m_factor * T)
    m_factor: float = 1.0
    depth: int | None = None

    def __post_init__(self) -> None:
        if not self.m_factor > 0:
            raise ValueError("m_factor must be positive")
        if self.depth is not None and self.depth < 1:
            raise ValueError("depth must be >= 1")

    def bootstrap(self, T: int, N: int, seed) -> BootstrapConfig:
        m = max(int(round(self.m_factor * T)), N * N)
        D = min(default_depth(m, N, self.depth), self.fit.k)
        return BootstrapConfig(m=m, D=D, seed=seed)


@dataclass
class TwoStepResult:
    tree: ContextTree
    eps_hat: float
    fit: FitResult
    pruned: PrunedTreeResult
    bootstrap: BootstrapConfig

    def diagnostics(self) -> dict:
        return {
            "eps_hat": self.eps_hat,
            "implied_eps": self.fit.implied_eps,
            "loglik": self.fit.loglik,
            "n_iter": len(self.fit.trace),
            "converged": self.fit.converged,
            "bic_score": self.pruned.bic_score,
            "m": self.bootstrap.m,
            "D": self.bootstrap.D,
        }


def read_off(trans: NDArray, weights: NDArray, contexts: Sequence[Context], N: int) -> dict[Context, NDArray]:
    """Per-context next-symbol laws from a block table.

    The rows of every block ending in ``w`` are averaged, weighted by
    ``weights`` (expected state occupancy).  Rows with no weight fall back to a
    plain average.
    """
    S = trans.shape[0]
    blocks = np.arange(S)
    out = {}
    for ctx in contexts:
        length, code = encode_context(ctx, N)
        if N ** length > S:
            raise ValueError(f"context {format_context(ctx)} is longer than the block length")
        rows = blocks % N ** length == code
        w = weights[rows]
        law = (w @ trans[rows]) / w.sum() if w.sum() > 0 else trans[rows].mean(axis=0)
        out[ctx] = law / law.sum()
    return out


def two_step_estimate(z: SymbolSequence, cfg: EstimateConfig, seed=None) -> TwoStepResult:
    """Fit the order-k block HMM to ``z``, bootstrap from its transitions and prune by BIC."""
    N = z.alphabet.size
    result = fit(z, cfg.fit)
    boot = cfg.bootstrap(len(z), N, seed)
    xb = bootstrap_sample(result.params.trans, result.params.pi, boot)
    pruned = ctm_prune(xb, boot.D)
    laws = read_off(result.params.trans, result.state_occupancy, pruned.tree.contexts, N)
    tree = pruned.tree.with_transitions(laws)
    return TwoStepResult(tree, result.eps_hat, result, pruned, boot)


# scenarios ----------------------------------------------------------------------


def _binary_tree(p0: dict[str, float]) -> ContextTree:
    ctxs = [parse_context(c) for c in p0]
    return ContextTree(2, ctxs, [[p, 1.0 - p] for p in p0.values()])


SCENARIO_TREES = {
    "scenario_1": {"010": 0.05, "110": 0.87, "00": 0.27, "1": 0.38},
    "scenario_2": {"0000": 0.10, "1000": 0.50, "100": 0.83, "10": 0.25, "1": 0.25},
}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    tree: ContextTree
    regime: Regime = Regime.SUM
    sweep: tuple[float, ...] = DESK_SWEEP
    T: int = 10_000
    replications: int = 20
    k: int = 3
    seed: int = 0
    m_factor: float = 1.0
    depth: int | None = None
    max_iter: int = 500
    rel_tol: float = 1e-6
    emission_update: str = "fixed"
    noise_grid: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "regime", Regime(self.regime))
        object.__setattr__(self, "sweep", tuple(float(e) for e in self.sweep))
        diag = validate(self.tree)
        if not diag.ok or diag.unset:
            raise ValueError(f"scenario tree is invalid: {diag.warnings or diag.unset}")
        if any(not 0.0 <= e < 1.0 for e in self.sweep):
            raise ValueError("sweep values must lie in [0, 1)")
        if self.replications < 1 or self.T <= self.k:
            raise ValueError("need at least one replication and T > k")
        if self.k < self.tree.depth:
            raise ValueError(f"k={self.k} is below the tree depth {self.tree.depth}")

    def estimate_config(self) -> EstimateConfig:
        fc = FitConfig(
            k=self.k,
            regime=self.regime,
            noise_grid=self.noise_grid,
            max_iter=self.max_iter,
            rel_tol=self.rel_tol,
            emission_update=self.emission_update,
        )
        return EstimateConfig(fc, self.m_factor, self.depth)

    def to_json(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__ if f != "tree"}
        d["regime"] = self.regime.value
        d["sweep"] = list(self.sweep)
        d["noise_grid"] = None if self.noise_grid is None else list(self.noise_grid)
        d["tree"] = self.tree.to_json()
        return d

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioSpec":
        data = dict(data)
        tree = data.pop("tree")
        if isinstance(tree, str):
            tree = SCENARIO_TREES[tree]
        if "contexts" in tree:
            tree = ContextTree.from_json(tree)
        else:
            tree = _binary_tree(tree)
        if data.get("noise_grid") is not None:
            data["noise_grid"] = tuple(data["noise_grid"])
        return cls(tree=tree, **data)


def scenario(name: str, regime: Regime | str = Regime.SUM, full: bool = False, **overrides) -> ScenarioSpec:
    """Preset scenario; ``full`` switches to the 99-point, 100-replication sweep."""
    if name not in SCENARIO_TREES:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIO_TREES)}")
    regime = Regime(regime)
    tree = _binary_tree(SCENARIO_TREES[name])
    sweep = tuple(j / 100 for j in range(1, 100)) if full else DESK_SWEEP
    if regime is Regime.PRODUCT:
        sweep = tuple(e for e in sweep if e <= PRODUCT_CAP)
    kw = dict(name=name, tree=tree, regime=regime, sweep=sweep, k=max(3, tree.depth))
    if full:
        kw["replications"] = 100
    kw.update(overrides)
    return ScenarioSpec(**kw)


def scenario_1(**kw) -> ScenarioSpec:
    return scenario("scenario_1", **kw)


def scenario_2(**kw) -> ScenarioSpec:
    return scenario("scenario_2", **kw)


# experiment runner ----------------------------------------------------------------


def replication_seeds(base: int, j: int, eps_index: int) -> tuple[np.random.SeedSequence, ...]:
    """Streams for (hidden sample, noise, bootstrap) of replication ``j`` at sweep point ``eps_index``.

    The hidden sample depends on (base, j) only, so every noise level sees the
    same hidden string.
    """
    x_seed = np.random.SeedSequence([base, j])
    noise_seed, boot_seed = np.random.SeedSequence([base, j, eps_index]).spawn(2)
    return x_seed, noise_seed, boot_seed


def run_replication(spec: ScenarioSpec, eps_index: int, j: int) -> dict:
    eps = spec.sweep[eps_index]
    x_seed, noise_seed, boot_seed = replication_seeds(spec.seed, j, eps_index)
    t0 = time.perf_counter()
    rec = {"eps": eps, "replication": j}
    try:
        x = sample_vlmc(VlmcModel(spec.tree), spec.T, x_seed)
        z = contaminate(x, NoiseSpec.scalar(spec.regime, eps, spec.tree.alphabet.size), noise_seed)
        res = two_step_estimate(z, spec.estimate_config(), boot_seed)
    except Exception as exc:  # recorded, not fatal
        log.warning("replication %d at eps=%g failed: %s", j, eps, exc)
        rec.update(error=f"{type(exc).__name__}: {exc}", runtime=time.perf_counter() - t0)
        return rec
    N = spec.tree.alphabet.size
    laws = read_off(res.fit.params.trans, res.fit.state_occupancy, spec.tree.contexts, N)
    rec.update(
        error=None,
        eps_hat=res.eps_hat,
        implied_eps=res.fit.implied_eps,
        loglik=res.fit.loglik,
        n_iter=len(res.fit.trace),
        converged=res.fit.converged,
        monotone=res.fit.traces_monotone(),
        tree=[format_context(c) for c in res.tree.contexts],
        recovered=tree_equal(res.tree, spec.tree),
        root_only=res.tree.context_set == frozenset({()}),
        p0={format_context(c): float(v[0]) for c, v in laws.items()},
        runtime=time.perf_counter() - t0,
    )
    return rec


def _run_one(args):
    return run_replication(*args)


def _summary(values: list[float]) -> dict:
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return {"mean": None, "sd": None, "lo": None, "hi": None}
    sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
    lo, hi = np.percentile(a, [2.5, 97.5])
    return {"mean": float(a.mean()), "sd": sd, "lo": float(lo), "hi": float(hi)}


@dataclass
class EstimationReport:
    """Aggregates per sweep point plus every replication record.

    ``sd`` is the sample standard deviation (0 for a single replication);
    ``lo``/``hi`` bound the empirical 95% range.
    """

    scenario: str
    contexts: list[str]
    rows: list[dict] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(r.get("error") is not None for r in self.records)

    def row(self, eps: float) -> dict:
        for r in self.rows:
            if math.isclose(r["eps"], eps):
                return r
        raise KeyError(eps)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "EstimationReport":
        return cls(**data)


def aggregate(name: str, contexts: list[str], sweep: Sequence[float], records: list[dict]) -> EstimationReport:
    rows = []
    for eps in sweep:
        recs = [r for r in records if r["eps"] == eps]
        ok = [r for r in recs if r.get("error") is None]
        rows.append({
            "eps": eps,
            "n": len(recs),
            "n_failed": len(recs) - len(ok),
            "eps_hat": _summary([r["eps_hat"] for r in ok]),
            "p0": {c: _summary([r["p0"][c] for r in ok]) for c in contexts},
            "recovery_rate": float(np.mean([r["recovered"] for r in ok])) if ok else None,
            "root_only_rate": float(np.mean([r["root_only"] for r in ok])) if ok else None,
        })
    times = [r["runtime"] for r in records]
    runtime = {"total": float(sum(times)), "mean": float(np.mean(times)) if times else 0.0,
               "max": float(max(times)) if times else 0.0}
    ordered = sorted(records, key=lambda r: (sweep.index(r["eps"]), r["replication"]))
    return EstimationReport(name, contexts, rows, ordered, runtime)


def run_scenario(spec: ScenarioSpec, threads: int = 1) -> EstimationReport:
    """Simulate, contaminate and estimate for every (noise level, replication)."""
    jobs = [(spec, i, j) for i in range(len(spec.sweep)) for j in range(spec.replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = [_run_one(job) for job in jobs]
    contexts = [format_context(c) for c in spec.tree.contexts]
    return aggregate(spec.name, contexts, list(spec.sweep), records)


# reporting ----------------------------------------------------------------------

ESTIMATE_HEADER = ["eps", "quantity", "context", "statistic", "value"]
SWEEP_HEADER = ["eps", "n", "n_failed", "eps_hat_mean", "eps_hat_sd", "eps_hat_lo", "eps_hat_hi",
                "recovery_rate", "root_only_rate"]


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def estimate_rows(report: EstimationReport) -> list[list[str]]:
    """One row per (noise level, context, statistic): mean and sd of eps_hat and of each P(0|w)."""
    out = []
    for row in report.rows:
        eps = repr(row["eps"])
        for stat in ("mean", "sd"):
            out.append([eps, "eps_hat", "", stat, _fmt(row["eps_hat"][stat])])
        for c in report.contexts:
            for stat in ("mean", "sd"):
                out.append([eps, "p0", c, stat, _fmt(row["p0"][c][stat])])
    return out


def emit_report(report: EstimationReport, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write ``estimates.csv`` and ``noise_sweep.csv`` (csv) or ``report.json`` (json)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "report.json"
        path.write_text(json.dumps(report.to_json(), indent=2))
        return [path]
    if fmt != "csv":
        raise ValueError("format must be 'csv' or 'json'")
    est = out / "estimates.csv"
    with est.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ESTIMATE_HEADER)
        w.writerows(estimate_rows(report))
    sweep = out / "noise_sweep.csv"
    with sweep.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for row in report.rows:
            e = row["eps_hat"]
            w.writerow([repr(row["eps"]), row["n"], row["n_failed"], _fmt(e["mean"]), _fmt(e["sd"]),
                        _fmt(e["lo"]), _fmt(e["hi"]), _fmt(row["recovery_rate"]), _fmt(row["root_only_rate"])])
    return [est, sweep]


def load_report(path: str | Path) -> EstimationReport:
    return EstimationReport.from_json(json.loads(Path(path).read_text()))

