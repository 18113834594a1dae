"""Command line entry point: ``vlhmm <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .baum_welch import FitConfig, fit
from .bic_ctm import bootstrap_sample, ctm_prune, default_depth
from .contamination import NoiseSpec, Regime, contaminate
from .context_tree import ContextTree
from .embedding import HmmParams, Mode
from .pipeline import EstimateConfig, ScenarioSpec, SCENARIO_TREES, emit_report, run_scenario, scenario, two_step_estimate
from .sequences import read_sequence, write_sequence
from .vlmc import DEFAULT_BURN_IN, VlmcModel, sample_vlmc

log = logging.getLogger("vlhmm")

EXIT_PARTIAL = 2


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="base random seed")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes for experiments")
    p.add_argument("--out-dir", type=Path, default=d(Path(".")), help="directory for outputs")
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="report format")
    p.add_argument("-v", "--verbose", action="count", default=d(0))


def _fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-k", type=int, default=3, help="block length of the embedding")
    p.add_argument("--regime", choices=[r.value for r in Regime], default="sum")
    p.add_argument("--grid", type=_floats, default=None, help="comma-separated noise grid")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="symbol")
    p.add_argument("--emission-update", choices=("fixed", "free"), default="fixed")
    p.add_argument("--head", choices=("all", "after_k"), default="all")


def _fit_config(args) -> FitConfig:
    return FitConfig(
        k=args.k,
        regime=args.regime,
        noise_grid=args.grid,
        max_iter=args.max_iter,
        rel_tol=args.rel_tol,
        mode=args.mode,
        emission_update=args.emission_update,
        head=args.head,
    )


def _load_tree(spec: str) -> ContextTree:
    if spec in SCENARIO_TREES:
        return scenario(spec).tree
    return ContextTree.load(spec)


def _out(args, name: str) -> Path:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    return args.out_dir / name


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2))
    log.info("wrote %s", path)


def cmd_simulate(args) -> int:
    tree = _load_tree(args.tree)
    x = sample_vlmc(VlmcModel(tree, args.burn_in), args.T, args.seed)
    path = args.output or _out(args, "x.txt")
    write_sequence(path, x)
    log.info("wrote %d symbols to %s", len(x), path)
    return 0


def cmd_contaminate(args) -> int:
    x = read_sequence(args.input)
    if args.weights is not None:
        noise = NoiseSpec(args.regime, args.weights)
    else:
        noise = NoiseSpec.scalar(args.regime, args.eps, x.alphabet)
    z = contaminate(x, noise, args.seed)
    write_sequence(args.output or _out(args, "z.txt"), z)
    return 0


def cmd_fit(args) -> int:
    z = read_sequence(args.input)
    res = fit(z, _fit_config(args))
    res.params.save(_out(args, "params.json"))
    report = res.to_json()
    report.pop("params")
    _write_json(_out(args, "fit.json"), report)
    print(f"eps_hat={res.eps_hat:g} loglik={res.loglik:.6f} iterations={len(res.trace)}")
    return 0


def cmd_prune(args) -> int:
    if args.params is not None:
        if args.m is None:
            raise SystemExit("--m is required when bootstrapping from --params")
        params = HmmParams.load(args.params)
        sample = bootstrap_sample(params.trans, params.pi, args.m, args.seed)
        D = args.D or min(default_depth(args.m, params.alphabet_size), params.k)
    else:
        sample = read_sequence(args.sequence)
        D = args.D or default_depth(len(sample), sample.alphabet)
    res = ctm_prune(sample, D)
    res.tree.save(_out(args, "tree.json"))
    _write_json(_out(args, "nodes.json"), res.to_json())
    print(f"contexts={sorted(''.join(map(str, c)) for c in res.tree.contexts)} bic={res.bic_score:.6f}")
    return 0


def cmd_estimate(args) -> int:
    z = read_sequence(args.input)
    cfg = EstimateConfig(_fit_config(args), args.m_factor, args.D)
    res = two_step_estimate(z, cfg, args.seed)
    res.tree.save(_out(args, "tree.json"))
    _write_json(_out(args, "estimate.json"), res.diagnostics())
    print(f"eps_hat={res.eps_hat:g} contexts={len(res.tree)}")
    return 0


def cmd_experiment(args) -> int:
    overrides = {"seed": args.seed}
    for key in ("T", "replications", "k", "sweep", "noise_grid"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if Path(args.scenario).is_file():
        data = json.loads(Path(args.scenario).read_text())
        data.update(overrides)
        spec = ScenarioSpec.from_json(data)
    else:
        spec = scenario(args.scenario, regime=args.regime, full=args.full, **overrides)
    log.info("running %s: %d noise levels x %d replications", spec.name, len(spec.sweep), spec.replications)
    report = run_scenario(spec, threads=args.threads)
    for path in emit_report(report, args.out_dir, args.format):
        log.info("wrote %s", path)
    _write_json(_out(args, "scenario.json"), spec.to_json())
    if report.n_failed:
        log.warning("%d replication(s) failed; output is partial", report.n_failed)
        return EXIT_PARTIAL
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlhmm", description="Estimate hidden VLMCs observed through noise.")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="sample a VLMC")
    p.add_argument("--tree", default="scenario_1", help="tree JSON file or preset name")
    p.add_argument("-T", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("contaminate", parents=[common], help="add sum or product noise")
    p.add_argument("input", type=Path)
    p.add_argument("--regime", choices=[r.value for r in Regime], default="sum")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--weights", type=_floats, default=None, help="full noise law, overrides --eps")
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_contaminate)

    p = sub.add_parser("fit", parents=[common], help="multi-start Baum-Welch on a noisy sequence")
    p.add_argument("input", type=Path)
    _fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("prune", parents=[common], help="BIC context-tree pruning")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--sequence", type=Path, help="prune a symbol sequence directly")
    src.add_argument("--params", type=Path, help="bootstrap from HmmParams JSON first")
    p.add_argument("--m", type=int, default=None, help="bootstrap length")
    p.add_argument("-D", type=int, default=None, help="maximal context depth")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("estimate", parents=[common], help="two-step estimate of the hidden tree")
    p.add_argument("input", type=Path)
    _fit_flags(p)
    p.add_argument("--m-factor", type=float, default=1.0, help="bootstrap length as a multiple of T")
    p.add_argument("-D", type=int, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", parents=[common], help="Monte Carlo scenario runner")
    p.add_argument("--scenario", default="scenario_1", help="preset name or scenario JSON file")
    p.add_argument("--regime", choices=[r.value for r in Regime], default="sum")
    p.add_argument("--full", action="store_true", help="99-point sweep with 100 replications")
    p.add_argument("-T", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("-k", type=int, default=None)
    p.add_argument("--sweep", type=_floats, default=None)
    p.add_argument("--grid", dest="noise_grid", type=_floats, default=None, help="comma-separated noise grid")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
