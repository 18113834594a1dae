"""Tree-recovery rate of direct BIC pruning on noise-free samples as m grows."""

import argparse

import numpy as np

from vlhmm.bic_ctm import ctm_prune, default_depth
from vlhmm.pipeline import scenario
from vlhmm.vlmc import VlmcModel, sample_vlmc


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 2_000, 5_000, 30_000, 100_000])
    ap.add_argument("--replications", type=int, default=50)
    ap.add_argument("--scenario", default="scenario_1")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tree = scenario(args.scenario).tree
    print("m,D,recovery_rate")
    for m in args.sizes:
        D = default_depth(m, 2)
        hits = sum(
            ctm_prune(sample_vlmc(VlmcModel(tree), m, np.random.SeedSequence([args.seed, m, r])), D).tree.context_set
            == tree.context_set
            for r in range(args.replications)
        )
        print(f"{m},{D},{hits / args.replications:.3f}")


if __name__ == "__main__":
    main()
