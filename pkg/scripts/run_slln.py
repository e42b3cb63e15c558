"""Block row averages against their limits over a grid of n.

Usage: python scripts/run_slln.py --delta 0.75 --B 2 4 --n-grid 50 100 200
"""
import argparse
import json
from pathlib import Path

from margin_phase.core import BlockSpec
from margin_phase.experiments import slln_experiment
from margin_phase.sampling import SamplerConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--delta", type=float, default=0.75)
    ap.add_argument("--B", type=float, nargs="+", default=[2.0, 4.0])
    ap.add_argument("--n-grid", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--out", type=Path, default=Path("results/slln.json"))
    args = ap.parse_args()

    specs = [BlockSpec(n, args.delta, B, args.C) for B in args.B for n in args.n_grid]
    cfg = SamplerConfig(method="mcmc", seed=args.seed, chains=args.threads)
    rows = slln_experiment(specs, args.trials, cfg, args.threads)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps([r.to_dict() for r in rows], indent=2))
    for r in rows:
        print(f"B={r.spec.B} n={r.spec.n:4d} first row {r.first_mean:.3f} (typical {r.first_typical:.3f}, "
              f"limit {r.first_ref})  light row {r.br_mean:.3f} (typical {r.br_typical:.3f}, limit {r.br_ref})")


if __name__ == "__main__":
    main()
