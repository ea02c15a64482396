"""Repeat an example over many seeds and summarise convergence and isolation.

    python3 scripts/seed_sweep.py --example 2 --seeds 50
"""
import argparse
import dataclasses

import numpy as np

from uiobank.harness import bank_for, run
from uiobank.model import AttackScenario, bundled_config, load_config


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--example", type=int, choices=(1, 2, 3, 4), default=2)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--first-seed", type=int, default=0)
    args = ap.parse_args(argv)

    model, scenario, settings = load_config(bundled_config(f"example{args.example}"))
    bank = bank_for(model, settings)
    steps, correct, tails = [], 0, []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        sc = AttackScenario(scenario.n_u, scenario.n_y, scenario.W_u, scenario.W_y, scenario.generators, seed)
        _, metrics, _ = run(model, sc, dataclasses.replace(settings, seed=seed), bank=bank)
        steps.append(np.inf if metrics.convergence_step is None else metrics.convergence_step)
        tails.append(metrics.max_recon_error_tail)
        correct += bool(metrics.isolation_correct)
    steps = np.array(steps, dtype=float)
    print(f"example {args.example}, {args.seeds} seeds, bank of {len(bank.specs)} observers")
    print(f"convergence step: median {np.median(steps):g}, max {steps.max():g}, never {int(np.isinf(steps).sum())}")
    print(f"tail reconstruction error: max {max(tails):.2e}")
    print(f"isolation correct: {correct}/{args.seeds}")


if __name__ == "__main__":
    main()
