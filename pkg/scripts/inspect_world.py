#!/usr/bin/env python3
"""Print the synthetic world's skill landscape and observed per-expert scores.

Two tables: the configured per-category means (who is best at what), and
the critic scores each expert actually earned during a short training run
broken down by task category. The second table is the empirical mirror of
the first and shows why a single fixed expert cannot win everywhere.
"""

import argparse
import sys
from collections import defaultdict

import numpy as np

from qroute.config import RunConfig
from qroute.core import TaskCategory
from qroute.simworld import best_expert
from qroute.train import train


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=1000)
    args = parser.parse_args()

    cfg = RunConfig(seed=args.seed, total_steps=args.steps)
    registry = cfg.build_registry()

    specs = registry.list()
    print("configured skill means (rows: category, columns: expert index)")
    header = " " * 25 + " ".join(f"{s.index:>5}" for s in specs)
    print(header)
    for cat in TaskCategory:
        row = " ".join(f"{s.profile.mean_for(cat):>5.2f}" for s in specs)
        best = best_expert(registry, cat)
        print(f"{cat.value:<25}{row}   best={best}")

    print("\nobserved mean critic score by (category, expert) over one training run")
    result = train(cfg)
    sums = defaultdict(float)
    counts = defaultdict(int)
    for ep in result.episodes:
        for s in ep.steps:
            sums[(s.category, s.expert)] += s.raw
            counts[(s.category, s.expert)] += 1
    print(header)
    for cat in TaskCategory:
        cells = []
        for s in specs:
            k = (cat.value, s.index)
            cells.append(f"{sums[k] / counts[k]:>5.2f}" if counts[k] else "    -")
        print(f"{cat.value:<25}{' '.join(cells)}")

    per_expert = defaultdict(list)
    for ep in result.episodes:
        for s in ep.steps:
            per_expert[s.expert].append(s.raw)
    print("\naverage critic score per expert across all steps")
    for idx in sorted(per_expert):
        spec = registry.spec(idx)
        scores = per_expert[idx]
        print(f"  {idx:>2} {spec.name:<18} {spec.modality.value}  {np.mean(scores):5.2f}  (n={len(scores)})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
