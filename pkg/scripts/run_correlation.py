"""Subgraph ReliK vs a downstream metric, repeated over training seeds.

    python3 scripts/run_correlation.py [--task relation_mrr] [--seeds 5]

Each training seed yields one Pearson r and p-value over random-walk
subgraphs of the countries-scale synthetic graph.
"""

from __future__ import annotations

import argparse

from relik.embed import Scorer
from relik.evaluation import TASKS, subgraph_correlation
from relik.synthetic import countries_like
from relik.trainer import TrainConfig, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--task", choices=TASKS, default="relation_mrr")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--subgraphs", type=int, default=30)
    ap.add_argument("--size", type=int, default=20)
    ap.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    ap.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    ap.add_argument("--negatives", type=int, default=TrainConfig.negatives_per_positive)
    args = ap.parse_args()

    kg = countries_like(0)
    print("seed,pearson_r,p_value")
    for seed in range(args.seeds):
        cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                          negatives_per_positive=args.negatives, seed=seed)
        scorer = Scorer(train(kg, "TransE_L2", cfg), "TransE_L2")
        s = subgraph_correlation(kg, scorer, args.subgraphs, args.size, args.task).summary
        print(f"{seed},{s['pearson_r']:.4f},{s['p_value']:.4g}")


if __name__ == "__main__":
    main()
