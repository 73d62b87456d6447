"""Last announcer wins the classical game; the same cheat fails once coins are entangled.

    python3 scripts/ultimatum_demo.py --trials 10000 --seed 0
"""

import argparse

from qcoin.harness import ExperimentConfig, Schedule, run_batch, run_classical_baseline
from qcoin.protocol import classical_liar


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    honest = run_classical_baseline(args.trials, cheater=None, seed=args.seed)
    cheat = run_classical_baseline(args.trials, cheater=1, schedule=Schedule((0, 1)), seed=args.seed)
    print(f"classical, honest:        A wins {honest.win_rate(0):.4f}, B wins {honest.win_rate(1):.4f}")
    print(f"classical, B lies last:   B wins {cheat.cheater_win_rate:.4f} of {cheat.decided} decided games")

    liar = {1: classical_liar("best-response")}
    for design in ("two-party", "two-party-witness"):
        stats = run_batch(
            ExperimentConfig(design=design, trials=args.trials, seed=args.seed, behaviors=liar,
                             schedule=Schedule((0, 1)))
        )
        verdicts = ", ".join(f"{k}={v}" for k, v in sorted(stats.verdicts.items()))
        print(f"{design:<17} B lies last:   {verdicts}; B wins {stats.winner_frequency(1):.4f} of decided")


if __name__ == "__main__":
    main()
