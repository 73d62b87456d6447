"""Exact verdict distributions under every flip order and announcement schedule.

Quantum designs give the same distribution whatever the order; the
classical game with a best-response liar does not.

    python3 scripts/order_independence.py --players 3
"""

import argparse
import itertools

from qcoin.coins import uniform_coin
from qcoin.harness import Schedule, exact_distribution, schedule_sweep
from qcoin.protocol import classical_liar


def fmt(dist):
    return ", ".join(f"{k}:{v:.4f}" for k, v in sorted(dist.items()))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--players", type=int, default=3)
    args = ap.parse_args()
    n = args.players

    for design in ("central", "ring", "p2p", "hybrid"):
        seen = {fmt(exact_distribution(design, uniform_coin(n), order)) for order in itertools.permutations(range(n))}
        print(f"{design:<8} N={n}: {len(seen)} distinct distribution(s) over {len(list(itertools.permutations(range(n))))} flip orders")
        print(f"         {seen.pop()}")

    schedules = [Schedule((0, 1)), Schedule((1, 0))]
    liar = {1: classical_liar("best-response")}
    for design in ("classical", "two-party-witness"):
        for s, dist in zip(schedules, schedule_sweep(design, None, schedules, liar)):
            print(f"{design:<17} liar=B delays={s.delays}: {fmt(dist)}")


if __name__ == "__main__":
    main()
