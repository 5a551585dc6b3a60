"""Run StringCat and print how the string-length distribution drifts over time."""

import argparse
from collections import Counter

from metachem.engine import RunConfig
from metachem.stringcat import StringCatConfig, run_stringcat


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--copies", type=int, default=20)
    ap.add_argument("--tanks", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = StringCatConfig(copies=args.copies, tanks=args.tanks, time_bound=args.steps)
    res = run_stringcat(cfg, RunConfig(seed=args.seed, keep_log=False))
    lengths = Counter()
    for p, n in res.state.particles["T:tanks"].items():
        lengths[len(p[1])] += n
    print(f"{res.transitions} transitions, {res.total_events} events")
    print("length  count")
    for k in sorted(lengths):
        print(f"{k:6d}  {lengths[k]}")


if __name__ == "__main__":
    main()
