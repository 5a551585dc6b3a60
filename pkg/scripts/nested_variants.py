"""Run every nested variant with one seed and compare particle sizes in the tanks."""

import argparse
import time

from metachem.engine import RunConfig
from metachem.nested import USES_TANKS, VARIANTS, NestedConfig, run_nested, summarize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--box", type=float, default=60.0, help="smaller boxes mean more collisions")
    args = ap.parse_args()

    print("variant  particles  mean atoms  largest  seconds")
    for v in VARIANTS:
        cfg = NestedConfig(variant=v, steps=args.steps, box=args.box)
        t = time.perf_counter()
        res = run_nested(cfg, RunConfig(seed=args.seed, keep_log=False))
        dt = time.perf_counter() - t
        if v not in USES_TANKS:
            print(f"{v:>7}  {'-':>9}  {'-':>10}  {'-':>7}  {dt:7.2f}")
            continue
        tanks = res.state.particles["T:Tank"]
        s = summarize(tanks)
        largest = max(p[1].atoms if type(p) is tuple else p.atoms for p in tanks)
        print(f"{v:>7}  {s.n:9d}  {s.mean_atoms:10.2f}  {largest:7d}  {dt:7.2f}")


if __name__ == "__main__":
    main()
