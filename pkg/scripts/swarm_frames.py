"""Run a swarm recipe and write the frames CSV, then report speeds per recipe line."""

import argparse
from collections import defaultdict
from pathlib import Path

from metachem.engine import RunConfig
from metachem.swarm.chem import FrameRecorder, SwarmConfig, bundled_recipe, run_swarm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--recipe", help="recipe file (default: the bundled pulsing eye)")
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--every", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="frames.csv")
    args = ap.parse_args()

    recipe = Path(args.recipe).read_text() if args.recipe else bundled_recipe()
    cfg = SwarmConfig(recipe=recipe, steps=args.steps)
    rec = FrameRecorder(args.every)
    run_swarm(cfg, RunConfig(seed=args.seed, keep_log=False), rec)
    Path(args.out).write_text(rec.csv())

    last = rec.frames[max(rec.frames)]
    speeds = defaultdict(list)
    for b in last:
        speeds[(b.params.Vn, b.params.Vm)].append(b.speed)
    print(f"wrote {args.out} ({len(rec.frames)} frames)")
    print("   Vn     Vm   boids  mean speed")
    for (vn, vm), ss in sorted(speeds.items()):
        print(f"{vn:6.2f} {vm:6.2f} {len(ss):6d}  {sum(ss) / len(ss):.3f}")


if __name__ == "__main__":
    main()
