"""metachem command line: validate, run, enumerate-atoms, export-dot."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import config as cfgmod
from . import nested, stringcat
from .containers import snapshot
from .engine import EngineError, RunConfig, TransitionEvent
from .graph import GraphParseError, hard, parse_graph, to_dot, validate
from .ja import chem as ja
from .ja.atoms import enumerate_atoms
from .swarm import chem as sw

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _graph(path: str):
    try:
        return parse_graph(_read(path))
    except GraphParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_validate(args) -> int:
    g = _graph(args.graph)
    vs = validate(g)
    for v in vs:
        print(v)
    n_hard = len(hard(vs))
    print(f"{args.graph}: {n_hard} hard, {len(vs) - n_hard} warn")
    return EXIT_FAIL if n_hard else EXIT_OK


def cmd_export_dot(args) -> int:
    text = to_dot(_graph(args.graph))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_enumerate_atoms(args) -> int:
    t = time.perf_counter()
    census = enumerate_atoms(args.tol)
    dt = time.perf_counter() - t
    print(f"upper bound: {census.upper_bound}")
    print(f"count: {census.total} (published {census.published_total}, delta {census.total_delta:+d})")
    print(f"eigen_classes: {census.classes} (published {census.published_classes}, delta {census.class_delta:+d})")
    print(f"raw eigenvalue classes: {census.raw_classes}")
    print(f"runtime: {dt:.2f}s")
    if args.csv_out:
        rows = ["class,members,mu1,mu2,mu3,lambda1,lambda2,lambda3"]
        for r in census.representatives:
            rows.append(",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in r))
        Path(args.csv_out).write_text("\n".join(rows) + "\n", encoding="utf-8")
    return EXIT_OK if census.class_delta == 0 else EXIT_FAIL


@dataclass
class _Sink:
    """Streams events to the log file and keeps the frame recorder fed."""

    fh: object = None
    frames: sw.FrameRecorder | None = None

    def __call__(self, ev: TransitionEvent, runner) -> None:
        if self.fh is not None:
            self.fh.write(ev.line() + "\n")
        if self.frames is not None:
            self.frames(ev, runner)


def _resolve_recipe(path: str) -> str:
    p = Path(path)
    if p.exists():
        return _read(path)
    try:
        return sw.bundled_recipe(p.name)
    except (FileNotFoundError, OSError):
        raise UsageError(f"no recipe file {path}") from None


def _build(args, conf: dict[str, dict[str, str]]):
    """(runner function, chemistry config, frames container or None)."""
    chem = args.chemistry
    if chem == "stringcat":
        c = cfgmod.apply(stringcat.StringCatConfig, conf.get("stringcat", {}), time_bound=args.steps)
        return stringcat.run_stringcat, c, None
    if chem == "ja":
        c = cfgmod.apply(ja.JAConfig, conf.get("ja", {}), time_bound=args.steps)
        return ja.run_ja, c, None
    if chem == "swarm":
        recipe = _resolve_recipe(args.recipe) if args.recipe else None
        c = cfgmod.apply(sw.SwarmConfig, conf.get("swarm", {}), steps=args.steps, recipe=recipe)
        return sw.run_swarm, c, "S:n"
    mapping = cfgmod.mapping_overrides(conf.get("mapping", {})) or None
    recipe = _resolve_recipe(args.recipe) if args.recipe else None
    c = cfgmod.apply(
        nested.NestedConfig, conf.get("nested", {}), variant=args.variant, steps=args.steps, recipe=recipe, mapping=mapping
    )
    frames = "T:Swarm" if c.variant in nested.USES_SWARM else None
    return nested.run_nested, c, frames


def cmd_run(args) -> int:
    conf = cfgmod.parse_config(_read(args.config)) if args.config else {}
    run_conf = conf.get("run", {})
    seed = args.seed if args.seed is not None else int(run_conf.get("seed", 0))
    max_t = args.max_transitions if args.max_transitions is not None else run_conf.get("max_transitions")
    max_t = None if max_t in (None, "none") else int(max_t)
    if args.chemistry in ("stringcat", "ja") and args.steps is None and max_t is None and "time_bound" not in conf.get(args.chemistry, {}):
        raise UsageError(f"{args.chemistry} runs are open-ended: give --steps or --max-transitions")
    fn, chem_cfg, frames_container = _build(args, conf)
    sink = _Sink()
    if args.frames_every is not None:
        if frames_container is None:
            raise UsageError(f"--frames-every needs a swarm; {args.chemistry} has none")
        sink.frames = sw.FrameRecorder(args.frames_every, container=frames_container)
    run_cfg = RunConfig(seed=seed, max_transitions=max_t, keep_log=False)
    t = time.perf_counter()
    fh = open(args.log_out, "w", encoding="utf-8") if args.log_out else None
    try:
        sink.fh = fh
        result = fn(chem_cfg, run_cfg, sink)
    finally:
        if fh is not None:
            fh.close()
    dt = time.perf_counter() - t
    if args.snapshot_out:
        Path(args.snapshot_out).write_text(snapshot(result.state) + "\n", encoding="utf-8")
    if sink.frames is not None:
        out = args.frames_out or "frames.csv"
        Path(out).write_text(sink.frames.csv(), encoding="utf-8")
    particles = result.state.total()
    print(
        f"{args.chemistry}: transitions={result.transitions} events={result.total_events} "
        f"particles={particles} halted={result.halted} runtime={dt:.2f}s"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metachem", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a graph file")
    v.add_argument("graph")
    v.set_defaults(fn=cmd_validate)

    d = sub.add_parser("export-dot", help="write a graph file as Graphviz DOT")
    d.add_argument("graph")
    d.add_argument("-o", "--out")
    d.set_defaults(fn=cmd_export_dot)

    e = sub.add_parser("enumerate-atoms", help="count JA atoms and eigenvalue classes")
    e.add_argument("--tol", type=float, default=1e-6)
    e.add_argument("--csv-out")
    e.set_defaults(fn=cmd_enumerate_atoms)

    r = sub.add_parser("run", help="run a chemistry")
    r.add_argument("chemistry", choices=("stringcat", "ja", "swarm", "nested"))
    r.add_argument("--seed", type=int)
    r.add_argument("--max-transitions", type=int)
    r.add_argument("--steps", type=int)
    r.add_argument("--variant", choices=nested.VARIANTS)
    r.add_argument("--recipe")
    r.add_argument("--frames-every", type=int)
    r.add_argument("--frames-out")
    r.add_argument("--log-out")
    r.add_argument("--snapshot-out")
    r.add_argument("--config")
    r.set_defaults(fn=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EngineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
