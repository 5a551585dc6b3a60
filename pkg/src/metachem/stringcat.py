"""StringCatChem: letters concatenate into strings, doubled letters split them apart.

Particles are plain strings. When several tanks share a container each string
is tagged as ``(tank_index, string)``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources

from .behaviors import move_all_sampler, pick_one, predicate_decision, random_pick_sampler
from .containers import ParticleBag, SystemState, partition, retag, untag
from .engine import Behavior, Context, EngineError, Expansion, RunConfig, RunResult, run
from .graph import GraphDef, NodeKind, parse_graph


class NoDoubleError(EngineError):
    code = "NO_DOUBLE"


@dataclass
class StringCatConfig:
    alphabet: str = string.ascii_lowercase
    copies: int = 100
    tanks: int = 4
    reactions_per_step: int = 100
    max_transfers: int = 10
    time_bound: int | None = None  # None: open-ended graph

    def __post_init__(self):
        if not self.alphabet or not self.alphabet.isalpha():
            raise ValueError("alphabet must be non-empty letters")
        if self.copies < 0 or self.tanks < 1 or self.reactions_per_step < 1 or self.max_transfers < 0:
            raise ValueError("copies >= 0, tanks >= 1, reactions_per_step >= 1, max_transfers >= 0")


def double_indices(s: str) -> list[int]:
    return [i for i in range(len(s) - 1) if s[i] == s[i + 1]]


def split(s: str, rng) -> tuple[str, str]:
    """Cut between a uniformly chosen pair of identical adjacent letters."""
    idx = double_indices(s)
    if not idx:
        raise NoDoubleError(f"{s!r} has no doubled letter")
    i = idx[int(rng.integers(len(idx)))] if len(idx) > 1 else idx[0]
    return s[: i + 1], s[i + 1 :]


def concat(a: str, b: str) -> str:
    return a + b


# --------------------------------------------------------------------------
# graphs


def load_graph(name: str) -> GraphDef:
    return parse_graph(resources.files("metachem.graphs").joinpath(name).read_text(encoding="utf-8"))


def build_macro(open_ended: bool = True) -> GraphDef:
    return load_graph("stringcat_macro.mcg" if open_ended else "stringcat_macro_term.mcg")


def build_micro_process() -> GraphDef:
    return load_graph("stringcat_process.mcg")


# --------------------------------------------------------------------------
# behaviors


class ChooseTank(Behavior):
    """Move one whole non-empty tank partition from T:tanks into T:tank."""

    kind = NodeKind.SAMPLER

    def read(self, ctx: Context) -> None:
        ctx.read("T:tanks")

    def pull(self, ctx: Context) -> None:
        parts = partition(ctx.bag("T:tanks"))
        keys = sorted((k for k in parts), key=lambda k: -1 if k is None else k)
        if not keys:
            ctx.scratch["moved"] = ParticleBag()
            return
        chosen = parts[keys[int(ctx.rng.integers(len(keys)))]]
        ctx.scratch["moved"] = chosen
        ctx.remove("T:tanks", chosen)

    def push(self, ctx: Context) -> None:
        if ctx.scratch["moved"]:
            ctx.add("T:tank", ctx.scratch["moved"])


class Decomp(Behavior):
    kind = NodeKind.DECISION

    def read(self, ctx: Context) -> None:
        ctx.read("S:composite")

    def process(self, ctx: Context) -> None:
        items = ctx.bag("S:composite").elements()
        splittable = len(items) == 1 and double_indices(untag(items[0])[1])
        ctx.choose("a:split" if splittable else "s:sampler")


class Split(Behavior):
    kind = NodeKind.ACTION

    def read(self, ctx: Context) -> None:
        ctx.read("S:composite")

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:composite", ctx.bag("S:composite"))

    def process(self, ctx: Context) -> None:
        (p,) = ctx.bag("S:composite").elements()
        tag, s = untag(p)
        left, right = split(s, ctx.rng)
        ctx.local.particles[ctx.node] = ParticleBag([retag(tag, left), retag(tag, right)])

    def push(self, ctx: Context) -> None:
        ctx.add("S:composite", ctx.local.particles[ctx.node])


class Concat(Behavior):
    """Join the two sampled strings, first sampled first; a lone string is returned as is."""

    kind = NodeKind.ACTION

    def read(self, ctx: Context) -> None:
        ctx.read("S:composite")

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:composite", ctx.bag("S:composite"))

    def process(self, ctx: Context) -> None:
        items = ctx.bag("S:composite").elements()  # insertion order is sampling order
        if len(items) == 2:
            (tag, a), (_, b) = untag(items[0]), untag(items[1])
            items = [retag(tag, concat(a, b))]
        ctx.local.particles[ctx.node] = ParticleBag(items)

    def push(self, ctx: Context) -> None:
        ctx.add("S:composite", ctx.local.particles[ctx.node])


class Transfers(Behavior):
    """Swap one random string each way between k random tank pairs, k uniform in 0..max."""

    kind = NodeKind.SAMPLER

    def __init__(self, max_transfers: int, tanks: int):
        self.max_transfers = max_transfers
        self.tanks = tanks

    def read(self, ctx: Context) -> None:
        ctx.read("T:tanks")

    def pull(self, ctx: Context) -> None:
        rng = ctx.rng
        k = int(rng.integers(self.max_transfers + 1))
        if self.tanks < 2 or k == 0:
            ctx.scratch["out"] = None
            return
        parts = partition(ctx.bag("T:tanks"))
        removed, added = ParticleBag(), ParticleBag()
        for _ in range(k):
            i, j = (int(x) for x in rng.choice(self.tanks, size=2, replace=False))
            for a, b in ((i, j), (j, i)):
                src = parts.get(a)
                if not src:
                    continue
                p = pick_one(src, rng)
                src._remove(ParticleBag([p]))
                q = retag(b, untag(p)[1])
                parts.setdefault(b, ParticleBag())._add(ParticleBag([q]))
                removed._add(ParticleBag([p]))
                added._add(ParticleBag([q]))
        # only the net change touches the container
        net_out = ParticleBag({p: n - added.count(p) for p, n in removed.items() if n > added.count(p)})
        net_in = ParticleBag({p: n - removed.count(p) for p, n in added.items() if n > removed.count(p)})
        ctx.scratch["out"] = net_in
        if net_out:
            ctx.remove("T:tanks", net_out)

    def push(self, ctx: Context) -> None:
        if ctx.scratch["out"]:
            ctx.add("T:tanks", ctx.scratch["out"])


class Tick(Behavior):
    """Advance time by one and reset the per-step reaction count."""

    kind = NodeKind.OBSERVER

    def pull(self, ctx: Context) -> None:
        present = [v for v in ("time", "reactions") if v in ctx.env("V:time")]
        if present:
            ctx.remove("V:time", present)

    def push(self, ctx: Context) -> None:
        ctx.add("V:time", {"time": ctx.env("V:time").get("time", 0) + 1, "reactions": 0})


def behaviors(cfg: StringCatConfig) -> dict[str, Behavior]:
    from .behaviors import counter_observer, threshold_decision

    micro = {
        "s:choose": ChooseTank(),
        "s:sampler": random_pick_sampler("T:tank", "S:composite", 1),
        "d:decomp": Decomp(),
        "a:split": Split(),
        "a:concat": Concat(),
        "s:return": move_all_sampler("S:composite", "T:tank"),
        "s:commit": move_all_sampler("T:tank", "T:tanks"),
    }
    out: dict[str, Behavior] = {
        "s:load": move_all_sampler("T:init", "T:tanks"),
        "o:time": Tick(),
        "a:process": Expansion(build_micro_process(), micro),
        "o:reactions": counter_observer("V:time", "reactions", 1),
        "d:updated": threshold_decision("V:time", "reactions", cfg.reactions_per_step, "s:transfers", "a:process"),
        "s:transfers": Transfers(cfg.max_transfers, cfg.tanks),
    }
    if cfg.time_bound is not None:
        bound = cfg.time_bound
        out["d:time"] = predicate_decision(lambda ctx: ctx.env("V:time")["time"] > bound, "t:end", "o:time")
    return out


def micro_behaviors() -> dict[str, Behavior]:
    return dict(behaviors(StringCatConfig())["a:process"].behaviors)


def initial_particles(cfg: StringCatConfig) -> ParticleBag:
    counts: dict = {}
    for letter in cfg.alphabet:
        for j in range(cfg.copies):
            p = retag(j % cfg.tanks, letter)
            counts[p] = counts.get(p, 0) + 1
    return ParticleBag(counts)


def initial_state(cfg: StringCatConfig, g: GraphDef | None = None) -> SystemState:
    g = g or build_macro(cfg.time_bound is None)
    return SystemState.for_graph(g, {"T:init": initial_particles(cfg)})


def run_stringcat(cfg: StringCatConfig, run_cfg: RunConfig, on_event=None) -> RunResult:
    g = build_macro(cfg.time_bound is None)
    return run(g, behaviors(cfg), initial_state(cfg, g), run_cfg, on_event)


def letters(b: ParticleBag) -> dict[str, int]:
    """Letter census of a bag of (possibly tagged) strings."""
    out: dict[str, int] = {}
    for p, n in b.items():
        for ch in untag(p)[1]:
            out[ch] = out.get(ch, 0) + n
    return out
