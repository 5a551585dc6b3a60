"""JA-AChem node behaviors, graph builders and standalone link/decompose helpers."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from ..behaviors import counter_observer, move_all_sampler, pick, predicate_decision, threshold_decision
from ..containers import ParticleBag, SystemState, partition, retag, untag
from ..engine import Behavior, Context, EngineError, Expansion, RunConfig, RunResult, Runner, run
from ..graph import GraphDef, NodeKind, parse_graph
from .algebra import TRACE_EPS, best_pair, jordan_product, link_probability, strength
from .atoms import atom_matrices
from .particles import Link, Particle, break_link, weight
from .transfers import MODES, GridShapeError, rebalance_pairs, select_transfer_pairs


class WrongArityError(EngineError):
    code = "WRONG_ARITY"


class NoLinksError(EngineError):
    code = "NO_LINKS"


@dataclass
class JAConfig:
    tanks: int = 1
    atoms_per_tank: int = 16
    link_attempts_per_step: int = 16
    decomp_attempts_per_step: int = 16
    transfer_mode: str = "single"
    grid_shape: tuple[int, int] | None = None
    max_transfers: int = 10
    time_bound: int | None = None
    log_stats: bool = False

    def __post_init__(self):
        if self.transfer_mode not in MODES:
            raise ValueError(f"transfer_mode must be one of {MODES}")
        if self.tanks < 1 or self.atoms_per_tank < 0:
            raise ValueError("tanks >= 1 and atoms_per_tank >= 0")
        if self.link_attempts_per_step < 1 or self.decomp_attempts_per_step < 1:
            raise ValueError("attempt counts must be >= 1")
        if self.grid_shape is not None:
            self.grid_shape = tuple(int(x) for x in self.grid_shape)
        if self.transfer_mode == "grid" and (self.grid_shape is None or self.grid_shape[0] * self.grid_shape[1] != self.tanks):
            raise GridShapeError(f"grid mode needs grid_shape rows x cols == tanks ({self.tanks})")


def load_graph(name: str) -> GraphDef:
    return parse_graph(resources.files("metachem.graphs").joinpath(name).read_text(encoding="utf-8"))


def build_macro(transfers: bool = False) -> GraphDef:
    return load_graph("ja_macro_transfers.mcg" if transfers else "ja_macro.mcg")


def build_link() -> GraphDef:
    return load_graph("ja_link.mcg")


def build_update() -> GraphDef:
    return load_graph("ja_update.mcg")


# --------------------------------------------------------------------------
# a:link micro behaviors


def _replace(ctx: Context, env: str, values: dict) -> None:
    """Stage a pull-then-push replacement of an environment store."""
    ctx.scratch.setdefault("replace", {})[env] = values


class _Replacing(Behavior):
    """Observer/action that clears its output stores before pushing fresh values."""

    outputs: tuple[str, ...] = ()

    def pull(self, ctx: Context) -> None:
        for c in self.outputs:
            if ctx.env(c):
                ctx.remove_all(c)

    def push(self, ctx: Context) -> None:
        for c, values in ctx.scratch.get("replace", {}).items():
            ctx.add(c, values)


class InternalStruct(_Replacing):
    kind = NodeKind.OBSERVER
    outputs = ("V:Mat", "V:Eval", "V:Evec")

    def process(self, ctx: Context) -> None:
        items = ctx.bag("S:Reactants").elements()
        if len(items) != 2:
            _replace(ctx, "V:Mat", {"arity": len(items)})
            return
        (_, a), (_, b) = untag(items[0]), untag(items[1])
        _replace(ctx, "V:Mat", {"A": a.matrix, "B": b.matrix})
        _replace(ctx, "V:Eval", {"A": a.eig.mu, "B": b.eig.mu})
        _replace(ctx, "V:Evec", {"A": a.eig, "B": b.eig})


class AlignmentObs(_Replacing):
    kind = NodeKind.OBSERVER
    outputs = ("V:Pairs",)

    def process(self, ctx: Context) -> None:
        ev = ctx.env("V:Evec")
        if "A" not in ev:
            _replace(ctx, "V:Pairs", {"pair": None})
            return
        i, j, a = best_pair(ev["A"], ev["B"])
        _replace(ctx, "V:Pairs", {"pair": (i, j), "alignment": a})


class StrengthObs(_Replacing):
    kind = NodeKind.OBSERVER
    outputs = ("V:Strengths",)

    def process(self, ctx: Context) -> None:
        pairs = ctx.env("V:Pairs")
        if pairs.get("pair") is None:
            _replace(ctx, "V:Strengths", {"s": 0.0, "a": 0.0, "p": 0.0})
            return
        i, j = pairs["pair"]
        mu = ctx.env("V:Eval")
        s = strength(float(mu["A"][i]), float(mu["B"][j]))
        a = pairs["alignment"]
        _replace(ctx, "V:Strengths", {"s": s, "a": a, "p": link_probability(s, a)})


class ProbGate(Behavior):
    """Continue iff r < p with r uniform on [0, 1)."""

    kind = NodeKind.DECISION

    def __init__(self, force: float | None = None):
        self.force = force

    def process(self, ctx: Context) -> None:
        p = ctx.env("V:Strengths")["p"] if self.force is None else self.force
        r = float(ctx.rng.random())
        ctx.choose("a:New_Mat" if r < p else "t:exit")


class NewMat(_Replacing):
    kind = NodeKind.ACTION
    outputs = ("V:New_Mat",)

    def process(self, ctx: Context) -> None:
        m = ctx.env("V:Mat")
        _replace(ctx, "V:New_Mat", {"M": jordan_product(m["A"], m["B"])})


class ValidGate(Behavior):
    kind = NodeKind.DECISION

    def process(self, ctx: Context) -> None:
        m = ctx.env("V:New_Mat")["M"]
        ctx.choose("s:Pull" if abs(np.trace(m).real) > TRACE_EPS else "t:exit")


class NewParticle(Behavior):
    kind = NodeKind.ACTION

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:Old_Part", ctx.bag("S:Old_Part"))

    def process(self, ctx: Context) -> None:
        (tag, a), (_, b) = (untag(p) for p in ctx.bag("S:Old_Part").elements())
        st = ctx.env("V:Strengths")
        link = Link(st["s"], st["a"], tuple(ctx.env("V:Pairs")["pair"]), a, b)
        ctx.scratch["new"] = retag(tag, Particle(ctx.env("V:New_Mat")["M"], link))

    def push(self, ctx: Context) -> None:
        ctx.add("S:New_Part", [ctx.scratch["new"]])


def link_behaviors(force_probability: float | None = None) -> dict[str, Behavior]:
    return {
        "o:internal_struct": InternalStruct(),
        "o:Alignment": AlignmentObs(),
        "o:Strength": StrengthObs(),
        "d:Prob": ProbGate(force_probability),
        "a:New_Mat": NewMat(),
        "d:Valid": ValidGate(),
        "s:Pull": move_all_sampler("S:Reactants", "S:Old_Part"),
        "a:New_Particle": NewParticle(),
        "s:return": move_all_sampler("S:New_Part", "S:Reactants"),
    }


@dataclass
class LinkOutcome:
    linked: bool
    sample: ParticleBag
    path: list[str]

    @property
    def reason(self) -> str:
        if self.linked:
            return "linked"
        return "invalid" if "d:Valid" in self.path else "improbable"


def attempt_link(sample: ParticleBag, rng, force_probability: float | None = None) -> LinkOutcome:
    """Run the a:link micro graph on a two-particle sample."""
    if len(sample) != 2:
        raise WrongArityError(f"link needs exactly 2 particles, got {len(sample)}")
    g = build_link()
    state = SystemState.for_graph(g, {"S:Reactants": sample})
    runner = Runner(g, link_behaviors(force_probability), rng)
    path = []
    while not state.halted:
        path.append(runner.step(state).node)
    return LinkOutcome("s:Pull" in path, state.particles["S:Reactants"], path)


# --------------------------------------------------------------------------
# decomposition


class WeakestLinkPolicy:
    """Break the weakest link (first in pre-order on ties) with probability 1 - s*a."""

    def choose(self, p: Particle) -> Link:
        best = None
        for ln in p.links():
            if best is None or ln.strength < best.strength:
                best = ln
        if best is None:
            raise NoLinksError("particle has no links")
        return best

    def threshold(self, link: Link) -> float:
        return link.probability


class AlwaysBreak(WeakestLinkPolicy):
    def threshold(self, link: Link) -> float:
        return 0.0


def decompose(sample: ParticleBag, rng, policy: WeakestLinkPolicy | None = None) -> ParticleBag:
    """One decomposition attempt; returns the new sample contents."""
    policy = policy or WeakestLinkPolicy()
    items = sample.elements()
    if len(items) != 1:
        raise WrongArityError(f"decomposition needs exactly 1 particle, got {len(items)}")
    tag, p = untag(items[0])
    if p.link is None:
        raise NoLinksError("atoms cannot decompose")
    ln = policy.choose(p)
    r = 1.0 - float(rng.random())
    if not policy.threshold(ln) < r:
        return sample.copy()
    return ParticleBag([retag(tag, q) for q in break_link(p, ln)])


class Decompose(Behavior):
    """a:decomp; the check threshold is s*a of the weakest link, so it breaks with 1 - s*a."""

    kind = NodeKind.ACTION

    def __init__(self, policy: WeakestLinkPolicy | None = None):
        self.policy = policy or WeakestLinkPolicy()

    def check(self, ctx: Context) -> float:
        items = ctx.bag("S:Decomp").elements()
        if len(items) != 1 or untag(items[0])[1].link is None:
            return 1.0
        tag, p = untag(items[0])
        ln = self.policy.choose(p)
        ctx.scratch["target"] = (tag, p, ln)
        return self.policy.threshold(ln)

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:Decomp", ctx.bag("S:Decomp"))

    def process(self, ctx: Context) -> None:
        tag, p, ln = ctx.scratch["target"]
        ctx.scratch["pieces"] = [retag(tag, q) for q in break_link(p, ln)]

    def push(self, ctx: Context) -> None:
        ctx.add("S:Decomp", ctx.scratch["pieces"])


# --------------------------------------------------------------------------
# macro behaviors


class SampleLink(Behavior):
    """Two particles, without replacement, from one random tank holding at least two."""

    kind = NodeKind.SAMPLER

    def read(self, ctx: Context) -> None:
        ctx.read("T:Tank")

    def pull(self, ctx: Context) -> None:
        parts = partition(ctx.bag("T:Tank"))
        ok = sorted((k for k, b in parts.items() if len(b) >= 2), key=lambda k: -1 if k is None else k)
        chosen = ParticleBag()
        if ok:
            chosen = pick(parts[ok[int(ctx.rng.integers(len(ok)))]], 2, ctx.rng)
            ctx.remove("T:Tank", chosen)
        ctx.scratch["chosen"] = chosen

    def push(self, ctx: Context) -> None:
        if ctx.scratch["chosen"]:
            ctx.add("S:Reactants", ctx.scratch["chosen"])


class SampleDecomp(Behavior):
    """One composite chosen uniformly over all composite instances."""

    kind = NodeKind.SAMPLER

    def read(self, ctx: Context) -> None:
        ctx.read("T:Tank")

    def pull(self, ctx: Context) -> None:
        composites = ParticleBag({p: n for p, n in ctx.bag("T:Tank").items() if weight(p) > 1})
        chosen = pick(composites, 1, ctx.rng)
        if chosen:
            ctx.remove("T:Tank", chosen)
        ctx.scratch["chosen"] = chosen

    def push(self, ctx: Context) -> None:
        if ctx.scratch["chosen"]:
            ctx.add("S:Decomp", ctx.scratch["chosen"])


class TimeTick(Behavior):
    kind = NodeKind.OBSERVER

    def pull(self, ctx: Context) -> None:
        for c in ("V:time", "V:counts"):
            if ctx.env(c):
                ctx.remove_all(c)

    def push(self, ctx: Context) -> None:
        ctx.add("V:time", {"time": ctx.env("V:time").get("time", 0) + 1})
        ctx.add("V:counts", {"links": 0, "decomps": 0})


class ResetCounts(Behavior):
    kind = NodeKind.OBSERVER

    def pull(self, ctx: Context) -> None:
        if ctx.env("V:counts"):
            ctx.remove_all("V:counts")

    def push(self, ctx: Context) -> None:
        ctx.add("V:counts", {"links": 0, "decomps": 0})


class TankTransfers(Behavior):
    """Rebalance tank pairs chosen by the configured transfer mode."""

    kind = NodeKind.SAMPLER

    def __init__(self, cfg: "JAConfig"):
        self.cfg = cfg

    def read(self, ctx: Context) -> None:
        ctx.read("T:Tank")

    def pull(self, ctx: Context) -> None:
        c = self.cfg
        pairs = select_transfer_pairs(c.transfer_mode, c.tanks, ctx.rng, c.grid_shape, c.max_transfers)
        out, inn = rebalance_pairs(ctx.bag("T:Tank"), pairs, c.tanks)
        ctx.scratch["in"] = inn
        if out:
            ctx.remove("T:Tank", out)

    def push(self, ctx: Context) -> None:
        if ctx.scratch["in"]:
            ctx.add("T:Tank", ctx.scratch["in"])


def tank_stats(b: ParticleBag) -> dict:
    """Per-particle statistics: atoms, distinct atoms, trace, |trace|, largest link strength."""
    rows = []
    for p, n in b.items():
        tag, q = untag(p)
        largest = max((ln.strength for ln in q.links()), default=0.0)
        rows.append([tag, q.atoms, q.distinct_atoms(), q.trace, abs(q.trace), largest, n])
    rows.sort(key=lambda r: (-1 if r[0] is None else r[0], -r[1], r[3]))
    return {"particles": rows, "total_atoms": sum(r[1] * r[6] for r in rows)}


class LogStats(Behavior):
    kind = NodeKind.OBSERVER

    def __init__(self, enabled: bool):
        self.enabled = enabled

    def read(self, ctx: Context) -> None:
        if self.enabled:
            ctx.read_all()

    def process(self, ctx: Context) -> None:
        if self.enabled:
            ctx.scratch["row"] = tank_stats(ctx.bag("T:Tank"))

    def push(self, ctx: Context) -> None:
        if self.enabled:
            ctx.add("V:external", {f"t{ctx.env('V:time')['time']}": ctx.scratch["row"]})


def update_behaviors(cfg: JAConfig, decomposer: WeakestLinkPolicy | None = None) -> dict[str, Behavior]:
    """Behaviors shared by the macro graph and the one-generation update graph."""
    return {
        "s:sample_link": SampleLink(),
        "a:link": Expansion(build_link(), link_behaviors()),
        "s:return_link": move_all_sampler("S:Reactants", "T:Tank"),
        "o:links": counter_observer("V:counts", "links", 1),
        "d:links_done": threshold_decision("V:counts", "links", cfg.link_attempts_per_step, "s:sample_decomp", "s:sample_link"),
        "s:sample_decomp": SampleDecomp(),
        "a:decomp": Decompose(decomposer),
        "s:return_decomp": move_all_sampler("S:Decomp", "T:Tank"),
        "o:decomps": counter_observer("V:counts", "decomps", 1),
        "o:reset": ResetCounts(),
    }


def behaviors(cfg: JAConfig, decomposer: WeakestLinkPolicy | None = None) -> dict[str, Behavior]:
    out = update_behaviors(cfg, decomposer)
    out.pop("o:reset")
    bound = cfg.time_bound
    out.update(
        {
            "s:load": move_all_sampler("T:init", "T:Tank"),
            "o:time": TimeTick(),
            "d:decomps_done": threshold_decision("V:counts", "decomps", cfg.decomp_attempts_per_step, "o:log", "s:sample_decomp"),
            "o:log": LogStats(cfg.log_stats),
            "s:transfers": TankTransfers(cfg),
            "d:end": predicate_decision(
                lambda ctx: bound is not None and ctx.env("V:time")["time"] > bound, "t:end", "o:time"
            ),
        }
    )
    return out


def update_expansion(cfg: JAConfig, decomposer: WeakestLinkPolicy | None = None) -> Expansion:
    bs = update_behaviors(cfg, decomposer)
    bs["d:decomps_done"] = threshold_decision("V:counts", "decomps", cfg.decomp_attempts_per_step, "t:exit", "s:sample_decomp")
    return Expansion(build_update(), bs)


_ATOMS: np.ndarray | None = None


def atom_pool() -> np.ndarray:
    global _ATOMS
    if _ATOMS is None:
        _ATOMS = atom_matrices()
    return _ATOMS


def random_atoms(n: int, rng) -> list[Particle]:
    pool = atom_pool()
    return [Particle(pool[int(i)]) for i in rng.integers(len(pool), size=n)]


def initial_tanks(cfg: JAConfig, seed: int) -> ParticleBag:
    """Atoms drawn uniformly from the atom set, tagged by tank; setup has its own stream."""
    rng = np.random.default_rng([seed, 0x7A])
    counts: dict = {}
    for t in range(cfg.tanks):
        for p in random_atoms(cfg.atoms_per_tank, rng):
            q = retag(t, p)
            counts[q] = counts.get(q, 0) + 1
    return ParticleBag(counts)


def initial_state(cfg: JAConfig, seed: int, g: GraphDef | None = None) -> SystemState:
    g = g or build_macro()
    return SystemState.for_graph(g, {"T:init": initial_tanks(cfg, seed)})


def run_ja(
    cfg: JAConfig,
    run_cfg: RunConfig,
    on_event: Callable | None = None,
    decomposer: WeakestLinkPolicy | None = None,
) -> RunResult:
    g = build_macro(uses_transfers(cfg))
    return run(g, behaviors(cfg, decomposer), initial_state(cfg, run_cfg.seed, g), run_cfg, on_event)


def uses_transfers(cfg: JAConfig) -> bool:
    return cfg.transfer_mode in ("random", "grid") and cfg.tanks > 1
