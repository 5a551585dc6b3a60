"""Swarm Chemistry node behaviors, graph builders and frame export."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

from ..behaviors import counter_observer, move_all_sampler, threshold_decision
from ..containers import ParticleBag, SystemState
from ..engine import Behavior, Context, Expansion, RunConfig, RunResult, run
from ..graph import GraphDef, NodeKind, parse_graph
from . import model
from .model import Boid, RecipeParams

PULSING_EYE = "pulsing_eye.txt"


def load_graph(name: str) -> GraphDef:
    return parse_graph(resources.files("metachem.graphs").joinpath(name).read_text(encoding="utf-8"))


def build_macro() -> GraphDef:
    return load_graph("swarm_macro.mcg")


def build_flock() -> GraphDef:
    return load_graph("swarm_flock.mcg")


def build_update() -> GraphDef:
    return load_graph("swarm_update.mcg")


def bundled_recipe(name: str = PULSING_EYE) -> str:
    return resources.files("metachem.graphs").joinpath(name).read_text(encoding="utf-8")


@dataclass
class SwarmConfig:
    recipe: str = field(default_factory=bundled_recipe)
    steps: int = 100
    box: float = 300.0
    spacing: float | None = None  # lay boids on a square grid instead of scattering them
    init_speed: float = 1.0
    whim: float = 0.5
    collision_radius: float = 3.0
    collisions: bool = True
    c5_override: float | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.whim < 0 or self.collision_radius < 0 or self.box <= 0:
            raise ValueError("whim and collision_radius >= 0, box > 0")

    def parsed(self) -> list[tuple[int, RecipeParams]]:
        out = model.parse_recipe(self.recipe)
        if self.c5_override is not None:
            out = [(n, p._replace(c5=self.c5_override)) for n, p in out]
        return out


def initial_boids(cfg: SwarmConfig, seed: int) -> list[Boid]:
    rng = np.random.default_rng([seed, 0x5A])
    boids = []
    total = sum(n for n, _ in cfg.parsed())
    cols = max(1, int(np.ceil(np.sqrt(total))))
    for n, params in cfg.parsed():
        for _ in range(n):
            if cfg.spacing is None:
                x = rng.uniform(0.0, cfg.box, size=2)
            else:
                r, c = divmod(len(boids), cols)
                x = np.array([c * cfg.spacing, r * cfg.spacing])
            v = rng.uniform(-cfg.init_speed, cfg.init_speed, size=2)
            boids.append(Boid(len(boids), x, v, params))
    return boids


# --------------------------------------------------------------------------
# a:Flock micro behaviors


def _only(b: ParticleBag) -> Boid:
    (boid,) = b.elements()
    return boid


class UpdateBoid(Behavior):
    """Copy one uniformly chosen boid of S:n into S:boid."""

    kind = NodeKind.SAMPLER

    def read(self, ctx: Context) -> None:
        ctx.read("S:n")

    def pull(self, ctx: Context) -> None:
        keys = list(ctx.bag("S:n"))
        ctx.scratch["boid"] = keys[int(ctx.rng.integers(len(keys)))]

    def push(self, ctx: Context) -> None:
        ctx.add("S:boid", [ctx.scratch["boid"]])


class FindNeighbours(Behavior):
    kind = NodeKind.SAMPLER

    def read(self, ctx: Context) -> None:
        ctx.read("S:boid")
        ctx.read("T:n_prev")

    def pull(self, ctx: Context) -> None:
        if ctx.state.particles["S:Neighbours"]:
            ctx.remove_all("S:Neighbours")

    def push(self, ctx: Context) -> None:
        nb = model.neighbors(_only(ctx.bag("S:boid")), ctx.bag("T:n_prev"))
        if nb:
            ctx.add("S:Neighbours", nb)


class LocalAverages(Behavior):
    kind = NodeKind.OBSERVER

    def read(self, ctx: Context) -> None:
        ctx.read("S:boid")
        ctx.read("S:Neighbours")
        ctx.read("V:Averages")

    def pull(self, ctx: Context) -> None:
        if ctx.env("V:Averages"):
            ctx.remove_all("V:Averages")

    def process(self, ctx: Context) -> None:
        ctx.scratch["avg"] = model.averages(_only(ctx.bag("S:boid")), ctx.bag("S:Neighbours").elements())

    def push(self, ctx: Context) -> None:
        ctx.add("V:Averages", {"avg": ctx.scratch["avg"]})


class FlockDecision(Behavior):
    kind = NodeKind.DECISION

    def read(self, ctx: Context) -> None:
        ctx.read("S:Neighbours")

    def process(self, ctx: Context) -> None:
        ctx.choose("s:Pull_Flock" if ctx.bag("S:Neighbours") else "s:Pull_Walk")


class PullBoid(Behavior):
    """Delete the boid being updated from S:n."""

    kind = NodeKind.SAMPLER

    def read(self, ctx: Context) -> None:
        ctx.read("S:boid")

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:n", ctx.bag("S:boid"))


class _AccelTerm(Behavior):
    kind = NodeKind.ACTION
    fresh = False  # True: replace the stored acceleration instead of adding to it

    def __init__(self, whim: float = 0.5):
        self.whim = whim

    def term(self, ctx: Context) -> tuple[float, float]:
        raise NotImplementedError

    def pull(self, ctx: Context) -> None:
        if ctx.env("V:Accel"):
            ctx.remove_all("V:Accel")

    def process(self, ctx: Context) -> None:
        t = self.term(ctx)
        if not self.fresh:
            a = ctx.env("V:Accel")["a"]
            t = (a[0] + t[0], a[1] + t[1])
        ctx.scratch["a"] = t

    def push(self, ctx: Context) -> None:
        ctx.add("V:Accel", {"a": ctx.scratch["a"]})


class RandomWalk(_AccelTerm):
    fresh = True

    def term(self, ctx):
        return model.random_walk(ctx.rng, self.whim)


class Cohesion(_AccelTerm):
    fresh = True

    def term(self, ctx):
        return model.cohesion(_only(ctx.bag("S:boid")), ctx.env("V:Averages")["avg"])


class Alignment(_AccelTerm):
    def term(self, ctx):
        return model.alignment(_only(ctx.bag("S:boid")), ctx.env("V:Averages")["avg"])


class Separation(_AccelTerm):
    def term(self, ctx):
        return model.separation(_only(ctx.bag("S:boid")), ctx.env("V:Averages")["avg"])


class Whim(_AccelTerm):
    def term(self, ctx):
        return model.whim(ctx.rng, self.whim)


class Pacekeeping(Behavior):
    kind = NodeKind.ACTION

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:boid", ctx.bag("S:boid"))

    def process(self, ctx: Context) -> None:
        b = _only(ctx.bag("S:boid"))
        vn = model.pacekeep(b.v, ctx.env("V:Accel")["a"], b.params, ctx.rng)
        ctx.scratch["boid"] = b.replace(vnext=vn)

    def push(self, ctx: Context) -> None:
        ctx.add("S:boid", [ctx.scratch["boid"]])


class UpdatedDecision(Behavior):
    kind = NodeKind.DECISION

    def read(self, ctx: Context) -> None:
        ctx.read("S:n")

    def process(self, ctx: Context) -> None:
        ctx.choose("s:Update_Boid" if ctx.bag("S:n") else "s:Push_Update")


def flock_behaviors(whim: float) -> dict[str, Behavior]:
    return {
        "s:Update_Boid": UpdateBoid(),
        "s:Find_Neighbours": FindNeighbours(),
        "o:Local_Averages": LocalAverages(),
        "d:Flock": FlockDecision(),
        "s:Pull_Boid": PullBoid(),
        "a:Random_Walk": RandomWalk(whim),
        "a:Cohesion": Cohesion(whim),
        "a:Alignment": Alignment(whim),
        "a:Separation": Separation(whim),
        "a:Whim": Whim(whim),
        "a:Pacekeeping": Pacekeeping(),
        "s:Push_Boid": move_all_sampler("S:boid", "S:n_new"),
        "d:Updated": UpdatedDecision(),
        "s:Push_Update": move_all_sampler("S:n_new", "S:n"),
    }


# --------------------------------------------------------------------------
# macro behaviors


class CopyToPrevious(Behavior):
    kind = NodeKind.SAMPLER

    def read(self, ctx: Context) -> None:
        ctx.read("S:n")

    def push(self, ctx: Context) -> None:
        ctx.add("T:n_prev", ctx.bag("S:n"))


class Move(Behavior):
    kind = NodeKind.ACTION

    def __init__(self, container: str = "S:n"):
        self.c = container

    def read(self, ctx: Context) -> None:
        ctx.read(self.c)

    def pull(self, ctx: Context) -> None:
        ctx.remove(self.c, ctx.bag(self.c))

    def push(self, ctx: Context) -> None:
        ctx.add(self.c, [model.move(b) for b in ctx.bag(self.c).elements()])


class Collisions(Behavior):
    """Record colliding id pairs into an environment store under ``pairs``."""

    kind = NodeKind.OBSERVER

    def __init__(self, radius: float, source: str = "S:n", target: str = "V:Collisions"):
        self.radius = radius
        self.source = source
        self.target = target

    def read(self, ctx: Context) -> None:
        ctx.read(self.source)
        ctx.read(self.target)

    def pull(self, ctx: Context) -> None:
        if ctx.env(self.target):
            ctx.remove_all(self.target)

    def process(self, ctx: Context) -> None:
        ctx.scratch["pairs"] = model.collisions(ctx.bag(self.source).elements(), self.radius)

    def push(self, ctx: Context) -> None:
        ctx.add(self.target, {"pairs": ctx.scratch["pairs"]})


def apply_exchanges(boids: list[Boid], pairs, rng) -> dict[int, Boid]:
    """Exchange parameters along each collided pair, ascending; returns changed boids by id."""
    by_id = {b.id: b for b in boids}
    changed: dict[int, Boid] = {}
    for i, j in sorted(set(pairs)):
        a, b = changed.get(i, by_id[i]), changed.get(j, by_id[j])
        pa, pb = model.exchange_params(a.params, b.params, rng)
        changed[i] = a.replace(params=pa)
        changed[j] = b.replace(params=pb)
    return changed


class UpdateParams(Behavior):
    kind = NodeKind.ACTION

    def __init__(self, source: str = "V:Collisions", container: str = "S:n"):
        self.source = source
        self.c = container

    def read(self, ctx: Context) -> None:
        ctx.read(self.source)
        ctx.read(self.c)

    def pull(self, ctx: Context) -> None:
        pairs = ctx.env(self.source).get("pairs", [])
        boids = ctx.bag(self.c).elements()
        changed = apply_exchanges(boids, pairs, ctx.rng)
        old = [b for b in boids if b.id in changed]
        ctx.scratch["new"] = [changed[b.id] for b in old]
        if old:
            ctx.remove(self.c, old)

    def push(self, ctx: Context) -> None:
        if ctx.scratch["new"]:
            ctx.add(self.c, ctx.scratch["new"])


class NoOp(Behavior):
    def read(self, ctx: Context) -> None:
        pass


def behaviors(cfg: SwarmConfig) -> dict[str, Behavior]:
    return {
        "s:Load_Parameters": move_all_sampler("T:Parameters", "S:n"),
        "o:Generation": counter_observer("V:Generation", "generation", 1),
        "s:Copy_to_Previous": CopyToPrevious(),
        "a:Flock": Expansion(build_flock(), flock_behaviors(cfg.whim)),
        "a:Move": Move(),
        "o:Collisions": Collisions(cfg.collision_radius),
        "a:Update_Params": UpdateParams() if cfg.collisions else NoOp(),
        "s:Log": move_all_sampler("T:n_prev", "T:external"),
        "d:Continue": threshold_decision("V:Generation", "generation", cfg.steps, "t:end", "o:Generation"),
    }


def update_expansion(cfg: SwarmConfig) -> Expansion:
    """One swarm step over T:Swarm for use inside larger graphs."""
    return Expansion(
        build_update(),
        {
            "s:Take": move_all_sampler("T:Swarm", "S:n"),
            "s:Copy_to_Previous": CopyToPrevious(),
            "a:Flock": Expansion(build_flock(), flock_behaviors(cfg.whim)),
            "a:Move": Move(),
            "s:Clear_Previous": _Clear("T:n_prev"),
            "s:Put": move_all_sampler("S:n", "T:Swarm"),
        },
    )


class _Clear(Behavior):
    kind = NodeKind.SAMPLER

    def __init__(self, c: str):
        self.c = c

    def read(self, ctx: Context) -> None:
        ctx.read(self.c)

    def pull(self, ctx: Context) -> None:
        if ctx.bag(self.c):
            ctx.remove_all(self.c)


def initial_state(cfg: SwarmConfig, seed: int, g: GraphDef | None = None) -> SystemState:
    g = g or build_macro()
    return SystemState.for_graph(g, {"T:Parameters": initial_boids(cfg, seed)})


# --------------------------------------------------------------------------
# frames

FRAME_HEADER = "step,boid_id,x,y,vx,vy,R,Vn,Vm,c1,c2,c3,c4,c5"


def frame_rows(step: int, boids) -> list[str]:
    rows = []
    for b in sorted(boids, key=lambda b: b.id):
        vals = [b.x[0], b.x[1], b.v[0], b.v[1], *b.params]
        rows.append(f"{step},{b.id}," + ",".join(repr(float(v)) for v in vals))
    return rows


class FrameRecorder:
    """Collects S:n every ``every`` completed steps, plus the final state."""

    def __init__(self, every: int, container: str = "S:n", counter: tuple[str, str] = ("V:Generation", "generation")):
        if every < 1:
            raise ValueError("frames_every must be >= 1")
        self.every = every
        self.container = container
        self.counter = counter
        self.frames: dict[int, list[Boid]] = {}

    def __call__(self, ev, runner) -> None:
        if ev.depth:
            return
        state = runner.root
        if ev.node == "o:Generation":
            done = state.environments[self.counter[0]][self.counter[1]] - 1
        elif ev.next is None:
            done = state.environments[self.counter[0]].get(self.counter[1], 0)
        else:
            return
        if done % self.every == 0 or ev.next is None:
            self.frames[done] = state.particles[self.container].elements()

    def csv(self) -> str:
        out = io.StringIO()
        out.write(FRAME_HEADER + "\n")
        for step in sorted(self.frames):
            for row in frame_rows(step, self.frames[step]):
                out.write(row + "\n")
        return out.getvalue()


def run_swarm(cfg: SwarmConfig, run_cfg: RunConfig, on_event: Callable | None = None) -> RunResult:
    g = build_macro()
    return run(g, behaviors(cfg), initial_state(cfg, run_cfg.seed, g), run_cfg, on_event)
