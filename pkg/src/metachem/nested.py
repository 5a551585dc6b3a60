"""NestedChem: swarming tanks of matrix particles and the eight variant systems.

Boid ``i`` owns JA tank ``i``. Tank contents set boid parameters through
V:parameters; boid collisions move particles between tanks through V:transfers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Mapping

import numpy as np

from .behaviors import counter_observer, move_all_sampler, threshold_decision
from .containers import ParticleBag, SystemState, partition, untag
from .engine import Behavior, Context, EngineError, Expansion, RunConfig, RunResult, run
from .graph import GraphDef, NodeKind, parse_graph
from .ja import chem as ja
from .ja.particles import weight
from .ja.transfers import rebalance_pairs, select_transfer_pairs
from .swarm import chem as sw
from .swarm.model import RecipeParams

VARIANTS = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII")
_FILES = {
    "I": "nested_I.mcg",
    "II": "nested_II.mcg",
    "III": "nested_III.mcg",
    "IV": "nested_IV.mcg",
    "V": "nested_V_VI.mcg",
    "VI": "nested_V_VI.mcg",
    "VII": "nested_VII.mcg",
    "VIII": "nested_VIII.mcg",
}
USES_TANKS = frozenset({"I", "II", "V", "VI", "VII", "VIII"})
USES_SWARM = frozenset({"I", "II", "III", "IV"})


class IndexMismatchError(EngineError):
    code = "INDEX_MISMATCH"


def _load(name: str) -> GraphDef:
    return parse_graph(resources.files("metachem.graphs").joinpath(name).read_text(encoding="utf-8"))


def build_variant(v: str) -> GraphDef:
    if v not in _FILES:
        raise ValueError(f"unknown variant {v!r}; expected one of {', '.join(VARIANTS)}")
    return _load(_FILES[v])


# --------------------------------------------------------------------------
# tank statistics -> boid parameters

RANGES = {
    "R": (10.0, 300.0),
    "Vn": (1.0, 20.0),
    "Vm": (None, 40.0),  # lower bound is the boid's own Vn
    "c1": (0.0, 1.0),
    "c2": (0.0, 1.0),
    "c3": (0.0, 1.0),
    "c5": (0.0, 1.0),
}

# name -> (per particle, per mean atom count, per mean link strength), added to the range floor
DEFAULT_MAPPING: dict[str, tuple[float, float, float]] = {
    "R": (0.0, 20.0, 0.0),
    "Vn": (0.25, 0.0, 0.0),
    "Vm": (0.5, 1.0, 0.0),
    "c1": (0.0, 0.05, 0.0),
    "c2": (0.0, 0.0, 1.0),
    "c3": (0.02, 0.0, 0.0),
    "c5": (0.0, 0.0, 2.0),
}


@dataclass(frozen=True)
class TankSummary:
    n: int  # particles
    mean_atoms: float
    mean_strength: float  # over every link in the tank; 0 when there are none


def summarize(b: ParticleBag) -> TankSummary:
    n = atoms = links = 0
    strength = 0.0
    for p, k in b.items():
        q = untag(p)[1]
        n += k
        atoms += k * q.atoms
        for ln in q.links():
            links += k
            strength += k * ln.strength
    if n == 0:
        return TankSummary(0, 0.0, 0.0)
    return TankSummary(n, atoms / n, strength / links if links else 0.0)


def map_parameters(s: TankSummary, mapping: Mapping[str, tuple[float, float, float]] = DEFAULT_MAPPING, c4: float = 0.0) -> RecipeParams:
    """Affine in the summary, clamped into the allowed range of each parameter."""
    m = dict(DEFAULT_MAPPING) | dict(mapping)
    feats = (s.n, s.mean_atoms, s.mean_strength)

    def val(name: str, lo: float) -> float:
        hi = RANGES[name][1]
        x = lo + sum(a * f for a, f in zip(m[name], feats))
        return min(max(x, lo), hi)

    vn = val("Vn", RANGES["Vn"][0])
    return RecipeParams(
        R=val("R", RANGES["R"][0]),
        Vn=vn,
        Vm=val("Vm", vn),
        c1=val("c1", 0.0),
        c2=val("c2", 0.0),
        c3=val("c3", 0.0),
        c4=c4,
        c5=val("c5", 0.0),
    )


def parameter_setting(tanks: ParticleBag, n_tanks: int, mapping=DEFAULT_MAPPING) -> tuple[tuple[int, RecipeParams], ...]:
    parts = partition(tanks)
    extra = sorted(k for k in parts if k is None or not 0 <= k < n_tanks)
    if extra:
        raise IndexMismatchError(f"tank indices {extra} outside 0..{n_tanks - 1}")
    return tuple((i, map_parameters(summarize(parts.get(i, ParticleBag())), mapping)) for i in range(n_tanks))


def collision_transfer(tanks: ParticleBag, pairs, n_tanks: int) -> tuple[ParticleBag, ParticleBag]:
    """Rebalance each collided pair in order; returns (removed, added) against ``tanks``."""
    return rebalance_pairs(tanks, pairs, n_tanks)


def color_violations(g: GraphDef) -> list[str]:
    """Info edges that cross from one chemistry's controls into another's containers."""
    out = []
    for e in sorted(g.info_edges, key=lambda e: e.sort_key):
        c, b = g.by_id[e.control], g.by_id[e.container]
        shared = b.owner is None and b.id.kind is NodeKind.ENVIRONMENT
        if b.owner != c.owner and not shared:
            out.append(f"{e.control}~{e.container}")
    return sorted(set(out))


# --------------------------------------------------------------------------
# behaviors


class ParameterSetting(Behavior):
    kind = NodeKind.OBSERVER

    def __init__(self, n_tanks: int, mapping):
        self.n_tanks = n_tanks
        self.mapping = mapping

    def read(self, ctx: Context) -> None:
        ctx.read("T:Tank")
        ctx.read("V:parameters")

    def pull(self, ctx: Context) -> None:
        if ctx.env("V:parameters"):
            ctx.remove_all("V:parameters")

    def process(self, ctx: Context) -> None:
        ctx.scratch["params"] = parameter_setting(ctx.bag("T:Tank"), self.n_tanks, self.mapping)

    def push(self, ctx: Context) -> None:
        ctx.add("V:parameters", {"params": ctx.scratch["params"]})


class ApplyParameters(Behavior):
    """Give every agent the parameter record carrying its index; c4 is kept."""

    kind = NodeKind.ACTION

    def read(self, ctx: Context) -> None:
        ctx.read("V:source")
        ctx.read("S:agents")

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:agents", ctx.bag("S:agents"))

    def process(self, ctx: Context) -> None:
        params = dict(ctx.env("V:source").get("params", ()))
        boids = ctx.bag("S:agents").elements()
        if set(params) != {b.id for b in boids}:
            raise IndexMismatchError("parameter records and agents do not match one to one", ctx.node)
        ctx.scratch["new"] = [b.replace(params=params[b.id]._replace(c4=b.params.c4)) for b in boids]

    def push(self, ctx: Context) -> None:
        ctx.add("S:agents", ctx.scratch["new"])


class ExchangeParameters(Behavior):
    """Collision exchange over the pairs recorded in V:source."""

    kind = NodeKind.ACTION

    def read(self, ctx: Context) -> None:
        ctx.read("V:source")
        ctx.read("S:agents")

    def pull(self, ctx: Context) -> None:
        ctx.remove("S:agents", ctx.bag("S:agents"))

    def process(self, ctx: Context) -> None:
        boids = ctx.bag("S:agents").elements()
        changed = sw.apply_exchanges(boids, ctx.env("V:source").get("pairs", []), ctx.rng)
        ctx.scratch["new"] = [changed.get(b.id, b) for b in boids]

    def push(self, ctx: Context) -> None:
        ctx.add("S:agents", ctx.scratch["new"])


def params_expansion(apply: Behavior, source: str) -> Expansion:
    return Expansion(
        _load("nested_params.mcg"),
        {
            "s:Take": move_all_sampler("T:Swarm", "S:agents"),
            "a:Apply": apply,
            "s:Put": move_all_sampler("S:agents", "T:Swarm"),
        },
        bind={"V:source": source},
    )


class PairTransfer(Behavior):
    """Rebalance tank pairs, read from V:transfers or drawn by ``choose``."""

    kind = NodeKind.SAMPLER

    def __init__(self, n_tanks: int, choose: Callable | None = None):
        self.n_tanks = n_tanks
        self.choose = choose

    def read(self, ctx: Context) -> None:
        ctx.read("T:Tank")
        if self.choose is None:
            ctx.read("V:transfers")

    def pull(self, ctx: Context) -> None:
        if self.choose is None:
            pairs = sorted({tuple(sorted(p)) for p in ctx.env("V:transfers").get("pairs", [])})
        else:
            pairs = self.choose(ctx.rng)
        out, inn = collision_transfer(ctx.bag("T:Tank"), pairs, self.n_tanks)
        ctx.scratch["in"] = inn
        if out:
            ctx.remove("T:Tank", out)

    def push(self, ctx: Context) -> None:
        if ctx.scratch["in"]:
            ctx.add("T:Tank", ctx.scratch["in"])


class RandomTransfers(Behavior):
    kind = NodeKind.OBSERVER

    def __init__(self, n_tanks: int, max_transfers: int):
        self.n_tanks = n_tanks
        self.max_transfers = max_transfers

    def pull(self, ctx: Context) -> None:
        if ctx.env("V:transfers"):
            ctx.remove_all("V:transfers")

    def process(self, ctx: Context) -> None:
        ctx.scratch["pairs"] = select_transfer_pairs("random", self.n_tanks, ctx.rng, max_transfers=self.max_transfers)

    def push(self, ctx: Context) -> None:
        ctx.add("V:transfers", {"pairs": ctx.scratch["pairs"]})


# --------------------------------------------------------------------------
# configuration and assembly


def near_square(n: int) -> tuple[int, int]:
    r = int(math.isqrt(n))
    while n % r:
        r -= 1
    return r, n // r


DEFAULT_RECIPE = "16 * (60, 2, 4, 0.3, 0.2, 5, 0, 0.5)"


@dataclass
class NestedConfig:
    variant: str = "I"
    steps: int = 20
    recipe: str = DEFAULT_RECIPE
    box: float = 150.0
    spacing: float | None = None
    whim: float = 0.5
    collision_radius: float = 3.0
    atoms_per_tank: int = 16
    link_attempts_per_step: int = 16
    decomp_attempts_per_step: int = 16
    max_transfers: int = 10
    tanks: int | None = None  # default: one per agent, or one in total for variant V
    grid_shape: tuple[int, int] | None = None
    mapping: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        unknown = set(self.mapping) - set(DEFAULT_MAPPING)
        if unknown:
            raise ValueError(f"unknown mapping keys {sorted(unknown)}")

    def swarm(self) -> sw.SwarmConfig:
        return sw.SwarmConfig(
            recipe=self.recipe,
            steps=self.steps,
            box=self.box,
            spacing=self.spacing,
            whim=self.whim,
            collision_radius=self.collision_radius,
        )

    @property
    def agents(self) -> int:
        return sum(n for n, _ in self.swarm().parsed())

    def n_tanks(self) -> int:
        if self.tanks is not None:
            return self.tanks
        return 1 if self.variant == "V" else self.agents

    def ja(self) -> ja.JAConfig:
        """Variant V keeps the same total atoms as the partitioned systems."""
        n = self.n_tanks()
        atoms = self.atoms_per_tank * self.agents // n if self.tanks is None else self.atoms_per_tank
        return ja.JAConfig(
            tanks=n,
            atoms_per_tank=atoms,
            link_attempts_per_step=self.link_attempts_per_step,
            decomp_attempts_per_step=self.decomp_attempts_per_step,
            max_transfers=self.max_transfers,
        )

    def grid(self) -> tuple[int, int]:
        return self.grid_shape or near_square(self.n_tanks())


def behaviors(cfg: NestedConfig) -> dict[str, Behavior]:
    v = cfg.variant
    n = cfg.n_tanks()
    out: dict[str, Behavior] = {
        "o:Generation": counter_observer("V:Generation", "generation", 1),
        "d:Continue": threshold_decision("V:Generation", "generation", cfg.steps, "t:end", "o:Generation"),
    }
    if v in USES_TANKS:
        out["s:Load_Tanks"] = move_all_sampler("T:Init_Tank", "T:Tank")
        out["a:JA_Update"] = ja.update_expansion(cfg.ja())
    if v in USES_SWARM:
        out["s:Load_Swarm"] = move_all_sampler("T:Init_Swarm", "T:Swarm")
        out["a:Swarm_Update"] = sw.update_expansion(cfg.swarm())
    if v in ("I", "II"):
        if n != cfg.agents:
            raise IndexMismatchError(f"{n} tanks for {cfg.agents} agents")
        out["o:Parameter_Setting"] = ParameterSetting(n, cfg.mapping)
        out["a:Update_Parameters"] = params_expansion(ApplyParameters(), "V:parameters")
    if v in ("I", "III"):
        out["o:Collisions"] = sw.Collisions(cfg.collision_radius, source="T:Swarm", target="V:transfers")
    if v == "III":
        out["a:Exchange_Parameters"] = params_expansion(ExchangeParameters(), "V:transfers")
    if v in ("I", "VII"):
        out["a:Transfer_Particles"] = Expansion(_load("nested_transfer.mcg"), {"s:Transfer": PairTransfer(n)})
    if v == "VII":
        out["o:Random_Transfers"] = RandomTransfers(n, cfg.max_transfers)
    if v == "VIII":
        shape = cfg.grid()
        choose = lambda rng: select_transfer_pairs("grid", n, rng, shape, cfg.max_transfers)  # noqa: E731
        out["a:Grid_Transfer"] = Expansion(_load("nested_grid.mcg"), {"s:Transfer": PairTransfer(n, choose)})
    return out


def initial_state(cfg: NestedConfig, seed: int, g: GraphDef | None = None) -> SystemState:
    g = g or build_variant(cfg.variant)
    parts = {}
    if cfg.variant in USES_TANKS:
        parts["T:Init_Tank"] = ja.initial_tanks(cfg.ja(), seed)
    if cfg.variant in USES_SWARM:
        parts["T:Init_Swarm"] = sw.initial_boids(cfg.swarm(), seed)
    return SystemState.for_graph(g, parts)


def frame_recorder(every: int) -> sw.FrameRecorder:
    return sw.FrameRecorder(every, container="T:Swarm")


def run_nested(cfg: NestedConfig, run_cfg: RunConfig, on_event: Callable | None = None) -> RunResult:
    g = build_variant(cfg.variant)
    return run(g, behaviors(cfg), initial_state(cfg, run_cfg.seed, g), run_cfg, on_event)


def tank_atoms(b: ParticleBag) -> int:
    return sum(weight(p) * n for p, n in b.items())
