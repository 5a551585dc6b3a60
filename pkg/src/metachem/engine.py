"""Interpreter for static graphs: each transition is read, check, pull, process, push, next.

Behaviors are bound to control nodes by node id or by ``behavior`` name and
only ever see the system through a :class:`Context`, which enforces the
node's information edges, the per-kind access table and the phase in which
each container operation is legal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .containers import (
    LOCAL,
    LocalState,
    _copied,
    ParticleBag,
    SystemState,
    container_add,
    container_remove,
    jsonable,
)
from .graph import ACCESS_TABLE, Access, GraphDef, GraphError, NodeId, NodeKind, hard, validate

HOOKS = ("read", "check", "pull", "process", "push")

HOOKS_BY_KIND: Mapping[NodeKind, frozenset[str]] = {
    NodeKind.DECISION: frozenset({"read", "process"}),
    NodeKind.SAMPLER: frozenset({"read", "pull", "push"}),
    NodeKind.OBSERVER: frozenset({"read", "pull", "process", "push"}),
    NodeKind.ACTION: frozenset(HOOKS),
    NodeKind.TERMINATION: frozenset(),
}


class EngineError(Exception):
    code = "ENGINE"

    def __init__(self, message: str, node: str | None = None):
        self.node = node
        super().__init__(f"{self.code} at {node}: {message}" if node else f"{self.code}: {message}")


class CapabilityError(EngineError):
    code = "CAPABILITY"


class NoTargetError(EngineError):
    code = "NO_TARGET"


class BadDecisionError(EngineError):
    code = "BAD_DECISION"


class MissingBehaviorError(EngineError):
    code = "MISSING_BEHAVIOR"


class LocalStateError(EngineError):
    code = "LOCAL_STATE"


class Behavior:
    """Hooks for one kind of control node. Override only what the kind allows."""

    kind: NodeKind | None = None

    def read(self, ctx: "Context") -> None:
        ctx.read_all()

    def check(self, ctx: "Context") -> float:
        return 0.0

    def pull(self, ctx: "Context") -> None:
        pass

    def process(self, ctx: "Context") -> None:
        pass

    def push(self, ctx: "Context") -> None:
        pass

    @classmethod
    def overridden(cls) -> frozenset[str]:
        return frozenset(h for h in HOOKS if getattr(cls, h) is not getattr(Behavior, h))


class Context:
    """A behavior's only handle on the system during one transition."""

    __slots__ = ("node", "state", "local", "rng", "access", "phase", "touched", "_allowed")

    def __init__(self, node: NodeId, state: SystemState, local: LocalState, rng, acc: Access):
        self.node = node
        self.state = state
        self.local = local
        self.rng = rng
        self.access = acc
        self.phase = "read"
        self.touched: set[NodeId] = set()
        self._allowed = ACCESS_TABLE[node.kind]

    def _deny(self, msg: str):
        raise CapabilityError(msg, self.node)

    # read phase ---------------------------------------------------------
    def read(self, c: str):
        c = NodeId(c)
        if self.phase != "read":
            self._deny(f"read of {c} outside the read phase")
        if c not in self.access.readable:
            self._deny(f"no read edge to {c}")
        if c.kind is NodeKind.ENVIRONMENT:
            out = {k: _copied(v) for k, v in self.state.environments[c].items()}
            self.local.env[c] = out
        else:
            out = self.state.particles[c].copy()
            self.local.particles[c] = out
        return out

    def read_all(self) -> None:
        for c in sorted(self.access.readable):
            self.read(c)

    # local views --------------------------------------------------------
    def bag(self, c: str) -> ParticleBag:
        """Local copy of a particle container read this transition."""
        try:
            return self.local.particles[NodeId(c)]
        except KeyError:
            self._deny(f"{c} was not read")

    def env(self, c: str) -> dict[str, Any]:
        try:
            return self.local.env[NodeId(c)]
        except KeyError:
            self._deny(f"{c} was not read")

    @property
    def scratch(self) -> dict[str, Any]:
        return self.local.scratch

    # pull / push --------------------------------------------------------
    def _modify(self, c: NodeId, want: str, allowed: frozenset[NodeId]) -> None:
        if self.phase != want:
            self._deny(f"{want} on {c} during {self.phase}")
        if c not in allowed:
            self._deny(f"no {want} edge to {c}")
        if c.kind not in self._allowed:
            self._deny(f"{self.node.kind.word} may not {want} a {c.kind.word}")

    def remove(self, c: str, items) -> None:
        c = NodeId(c)
        self._modify(c, "pull", self.access.pullable)
        container_remove(self.state, c, items)
        self.touched.add(c)

    def remove_all(self, c: str) -> ParticleBag | dict:
        """Empty a container and return what was in it."""
        c = NodeId(c)
        self._modify(c, "pull", self.access.pullable)
        if c.kind is NodeKind.ENVIRONMENT:
            store = self.state.environments[c]
            out = dict(store)
            store.clear()
        else:
            b = self.state.particles[c]
            out = b.copy()
            b._c = {}
        self.touched.add(c)
        return out

    def add(self, c: str, items) -> None:
        c = NodeId(c)
        self._modify(c, "push", self.access.pushable)
        container_add(self.state, c, items)
        self.touched.add(c)

    def choose(self, target: str) -> None:
        self.local.scratch["next"] = NodeId(target)


# --------------------------------------------------------------------------
# expansions


class Expansion(Behavior):
    """An action whose transition is a micro graph run until it terminates.

    Micro containers that share a name with a container the macro node reads
    are bound to it (or mapped explicitly via ``bind``); all other micro
    containers are created empty and dropped on exit.
    """

    kind = NodeKind.ACTION

    def __init__(self, graph: GraphDef, behaviors: Mapping[str, Behavior], bind: Mapping[str, str] | None = None):
        self.graph = graph
        self.behaviors = dict(behaviors)
        self.bind = {NodeId(k): NodeId(v) for k, v in (bind or {}).items()}
        self._bound: dict[NodeId, Behavior] | None = None


@dataclass
class TransitionEvent:
    step: int
    node: str
    p: float
    r: float | None
    gate: bool
    touched: list[str]
    next: str | None
    depth: int = 0

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "depth": self.depth,
            "node": self.node,
            "p": self.p,
            "r": self.r,
            "gate": self.gate,
            "touched": self.touched,
            "next": self.next,
        }

    def line(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass
class RunConfig:
    seed: int = 0
    max_transitions: int | None = None  # top-level transitions
    max_events: int | None = None  # all levels; checked between top-level transitions
    log_micro: bool = False
    keep_log: bool = True
    max_micro: int = 50_000_000

    def __post_init__(self):
        for name in ("max_transitions", "max_events"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")


@dataclass
class RunResult:
    state: SystemState
    events: list[TransitionEvent]
    transitions: int
    total_events: int
    halted: bool

    def log_lines(self) -> list[str]:
        return [e.line() for e in self.events]


@dataclass
class Frame:
    graph: GraphDef
    state: SystemState
    bound: frozenset[NodeId] = field(default_factory=frozenset)


def bind(g: GraphDef, behaviors: Mapping[str, Behavior]) -> dict[NodeId, Behavior]:
    """Resolve every non-terminal control node to a behavior; node id wins over behavior name."""
    out: dict[NodeId, Behavior] = {}
    for c in g.controls:
        if c.kind is NodeKind.TERMINATION:
            continue
        node = g.by_id[c]
        b = behaviors.get(c)
        if b is None:
            b = behaviors.get(node.behavior_key)
        if b is None:
            raise MissingBehaviorError(f"no behavior for {c} (looked up {c} and {node.behavior_key})", c)
        if b.kind is not None and b.kind is not c.kind:
            raise MissingBehaviorError(f"behavior is for {b.kind.word} nodes", c)
        extra = type(b).overridden() - HOOKS_BY_KIND[c.kind]
        if extra and not isinstance(b, Expansion):
            raise MissingBehaviorError(f"{c.kind.word} nodes cannot define {', '.join(sorted(extra))}", c)
        if isinstance(b, Expansion):
            _check_expansion(g, c, b)
        out[c] = b
    return out


def _bound_map(g: GraphDef, c: NodeId, exp: Expansion) -> dict[NodeId, NodeId]:
    acc = g._access[c]
    out = {}
    for m in exp.graph.containers:
        outer = exp.bind.get(m, m)
        if outer in acc.readable:
            out[m] = outer
        elif m in exp.bind:
            raise MissingBehaviorError(f"expansion binds {m} to {outer} without a read edge", c)
    return out


def _check_expansion(g: GraphDef, c: NodeId, exp: Expansion) -> None:
    bad = hard(validate(exp.graph))
    if bad:
        raise GraphError(f"micro graph of {c}: " + "; ".join(map(str, bad)))
    acc = g._access[c]
    bmap = _bound_map(g, c, exp)
    for e in exp.graph.info_edges:
        outer = bmap.get(e.container)
        if outer is None or e.kind.value == "read":
            continue
        allowed = acc.pullable if e.kind.value == "pull" else acc.pushable
        if outer not in allowed:
            raise CapabilityError(f"micro node {e.control} may {e.kind.value} {outer} but {c} has no such edge", c)
    if exp._bound is None:
        exp._bound = bind(exp.graph, exp.behaviors)


class Runner:
    """Executes a graph; keeps the frame stack used by expansions."""

    def __init__(
        self,
        g: GraphDef,
        behaviors: Mapping[str, Behavior],
        rng: np.random.Generator,
        config: RunConfig | None = None,
        on_event: Callable[[TransitionEvent, "Runner"], None] | None = None,
    ):
        self.graph = g
        self.bound = bind(g, behaviors)
        self.rng = rng
        self.config = config or RunConfig()
        self.on_event = on_event
        self.local = LocalState()
        self.frames: list[Frame] = []
        self.events: list[TransitionEvent] = []
        self.counter = 0
        self.root: SystemState | None = None

    # ------------------------------------------------------------------
    def step(self, state: SystemState, g: GraphDef | None = None, bound=None, depth: int = 0) -> TransitionEvent:
        g = g or self.graph
        bound = bound if bound is not None else self.bound
        local = self.local
        c = state.current
        if not local.is_empty():
            raise LocalStateError("local state not empty at transition start", c)
        if c.kind is NodeKind.TERMINATION:
            state.halted = True
            ev = TransitionEvent(self.counter, str(c), 0.0, None, True, [], None, depth)
            self._emit(ev)
            return ev
        b = bound[c]
        if isinstance(b, Expansion):
            p, r, gate, touched = 0.0, None, True, self._expand(state, g, c, b, depth)
        else:
            ctx = Context(c, state, local, self.rng, g._access[c])
            b.read(ctx)
            ctx.phase = "check"
            p = float(b.check(ctx))
            r = None
            gate = True
            if type(b).check is not Behavior.check:
                r = 1.0 - float(self.rng.random())
                gate = p < r
            if gate:
                ctx.phase = "pull"
                b.pull(ctx)
                ctx.phase = "process"
                b.process(ctx)
                ctx.phase = "push"
                b.push(ctx)
            ctx.phase = "next"
            touched = sorted(ctx.touched)
        state.current = self._next(g, c, local)
        local.clear()
        if not local.is_empty():
            raise LocalStateError("local state survived next", c)
        ev = TransitionEvent(self.counter, str(c), p, r, gate, [str(t) for t in touched], str(state.current), depth)
        self._emit(ev)
        return ev

    def _emit(self, ev: TransitionEvent) -> None:
        self.counter += 1
        if self.config.keep_log and (ev.depth == 0 or self.config.log_micro):
            self.events.append(ev)
        if self.on_event is not None:
            self.on_event(ev, self)

    @staticmethod
    def _next(g: GraphDef, c: NodeId, local: LocalState) -> NodeId:
        ts = g._targets[c]
        if c.kind is NodeKind.DECISION:
            choice = local.env.get(LOCAL, {}).get("next")
            if choice is None or choice not in ts:
                raise BadDecisionError(f"chose {choice!r}, targets are {sorted(ts)}", c)
            return choice
        if len(ts) != 1:
            raise NoTargetError(f"expected one target, found {len(ts)}", c)
        return next(iter(ts))

    def _expand(self, state: SystemState, g: GraphDef, c: NodeId, exp: Expansion, depth: int) -> list[NodeId]:
        mg = exp.graph
        bmap = _bound_map(g, c, exp)
        parts, envs = {}, {}
        for m in mg.ids(NodeKind.TANK, NodeKind.SAMPLE):
            parts[m] = state.particles[bmap[m]] if m in bmap else ParticleBag()
        for m in mg.ids(NodeKind.ENVIRONMENT):
            envs[m] = state.environments[bmap[m]] if m in bmap else {}
        micro = SystemState(mg.start, parts, envs)
        before = {m: _fingerprint(micro, m) for m in bmap}
        self.frames.append(Frame(mg, micro, frozenset(bmap)))
        try:
            n = 0
            while not micro.halted:
                self.step(micro, mg, exp._bound, depth + 1)
                n += 1
                if n > self.config.max_micro:
                    raise EngineError(f"micro graph did not terminate within {n} transitions", c)
        finally:
            self.frames.pop()
        return sorted(bmap[m] for m in bmap if _fingerprint(micro, m) != before[m])

    # ------------------------------------------------------------------
    def combined_total(self, root: SystemState, weight: Callable[[Any], int]) -> int:
        """Weighted particle total over the root state plus every live micro container."""
        total = root.total(weight)
        for f in self.frames:
            for m, b in f.state.particles.items():
                if m not in f.bound:
                    total += sum(weight(p) * n for p, n in b.items())
        return total

    def run(self, state: SystemState) -> RunResult:
        cfg = self.config
        self.root = state
        transitions = 0
        while not state.halted:
            if cfg.max_transitions is not None and transitions >= cfg.max_transitions:
                break
            if cfg.max_events is not None and self.counter >= cfg.max_events:
                break
            self.step(state)
            transitions += 1
        return RunResult(state, self.events, transitions, self.counter, state.halted)


def _fingerprint(state: SystemState, c: NodeId):
    if c.kind is NodeKind.ENVIRONMENT:
        return json.dumps(jsonable(state.environments[c]), sort_keys=True)
    return dict(state.particles[c].items())


# --------------------------------------------------------------------------
# functional entry points


def step(state: SystemState, g: GraphDef, behaviors: Mapping[str, Behavior], rng) -> tuple[SystemState, TransitionEvent]:
    """One transition of ``state`` in place; returns the state and its event."""
    runner = Runner(g, behaviors, rng)
    ev = runner.step(state)
    return state, ev


def run(
    g: GraphDef,
    behaviors: Mapping[str, Behavior],
    initial: SystemState,
    config: RunConfig | None = None,
    on_event: Callable[[TransitionEvent, Runner], None] | None = None,
) -> RunResult:
    bad = hard(validate(g))
    if bad:
        raise GraphError("graph has hard violations: " + "; ".join(map(str, bad)))
    config = config or RunConfig()
    runner = Runner(g, behaviors, np.random.default_rng(config.seed), config, on_event)
    state = initial.copy()
    state.current = g.start if initial.current is None else initial.current
    return runner.run(state)


def write_log(events: Iterable[TransitionEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(e.line() + "\n")
