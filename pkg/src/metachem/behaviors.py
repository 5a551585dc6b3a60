"""Reusable node behaviors: counters, movers, pickers and simple decisions."""

from __future__ import annotations

from bisect import bisect_right
from itertools import accumulate
from typing import Any, Callable

from .containers import ParticleBag
from .engine import BadDecisionError, Behavior, Context
from .graph import NodeId, NodeKind


def pick(b: ParticleBag, k: int, rng) -> ParticleBag:
    """``k`` instances drawn uniformly without replacement (``k`` capped at the bag size)."""
    counts = dict(b.items())
    total = sum(counts.values())
    k = min(k, total)
    out: dict[Any, int] = {}
    for _ in range(k):
        keys = list(counts)
        cum = list(accumulate(counts.values()))
        u = int(rng.integers(total))
        p = keys[bisect_right(cum, u)]
        out[p] = out.get(p, 0) + 1
        counts[p] -= 1
        if not counts[p]:
            del counts[p]
        total -= 1
    return ParticleBag(out)


def pick_one(b: ParticleBag, rng) -> Any:
    keys = list(b)
    if len(keys) == len(b):
        return keys[int(rng.integers(len(keys)))]
    cum = list(accumulate(b.count(p) for p in keys))
    return keys[bisect_right(cum, int(rng.integers(cum[-1])))]


class counter_observer(Behavior):
    """Increment one environment variable by remove-then-add; absent starts at 0."""

    kind = NodeKind.OBSERVER

    def __init__(self, env: str, var: str, increment: float = 1):
        self.env = NodeId(env)
        self.var = var
        self.increment = increment

    def pull(self, ctx: Context) -> None:
        if self.var in ctx.env(self.env):
            ctx.remove(self.env, [self.var])

    def process(self, ctx: Context) -> None:
        ctx.scratch["value"] = ctx.env(self.env).get(self.var, 0) + self.increment

    def push(self, ctx: Context) -> None:
        ctx.add(self.env, {self.var: ctx.scratch["value"]})


class reset_observer(Behavior):
    """Set one environment variable to a constant."""

    kind = NodeKind.OBSERVER

    def __init__(self, env: str, var: str, value: Any = 0):
        self.env = NodeId(env)
        self.var = var
        self.value = value

    def pull(self, ctx: Context) -> None:
        if self.var in ctx.env(self.env):
            ctx.remove(self.env, [self.var])

    def push(self, ctx: Context) -> None:
        ctx.add(self.env, {self.var: self.value})


class move_all_sampler(Behavior):
    kind = NodeKind.SAMPLER

    def __init__(self, src: str, dst: str):
        self.src = NodeId(src)
        self.dst = NodeId(dst)

    def read(self, ctx: Context) -> None:
        ctx.read(self.src)

    def pull(self, ctx: Context) -> None:
        b = ctx.bag(self.src)
        if b:
            ctx.remove(self.src, b)

    def push(self, ctx: Context) -> None:
        b = ctx.bag(self.src)
        if b:
            ctx.add(self.dst, b)


class random_pick_sampler(Behavior):
    kind = NodeKind.SAMPLER

    def __init__(self, src: str, dst: str, k: int = 1):
        self.src = NodeId(src)
        self.dst = NodeId(dst)
        self.k = k

    def read(self, ctx: Context) -> None:
        ctx.read(self.src)

    def pull(self, ctx: Context) -> None:
        chosen = pick(ctx.bag(self.src), self.k, ctx.rng)
        ctx.local.particles[self.dst] = chosen
        if chosen:
            ctx.remove(self.src, chosen)

    def push(self, ctx: Context) -> None:
        chosen = ctx.local.particles[self.dst]
        if chosen:
            ctx.add(self.dst, chosen)


class threshold_decision(Behavior):
    """Route to ``if_done`` once ``var`` has reached ``bound``."""

    kind = NodeKind.DECISION

    def __init__(self, env: str, var: str, bound: float, if_done: str, otherwise: str):
        self.env = NodeId(env)
        self.var = var
        self.bound = bound
        self.if_done = NodeId(if_done)
        self.otherwise = NodeId(otherwise)

    def read(self, ctx: Context) -> None:
        ctx.read(self.env)

    def process(self, ctx: Context) -> None:
        store = ctx.env(self.env)
        if self.var not in store:
            raise BadDecisionError(f"{self.env} has no variable {self.var}", ctx.node)
        ctx.choose(self.if_done if store[self.var] >= self.bound else self.otherwise)


class predicate_decision(Behavior):
    """Route by an arbitrary predicate over the local state."""

    kind = NodeKind.DECISION

    def __init__(self, test: Callable[[Context], bool], if_true: str, if_false: str):
        self.test = test
        self.if_true = NodeId(if_true)
        self.if_false = NodeId(if_false)

    def process(self, ctx: Context) -> None:
        ctx.choose(self.if_true if self.test(ctx) else self.if_false)
