"""Boid state, recipes and the flocking arithmetic."""

from __future__ import annotations

import math
import re
from typing import Iterable, NamedTuple, Sequence

import numpy as np

SEP_EPS = 1e-6


class RecipeParams(NamedTuple):
    R: float
    Vn: float
    Vm: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    def problems(self) -> list[str]:
        out = []
        if any(x < 0 for x in self):
            out.append("negative parameter")
        if self.Vn > self.Vm:
            out.append(f"Vn {self.Vn} exceeds Vm {self.Vm}")
        if not 0 <= self.c5 <= 1:
            out.append("c5 outside [0, 1]")
        return out


PARAM_NAMES = RecipeParams._fields
VN, VM = 1, 2


class Boid:
    """Immutable boid; ``vnext`` holds the velocity computed by flocking until the move."""

    __slots__ = ("id", "x", "v", "params", "vnext", "_key", "_hash")

    def __init__(self, id: int, x, v, params: RecipeParams, vnext=None):
        self.id = int(id)
        self.x = (float(x[0]), float(x[1]))
        self.v = (float(v[0]), float(v[1]))
        self.params = RecipeParams(*map(float, params))
        self.vnext = None if vnext is None else (float(vnext[0]), float(vnext[1]))
        self._key = (self.id, self.x, self.v, self.params, self.vnext)
        self._hash = hash(self._key)

    def replace(self, **kw) -> "Boid":
        d = {"id": self.id, "x": self.x, "v": self.v, "params": self.params, "vnext": self.vnext}
        d.update(kw)
        return Boid(**d)

    @property
    def speed(self) -> float:
        return math.hypot(*self.v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Boid):
            return NotImplemented
        return self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Boid({self.id}, x=({self.x[0]:.3f}, {self.x[1]:.3f}), v=({self.v[0]:.3f}, {self.v[1]:.3f}))"

    def to_json(self) -> dict:
        out = {"id": self.id, "x": list(self.x), "v": list(self.v), "params": list(self.params)}
        if self.vnext is not None:
            out["vnext"] = list(self.vnext)
        return out


# --------------------------------------------------------------------------
# recipes

_LINE = re.compile(r"^\s*(-?\d+)\s*\*\s*\((.*)\)\s*$")


class RecipeError(ValueError):
    pass


def parse_recipe(text: str) -> list[tuple[int, RecipeParams]]:
    """Lines of ``COUNT * (p1, ..., p8)``; blank lines and ``#`` comments ignored."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip().rstrip(",")
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise RecipeError(f"line {lineno}: expected 'COUNT * (p1, ..., p8)'")
        count = int(m.group(1))
        if count < 0:
            raise RecipeError(f"line {lineno}: negative count {count}")
        try:
            vals = [float(x) for x in m.group(2).split(",")]
        except ValueError:
            raise RecipeError(f"line {lineno}: non-numeric parameter") from None
        if len(vals) != 8:
            raise RecipeError(f"line {lineno}: expected 8 parameters, got {len(vals)}")
        out.append((count, RecipeParams(*vals)))
    return out


def format_recipe(recipe: Iterable[tuple[int, RecipeParams]]) -> str:
    return "".join(f"{n} * ({', '.join(repr(float(x)) for x in p)})\n" for n, p in recipe)


def population(recipe: Sequence[tuple[int, RecipeParams]]) -> int:
    return sum(n for n, _ in recipe)


# --------------------------------------------------------------------------
# flocking terms


class Averages(NamedTuple):
    x: tuple[float, float]
    v: tuple[float, float]
    s: tuple[float, float]
    n: int


def neighbors(b: Boid, others: Iterable[Boid]) -> list[Boid]:
    """Other boids within ``b.params.R``, boundary included."""
    r2 = b.params.R * b.params.R
    bx, by = b.x
    out = []
    for o in others:
        if o.id == b.id:
            continue
        dx = o.x[0] - bx
        dy = o.x[1] - by
        if dx * dx + dy * dy <= r2:
            out.append(o)
    return out


def averages(b: Boid, nbrs: Sequence[Boid]) -> Averages | None:
    n = len(nbrs)
    if n == 0:
        return None
    sx = sy = vx = vy = px = py = 0.0
    bx, by = b.x
    for o in nbrs:
        sx += o.x[0]
        sy += o.x[1]
        vx += o.v[0]
        vy += o.v[1]
        dx = bx - o.x[0]
        dy = by - o.x[1]
        d2 = max(dx * dx + dy * dy, SEP_EPS)
        px += dx / d2
        py += dy / d2
    return Averages((sx / n, sy / n), (vx / n, vy / n), (px / n, py / n), n)


def cohesion(b: Boid, avg: Averages) -> tuple[float, float]:
    c1 = b.params.c1
    return c1 * (avg.x[0] - b.x[0]), c1 * (avg.x[1] - b.x[1])


def alignment(b: Boid, avg: Averages) -> tuple[float, float]:
    c2 = b.params.c2
    return c2 * (avg.v[0] - b.v[0]), c2 * (avg.v[1] - b.v[1])


def separation(b: Boid, avg: Averages) -> tuple[float, float]:
    c3 = b.params.c3
    return c3 * avg.s[0], c3 * avg.s[1]


def whim(rng, bound: float) -> tuple[float, float]:
    u = rng.uniform(-bound, bound, size=2)
    return float(u[0]), float(u[1])


def random_walk(rng, bound: float) -> tuple[float, float]:
    return whim(rng, bound)


def flock_accel(b: Boid, avg: Averages, rng, whim_bound: float) -> tuple[float, float]:
    terms = (cohesion(b, avg), alignment(b, avg), separation(b, avg), whim(rng, whim_bound))
    return sum(t[0] for t in terms), sum(t[1] for t in terms)


def pacekeep(v, a, params: RecipeParams, rng=None) -> tuple[float, float]:
    """Accelerate, cap at Vm, then blend toward Vn by c5."""
    wx, wy = v[0] + a[0], v[1] + a[1]
    n = math.hypot(wx, wy)
    if n > 0:
        f = min(params.Vm / n, 1.0)
        wx, wy = f * wx, f * wy
        n = math.hypot(wx, wy)
    c5 = params.c5
    if n == 0:
        if rng is None or c5 * params.Vn == 0:
            return 0.0, 0.0
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        return c5 * params.Vn * math.cos(theta), c5 * params.Vn * math.sin(theta)
    k = c5 * params.Vn / n + (1.0 - c5)
    return k * wx, k * wy


def move(b: Boid, dt: float = 1.0) -> Boid:
    v = b.vnext if b.vnext is not None else b.v
    return Boid(b.id, (b.x[0] + v[0] * dt, b.x[1] + v[1] * dt), v, b.params)


def collisions(boids: Sequence[Boid], radius: float) -> list[tuple[int, int]]:
    """Unordered id pairs closer than ``radius``, ascending."""
    if len(boids) < 2:
        return []
    ids = np.array([b.id for b in boids])
    xy = np.array([b.x for b in boids])
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1)
    i, j = np.nonzero(np.triu(d2 < radius * radius, k=1))
    pairs = sorted((int(min(ids[a], ids[b])), int(max(ids[a], ids[b]))) for a, b in zip(i, j))
    return pairs


def exchange_params(a: RecipeParams, b: RecipeParams, rng) -> tuple[RecipeParams, RecipeParams]:
    """Swap k random slots (k uniform in 1..8); skip a Vn/Vm swap that leaves either side with Vn > Vm."""
    pa, pb = list(a), list(b)
    k = int(rng.integers(1, 9))
    for slot in rng.choice(8, size=k, replace=False):
        slot = int(slot)
        na, nb = pa.copy(), pb.copy()
        na[slot], nb[slot] = pb[slot], pa[slot]
        if slot in (VN, VM) and (na[VN] > na[VM] or nb[VN] > nb[VM]):
            continue
        pa, pb = na, nb
    return RecipeParams(*pa), RecipeParams(*pb)
