"""Particle bags, environment stores and the global/local state they make up.

Containers are only touched through read (copy out), add and remove.
Particles must be immutable and hashable; equality is the bag key.
"""

from __future__ import annotations

import copy
from collections import Counter
import dataclasses
import json
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .graph import GraphDef, NodeId, NodeKind

LOCAL = NodeId("V:_local")


class ContainerError(Exception):
    code = "CONTAINER"


class UnknownContainer(ContainerError):
    code = "UNKNOWN_CONTAINER"


class NotPresent(ContainerError):
    code = "NOT_PRESENT"


class EnvCollision(ContainerError):
    code = "ENV_COLLISION"


class ParticleBag:
    """Multiset of particles; every stored count is at least one."""

    __slots__ = ("_c",)

    def __init__(self, items: Iterable[Any] | Mapping[Any, int] = ()):
        self._c: dict[Any, int] = {}
        if isinstance(items, ParticleBag):
            self._c = dict(items._c)
        elif isinstance(items, Mapping):
            for p, n in items.items():
                if n < 0:
                    raise ValueError(f"negative count for {p!r}")
                if n:
                    self._c[p] = self._c.get(p, 0) + n
        else:
            self._c = dict(Counter(items))

    def copy(self) -> "ParticleBag":
        new = ParticleBag.__new__(ParticleBag)
        new._c = self._c.copy()
        return new

    def count(self, p: Any) -> int:
        return self._c.get(p, 0)

    def __len__(self) -> int:
        return sum(self._c.values())

    @property
    def size(self) -> int:
        return len(self)

    def __bool__(self) -> bool:
        return bool(self._c)

    def __iter__(self) -> Iterator[Any]:
        """Distinct particles in insertion order."""
        return iter(self._c)

    def __contains__(self, p: Any) -> bool:
        return p in self._c

    def items(self):
        return self._c.items()

    def elements(self) -> list[Any]:
        """Every particle instance, repeated by count, in insertion order."""
        return [p for p, n in self._c.items() for _ in range(n)]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ParticleBag):
            return self._c == other._c
        return NotImplemented

    __hash__ = None  # mutable

    def __repr__(self) -> str:
        return f"ParticleBag({self._c!r})"

    # in-place updates used by the container interface
    def _add(self, other: "ParticleBag") -> None:
        if not self._c:
            self._c = other._c.copy()
            return
        c = self._c
        for p, n in other._c.items():
            c[p] = c.get(p, 0) + n

    def _remove(self, other: "ParticleBag") -> None:
        if other._c == self._c:
            self._c = {}
            return
        if not subbag(other, self):
            missing = [p for p, n in other._c.items() if self._c.get(p, 0) < n]
            raise NotPresent(f"not present: {missing[:3]!r}{'...' if len(missing) > 3 else ''}")
        c = self._c
        for p, n in other._c.items():
            left = c[p] - n
            if left:
                c[p] = left
            else:
                del c[p]

    def __add__(self, other: "ParticleBag") -> "ParticleBag":
        out = self.copy()
        out._add(other)
        return out

    def __sub__(self, other: "ParticleBag") -> "ParticleBag":
        out = self.copy()
        out._remove(other)
        return out


def bag(*items: Any) -> ParticleBag:
    return ParticleBag(items)


def subbag(a: ParticleBag, b: ParticleBag) -> bool:
    """True iff no particle occurs more often in ``a`` than in ``b``."""
    bc = b._c
    return all(n <= bc.get(p, 0) for p, n in a._c.items())


EnvStore = dict  # variable name -> value


@dataclass
class SystemState:
    """Current control node plus the contents of every container."""

    current: NodeId
    particles: dict[NodeId, ParticleBag]
    environments: dict[NodeId, dict[str, Any]]
    halted: bool = False

    @classmethod
    def for_graph(
        cls,
        g: GraphDef,
        particles: Mapping[str, Iterable[Any] | ParticleBag] | None = None,
        environments: Mapping[str, Mapping[str, Any]] | None = None,
    ) -> "SystemState":
        """Empty containers for every container node of ``g``, then fill from the maps."""
        parts = {c: ParticleBag() for c in g.ids(NodeKind.TANK, NodeKind.SAMPLE)}
        envs: dict[NodeId, dict[str, Any]] = {c: {} for c in g.ids(NodeKind.ENVIRONMENT)}
        for name, content in (particles or {}).items():
            c = NodeId(name)
            if c not in parts:
                raise UnknownContainer(f"{c} is not a particle container of this graph")
            parts[c] = ParticleBag(content)
        for name, store in (environments or {}).items():
            c = NodeId(name)
            if c not in envs:
                raise UnknownContainer(f"{c} is not an environment container of this graph")
            envs[c] = dict(store)
        return cls(g.start, parts, envs)

    def copy(self) -> "SystemState":
        return SystemState(
            self.current,
            {k: v.copy() for k, v in self.particles.items()},
            copy.deepcopy(self.environments),
            self.halted,
        )

    def total(self, weight: Callable[[Any], int] = lambda p: 1) -> int:
        """Sum of ``weight`` over every particle instance in every container."""
        return sum(weight(p) * n for b in self.particles.values() for p, n in b.items())


@dataclass
class LocalState:
    """Per-transition scratch copy of whatever the node read."""

    particles: dict[NodeId, ParticleBag] = field(default_factory=dict)
    env: dict[NodeId, dict[str, Any]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not self.particles and not self.env

    def clear(self) -> None:
        self.particles.clear()
        self.env.clear()

    @property
    def scratch(self) -> dict[str, Any]:
        """The reserved ``V:_local`` store (decision choice, picks made in pull)."""
        return self.env.setdefault(LOCAL, {})


_ATOMIC = (int, float, complex, str, bool, type(None), np.generic)


def _immutable(v: Any) -> bool:
    if type(v) is float or isinstance(v, _ATOMIC):
        return True
    return isinstance(v, (tuple, frozenset)) and all(map(_immutable, v))


def _copied(v: Any) -> Any:
    return v if _immutable(v) else copy.deepcopy(v)


def _check(state: SystemState, c: NodeId) -> NodeKind:
    if c in state.particles:
        return NodeKind.TANK
    if c in state.environments:
        return NodeKind.ENVIRONMENT
    raise UnknownContainer(f"unknown container {c}")


def container_read(state: SystemState, container: str):
    """Copy of the contents; the state is left untouched."""
    c = NodeId(container)
    if _check(state, c) is NodeKind.ENVIRONMENT:
        return copy.deepcopy(state.environments[c])
    return state.particles[c].copy()


def container_add(state: SystemState, container: str, items) -> SystemState:
    c = NodeId(container)
    if _check(state, c) is NodeKind.ENVIRONMENT:
        store = state.environments[c]
        clash = sorted(set(items) & set(store))
        if clash:
            raise EnvCollision(f"{c} already holds {', '.join(clash)}")
        store.update({k: _copied(v) for k, v in dict(items).items()})
    else:
        state.particles[c]._add(items if isinstance(items, ParticleBag) else ParticleBag(items))
    return state


def container_remove(state: SystemState, container: str, items) -> SystemState:
    c = NodeId(container)
    if _check(state, c) is NodeKind.ENVIRONMENT:
        store = state.environments[c]
        names = list(items)
        missing = [n for n in names if n not in store]
        if missing:
            raise NotPresent(f"{c} has no variable {', '.join(map(str, missing))}")
        for n in names:
            del store[n]
    else:
        state.particles[c]._remove(items if isinstance(items, ParticleBag) else ParticleBag(items))
    return state


# --------------------------------------------------------------------------
# tank partitions: multi-tank containers hold (tank_index, particle) pairs


def untag(p: Any) -> tuple[int | None, Any]:
    if type(p) is tuple:
        return p[0], p[1]
    return None, p


def retag(tag: int | None, p: Any) -> Any:
    return p if tag is None else (tag, p)


def partition(b: ParticleBag) -> dict[int | None, ParticleBag]:
    raw: dict[int | None, dict] = {}
    for p, n in b.items():
        t = p[0] if type(p) is tuple else None
        d = raw.get(t)
        if d is None:
            d = raw[t] = {}
        d[p] = n
    out = {}
    for t, d in raw.items():
        bag = out[t] = ParticleBag.__new__(ParticleBag)
        bag._c = d
    return out


# --------------------------------------------------------------------------
# snapshots


def jsonable(obj: Any) -> Any:
    """Deterministic JSON-ready form of particles and environment values."""
    if obj is None or isinstance(obj, (bool, str)):
        return str(obj) if isinstance(obj, NodeId) else obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if dataclasses.is_dataclass(obj):
        return {"__type__": type(obj).__name__} | {
            f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
        }
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, ParticleBag):
        return bag_json(obj)
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted((jsonable(x) for x in obj), key=lambda x: json.dumps(x, sort_keys=True))
    return repr(obj)


def bag_json(b: ParticleBag) -> list:
    rows = [[jsonable(p), n] for p, n in b.items()]
    rows.sort(key=lambda r: json.dumps(r[0], sort_keys=True))
    return rows


def snapshot(state: SystemState) -> str:
    """Canonical text form of a state; equal states give equal strings."""
    doc = {
        "current": str(state.current),
        "halted": state.halted,
        "particles": {str(c): bag_json(b) for c, b in sorted(state.particles.items())},
        "environments": {str(c): jsonable(e) for c, e in sorted(state.environments.items())},
    }
    return json.dumps(doc, sort_keys=True, indent=1)
