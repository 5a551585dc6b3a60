"""Static MetaChem graphs: typed nodes, control edges, information edges.

A graph definition file is line oriented::

    # comment
    [nodes]
    s:load       sampler  start
    s:sampler_2  sampler  behavior=sampler
    T:tanks      tank
    [control]
    s:load -> o:time
    [info]
    s:load read T:init
    s:load pull T:init
    a:split read,pull,push S:composite

Each control node instance has a unique id; instances sharing a ``behavior``
name run the same hooks against their own edges.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

_LABEL = re.compile(r"[A-Za-z0-9_]+\Z")


class NodeKind(enum.Enum):
    TANK = "T"
    SAMPLE = "S"
    ENVIRONMENT = "V"
    SAMPLER = "s"
    OBSERVER = "o"
    DECISION = "d"
    ACTION = "a"
    TERMINATION = "t"

    @property
    def is_container(self) -> bool:
        return self in CONTAINER_KINDS

    @property
    def is_control(self) -> bool:
        return self in CONTROL_KINDS

    @property
    def word(self) -> str:
        return self.name.lower()


CONTAINER_KINDS = frozenset({NodeKind.TANK, NodeKind.SAMPLE, NodeKind.ENVIRONMENT})
CONTROL_KINDS = frozenset(NodeKind) - CONTAINER_KINDS
PARTICLE_KINDS = frozenset({NodeKind.TANK, NodeKind.SAMPLE})

# Which container kinds each control kind may pull from / push to.
ACCESS_TABLE: Mapping[NodeKind, frozenset[NodeKind]] = {
    NodeKind.ACTION: frozenset({NodeKind.SAMPLE, NodeKind.ENVIRONMENT}),
    NodeKind.DECISION: frozenset(),
    NodeKind.SAMPLER: frozenset({NodeKind.TANK, NodeKind.SAMPLE}),
    NodeKind.OBSERVER: frozenset({NodeKind.ENVIRONMENT}),
    NodeKind.TERMINATION: frozenset(),
}

_KIND_BY_NAME = {k.word: k for k in NodeKind} | {k.value: k for k in NodeKind}


class NodeId(str):
    """Two-part node name such as ``S:composite``; the tag fixes the kind."""

    __slots__ = ()

    def __new__(cls, value: str) -> "NodeId":
        if type(value) is NodeId:
            return value
        hit = _INTERNED.get(value)
        if hit is not None:
            return hit
        tag, sep, label = value.partition(":")
        if not sep or len(tag) != 1 or tag not in _TAGS:
            raise ValueError(f"bad node name {value!r}: expected X:label with X in {''.join(sorted(_TAGS))}")
        if not _LABEL.match(label):
            raise ValueError(f"bad node label in {value!r}: use letters, digits and underscores")
        out = super().__new__(cls, value)
        if len(_INTERNED) < 100_000:
            _INTERNED[str(value)] = out
        return out

    @property
    def tag(self) -> str:
        return self[0]

    @property
    def label(self) -> str:
        return self[2:]

    @property
    def kind(self) -> NodeKind:
        return _KIND_BY_TAG[self[0]]


_TAGS = frozenset(k.value for k in NodeKind)
_KIND_BY_TAG = {k.value: k for k in NodeKind}
_INTERNED: dict[str, NodeId] = {}


class InfoKind(enum.Enum):
    READ = "read"
    PULL = "pull"
    PUSH = "push"


@dataclass(frozen=True, order=True)
class Node:
    id: NodeId
    behavior: str | None = None
    owner: str | None = None

    @property
    def kind(self) -> NodeKind:
        return self.id.kind

    @property
    def behavior_key(self) -> str:
        """Registry key of the hooks bound to this node, e.g. ``s:sampler``."""
        return f"{self.id.tag}:{self.behavior or self.id.label}"


@dataclass(frozen=True, order=True)
class ControlEdge:
    source: NodeId
    target: NodeId


@dataclass(frozen=True)
class InfoEdge:
    control: NodeId
    container: NodeId
    kind: InfoKind

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.control, self.container, self.kind.value)


@dataclass(frozen=True)
class Access:
    readable: frozenset[NodeId]
    pullable: frozenset[NodeId]
    pushable: frozenset[NodeId]


@dataclass(frozen=True)
class GraphDef:
    nodes: frozenset[Node]
    control_edges: frozenset[ControlEdge]
    info_edges: frozenset[InfoEdge]
    start: NodeId
    macro: bool = False  # macro-level pseudo-code: actions may be drawn editing tanks

    @cached_property
    def by_id(self) -> dict[NodeId, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _targets(self) -> dict[NodeId, frozenset[NodeId]]:
        out: dict[NodeId, set[NodeId]] = {n: set() for n in self.by_id}
        for e in self.control_edges:
            out.setdefault(e.source, set()).add(e.target)
        return {k: frozenset(v) for k, v in out.items()}

    @cached_property
    def _access(self) -> dict[NodeId, Access]:
        sets: dict[NodeId, dict[InfoKind, set[NodeId]]] = {}
        for e in self.info_edges:
            sets.setdefault(e.control, {k: set() for k in InfoKind})[e.kind].add(e.container)
        empty = frozenset()
        out = {}
        for n in self.by_id:
            s = sets.get(n)
            if s is None:
                out[n] = Access(empty, empty, empty)
            else:
                out[n] = Access(
                    frozenset(s[InfoKind.READ]),
                    frozenset(s[InfoKind.PULL]),
                    frozenset(s[InfoKind.PUSH]),
                )
        return out

    def ids(self, *kinds: NodeKind) -> list[NodeId]:
        """Sorted node ids, optionally restricted to ``kinds``."""
        return sorted(n for n in self.by_id if not kinds or n.kind in kinds)

    @property
    def containers(self) -> list[NodeId]:
        return self.ids(*CONTAINER_KINDS)

    @property
    def controls(self) -> list[NodeId]:
        return self.ids(*CONTROL_KINDS)


class GraphError(Exception):
    """Unknown node or other misuse of a graph query."""


class GraphParseError(GraphError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def targets(g: GraphDef, c: str) -> frozenset[NodeId]:
    c = NodeId(c)
    if c not in g.by_id:
        raise GraphError(f"unknown node {c}")
    return g._targets[c]


def access(g: GraphDef, c: str) -> Access:
    c = NodeId(c)
    if c not in g.by_id:
        raise GraphError(f"unknown node {c}")
    if not c.kind.is_control:
        raise GraphError(f"{c} is not a control node")
    return g._access[c]


# --------------------------------------------------------------------------
# construction


def make_graph(
    nodes: Iterable[Node | str],
    control: Iterable[tuple[str, str]],
    info: Iterable[tuple[str, str, str]],
    start: str,
    macro: bool = False,
) -> GraphDef:
    """Build a GraphDef from plain tuples; ``info`` rows are (control, kinds, container)."""
    ns = frozenset(n if isinstance(n, Node) else Node(NodeId(n)) for n in nodes)
    ce = frozenset(ControlEdge(NodeId(a), NodeId(b)) for a, b in control)
    ie = frozenset(
        InfoEdge(NodeId(c), NodeId(b), InfoKind(k)) for c, ks, b in info for k in _split_kinds(ks)
    )
    return GraphDef(ns, ce, ie, NodeId(start), macro)


def _split_kinds(text: str) -> list[str]:
    if text in ("io", "all"):
        return ["read", "pull", "push"]
    return [k for k in text.split(",") if k]


def parse_graph(text: str) -> GraphDef:
    nodes: dict[NodeId, Node] = {}
    starts: list[NodeId] = []
    control: list[tuple[NodeId, NodeId, int]] = []
    info: list[tuple[NodeId, InfoKind, NodeId, int]] = []
    section = None
    macro = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in ("graph", "nodes", "control", "info"):
                raise GraphParseError(f"unknown section {line!r}", lineno)
            section = line[1:-1].strip()
            continue
        parts = line.split()
        if section is None:
            raise GraphParseError("content before first section", lineno)
        if section == "graph":
            if len(parts) != 2 or parts[0] != "level" or parts[1] not in ("macro", "micro"):
                raise GraphParseError("expected 'level macro' or 'level micro'", lineno)
            macro = parts[1] == "macro"
        elif section == "nodes":
            nid = _node_id(parts[0], lineno)
            if len(parts) < 2:
                raise GraphParseError(f"missing kind for {nid}", lineno)
            kind = _KIND_BY_NAME.get(parts[1])
            if kind is None:
                raise GraphParseError(f"unknown kind tag {parts[1]!r}", lineno)
            if kind is not nid.kind:
                raise GraphParseError(f"{nid} declared as {kind.word} but tagged {nid.kind.word}", lineno)
            if nid in nodes:
                raise GraphParseError(f"duplicate node {nid}", lineno)
            attrs: dict[str, str] = {}
            for tok in parts[2:]:
                if tok == "start":
                    starts.append(nid)
                elif "=" in tok:
                    k, v = tok.split("=", 1)
                    if k not in ("behavior", "owner") or not _LABEL.match(v):
                        raise GraphParseError(f"bad attribute {tok!r}", lineno)
                    attrs[k] = v
                else:
                    raise GraphParseError(f"unexpected token {tok!r}", lineno)
            if attrs.get("behavior") and not kind.is_control:
                raise GraphParseError(f"container {nid} cannot have a behavior", lineno)
            nodes[nid] = Node(nid, attrs.get("behavior"), attrs.get("owner"))
        elif section == "control":
            if len(parts) != 3 or parts[1] != "->":
                raise GraphParseError("expected '<src> -> <dst>'", lineno)
            control.append((_node_id(parts[0], lineno), _node_id(parts[2], lineno), lineno))
        else:
            if len(parts) != 3:
                raise GraphParseError("expected '<control> read|pull|push <container>'", lineno)
            kinds = _split_kinds(parts[1])
            if not kinds or any(k not in ("read", "pull", "push") for k in kinds):
                raise GraphParseError(f"unknown information edge kind {parts[1]!r}", lineno)
            for k in kinds:
                info.append((_node_id(parts[0], lineno), InfoKind(k), _node_id(parts[2], lineno), lineno))

    for a, b, lineno in control:
        for n in (a, b):
            if n not in nodes:
                raise GraphParseError(f"edge references undeclared node {n}", lineno)
    for c, _, b, lineno in info:
        for n in (c, b):
            if n not in nodes:
                raise GraphParseError(f"edge references undeclared node {n}", lineno)
    if not starts:
        raise GraphParseError("no start node")
    if len(starts) > 1:
        raise GraphParseError(f"multiple start nodes: {', '.join(starts)}")
    return GraphDef(
        frozenset(nodes.values()),
        frozenset(ControlEdge(a, b) for a, b, _ in control),
        frozenset(InfoEdge(c, b, k) for c, k, b, _ in info),
        starts[0],
        macro,
    )


def _node_id(tok: str, lineno: int) -> NodeId:
    try:
        return NodeId(tok)
    except ValueError as exc:
        raise GraphParseError(str(exc), lineno) from None


def serialize_graph(g: GraphDef) -> str:
    lines = ["[graph]", "level macro", "[nodes]"] if g.macro else ["[nodes]"]
    for n in sorted(g.nodes):
        row = [n.id, n.kind.word]
        if n.behavior:
            row.append(f"behavior={n.behavior}")
        if n.owner:
            row.append(f"owner={n.owner}")
        if n.id == g.start:
            row.append("start")
        lines.append(" ".join(row))
    lines.append("[control]")
    lines += [f"{e.source} -> {e.target}" for e in sorted(g.control_edges)]
    lines.append("[info]")
    lines += [f"{e.control} {e.kind.value} {e.container}" for e in sorted(g.info_edges, key=lambda e: e.sort_key)]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True, order=True)
class Violation:
    code: str
    where: str
    severity: str = "hard"
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        text = f"{self.severity.upper():4} {self.code} {self.where}"
        return f"{text}: {self.detail}" if self.detail else text


def validate(g: GraphDef) -> list[Violation]:
    """Every structural and access breach of ``g``, sorted; never raises."""
    out: list[Violation] = []
    nodes = g.by_id

    if g.start not in nodes:
        out.append(Violation("START", g.start, detail="start node not declared"))
    elif not g.start.kind.is_control:
        out.append(Violation("START", g.start, detail="start node must be a control node"))

    for e in g.control_edges:
        where = f"{e.source}->{e.target}"
        if e.source not in nodes or e.target not in nodes:
            out.append(Violation("DANGLING_EDGE", where))
        elif not (e.source.kind.is_control and e.target.kind.is_control):
            out.append(Violation("KIND_PARTITION", where, detail="control edges join control nodes"))

    pairs: dict[tuple[NodeId, NodeId], set[InfoKind]] = {}
    for e in g.info_edges:
        where = f"{e.control}~{e.container}"
        if e.control not in nodes or e.container not in nodes:
            out.append(Violation("DANGLING_EDGE", where))
            continue
        if not (e.control.kind.is_control and e.container.kind.is_container):
            out.append(Violation("KIND_PARTITION", where, detail="information edges join a control node to a container"))
            continue
        pairs.setdefault((e.control, e.container), set()).add(e.kind)

    for (c, b), kinds in sorted(pairs.items()):
        where = f"{c}~{b}"
        if InfoKind.PULL in kinds and InfoKind.READ not in kinds:
            out.append(Violation("PULL_WITHOUT_READ", where))
        if InfoKind.PUSH in kinds and InfoKind.READ not in kinds:
            out.append(Violation("PUSH_WITHOUT_READ", where))
        modifying = kinds & {InfoKind.PULL, InfoKind.PUSH}
        if not modifying or b.kind in ACCESS_TABLE[c.kind]:
            continue
        if g.macro and c.kind is NodeKind.ACTION and b.kind is NodeKind.TANK:
            # macro-level shorthand: the expanded node samples before it edits
            out.append(Violation("NOTATION_ABUSE", where, "warn", "action edits a tank directly"))
            continue
        for k in sorted(modifying, key=lambda k: k.value):
            code = "ACCESS_PULL" if k is InfoKind.PULL else "ACCESS_PUSH"
            out.append(Violation(code, where, detail=f"{c.kind.word} may not {k.value} a {b.kind.word}"))

    for c in g.controls:
        n_out = len(g._targets[c])
        if c.kind is NodeKind.DECISION:
            if n_out < 2:
                out.append(Violation("OUT_DEGREE", c, detail=f"decision needs >= 2 targets, has {n_out}"))
        elif c.kind is NodeKind.TERMINATION:
            if n_out > 1:
                out.append(Violation("OUT_DEGREE", c, detail=f"termination has {n_out} targets"))
        elif n_out != 1:
            out.append(Violation("OUT_DEGREE", c, detail=f"needs exactly 1 target, has {n_out}"))

    if g.start in nodes and g.start.kind.is_control:
        seen = {g.start}
        todo = deque([g.start])
        while todo:
            for t in g._targets.get(todo.popleft(), ()):
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        for c in g.controls:
            if c not in seen:
                out.append(Violation("UNREACHABLE", c, "warn"))

    return sorted(out)


def hard(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity == "hard"]


# --------------------------------------------------------------------------
# DOT export

_SHAPES = {
    NodeKind.TANK: 'shape=box, label="T\\n{}"',
    NodeKind.SAMPLE: 'shape=box, label="S\\n{}"',
    NodeKind.ENVIRONMENT: 'shape=box, style=rounded, label="V\\n{}"',
    NodeKind.SAMPLER: 'shape=diamond, label="s\\n{}"',
    NodeKind.OBSERVER: 'shape=diamond, label="o\\n{}"',
    NodeKind.DECISION: 'shape=triangle, label="d\\n{}"',
    NodeKind.ACTION: 'shape=circle, label="a\\n{}"',
    NodeKind.TERMINATION: 'shape=circle, style=filled, fillcolor=black, width=0.25, label="", xlabel="{}"',
}


def to_dot(g: GraphDef, name: str = "metachem") -> str:
    lines = [f"digraph {name} {{"]
    for n in sorted(g.nodes):
        attrs = _SHAPES[n.kind].format(n.id.label)
        if n.id == g.start:
            attrs += ", peripheries=2"
        lines.append(f'  "{n.id}" [{attrs}];')
    for e in sorted(g.control_edges):
        lines.append(f'  "{e.source}" -> "{e.target}";')
    for e in sorted(g.info_edges, key=lambda e: e.sort_key):
        if e.kind is InfoKind.READ:
            lines.append(f'  "{e.control}" -> "{e.container}" [style=dashed, dir=none];')
        elif e.kind is InfoKind.PULL:
            lines.append(f'  "{e.container}" -> "{e.control}" [style=dashed];')
        else:
            lines.append(f'  "{e.control}" -> "{e.container}" [style=dotted];')
    lines.append("}")
    return "\n".join(lines) + "\n"
