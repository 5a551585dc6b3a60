"""Atoms and composite particles with the link tree that remembers their reactants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .algebra import TRACE_EPS, EigenSystem, hermitian_eig3


def _entries(m: np.ndarray) -> tuple[complex, ...]:
    return tuple(complex(x) for x in np.asarray(m, dtype=complex).ravel())


class Particle:
    """Immutable JA particle; equality is the matrix plus the link tree."""

    __slots__ = ("entries", "link", "atoms", "_hash", "_eig")

    def __init__(self, matrix, link: "Link | None" = None):
        self.entries: tuple[complex, ...] = matrix if isinstance(matrix, tuple) else _entries(matrix)
        self.link = link
        self.atoms = 1 if link is None else link.left.atoms + link.right.atoms
        self._hash = hash((self.entries, link))
        self._eig: EigenSystem | None = None

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=complex).reshape(3, 3)

    @property
    def trace(self) -> float:
        e = self.entries
        return (e[0] + e[4] + e[8]).real

    @property
    def eig(self) -> EigenSystem:
        if self._eig is None:
            self._eig = hermitian_eig3(self.matrix)
        return self._eig

    def links(self) -> Iterator["Link"]:
        """Pre-order walk of every link in the tree."""
        if self.link is not None:
            yield self.link
            yield from self.link.left.links()
            yield from self.link.right.links()

    def leaves(self) -> Iterator["Particle"]:
        if self.link is None:
            yield self
        else:
            yield from self.link.left.leaves()
            yield from self.link.right.leaves()

    def distinct_atoms(self) -> int:
        return len({a.entries for a in self.leaves()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, Particle):
            return NotImplemented
        return self is other or (self._hash == other._hash and self.entries == other.entries and self.link == other.link)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        kind = "atom" if self.link is None else f"composite[{self.atoms}]"
        return f"Particle({kind}, tr={self.trace:g}, h={self._hash & 0xFFFFFF:06x})"

    def to_json(self) -> dict:
        out = {"m": [[x.real, x.imag] for x in self.entries]}
        if self.link is not None:
            out["link"] = self.link.to_json()
        return out


@dataclass(frozen=True)
class Link:
    strength: float
    alignment: float
    pair: tuple[int, int]
    left: Particle
    right: Particle

    @property
    def probability(self) -> float:
        return self.strength * self.alignment

    def to_json(self) -> dict:
        return {
            "s": self.strength,
            "a": self.alignment,
            "pair": list(self.pair),
            "left": self.left.to_json(),
            "right": self.right.to_json(),
        }


def atom(matrix) -> Particle:
    p = Particle(matrix)
    if abs(p.trace) <= TRACE_EPS:
        raise ValueError("atoms need a nonzero trace")
    return p


def weight(p) -> int:
    """Atom count of a possibly tank-tagged particle."""
    return (p[1] if type(p) is tuple else p).atoms


def break_link(p: Particle, target: Link) -> list[Particle]:
    """Reactants of ``target`` plus every sibling subtree on the path down to it."""
    out: list[Particle] = []
    node = p
    while node.link is not target:
        ln = node.link
        if ln is None:
            raise ValueError("link not in this particle")
        if any(l is target for l in ln.left.links()):
            out.append(ln.right)
            node = ln.left
        else:
            out.append(ln.left)
            node = ln.right
    return [target.left, target.right] + out
