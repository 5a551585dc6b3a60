"""Exhaustive enumeration of the atom set and its eigenvalue classes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .algebra import canonical_phase

DIAGONAL = (-1, 0, 1)
OFF_DIAGONAL = (0, 1, -1, 1j, -1j, 1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j)

PUBLISHED_ATOMS = 14574
PUBLISHED_CLASSES = 66


def all_hermitian() -> np.ndarray:
    """Every Hermitian 3x3 matrix over the entry set, trace filter not applied: (19683, 3, 3)."""
    d = np.array(list(itertools.product(DIAGONAL, repeat=3)), dtype=float)
    o = np.array(list(itertools.product(OFF_DIAGONAL, repeat=3)), dtype=complex)
    n = len(d) * len(o)
    m = np.zeros((n, 3, 3), dtype=complex)
    dd = np.repeat(d, len(o), axis=0)
    oo = np.tile(o, (len(d), 1))
    for k in range(3):
        m[:, k, k] = dd[:, k]
    for k, (i, j) in enumerate(((0, 1), (0, 2), (1, 2))):
        m[:, i, j] = oo[:, k]
        m[:, j, i] = np.conj(oo[:, k])
    return m


def atom_matrices() -> np.ndarray:
    m = all_hermitian()
    tr = np.trace(m, axis1=1, axis2=2).real
    return m[np.abs(tr) > 0.5]


def cluster(rows: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Greedy clustering: a row joins the first representative within ``tol`` in every component."""
    rows = np.asarray(rows, dtype=float)
    order = np.lexsort(rows.T[::-1])
    reps: list[np.ndarray] = []
    labels = np.empty(len(rows), dtype=int)
    rep_arr = np.empty((0, rows.shape[1]))
    for i in order:
        r = rows[i]
        hit = np.flatnonzero(np.all(np.abs(rep_arr - r) <= tol, axis=1)) if len(reps) else []
        if len(hit):
            labels[i] = hit[0]
        else:
            labels[i] = len(reps)
            reps.append(r)
            rep_arr = np.array(reps)
    return labels


@dataclass
class AtomCensus:
    total: int
    upper_bound: int
    classes: int  # normalised-eigenvalue classes
    raw_classes: int  # raw eigenvalue classes
    representatives: list[tuple] = field(default_factory=list)  # (class, count, mu1..3, lambda1..3)
    published_total: int = PUBLISHED_ATOMS
    published_classes: int = PUBLISHED_CLASSES

    @property
    def total_delta(self) -> int:
        return self.total - self.published_total

    @property
    def class_delta(self) -> int:
        return self.classes - self.published_classes

    def summary(self) -> str:
        return "\n".join(
            [
                f"atoms (nonzero trace): {self.total}",
                f"published atoms: {self.published_total}  delta: {self.total_delta:+d}",
                f"upper bound without trace filter: {self.upper_bound}",
                f"eigenvalue classes (normalised, tol 1e-6): {self.classes}",
                f"published classes: {self.published_classes}  delta: {self.class_delta:+d}",
                f"raw eigenvalue classes: {self.raw_classes}",
            ]
        )


def eig_batch(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(m)
    v = canonical_phase(v)
    tr = np.trace(m, axis1=1, axis2=2).real
    return w, v, w / tr[:, None]


def enumerate_atoms(tol: float = 1e-6) -> AtomCensus:
    upper = len(all_hermitian())
    m = atom_matrices()
    w, _, mu = eig_batch(m)
    mu_sorted = np.sort(mu, axis=1)
    labels = cluster(mu_sorted, tol)
    raw = cluster(w, tol)
    reps = []
    for c in range(labels.max() + 1):
        members = np.flatnonzero(labels == c)
        i = members[0]
        reps.append((c, len(members), *map(float, mu_sorted[i]), *map(float, w[i])))
    return AtomCensus(len(m), upper, int(labels.max() + 1), int(raw.max() + 1), reps)
