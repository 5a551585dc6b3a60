"""Matrix side of linking: Jordan product, eigensystems, alignment and strength."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
TRACE_EPS = 1e-12
DEGENERATE_TOL = 1e-9


class AlgebraError(ValueError):
    code = "ALGEBRA"


class ZeroTraceError(AlgebraError):
    code = "ZERO_TRACE"


class NonConvergenceError(AlgebraError):
    code = "NONCONVERGENCE"


def jordan_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (a @ b + b @ a)


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    values: np.ndarray  # ascending, real
    vectors: np.ndarray  # column i pairs with values[i]
    mu: np.ndarray  # values / trace

    def vector(self, i: int) -> np.ndarray:
        return self.vectors[:, i]


def canonical_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first largest-modulus entry is real and >= 0.

    Works on a single (3, 3) matrix or a stack (..., 3, 3).
    """
    mags = np.abs(vectors)
    top = mags.max(axis=-2, keepdims=True)
    first = np.argmax(mags >= top - 1e-12, axis=-2)[..., None, :]
    pivot = np.take_along_axis(vectors, first, axis=-2)
    scale = np.where(np.abs(pivot) > 0, np.conj(pivot) / np.where(np.abs(pivot) > 0, np.abs(pivot), 1), 1)
    return vectors * scale


def _vec_key(v: np.ndarray) -> tuple:
    return tuple(x for c in np.round(v, 9) for x in (c.real, c.imag))


def hermitian_eig3(m: np.ndarray) -> EigenSystem:
    m = np.asarray(m, dtype=complex)
    tr = float(np.trace(m).real)
    if abs(tr) <= TRACE_EPS:
        raise ZeroTraceError("trace is zero; normalised eigenvalues undefined")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergenceError(str(exc)) from None
    v = canonical_phase(v)
    order = _order(w, v)
    w, v = w[order], v[:, order]
    return EigenSystem(w, v, w / tr)


def _order(w: np.ndarray, v: np.ndarray) -> list[int]:
    """Ascending eigenvalue; inside a degenerate group, lexicographic by vector key."""
    idx = list(range(len(w)))
    groups: list[list[int]] = []
    for i in idx:
        if groups and abs(w[i] - w[groups[-1][0]]) <= DEGENERATE_TOL:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [i for g in groups for i in sorted(g, key=lambda k: _vec_key(v[:, k]))]


def alignment(u: np.ndarray, v: np.ndarray) -> float:
    """0 for parallel unit vectors, 1 for anti-parallel."""
    d = float(np.real(np.vdot(u, v)))
    d = min(1.0, max(-1.0, d))
    return 1.0 - 0.5 * (d + 1.0)


def best_pair(ea: EigenSystem, eb: EigenSystem) -> tuple[int, int, float]:
    """Most anti-parallel eigenvector pair; ties go to the smallest (i, j)."""
    best = (0, 0, -1.0)
    for i in range(3):
        for j in range(3):
            a = alignment(ea.vector(i), eb.vector(j))
            if a > best[2]:
                best = (i, j, a)
    return best


def strength(mu_a: float, mu_b: float) -> float:
    x = mu_a - mu_b
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def link_probability(s: float, a: float) -> float:
    return s * a
