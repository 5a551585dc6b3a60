"""Moving particles between tanks: greedy rebalancing and pair selection."""

from __future__ import annotations

from ..containers import ParticleBag, partition, retag, untag
from .particles import weight


class GridShapeError(ValueError):
    code = "GRID_SHAPE"


class UnknownTankError(ValueError):
    code = "UNKNOWN_TANK"


MODES = ("single", "none", "random", "grid")


def balance_transfer(a: ParticleBag, b: ParticleBag) -> tuple[ParticleBag, ParticleBag]:
    """Merge, then deal out largest first to whichever tank holds fewer atoms (ties to ``a``)."""
    merged = a.elements() + b.elements()
    merged.sort(key=lambda p: -weight(p))  # stable: input order breaks ties
    out_a: dict = {}
    out_b: dict = {}
    wa = wb = 0
    for p in merged:
        if wa <= wb:
            out_a[p] = out_a.get(p, 0) + 1
            wa += weight(p)
        else:
            out_b[p] = out_b.get(p, 0) + 1
            wb += weight(p)
    return ParticleBag(out_a), ParticleBag(out_b)


def moore_neighbours(index: int, shape: tuple[int, int]) -> list[int]:
    rows, cols = shape
    r, c = divmod(index, cols)
    out = []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if (dr or dc) and 0 <= r + dr < rows and 0 <= c + dc < cols:
                out.append((r + dr) * cols + c + dc)
    return out


def select_transfer_pairs(
    mode: str,
    tanks: int,
    rng,
    grid_shape: tuple[int, int] | None = None,
    max_transfers: int = 10,
) -> list[tuple[int, int]]:
    if mode not in MODES:
        raise ValueError(f"unknown transfer mode {mode!r}")
    if mode in ("none", "single"):
        return []
    if mode == "grid":
        if grid_shape is None or grid_shape[0] * grid_shape[1] != tanks:
            raise GridShapeError(f"grid {grid_shape} does not hold {tanks} tanks")
    if tanks < 2:
        return []
    k = int(rng.integers(max_transfers + 1))
    pairs = []
    for _ in range(k):
        if mode == "random":
            i, j = (int(x) for x in rng.choice(tanks, size=2, replace=False))
        else:
            i = int(rng.integers(tanks))
            nb = moore_neighbours(i, grid_shape)
            j = nb[int(rng.integers(len(nb)))]
        pairs.append((i, j))
    return pairs


def split_tank(b: ParticleBag, tag: int) -> ParticleBag:
    return ParticleBag({untag(p)[1]: n for p, n in b.items() if untag(p)[0] == tag})


def rebalance_pairs(tanks: ParticleBag, pairs, n_tanks: int) -> tuple[ParticleBag, ParticleBag]:
    """Apply balance_transfer to each (i, j) of a tank-tagged bag in order.

    Returns the net (removed, added) bags, so particles that end where they
    started are left alone.
    """
    parts = partition(tanks)
    work: dict[int, ParticleBag] = {}
    for i, j in pairs:
        for k in (i, j):
            if not 0 <= k < n_tanks:
                raise UnknownTankError(f"no tank {k}")
            if k not in work:
                work[k] = split_tank(tanks, k) if k in parts else ParticleBag()
        work[i], work[j] = balance_transfer(work[i], work[j])
    removed, added = ParticleBag(), ParticleBag()
    for k, b in work.items():
        removed._add(parts.get(k, ParticleBag()))
        added._add(ParticleBag({retag(k, p): n for p, n in b.items()}))
    out = ParticleBag({p: n - added.count(p) for p, n in removed.items() if n > added.count(p)})
    inn = ParticleBag({p: n - removed.count(p) for p, n in added.items() if n > removed.count(p)})
    return out, inn
