"""Exact samplers for GW trees, GW forests and GWI sin-trees.

In depth-first order the child counts of a GW forest are i.i.d. draws from
the offspring law, read until the Lukasiewicz walk first reaches minus the
number of trees. The samplers draw those counts in growing blocks and stop
at the hitting time, so no stack is needed.
"""
from __future__ import annotations

import numpy as np

from ..rng import generator
from .laws import DispatchingLaw, OffspringLaw
from .ordered import OrderedTree, walk_to_forest
from .sintree import SinTree, SpineRecord

__all__ = ["SizeCapExceeded", "sample_forest_kids", "sample_gw", "sample_forest", "sample_gwi"]


class SizeCapExceeded(RuntimeError):
    def __init__(self, partial_size: int, cap: int):
        super().__init__(f"tree exceeded the size cap {cap} (partial size {partial_size})")
        self.partial_size = partial_size
        self.cap = cap


def _cap(mu: OffspringLaw, size_cap: int | None) -> int | None:
    if size_cap is None:
        if mu.mean > 1:
            raise ValueError("a supercritical offspring law needs a size cap")
        return None
    if size_cap < 1:
        raise ValueError("size_cap must be positive")
    return int(size_cap)


def sample_forest_kids(mu: OffspringLaw, n_trees: int, rng: np.random.Generator, size_cap: int | None) -> np.ndarray:
    """DFS child counts of ``n_trees`` independent GW(mu) trees, concatenated."""
    if n_trees == 0:
        return np.zeros(0, dtype=np.int64)
    blocks = []
    level = 0  # walk value before the current block
    total = 0
    block = 64
    while True:
        if size_cap is not None:
            block = min(block, size_cap + 1 - total)
        kids = np.asarray(mu.sample(rng, block), dtype=np.int64)
        walk = level + np.cumsum(kids - 1)
        hit = np.flatnonzero(walk == -n_trees)
        if hit.size:
            blocks.append(kids[: hit[0] + 1])
            return np.concatenate(blocks)
        blocks.append(kids)
        total += block
        level = int(walk[-1])
        if size_cap is not None and total > size_cap:
            raise SizeCapExceeded(total, size_cap)
        block = min(2 * block, 1 << 22)


def sample_gw(mu: OffspringLaw, seed, size_cap: int | None = 10**6) -> OrderedTree:
    """One GW(mu) tree."""
    rng = generator(seed)
    kids = sample_forest_kids(mu, 1, rng, _cap(mu, size_cap))
    return OrderedTree(tuple(int(k) for k in kids))


def sample_forest(mu: OffspringLaw, n_trees: int, seed, size_cap: int | None = 10**6) -> list[OrderedTree]:
    rng = generator(seed)
    kids = sample_forest_kids(mu, n_trees, rng, _cap(mu, size_cap))
    if n_trees == 0:
        return []
    return walk_to_forest(np.concatenate(([0], np.cumsum(kids - 1))))


def sample_gwi(
    mu: OffspringLaw, r: DispatchingLaw, depth: int, seed, size_cap: int | None = 10**6
) -> SinTree:
    """GWI(mu, r) sin-tree truncated at spine depth ``depth``.

    Spine marks are i.i.d. draws from r; the off-spine children root
    independent GW(mu) bushes, listed per spine vertex in birth order.
    """
    if depth < 1:
        raise ValueError("spine depth must be at least 1")
    cap = _cap(mu, size_cap)
    rng = generator(seed)
    k, j = r.sample(rng, depth)
    n_bushes = int(np.sum(k - 1))
    kids = sample_forest_kids(mu, n_bushes, rng, cap)
    bushes = walk_to_forest(np.concatenate(([0], np.cumsum(kids - 1)))) if n_bushes else []
    spine = []
    pos = 0
    for ki, ji in zip(k.tolist(), j.tolist()):
        left = tuple(bushes[pos : pos + ji - 1])
        right = tuple(bushes[pos + ji - 1 : pos + ki - 1])
        pos += ki - 1
        spine.append(SpineRecord(ki, ji, left, right))
    return SinTree(tuple(spine))
