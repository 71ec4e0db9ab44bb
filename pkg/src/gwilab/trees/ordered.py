"""Finite ordered (Ulam-Harris) trees and their lattice-path codings.

A tree is stored as the sequence of child counts of its vertices listed in
depth-first lexicographic order. Ulam-Harris words, subtree ranges and the
coding paths are derived from that sequence.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numba
import numpy as np

__all__ = [
    "OrderedTree",
    "PathFormatError",
    "VertexNotInTree",
    "ContourCheck",
    "lukasiewicz",
    "height_from_walk",
    "walk_to_tree",
    "walk_to_forest",
    "dfs_heights",
    "contour_from_height",
    "breakpoints",
    "q_index",
    "check_contour_bounds",
    "mirror",
    "gf_iterate",
    "enumerate_trees",
]


class PathFormatError(ValueError):
    """A sequence is not the Lukasiewicz path of a tree or forest."""


class VertexNotInTree(KeyError):
    pass


@dataclass(frozen=True)
class OrderedTree:
    kids: tuple[int, ...]

    def __post_init__(self):
        kids = tuple(int(k) for k in self.kids)
        object.__setattr__(self, "kids", kids)
        d = 0
        for n, k in enumerate(kids):
            if k < 0:
                raise PathFormatError(f"negative child count at vertex {n}")
            d += k - 1
            if d < 0 and n != len(kids) - 1:
                raise PathFormatError(f"child counts close the tree after {n + 1} of {len(kids)} vertices")
        if d != -1:
            raise PathFormatError(f"child counts leave {d + 1} vertices unfinished")

    @classmethod
    def _trusted(cls, kids: tuple[int, ...]) -> "OrderedTree":
        """Skips validation; only for counts cut from an already checked walk."""
        t = object.__new__(cls)
        object.__setattr__(t, "kids", kids)
        return t

    @classmethod
    def leaf(cls) -> "OrderedTree":
        return cls((0,))

    def __len__(self) -> int:
        return len(self.kids)

    @property
    def size(self) -> int:
        return len(self.kids)

    def heights(self) -> np.ndarray:
        return height_from_walk(lukasiewicz(self))

    @property
    def height(self) -> int:
        return int(self.heights().max())

    def subtree_sizes(self) -> np.ndarray:
        sizes = np.empty(len(self.kids), dtype=np.int64)
        stack: list[int] = []
        for i in range(len(self.kids) - 1, -1, -1):
            total = 1
            for _ in range(self.kids[i]):
                total += stack.pop()
            sizes[i] = total
            stack.append(total)
        return sizes

    def children(self) -> list[list[int]]:
        """DFS indices of the children of each vertex, in birth order."""
        sizes = self.subtree_sizes()
        out = []
        for i, k in enumerate(self.kids):
            idx, c = [], i + 1
            for _ in range(k):
                idx.append(c)
                c += int(sizes[c])
            out.append(idx)
        return out

    def words(self) -> list[tuple[int, ...]]:
        """Ulam-Harris labels of the vertices in DFS order."""
        out: list[tuple[int, ...]] = []
        stack: list[list] = []  # [word, children emitted, children total]
        for k in self.kids:
            if stack:
                top = stack[-1]
                top[1] += 1
                word = top[0] + (top[1],)
            else:
                word = ()
            out.append(word)
            stack.append([word, 0, k])
            while stack and stack[-1][1] == stack[-1][2]:
                stack.pop()
        return out

    @classmethod
    def from_words(cls, words: Iterable[Sequence[int]]) -> "OrderedTree":
        ws = sorted({tuple(int(c) for c in w) for w in words})
        present = set(ws)
        if () not in present:
            raise PathFormatError("word set has no root")
        kids = {w: 0 for w in ws}
        for w in ws:
            if not w:
                continue
            if w[-1] < 1 or w[:-1] not in present:
                raise PathFormatError(f"word {w} has no parent in the set")
            if w[-1] > 1 and w[:-1] + (w[-1] - 1,) not in present:
                raise PathFormatError(f"word {w} has no elder sibling in the set")
            kids[w[:-1]] = max(kids[w[:-1]], w[-1])
        return cls(tuple(kids[w] for w in ws))

    def index_of(self, word: Sequence[int]) -> int:
        sizes = self.subtree_sizes()
        i = 0
        for c in word:
            if not 1 <= c <= self.kids[i]:
                raise VertexNotInTree(tuple(word))
            i += 1
            for _ in range(c - 1):
                i += int(sizes[i])
        return i

    def cut(self, word: Sequence[int]) -> "OrderedTree":
        """Removes the strict descendants of ``word``, which becomes a leaf."""
        i = self.index_of(word)
        end = i + int(self.subtree_sizes()[i])
        return OrderedTree(self.kids[:i] + (0,) + self.kids[end:])

    def shift(self, word: Sequence[int]) -> "OrderedTree":
        """Subtree rooted at ``word``, relabelled from its root."""
        i = self.index_of(word)
        return OrderedTree(self.kids[i : i + int(self.subtree_sizes()[i])])

    def truncate(self, depth: int) -> "OrderedTree":
        """Vertices at height at most ``depth``."""
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        h = self.heights()
        keep = h <= depth
        kids = np.where(h == depth, 0, np.asarray(self.kids))[keep]
        return OrderedTree(tuple(int(k) for k in kids))

    def generation_sizes(self) -> np.ndarray:
        return np.bincount(self.heights())


def lukasiewicz(t: OrderedTree | Sequence[OrderedTree]) -> np.ndarray:
    """D_0 = 0, D_{n+1} = D_n + k_n - 1 over the tree or the concatenated forest."""
    if isinstance(t, OrderedTree):
        kids = np.asarray(t.kids, dtype=np.int64)
    else:
        parts = [np.asarray(tree.kids, dtype=np.int64) for tree in t]
        kids = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    d = np.zeros(len(kids) + 1, dtype=np.int64)
    np.cumsum(kids - 1, out=d[1:])
    return d


@numba.njit(cache=True)
def _heights(d, out):
    # Stack of indices j < n with D_j equal to the running minimum of D over [j, n].
    stack = np.empty(len(d), dtype=np.int64)
    top = 0
    for n in range(len(out)):
        if n > 0:
            if d[n] - d[n - 1] < -1:
                return n
            stack[top] = n - 1
            top += 1
            while top > 0 and d[stack[top - 1]] > d[n]:
                top -= 1
        out[n] = top
    if len(d) > len(out) and len(out) > 0 and d[len(out)] - d[len(out) - 1] < -1:
        return len(out)
    return -1


def height_from_walk(d: Sequence[int], n: int | None = None) -> np.ndarray:
    """Height process H_n = #{j < n : D_j = min D over [j, n]} in linear time.

    ``d`` has one more entry than the number of vertices when it is a whole
    tree or forest path; ``n`` restricts the output to the first ``n`` heights.
    """
    d = np.ascontiguousarray(d, dtype=np.int64)
    if d.ndim != 1 or len(d) == 0:
        raise PathFormatError("walk must be a nonempty one-dimensional sequence")
    if d[0] != 0:
        raise PathFormatError("walk must start at 0")
    if n is None:
        n = len(d) - 1
    if not 0 <= n <= len(d):
        raise PathFormatError(f"cannot read {n} heights from a walk of length {len(d)}")
    out = np.empty(n, dtype=np.int64)
    bad = _heights(d, out)
    if bad >= 0:
        raise PathFormatError(f"walk increment {d[bad] - d[bad - 1]} < -1 at step {bad}")
    return out


def _check_walk(d: np.ndarray) -> None:
    if d.ndim != 1 or len(d) < 2 or d[0] != 0:
        raise PathFormatError("walk must start at 0 and have at least one step")
    inc = np.diff(d)
    if np.any(inc < -1):
        n = int(np.argmax(inc < -1)) + 1
        raise PathFormatError(f"walk increment {inc[n - 1]} < -1 at step {n}")


def walk_to_tree(d: Sequence[int]) -> OrderedTree:
    d = np.asarray(d, dtype=np.int64)
    _check_walk(d)
    return OrderedTree(tuple(int(k) for k in np.diff(d) + 1))


def walk_to_forest(d: Sequence[int]) -> list[OrderedTree]:
    """Splits a forest path at its successive new minima."""
    d = np.asarray(d, dtype=np.int64)
    _check_walk(d)
    kids = np.diff(d) + 1
    ends = np.flatnonzero(d[1:] < np.minimum.accumulate(d)[:-1]) + 1
    if len(ends) == 0 or ends[-1] != len(kids):
        raise PathFormatError("walk does not end on a new minimum")
    # Between successive new minima the walk stays above its running minimum,
    # so every piece is a valid tree.
    flat = kids.tolist()
    out, start = [], 0
    for e in ends.tolist():
        out.append(OrderedTree._trusted(tuple(flat[start:e])))
        start = e
    return out


def dfs_heights(t: OrderedTree) -> np.ndarray:
    """Heights by direct traversal, independent of the walk coding."""
    return np.array([len(w) for w in t.words()], dtype=np.int64)


# -- contour --------------------------------------------------------------------


def breakpoints(h: Sequence[int]) -> np.ndarray:
    """b_n = 2n - H_n."""
    h = np.asarray(h, dtype=np.int64)
    return 2 * np.arange(len(h), dtype=np.int64) - h


@numba.njit(cache=True)
def _contour(h, b, out):
    for n in range(len(h) - 1):
        for s in range(b[n], b[n + 1]):
            if s < b[n + 1] - 1:
                out[s] = h[n] - s + b[n]
            else:
                out[s] = s - b[n + 1] + h[n + 1]
    out[b[len(h) - 1]] = h[len(h) - 1]


def contour_from_height(h: Sequence[int], closed: bool = False) -> np.ndarray:
    """Contour values at integer times 0..b_{N-1} from the first N heights.

    With ``closed=True`` the sequence is the full height process of one
    finite tree and the contour is extended by the final descent to the
    root, ending at time 2(N - 1).
    """
    h = np.ascontiguousarray(h, dtype=np.int64)
    if len(h) == 0:
        return np.zeros(0, dtype=np.int64)
    b = breakpoints(h)
    out = np.empty(int(b[-1]) + 1, dtype=np.int64)
    _contour(h, b, out)
    if closed:
        out = np.concatenate((out, np.arange(h[-1] - 1, -1, -1, dtype=np.int64)))
    return out


def q_index(h: Sequence[int], s) -> np.ndarray:
    """q(s) = n iff b_n <= s < b_{n+1}."""
    return np.searchsorted(breakpoints(h), s, side="right") - 1


@dataclass(frozen=True)
class ContourCheck:
    """Violation counts of the two contour/height proximity bounds over all m."""

    checked: int
    contour_violations: int
    index_violations: int

    @property
    def ok(self) -> bool:
        return self.contour_violations == 0 and self.index_violations == 0


@numba.njit(cache=True)
def _contour_bounds(h):
    # For every m in 1..len(h)-2 compare sup over s in [0, b_m] of the left-hand
    # sides with the right-hand sides. Both left-hand sides are piecewise
    # linear/constant with integer breakpoints, so their sup over [k, k+1) is
    # attained at k or in the limit k+1. The index bound is doubled to stay
    # in integers.
    n_h = len(h)
    bad_c = 0
    bad_q = 0
    checked = 0
    if n_h < 3:
        return checked, bad_c, bad_q
    sup_c = 0
    sup_q2 = 0
    max_step = 0
    max_h = h[0]
    s = 0
    for m in range(1, n_h - 1):
        n = m - 1
        bn = 2 * n - h[n]
        bn1 = 2 * (n + 1) - h[n + 1]
        for s in range(bn, bn1):
            if s < bn1 - 1:
                c0 = h[n] - s + bn
            else:
                c0 = s - bn1 + h[n + 1]
            if s + 1 < bn1 - 1:
                c1 = h[n] - s - 1 + bn
            else:
                c1 = s + 1 - bn1 + h[n + 1]
            e = max(abs(c0 - h[n]), abs(c1 - h[n]))
            if e > sup_c:
                sup_c = e
            e2 = max(abs(2 * n - s), abs(2 * n - s - 1))
            if e2 > sup_q2:
                sup_q2 = e2
        step_m = abs(h[m + 1] - h[m])
        step_prev = abs(h[m] - h[m - 1])
        max_step = max(max_step, step_m, step_prev)
        max_h = max(max_h, h[m])
        checked += 1
        if sup_c > 1 + max_step:
            bad_c += 1
        if sup_q2 > max_h + 2:
            bad_q += 1
    return checked, bad_c, bad_q


def check_contour_bounds(h: Sequence[int]) -> ContourCheck:
    """Checks both proximity bounds between contour and height for every m >= 1."""
    h = np.ascontiguousarray(h, dtype=np.int64)
    checked, bad_c, bad_q = _contour_bounds(h)
    return ContourCheck(int(checked), int(bad_c), int(bad_q))


# -- mirror, generating functions, enumeration ------------------------------------


def mirror(t: OrderedTree) -> OrderedTree:
    """Reverses the birth order of the children of every vertex."""
    children = t.children()
    out = []
    stack = [0]
    while stack:
        i = stack.pop()
        out.append(t.kids[i])
        stack.extend(children[i])  # last pushed = first child, popped last
    return OrderedTree(tuple(out))


def gf_iterate(mu, n: int, z: float) -> float:
    """n-fold composition of the generating function of ``mu`` at z."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    for _ in range(n):
        z = mu.pgf(z)
    return float(z)


def enumerate_trees(max_size: int) -> Iterator[OrderedTree]:
    """All ordered trees with 1..max_size vertices."""

    def extend(prefix: list[int], d: int):
        # d = current walk value; the tree closes when it reaches -1.
        if d == -1:
            yield OrderedTree(tuple(prefix))
            return
        room = max_size - len(prefix)
        # Every open slot still needs at least one vertex.
        for k in range(0, room - d):
            prefix.append(k)
            yield from extend(prefix, d + k - 1)
            prefix.pop()

    yield from extend([], 0)
