"""Trees with a single infinite line of descent, truncated at a finite spine depth.

Spine vertex i (at height i) has k_i children; the (j_i)-th one continues
the spine, the j_i - 1 elder ones root the left bushes and the k_i - j_i
younger ones the right bushes. Everything at height <= M is determined by
the first M spine records, as is the lexicographic prefix of the left part
up to the spine vertex at height M.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .ordered import OrderedTree, PathFormatError, _heights, height_from_walk, lukasiewicz

__all__ = [
    "SpineRecord",
    "SinTree",
    "SpinalDecomposition",
    "TruncationTooShallow",
    "spinal_decomposition",
    "left_height",
    "right_height",
    "occupation_check",
    "left_heights_from_marks",
    "SpineTooShort",
]


class TruncationTooShallow(ValueError):
    def __init__(self, requested: int, available: int, depth: int):
        super().__init__(
            f"{requested} left-part vertices requested but spine depth {depth} determines only {available}; "
            f"sample with spine depth > {depth}"
        )
        self.requested = requested
        self.available = available
        self.required_depth = depth + 1


@dataclass(frozen=True)
class SpineRecord:
    k: int
    j: int
    left: tuple[OrderedTree, ...]
    right: tuple[OrderedTree, ...]

    def __post_init__(self):
        if not 1 <= self.j <= self.k:
            raise ValueError(f"spine record needs 1 <= j <= k, got k={self.k}, j={self.j}")
        if len(self.left) != self.j - 1 or len(self.right) != self.k - self.j:
            raise ValueError("bush counts do not match (k, j)")

    def mirrored(self) -> "SpineRecord":
        from .ordered import mirror

        return SpineRecord(
            self.k,
            self.k - self.j + 1,
            tuple(mirror(b) for b in reversed(self.right)),
            tuple(mirror(b) for b in reversed(self.left)),
        )


@dataclass(frozen=True)
class SinTree:
    spine: tuple[SpineRecord, ...]

    def __post_init__(self):
        if len(self.spine) < 1:
            raise ValueError("a sin-tree needs spine depth >= 1")

    @property
    def depth(self) -> int:
        return len(self.spine)

    @property
    def marks(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array([s.k for s in self.spine], dtype=np.int64),
            np.array([s.j for s in self.spine], dtype=np.int64),
        )

    def mirror(self) -> "SinTree":
        return SinTree(tuple(s.mirrored() for s in self.spine))

    def left_forest(self) -> list[OrderedTree]:
        return [b for s in self.spine for b in s.left]

    def spine_sums(self) -> np.ndarray:
        """L_n = sum_{i<n} (j_i - 1) for n = 0..M."""
        _, j = self.marks
        return np.concatenate(([0], np.cumsum(j - 1)))

    def generation_sizes(self) -> np.ndarray:
        """Off-spine population Y*_n at heights n = 0..M."""
        y = np.zeros(self.depth + 1, dtype=np.int64)
        for i, s in enumerate(self.spine):
            for b in s.left + s.right:
                z = b.generation_sizes()
                top = min(len(z), self.depth - i)
                y[i + 1 : i + 1 + top] += z[:top]
        return y

    def left_part_size(self) -> int:
        """Number of left-part vertices determined by the truncation."""
        return sum(len(b) for b in self.left_forest()) + self.depth + 1


@dataclass(frozen=True)
class SpinalDecomposition:
    forest: tuple[OrderedTree, ...]
    L: np.ndarray  # spine sums, length M+1
    forest_heights: np.ndarray  # H(f), padded with a final 0
    alpha: np.ndarray  # alpha(p) for p = 0..#f, last entry a sentinel M+1
    n_of_p: np.ndarray
    p_of_n: np.ndarray  # for n = 0..N-1

    def heights(self) -> np.ndarray:
        n = np.arange(len(self.p_of_n))
        return n - self.p_of_n + self.forest_heights[self.p_of_n]

    def sandwich_holds(self) -> bool:
        """alpha(p(n) - 1) <= n - p(n) <= alpha(p(n)), with alpha(-1) = 0."""
        n = np.arange(len(self.p_of_n))
        lower = np.where(self.p_of_n > 0, self.alpha[np.maximum(self.p_of_n - 1, 0)], 0)
        spine_count = n - self.p_of_n
        return bool(np.all(lower <= spine_count) and np.all(spine_count <= self.alpha[self.p_of_n]))


def spinal_decomposition(st: SinTree, n_steps: int) -> SpinalDecomposition:
    """Rebuilds the left height process from the bush forest and the spine sums."""
    available = st.left_part_size()
    if n_steps > available:
        raise TruncationTooShallow(n_steps, available, st.depth)
    forest = tuple(st.left_forest())
    n_f = sum(len(b) for b in forest)
    L = st.spine_sums()
    d = lukasiewicz(forest)
    hf = np.concatenate((height_from_walk(d), [0])).astype(np.int64)
    # alpha(p) = inf{k : L_k >= 1 - min_{j<=p} D_j(f)}; the index 1 - min is the
    # rank of the bush holding forest vertex p.
    bush_rank = 1 - np.minimum.accumulate(d[:n_f])
    alpha = np.concatenate((np.searchsorted(L, bush_rank, side="left"), [st.depth + 1])).astype(np.int64)
    n_of_p = np.arange(n_f + 1) + alpha
    p_of_n = np.searchsorted(n_of_p, np.arange(n_steps), side="left").astype(np.int64)
    return SpinalDecomposition(forest, L, hf, alpha, n_of_p, p_of_n)


def _left_heights_direct(st: SinTree) -> np.ndarray:
    """Heights of the determined left part by direct lexicographic traversal."""
    parts = []
    for i, s in enumerate(st.spine):
        parts.append(np.array([i], dtype=np.int64))
        for b in s.left:
            parts.append(i + 1 + b.heights())
    parts.append(np.array([st.depth], dtype=np.int64))
    return np.concatenate(parts)


def left_height(st: SinTree, n_steps: int | None = None) -> np.ndarray:
    """Heights of the first ``n_steps`` left-part vertices in lexicographic order."""
    h = _left_heights_direct(st)
    if n_steps is None:
        return h
    if n_steps > len(h):
        raise TruncationTooShallow(n_steps, len(h), st.depth)
    return h[:n_steps]


def right_height(st: SinTree, n_steps: int | None = None) -> np.ndarray:
    return left_height(st.mirror(), n_steps)


def occupation_check(st: SinTree) -> int:
    """Number of levels n < M where occL(n) + occR(n) != Y*_n + 2."""
    m = st.depth
    occ_l = np.bincount(left_height(st), minlength=m + 1)[:m]
    occ_r = np.bincount(right_height(st), minlength=m + 1)[:m]
    y = st.generation_sizes()[:m]
    return int(np.count_nonzero(occ_l + occ_r != y + 2))


@numba.njit(cache=True)
def _left_heights_marks(kids, ranks, out):
    # Returns -1 on success, -2 if the sampled spine is too short for len(out)
    # steps, -3 if the forest is too short, or the index of a malformed step.
    # The walk d[0..m] fixes the height and bush rank of forest vertices
    # 0..m, one more than the number of child counts given.
    m = len(kids)
    d = np.zeros(m + 1, dtype=np.int64)
    for i in range(m):
        d[i + 1] = d[i] + kids[i] - 1
    hf = np.empty(m + 1, dtype=np.int64)
    bad = _heights(d, hf)
    if bad >= 0:
        return bad
    n_marks = len(ranks)
    spine_sum = np.zeros(n_marks + 1, dtype=np.int64)
    for i in range(n_marks):
        spine_sum[i + 1] = spine_sum[i] + ranks[i] - 1
    n_of_p = np.empty(m + 1, dtype=np.int64)
    k = 0
    running_min = 0
    first_beyond = m + 1
    for p in range(m + 1):
        if d[p] < running_min:
            running_min = d[p]
        while k <= n_marks and spine_sum[k] < 1 - running_min:
            k += 1
        if k > n_marks and first_beyond > m:
            first_beyond = p
        n_of_p[p] = p + k
    # Spine vertex n_marks (the last one sampled) sits at position
    # n_marks + first_beyond; what follows it needs its mark.
    if first_beyond <= m and len(out) > n_marks + first_beyond + 1:
        return -2
    p = 0
    for n in range(len(out)):
        while p <= m and n_of_p[p] < n:
            p += 1
        if p > m:
            return -3
        out[n] = n - p + hf[p]
    return -1


class SpineTooShort(ValueError):
    """More spine marks are needed to determine the requested prefix."""


def left_heights_from_marks(forest_kids, ranks, n_steps: int) -> np.ndarray:
    """First ``n_steps`` left heights from the bush forest and the spine ranks.

    ``forest_kids`` lists the DFS child counts of the left bushes in order;
    it may run past the bushes attached to the sampled spine, and
    ``n_steps`` entries always suffice. ``ranks`` are the spine-child ranks j_0, j_1, ... .
    Raises ``SpineTooShort`` when the requested prefix reaches the last
    sampled spine vertex; appending further i.i.d. ranks and retrying keeps
    the sample exact.
    """
    kids = np.ascontiguousarray(forest_kids, dtype=np.int64)
    ranks = np.ascontiguousarray(ranks, dtype=np.int64)
    if np.any(ranks < 1):
        raise ValueError("spine ranks must be >= 1")
    out = np.empty(n_steps, dtype=np.int64)
    code = _left_heights_marks(kids, ranks, out)
    if code == -2:
        raise SpineTooShort(f"{len(ranks)} spine ranks do not determine {n_steps} left heights")
    if code == -3:
        raise ValueError(f"{len(kids)} forest vertices do not determine {n_steps} left heights")
    if code >= 0:
        raise PathFormatError(f"negative child count in the forest at vertex {code - 1}")
    return out
