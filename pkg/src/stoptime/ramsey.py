"""Monochromatic order-isomorphic subtrees inside two-coloured truncations.

The finder looks for oriented embeddings, ``s_{t⌢α} ⊒ s_t⌢α``, assigning images in the
standard order of the source tree so that each new image only has to exceed the
previous one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numba import njit

from .errors import InvalidInput
from .tree import Node, SubtreeEmbedding, Truncation, verify_embedding

DEFAULT_BUDGET = 1_000_000


@dataclass
class Coloring:
    """Colour in ``{1, 2}`` for every node of the depth-``depth`` truncation (heap order)."""

    depth: int
    colors: np.ndarray

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.int8)
        if self.colors.shape != ((1 << (self.depth + 1)) - 1,):
            raise InvalidInput("colour array does not match the truncation")
        if not np.all((self.colors == 1) | (self.colors == 2)):
            raise InvalidInput("colours must be 1 or 2")

    @classmethod
    def from_rule(cls, depth: int, rule: Callable[[Node], int]) -> Coloring:
        return cls(depth, [rule(t) for t in Truncation(depth).nodes()])

    @classmethod
    def constant(cls, depth: int, color: int = 1) -> Coloring:
        return cls(depth, np.full((1 << (depth + 1)) - 1, color))

    @classmethod
    def random(cls, depth: int, seed: int, p: float = 0.5) -> Coloring:
        rng = np.random.default_rng(seed)
        return cls(depth, np.where(rng.random((1 << (depth + 1)) - 1) < p, 1, 2))

    @classmethod
    def from_partition(cls, depth: int, n1: Sequence[Node]) -> Coloring:
        """Colour 1 on ``n1``, colour 2 elsewhere."""
        colors = np.full((1 << (depth + 1)) - 1, 2)
        for t in n1:
            if t.length > depth:
                raise InvalidInput(f"node {t} lies outside depth {depth}")
            colors[t.index] = 1
        return cls(depth, colors)

    def __call__(self, t: Node) -> int:
        return int(self.colors[t.index])

    def restrict(self, depth: int) -> Coloring:
        if depth > self.depth:
            raise InvalidInput("cannot restrict to a deeper truncation")
        return Coloring(depth, self.colors[: (1 << (depth + 1)) - 1].copy())

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "entries": {str(Node.from_index(i)): int(c) for i, c in enumerate(self.colors)},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> Coloring:
        try:
            depth = int(data["depth"])
            colors = np.zeros((1 << (depth + 1)) - 1, dtype=np.int8)
            for key, val in data["entries"].items():
                colors[Node.parse(key).index] = int(val)
            return cls(depth, colors)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed colouring: {exc}") from exc


@dataclass
class RamseyResult:
    color: int | None
    embedding: SubtreeEmbedding | None
    achieved_depth: int
    target_depth: int
    budget_exhausted: bool = False
    extensions: int = 0

    @property
    def reached_target(self) -> bool:
        return self.achieved_depth >= self.target_depth

    def to_json(self) -> dict:
        return {
            "color": self.color,
            "achieved_depth": self.achieved_depth,
            "target_depth": self.target_depth,
            "budget_exhausted": self.budget_exhausted,
            "extensions": self.extensions,
            "embedding": None if self.embedding is None else self.embedding.to_json(),
        }


def _cone_any(mask: np.ndarray, depth: int) -> np.ndarray:
    """``out[i]`` is true when some node of the cone of ``i`` is in ``mask``."""
    out = mask.copy()
    for level in range(depth - 1, -1, -1):
        lo, hi = (1 << level) - 1, (1 << (level + 1)) - 1
        out[lo:hi] |= out[2 * lo + 1 : 2 * hi + 1 : 2] | out[2 * lo + 2 : 2 * hi + 2 : 2]
    return out


def _cone_max(values: np.ndarray, depth: int) -> np.ndarray:
    out = values.copy()
    for level in range(depth - 1, -1, -1):
        lo, hi = (1 << level) - 1, (1 << (level + 1)) - 1
        out[lo:hi] = np.maximum(out[lo:hi], np.maximum(out[2 * lo + 1 : 2 * hi + 1 : 2], out[2 * lo + 2 : 2 * hi + 2 : 2]))
    return out


class _Search:
    """Exact search for one colour and one source depth ``k``.

    Standard order forces the images of source level ``m`` into a band of lengths
    ``(L_{m-1}, L_m]`` with ``L_0 < L_1 < ... < L_k``.  For each band vector a tree DP
    marks the nodes that can host level ``m`` of an oriented colour-class tree within
    the bands; only the left-to-right order inside a level is left to backtracking.
    """

    def __init__(self, coloring: Coloring, color: int, budget: int):
        self.c = coloring
        self.color = color
        self.budget = budget
        self.used = 0
        self.exhausted = False
        self.n = coloring.depth
        size = coloring.colors.size
        self.mine = coloring.colors == color
        self.length = np.repeat(np.arange(self.n + 1), [1 << m for m in range(self.n + 1)])
        self.has_children = self.length < self.n
        self._pad = np.zeros(2 * size + 2, dtype=bool)

    def _children_ok(self, cone_any: np.ndarray) -> np.ndarray:
        """Nodes both of whose child cones meet the mask summarised by ``cone_any``."""
        size = cone_any.size
        pad = self._pad
        pad[:] = False
        pad[:size] = cone_any
        idx = np.arange(size)
        return self.has_children & pad[2 * idx + 1] & pad[2 * idx + 2]

    def band_tables(self, k: int):
        """Feasible band vectors with their per-level host tables, shallowest first."""
        out = []
        n = self.n

        def rec(m: int, upper: int, below_any, suffix, tables):
            # choose L_{m-1}: the band of level m is (L_{m-1}, upper]
            for lower in range(upper - 1, -2, -1):
                if lower + 1 < m:  # level m needs length >= m
                    break
                band = (self.length > lower) & (self.length <= upper) & self.mine
                F = band if below_any is None else band & self._children_ok(below_any)
                if not F.any():
                    continue
                if m == 0:
                    if lower == -1:
                        out.append((suffix, [F] + tables))
                    continue
                rec(m - 1, lower, _cone_any(F, n), (lower,) + suffix, [F] + tables)

        for top in range(k, n + 1):
            rec(k, top, None, (top,), [])
        out.sort(key=lambda item: item[0])
        return out

    def run(self, k: int) -> list[int] | None:
        size = (1 << (k + 1)) - 1
        for _, tables in self.band_tables(k):
            tables = np.array(tables)
            marked = np.where(tables, np.arange(tables.shape[1]), -1)
            reach = np.array([_cone_max(row, self.n) for row in marked])
            images, used, status = _dfs(tables, reach, k, self.budget)
            self.used += used
            if status == 1:
                return images.tolist()
            if status == 2:
                self.exhausted = True
        return None


@njit(cache=True)
def _dfs(tables, reach, k, budget):
    """Backtracking over source nodes in standard order.

    Node ``i`` takes a marked node of level-table ``tables[level(i)]`` inside the cone
    of its parent's image extended by its direction bit, with index above the previous
    image.  ``reach[m, x]`` is the largest marked index in the cone of ``x``; it rules out
    a placement that leaves some later node of the same level without a candidate.
    Returns (images, extensions used, status) with status 1 found, 0 refuted, 2 budget
    exhausted.
    """
    nodes = tables.shape[1]
    size = (1 << (k + 1)) - 1
    images = np.zeros(size, dtype=np.int64)
    lo = np.zeros(size, dtype=np.int64)
    hi = np.zeros(size, dtype=np.int64)
    pos = np.zeros(size, dtype=np.int64)
    level = np.zeros(size, dtype=np.int64)
    for i in range(size):
        m = 0
        while (1 << (m + 1)) - 1 <= i:
            m += 1
        level[i] = m
    used = 0
    i = 0
    lo[0] = 0
    hi[0] = 0
    pos[0] = 0
    while True:
        prev = images[i - 1] if i > 0 else -1
        table = tables[level[i]]
        found = -1
        while lo[i] < nodes:
            start = max(pos[i], prev + 1, lo[i])
            j = start
            while j <= hi[i]:
                if table[j]:
                    found = j
                    break
                j += 1
            if found >= 0:
                pos[i] = found + 1
                break
            lo[i] = 2 * lo[i] + 1
            hi[i] = 2 * hi[i] + 2
            pos[i] = lo[i]
        if found < 0:
            if i == 0:
                return images, used, 0
            i -= 1
            continue
        if used >= budget:
            return images, used, 2
        used += 1
        images[i] = found
        m = level[i]
        ok = True
        for u in range(i + 1, (1 << (m + 1)) - 1):
            p = (u - 1) // 2
            if reach[m, 2 * images[p] + 1 + (u - 2 * p - 1)] <= found:
                ok = False
                break
        if not ok:
            continue
        if i + 1 == size:
            return images, used, 1
        i += 1
        p = (i - 1) // 2
        root = 2 * images[p] + 1 + (i - 2 * p - 1)
        lo[i] = root
        hi[i] = root
        pos[i] = root


def _to_embedding(k: int, images: list[int]) -> SubtreeEmbedding:
    return SubtreeEmbedding(k, tuple(Node.from_index(j) for j in images))


def find_monochromatic_subtree(
    c: Coloring, target_depth: int, budget: int = DEFAULT_BUDGET, colors: Sequence[int] = (1, 2)
) -> RamseyResult:
    """Deepest oriented embedding (up to ``target_depth``) into a single colour class.

    Depths are tried upward; a depth that fails in every colour ends the search, since
    restricting a deeper embedding would give a shallower one.  Colour 1 is tried first
    at each depth.  The budget caps candidate extensions per band vector; a band vector
    only involves nodes down to its deepest band, so every search made in a shallower
    truncation is repeated verbatim in a deeper one and the achieved depth can only grow
    with the truncation.
    """
    if target_depth < 0:
        raise InvalidInput("target depth must be >= 0")
    if target_depth > c.depth:
        raise InvalidInput("target depth exceeds the truncation depth")
    best: tuple[int, list[int]] | None = None
    achieved = -1
    used = 0
    exhausted = False
    for k in range(target_depth + 1):
        found = None
        for color in colors:
            s = _Search(c, color, budget)
            images = s.run(k)
            used += s.used
            exhausted = exhausted or s.exhausted
            if images is not None:
                found = (color, images)
                break
        if found is None:
            break
        best, achieved = found, k
    if best is None:
        return RamseyResult(None, None, -1, target_depth, exhausted, used)
    emb = _to_embedding(achieved, best[1])
    return RamseyResult(best[0], emb, achieved, target_depth, exhausted, used)


def is_monochromatic(c: Coloring, e: SubtreeEmbedding, color: int) -> bool:
    return all(s.length <= c.depth and c(s) == color for s in e.images)


def check_result(c: Coloring, r: RamseyResult) -> bool:
    """Independent recheck: verified embedding, single colour, depth as reported."""
    if r.embedding is None:
        return r.achieved_depth == -1
    return (
        r.embedding.source_depth == r.achieved_depth
        and bool(verify_embedding(r.embedding))
        and is_monochromatic(c, r.embedding, r.color)
    )


def split_partition(
    n1: Sequence[Node] | Coloring, depth: int, target_depth: int, budget: int = DEFAULT_BUDGET
) -> tuple[int | None, RamseyResult]:
    """Choose the side (1 for ``N₁``, 2 for its complement) holding a deepest subtree."""
    c = n1 if isinstance(n1, Coloring) else Coloring.from_partition(depth, n1)
    r = find_monochromatic_subtree(c, target_depth, budget)
    return r.color, r


@dataclass
class IndexFamilySplit:
    side: int
    indices: list[int]
    embeddings: dict[int, SubtreeEmbedding] = field(default_factory=dict)
    majority: bool = False


def split_index_family(
    slices: Sequence[Coloring], target_depth: int, budget: int = DEFAULT_BUDGET
) -> IndexFamilySplit:
    """Split indices ``1..K`` by which colour class of their slice hosts a depth-k subtree.

    ``K₁`` collects indices whose slice has a colour-1 subtree of the target depth and
    ``K₂`` the remaining indices with a colour-2 one.  The larger family is returned with
    its embeddings; ``majority`` records whether it holds at least ``ceil(K/2)`` indices.
    """
    K = len(slices)
    if K < 2:
        raise InvalidInput("need at least two slices")
    fam: dict[int, dict[int, SubtreeEmbedding]] = {1: {}, 2: {}}
    for i, c in enumerate(slices, start=1):
        for color in (1, 2):
            s = _Search(c, color, budget)
            images = s.run(target_depth) if target_depth <= c.depth else None
            if images is not None:
                fam[color][i] = _to_embedding(target_depth, images)
                break
    side = 1 if len(fam[1]) >= len(fam[2]) else 2
    chosen = fam[side]
    return IndexFamilySplit(side, sorted(chosen), chosen, len(chosen) >= math.ceil(K / 2))
