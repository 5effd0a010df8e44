"""Norms of S^E (antichain supremum), B^E (branch supremum), their duals, and l^p sums.

Vectors are dense float arrays over a truncation in heap (standard linear) order;
:class:`CoeffVector` wraps one together with its depth for I/O.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from . import config
from .base_norm import BaseNorm, eval_norm
from .errors import InvalidInput, TruncationMismatch, UnsupportedDepth, UnsupportedSpace
from .lp import linprog
from .tree import Node, antichain_index_sets, depth_for_size

CG_TOL = 1e-9


@dataclass
class CoeffVector:
    depth: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != ((1 << (self.depth + 1)) - 1,):
            raise InvalidInput(f"expected {(1 << (self.depth + 1)) - 1} entries for depth {self.depth}")

    @classmethod
    def zeros(cls, depth: int) -> CoeffVector:
        return cls(depth, np.zeros((1 << (depth + 1)) - 1))

    @classmethod
    def unit(cls, depth: int, node: Node) -> CoeffVector:
        v = cls.zeros(depth)
        v.values[node.index] = 1.0
        return v

    @classmethod
    def from_entries(cls, depth: int, entries: Mapping[Node | str, float]) -> CoeffVector:
        v = cls.zeros(depth)
        for key, val in entries.items():
            node = Node.parse(key) if isinstance(key, str) else key
            if node.length > depth:
                raise InvalidInput(f"node {str(node)!r} lies outside depth {depth}")
            v.values[node.index] = float(val)
        return v

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __getitem__(self, node: Node) -> float:
        return float(self.values[node.index])

    def support(self) -> list[Node]:
        return [Node.from_index(int(i)) for i in np.nonzero(self.values)[0]]

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "entries": {str(Node.from_index(int(i))): float(self.values[i]) for i in np.nonzero(self.values)[0]},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> CoeffVector:
        try:
            return cls.from_entries(int(data["depth"]), data["entries"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed coefficient vector: {exc}") from exc


def as_array(x) -> np.ndarray:
    arr = np.asarray(x.values if isinstance(x, CoeffVector) else x, dtype=float)
    depth_for_size(arr.size)
    return arr


@dataclass(frozen=True)
class SpaceTag:
    """``S``, ``B``, ``D`` (dual of S), ``Bdual`` (dual of B) over a base, or ``lpsum``."""

    kind: str
    base: BaseNorm | None = None
    p: float = 1.0
    inner: SpaceTag | None = None

    @classmethod
    def S(cls, base: BaseNorm) -> SpaceTag:
        return cls("S", base)

    @classmethod
    def B(cls, base: BaseNorm) -> SpaceTag:
        return cls("B", base)

    @classmethod
    def D(cls, base: BaseNorm) -> SpaceTag:
        return cls("D", base)

    @classmethod
    def Bdual(cls, base: BaseNorm) -> SpaceTag:
        return cls("Bdual", base)

    @classmethod
    def LpSum(cls, p: float, inner: SpaceTag) -> SpaceTag:
        return cls("lpsum", None, float(p), inner)

    @property
    def dual(self) -> SpaceTag:
        pairs = {"S": "D", "D": "S", "B": "Bdual", "Bdual": "B"}
        if self.kind not in pairs:
            raise UnsupportedSpace(f"no dual tag for {self.kind}")
        return SpaceTag(pairs[self.kind], self.base)

    @property
    def is_dual(self) -> bool:
        return self.kind in ("D", "Bdual")

    def __str__(self) -> str:
        if self.kind == "lpsum":
            return f"l{self.p:g}({self.inner})"
        return f"{self.kind}^{self.base}"

    def to_json(self) -> dict:
        if self.kind == "lpsum":
            return {"kind": "lpsum", "p": "inf" if math.isinf(self.p) else self.p, "inner": self.inner.to_json()}
        return {"kind": self.kind, "base": self.base.to_json()}

    @classmethod
    def from_json(cls, data: Mapping) -> SpaceTag:
        if data["kind"] == "lpsum":
            p = data["p"]
            return cls.LpSum(math.inf if p == "inf" else float(p), cls.from_json(data["inner"]))
        if data["kind"] not in ("S", "B", "D", "Bdual"):
            raise InvalidInput(f"unknown space kind {data['kind']!r}")
        return cls(data["kind"], BaseNorm.from_json(data["base"]))


# ---------------------------------------------------------------- S^E


def _lp_tree_dp(a: np.ndarray, p: float):
    """``best(t) = max(|a_t|^p, best(t0) + best(t1))`` bottom-up; returns (best, take_self)."""
    n = depth_for_size(a.size)
    if math.isinf(p):
        best = np.abs(a).copy()
    else:
        best = np.abs(a) ** p
    take = np.ones(a.size, dtype=bool)
    for level in range(n - 1, -1, -1):
        idx = np.arange((1 << level) - 1, (1 << (level + 1)) - 1)
        if math.isinf(p):
            below = np.maximum(best[2 * idx + 1], best[2 * idx + 2])
        else:
            below = best[2 * idx + 1] + best[2 * idx + 2]
        own = best[idx]
        take[idx] = own >= below  # ties keep the shallower node
        best[idx] = np.maximum(own, below)
    return best, take


def _dp_witness(a: np.ndarray, take: np.ndarray) -> tuple[int, ...]:
    n = depth_for_size(a.size)
    out, stack = [], [0]
    while stack:
        i = stack.pop()
        level = (i + 1).bit_length() - 1
        if take[i] or level == n:
            if a[i] != 0:
                out.append(i)
        else:
            stack.extend((2 * i + 2, 2 * i + 1))
    return tuple(sorted(out))


def _enum_s(a: np.ndarray, base: BaseNorm):
    n = depth_for_size(a.size)
    cap = config.antichain_cap()
    if n > cap:
        raise UnsupportedDepth(f"antichain enumeration for base {base} needs depth <= {cap}, got {n}")
    best, wit = 0.0, ()
    for anti in antichain_index_sets(n, cap=max(cap, 4)):
        val = eval_norm(base, a[list(anti)])
        if val > best:
            best, wit = val, anti
    return best, tuple(i for i in wit if a[i] != 0)


def norm_S_witness(x, base: BaseNorm) -> tuple[float, tuple[int, ...]]:
    """Value of the antichain supremum and an antichain attaining it (heap positions)."""
    a = as_array(x)
    if not base.is_lp:
        return _enum_s(a, base)
    best, take = _lp_tree_dp(a, base.p)
    value = best[0] if math.isinf(base.p) else best[0] ** (1.0 / base.p)
    return float(value), _dp_witness(a, take)


def norm_S(x, base: BaseNorm) -> float:
    a = as_array(x)
    if not base.is_lp:
        return _enum_s(a, base)[0]
    best, _ = _lp_tree_dp(a, base.p)
    return float(best[0] if math.isinf(base.p) else best[0] ** (1.0 / base.p))


@functools.lru_cache(maxsize=8)
def _antichain_incidence(n: int, cap: int) -> tuple[np.ndarray, tuple[tuple[int, ...], ...]]:
    sets = tuple(antichain_index_sets(n, cap=cap))
    M = np.zeros(((1 << (n + 1)) - 1, len(sets)))
    for j, anti in enumerate(sets):
        M[list(anti), j] = 1.0
    return M, sets


def norm_S_enumerated(x, base: BaseNorm, cap: int = 4) -> tuple[float, tuple[int, ...]]:
    """Antichain supremum by exhaustive enumeration; independent of the tree DP.

    For l^p bases (p finite) every antichain's p-th power sum comes from one product with
    the node/antichain incidence matrix; other bases evaluate each antichain.
    """
    a = as_array(x)
    n = depth_for_size(a.size)
    M, sets = _antichain_incidence(n, cap)
    if base.is_lp and not math.isinf(base.p):
        scores = (np.abs(a) ** base.p) @ M
        j = int(np.argmax(scores))
        return float(scores[j] ** (1.0 / base.p)), sets[j]
    best, wit = 0.0, ()
    for anti in sets:
        val = eval_norm(base, a[list(anti)])
        if val > best:
            best, wit = val, anti
    return best, wit


# ---------------------------------------------------------------- B^E


def _branch_paths(n: int) -> np.ndarray:
    """Array of shape (2**n, n+1): heap positions along each branch, leaves left to right."""
    leaves = np.arange((1 << n) - 1, (1 << (n + 1)) - 1)
    paths = np.empty((leaves.size, n + 1), dtype=np.int64)
    cur = leaves.copy()
    for col in range(n, -1, -1):
        paths[:, col] = cur
        cur = (cur - 1) // 2
    return paths


def norm_B_witness(x, base: BaseNorm) -> tuple[float, tuple[int, ...]]:
    """Largest base norm along a branch and the leftmost branch attaining it."""
    a = as_array(x)
    n = depth_for_size(a.size)
    paths = _branch_paths(n)
    vals = np.abs(a)[paths]
    if base.is_lp and math.isinf(base.p):
        scores = vals.max(axis=1)
    elif base.is_lp:
        scores = np.sum(vals**base.p, axis=1)
    else:
        scores = np.array([eval_norm(base, a[row]) for row in paths])
    k = int(np.argmax(scores))
    if base.is_lp and not math.isinf(base.p):
        value = float(scores[k] ** (1.0 / base.p))
    else:
        value = float(scores[k])
    return value, tuple(int(i) for i in paths[k])


def norm_B(x, base: BaseNorm) -> float:
    return norm_B_witness(x, base)[0]


# ---------------------------------------------------------------- duals


@dataclass
class DualNormResult:
    """Outcome of a dual-norm solve.

    ``witness`` is a primal vector of norm at most 1 whose pairing with the input
    equals ``value`` (up to solver tolerance); ``gap`` bounds the distance to the true
    value when the solve stopped early.
    """

    value: float
    witness: np.ndarray
    exact: bool = True
    converged: bool = True
    iterations: int = 0
    gap: float = 0.0
    method: str = ""

    def __float__(self) -> float:
        return self.value


def _forest_children(support: Sequence[int]) -> tuple[list[int], dict[int, list[int]]]:
    """Induced forest on ``support``: roots and nearest-descendant children (heap positions)."""
    sup = set(support)
    children: dict[int, list[int]] = {i: [] for i in support}
    roots = []
    for i in sorted(support):
        j = i
        parent = None
        while j > 0:
            j = (j - 1) // 2
            if j in sup:
                parent = j
                break
        if parent is None:
            roots.append(i)
        else:
            children[parent].append(i)
    return roots, children


def support_chains(support: Sequence[int]) -> list[tuple[int, ...]]:
    """Maximal chains of the prefix order restricted to ``support``."""
    roots, children = _forest_children(support)
    out = []

    def walk(i, path):
        path = path + (i,)
        if not children[i]:
            out.append(path)
        for c in children[i]:
            walk(c, path)

    for r in roots:
        walk(r, ())
    return out


def support_antichains(support: Sequence[int], limit: int = 200_000) -> list[tuple[int, ...]]:
    """Maximal antichains of the prefix order restricted to ``support``."""
    roots, children = _forest_children(support)

    def rec(i):
        if not children[i]:
            return [(i,)]
        combos = [()]
        for c in children[i]:
            combos = [a + b for a in combos for b in rec(c)]
            if len(combos) > limit:
                raise UnsupportedDepth("too many antichains on this support")
        return [(i,)] + combos

    out = [()]
    for r in roots:
        out = [a + b for a in out for b in rec(r)]
        if len(out) > limit:
            raise UnsupportedDepth("too many antichains on this support")
    return [tuple(sorted(a)) for a in out]


def _solve_polyhedral(w: np.ndarray, rows: list[tuple[int, ...]]):
    """max ``w @ u`` s.t. ``sum(u[row]) <= 1`` per row, ``u >= 0``."""
    A = np.zeros((len(rows), w.size))
    for r, row in enumerate(rows):
        A[r, list(row)] = 1.0
    res = linprog(-w, A, np.ones(len(rows)))
    if not res.ok:
        raise RuntimeError(f"LP failed with status {res.status}")
    return -res.fun, res.x, res.iterations


def _slsqp_dual(w: np.ndarray, sets: list[tuple[int, ...]], p: float):
    """max ``w @ u`` s.t. ``sum(u[set]**p) <= 1``, ``u >= 0`` for 1 < p < inf."""
    m = w.size
    masks = np.zeros((len(sets), m))
    for r, s in enumerate(sets):
        masks[r, list(s)] = 1.0
    cons = {
        "type": "ineq",
        "fun": lambda u: 1.0 - masks @ (np.clip(u, 0, None) ** p),
        "jac": lambda u: -masks * (p * np.clip(u, 0, None) ** (p - 1)),
    }
    # start from the l^p-normalised weights scaled into the feasible region
    x0 = w ** (1 / (p - 1))
    x0 = x0 / max(1e-300, float(np.max(masks @ x0**p)) ** (1 / p))
    res = minimize(lambda u: -w @ u, x0, jac=lambda u: -w, constraints=[cons],
                   bounds=[(0, None)] * m, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 1000})
    u = np.clip(res.x, 0, None)
    scale = float(np.max(masks @ u**p)) ** (1 / p)
    u = u / max(scale, 1.0)  # certify feasibility
    return float(w @ u), u


def _ratio_dual(xs: np.ndarray, primal_norm, seed: int = 0, starts: int = 8):
    """Lower bound for a dual norm by maximising ``<x, xs> / ||x||`` locally."""
    rng = np.random.default_rng(seed)
    sup = np.nonzero(xs)[0]
    best, best_x = 0.0, np.zeros_like(xs)

    def neg_ratio(z):
        x = np.zeros_like(xs)
        x[sup] = z
        nrm = primal_norm(x)
        return 0.0 if nrm == 0 else -(x @ xs) / nrm

    inits = [np.sign(xs[sup])] + [rng.standard_normal(sup.size) for _ in range(starts)]
    for z0 in inits:
        res = minimize(neg_ratio, z0, method="Nelder-Mead", options={"maxiter": 2000 * sup.size})
        if -res.fun > best:
            best = -res.fun
            x = np.zeros_like(xs)
            x[sup] = res.x
            best_x = x / primal_norm(x)
    return best, best_x


def _rescaled(solver):
    """Run ``solver`` on ``xs / max|xs|`` and scale the value back.

    The LP pivot tolerances are absolute, so the solve happens at unit scale; the
    witness lives in the primal unit ball and needs no rescaling.
    """

    def wrapped(xs, base: BaseNorm, *args, **kwargs) -> DualNormResult:
        a = as_array(xs)
        scale = float(np.abs(a).max()) if a.size else 0.0
        if scale == 0.0 or scale == 1.0:
            return solver(a, base, *args, **kwargs)
        res = solver(a / scale, base, *args, **kwargs)
        res.value *= scale
        res.gap *= scale
        return res

    wrapped.__name__, wrapped.__doc__ = solver.__name__, solver.__doc__
    return wrapped


@_rescaled
def dual_norm_D(xs, base: BaseNorm, max_rounds: int = 500, tol: float = CG_TOL) -> DualNormResult:
    """Norm of a functional in D^E = (S^E)*, i.e. ``sup <x, xs>`` over the S^E unit ball.

    For the l^1 base this is the LP ``max sum |xs_t| u_t`` subject to ``sum_{t in A} u_t <= 1``
    for every antichain A, solved by constraint generation: start from the singleton
    antichains, and after each solve add the antichain found by the tree DP of ``norm_S``
    on the current iterate if its sum exceeds 1 + tol.  Only the support of ``xs`` enters
    the LP (coordinate projections are contractive on S^E).
    """
    a = as_array(xs)
    sup = np.nonzero(a)[0]
    w = np.abs(a[sup])
    signs = np.sign(a[sup])
    full = np.zeros_like(a)
    if sup.size == 0:
        return DualNormResult(0.0, full, method="trivial")
    if base.is_lp and math.isinf(base.p):
        full[sup] = signs
        return DualNormResult(float(w.sum()), full, method="closed-form")
    if base.is_lp and base.p == 1:
        pos = {int(i): k for k, i in enumerate(sup)}
        rows = [(k,) for k in range(sup.size)]
        seen = set(rows)
        l1 = BaseNorm.lp(1)
        total_iters = 0
        for rounds in range(1, max_rounds + 1):
            value, u, iters = _solve_polyhedral(w, rows)
            total_iters += iters
            full[:] = 0.0
            full[sup] = u
            violation, anti = norm_S_witness(full, l1)
            if violation <= 1.0 + tol:
                full[sup] = signs * u
                return DualNormResult(value, full.copy(), iterations=rounds, method="column-generation")
            row = tuple(pos[i] for i in anti)
            if row in seen:  # numerical stall; report the certified bracket
                break
            seen.add(row)
            rows.append(row)
        lower = value / violation
        full[sup] = signs * u / violation
        return DualNormResult(lower, full.copy(), exact=False, converged=False,
                              iterations=rounds, gap=value - lower, method="column-generation")
    if base.is_lp:
        sets = support_antichains(list(map(int, sup)))
        sets = [tuple(int(np.searchsorted(sup, i)) for i in s) for s in sets]
        value, u = _slsqp_dual(w, sets, base.p)
        full[sup] = signs * u
        return DualNormResult(value, full, method="slsqp")
    value, x = _ratio_dual(a, lambda v: norm_S(v, base))
    return DualNormResult(value, x, exact=False, method="ratio-search")


def dual_norm_D_enumerated(xs, cap: int = 3) -> float:
    """D^{l1} norm as one LP over all antichains of the truncation (no constraint generation).

    Solved in dual form, ``min sum_A y_A`` s.t. ``sum_{A ∋ t} y_A >= |xs_t|``, ``y >= 0``,
    which has one row per node instead of one per antichain.
    """
    a = as_array(xs)
    n = depth_for_size(a.size)
    rows = antichain_index_sets(n, cap=cap)
    M = np.zeros((a.size, len(rows)))
    for r, row in enumerate(rows):
        M[list(row), r] = 1.0
    res = linprog(np.ones(len(rows)), -M, -np.abs(a))
    if not res.ok:
        raise RuntimeError(f"LP failed with status {res.status}")
    return res.fun


@_rescaled
def dual_norm_Bstar(xs, base: BaseNorm) -> DualNormResult:
    """Norm in (B^E)*: ``sup <x, xs>`` over the B^E unit ball.

    Finitely many chains meet the support, so the l^1 case is one direct LP with one row
    per maximal chain of the support.
    """
    a = as_array(xs)
    sup = np.nonzero(a)[0]
    w = np.abs(a[sup])
    signs = np.sign(a[sup])
    full = np.zeros_like(a)
    if sup.size == 0:
        return DualNormResult(0.0, full, method="trivial")
    if base.is_lp and math.isinf(base.p):
        full[sup] = signs
        return DualNormResult(float(w.sum()), full, method="closed-form")
    chains = support_chains(list(map(int, sup)))
    rows = [tuple(int(np.searchsorted(sup, i)) for i in c) for c in chains]
    if base.is_lp and base.p == 1:
        value, u, iters = _solve_polyhedral(w, rows)
        full[sup] = signs * u
        return DualNormResult(value, full, iterations=iters, method="lp")
    if base.is_lp:
        value, u = _slsqp_dual(w, rows, base.p)
        full[sup] = signs * u
        return DualNormResult(value, full, method="slsqp")
    value, x = _ratio_dual(a, lambda v: norm_B(v, base))
    return DualNormResult(value, x, exact=False, method="ratio-search")


# ---------------------------------------------------------------- dispatch


def pairing(x, y) -> float:
    a, b = as_array(x), as_array(y)
    if a.size != b.size:
        raise TruncationMismatch(f"pairing of vectors with {a.size} and {b.size} entries")
    return float(a @ b)


def norm(x, space: SpaceTag) -> float:
    if space.kind == "S":
        return norm_S(x, space.base)
    if space.kind == "B":
        return norm_B(x, space.base)
    if space.kind == "D":
        return dual_norm_D(x, space.base).value
    if space.kind == "Bdual":
        return dual_norm_Bstar(x, space.base).value
    raise UnsupportedSpace(f"norm of a single vector in {space}")


def norm_lp_sum(xs: Iterable, p: float, inner: SpaceTag) -> float:
    xs = [as_array(x) for x in xs]
    if len({x.size for x in xs}) > 1:
        raise TruncationMismatch("all members of an l^p sum must share a truncation")
    parts = np.array([norm(x, inner) for x in xs])
    return eval_norm(BaseNorm.lp(p), parts)


def signed_indicator(size: int, nodes: Iterable[int], signs=None) -> np.ndarray:
    v = np.zeros(size)
    nodes = list(nodes)
    v[nodes] = 1.0 if signs is None else np.asarray(signs, dtype=float)
    return v
