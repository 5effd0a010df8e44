"""Dense operators between truncations, the subtree operators B and Q, operator-norm
bounds, and distances to annihilators of finite families."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import HalfspaceIntersection

from . import config
from .base_norm import BaseNorm
from .errors import InvalidInput, UnsupportedDepth, UnsupportedSpace, UnverifiedEmbedding
from .lp import linprog
from .spaces import (
    SpaceTag,
    as_array,
    dual_norm_Bstar,
    dual_norm_D,
    norm,
    norm_B,
    norm_B_witness,
    norm_S,
    norm_S_witness,
)
from .tree import (
    SubtreeEmbedding,
    Truncation,
    antichain_index_sets,
    branch_index_sets,
    depth_for_size,
    maximal_antichain_index_sets,
    verify_embedding,
)


@dataclass
class OperatorMatrix:
    """``entries[i, j]`` is the coefficient of output basis vector i in the image of input j.

    Square when ``out_depth`` equals ``depth``; the embedding operators are rectangular.
    """

    entries: np.ndarray
    space: SpaceTag
    depth: int = field(default=-1)
    out_depth: int = field(default=-1)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2:
            raise InvalidInput("operator entries must be a 2-d array")
        rows, cols = self.entries.shape
        if self.depth < 0:
            self.depth = depth_for_size(cols)
        if self.out_depth < 0:
            self.out_depth = depth_for_size(rows)
        if cols != (1 << (self.depth + 1)) - 1 or rows != (1 << (self.out_depth + 1)) - 1:
            raise InvalidInput("entries do not match the declared truncation depths")

    @classmethod
    def identity(cls, depth: int, space: SpaceTag) -> OperatorMatrix:
        return cls(np.eye((1 << (depth + 1)) - 1), space)

    @property
    def shape(self):
        return self.entries.shape

    @property
    def is_square(self) -> bool:
        return self.depth == self.out_depth

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.entries @ other.entries, self.space, other.depth, self.out_depth)
        return self.entries @ as_array(other)

    def __call__(self, x) -> np.ndarray:
        return self.entries @ as_array(x)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def to_json(self) -> dict:
        out = {"depth": self.depth, "space": self.space.to_json(), "rows": self.entries.tolist()}
        if not self.is_square:
            out["out_depth"] = self.out_depth
        return out

    @classmethod
    def from_json(cls, data) -> OperatorMatrix:
        try:
            depth = int(data["depth"])
            out_depth = int(data.get("out_depth", depth))
            return cls(np.array(data["rows"], dtype=float), SpaceTag.from_json(data["space"]), depth, out_depth)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed operator matrix: {exc}") from exc


def build_B_Q(e: SubtreeEmbedding, host: Truncation | int, space: SpaceTag):
    """``B e_t = e_{s_t}`` from the source truncation into the host, and ``Q`` its left inverse."""
    host = host if isinstance(host, Truncation) else Truncation(host)
    check = verify_embedding(e)
    if not check:
        raise UnverifiedEmbedding(f"embedding fails at {check.witness}: {check.reason}")
    if e.image_depth > host.depth:
        raise InvalidInput("embedding image leaves the host truncation")
    m, n = (1 << (e.source_depth + 1)) - 1, host.node_count
    B = np.zeros((n, m))
    B[[s.index for s in e.images], np.arange(m)] = 1.0
    return (
        OperatorMatrix(B, space, e.source_depth, host.depth),
        OperatorMatrix(B.T.copy(), space, host.depth, e.source_depth),
    )


def adjoint(M: OperatorMatrix) -> OperatorMatrix:
    """Transpose, acting on the dual space: ``<Mx, y> = <x, M* y>``."""
    try:
        space = M.space.dual
    except UnsupportedSpace:
        space = M.space
    return OperatorMatrix(M.entries.T.copy(), space, M.out_depth, M.depth)


# ---------------------------------------------------------------- operator norms


@dataclass
class OpNormEstimate:
    value: float
    exact: bool
    argmax: np.ndarray | None = None
    probes: int = 0

    def __float__(self) -> float:
        return self.value


def _norming_functional(y: np.ndarray, space: SpaceTag) -> np.ndarray:
    """Dual element of norm one whose pairing with ``y`` equals ``norm(y, space)``."""
    base = space.base
    if space.kind in ("S", "B"):
        value, wit = (norm_S_witness if space.kind == "S" else norm_B_witness)(y, base)
        out = np.zeros_like(y)
        if value == 0 or not wit:
            return out
        idx = np.array(wit)
        if not base.is_lp:
            out[idx] = np.sign(y[idx]) / value * np.abs(y[idx])  # crude, pairing <= value
            return out
        if math.isinf(base.p):
            k = idx[np.argmax(np.abs(y[idx]))]
            out[k] = np.sign(y[k])
        elif base.p == 1:
            out[idx] = np.sign(y[idx])
        else:
            out[idx] = np.sign(y[idx]) * (np.abs(y[idx]) / value) ** (base.p - 1)
        return out
    if space.kind == "D":
        return dual_norm_D(y, base).witness
    if space.kind == "Bdual":
        return dual_norm_Bstar(y, base).witness
    raise UnsupportedSpace(str(space))


def _probe_vectors(n_in: int, rng: np.random.Generator, trials: int, space: SpaceTag):
    depth = depth_for_size(n_in)
    yield from np.eye(n_in)
    sparse_cap = 6 if space.is_dual else n_in
    for _ in range(trials):
        kind = rng.integers(3)
        v = np.zeros(n_in)
        if kind == 0:  # signed antichain: a random cut through the tree
            stack = [0]
            while stack:
                i = stack.pop()
                if (i + 1).bit_length() - 1 == depth or rng.random() < 0.4:
                    v[i] = rng.choice([-1.0, 1.0])
                else:
                    stack.extend((2 * i + 1, 2 * i + 2))
        elif kind == 1:  # signed branch
            i = 0
            while True:
                v[i] = rng.choice([-1.0, 1.0])
                if 2 * i + 1 >= n_in:
                    break
                i = 2 * i + 1 + int(rng.integers(2))
        else:
            k = int(rng.integers(1, min(sparse_cap, n_in) + 1))
            v[rng.choice(n_in, size=k, replace=False)] = rng.standard_normal(k)
        if space.is_dual and np.count_nonzero(v) > sparse_cap:
            keep = rng.choice(np.flatnonzero(v), size=sparse_cap, replace=False)
            mask = np.zeros(n_in, dtype=bool)
            mask[keep] = True
            v[~mask] = 0.0
        yield v


def op_norm_lower(M: OperatorMatrix, trials: int = 60, seed: int = 0, refine: int = 3) -> OpNormEstimate:
    """Certified lower bound ``max ||Mx|| / ||x||`` over probe vectors.

    Probes are basis vectors, signed antichain and branch indicators and random sparse
    vectors; the best few are refined by alternating between a norming functional of
    ``Mx`` and a norming vector of its pull-back under the transpose.
    """
    space = M.space
    rng = np.random.default_rng(seed)
    scored = []
    count = 0
    for x in _probe_vectors(M.shape[1], rng, trials, space):
        nx = norm(x, space)
        if nx == 0:
            continue
        scored.append((norm(M @ x, space) / nx, x))
        count += 1
    scored.sort(key=lambda item: -item[0])
    best, best_x = scored[0] if scored else (0.0, None)
    dual = space.dual if space.kind in ("S", "B", "D", "Bdual") else None
    if dual is not None:
        for ratio, x in scored[:refine]:
            for _ in range(4):
                y = M @ x
                if not np.any(y):
                    break
                phi = _norming_functional(y, space)
                z = M.entries.T @ phi
                if not np.any(z):
                    break
                x = _norming_functional(z, dual)
                nx = norm(x, space)
                if nx == 0:
                    break
                r = norm(M @ x, space) / nx
                count += 1
                if r > best:
                    best, best_x = r, x
    return OpNormEstimate(float(best), False, best_x, count)


def _ball_halfspaces(space: SpaceTag, depth: int) -> np.ndarray:
    """Rows ``[a, -1]`` meaning ``a @ x <= 1`` for a polyhedral unit ball."""
    n = (1 << (depth + 1)) - 1
    base = space.base
    if space.kind in ("S", "B") and base.is_lp and math.isinf(base.p):
        rows = np.vstack([np.eye(n), -np.eye(n)])
    elif space.kind in ("S", "B") and base.is_lp and base.p == 1:
        sets = antichain_index_sets(depth) if space.kind == "S" else branch_index_sets(depth)
        out = []
        for s in sets:
            for signs in np.array(np.meshgrid(*[[-1.0, 1.0]] * len(s))).reshape(len(s), -1).T:
                a = np.zeros(n)
                a[list(s)] = signs
                out.append(a)
        rows = np.array(out)
    elif space.kind == "D" and base.is_lp and base.p == 1:
        rows = ball_vertices(SpaceTag.S(base), depth)  # polar of the S ball
    else:
        raise UnsupportedSpace(f"no polyhedral description for {space}")
    return np.hstack([rows, -np.ones((rows.shape[0], 1))])


def ball_vertices(space: SpaceTag, depth: int) -> np.ndarray:
    """Extreme points of the unit ball, found by halfspace intersection (qhull)."""
    hs = _ball_halfspaces(space, depth)
    if hs.shape[1] - 1 == 1:
        return np.array([[1.0], [-1.0]])
    hi = HalfspaceIntersection(hs, np.zeros(hs.shape[1] - 1))
    pts = np.round(hi.intersections, 12)
    return np.unique(pts, axis=0)


POLYHEDRAL = {("S", 1.0), ("B", 1.0), ("S", math.inf), ("B", math.inf), ("D", 1.0)}


def op_norm_exact_tiny(M: OperatorMatrix) -> float:
    """Exact operator norm on polyhedral unit balls, truncations of depth <= 2.

    The ball's extreme points are derived per instance from its constraint system; the
    convex function ``x -> ||Mx||`` peaks at one of them.
    """
    space = M.space
    if space.base is None or not space.base.is_lp:
        raise UnsupportedSpace("exact norms need an l^1/l^inf based space")
    if (space.kind, space.base.p) not in POLYHEDRAL:
        raise UnsupportedSpace(f"{space} does not have a polyhedral unit ball here")
    if max(M.depth, M.out_depth) > 2:
        raise UnsupportedDepth("exact operator norms only up to depth 2")
    verts = ball_vertices(space, M.depth)
    images = verts @ M.entries.T
    if space.kind == "D":
        s_verts = ball_vertices(SpaceTag.S(space.base), M.out_depth)
        return float(np.max(images @ s_verts.T)) if images.size else 0.0
    return float(max(norm(y, space) for y in images))


# ---------------------------------------------------------------- annihilator distances


@dataclass
class DistanceResult:
    value: float
    witness: np.ndarray
    exact: bool
    method: str = ""

    def __float__(self) -> float:
        return self.value


WITNESS_SUPPORT_CAP = 64


def _dual_norm_lower(v: np.ndarray, space: SpaceTag):
    """For ``v`` in the dual of the primal ``space``: (lower bound, unit primal g, exact?)

    Small supports are solved exactly; otherwise a signed branch (for S) or signed
    antichain (for B) of norm one gives the bound.
    """
    base = space.base
    if np.count_nonzero(v) <= WITNESS_SUPPORT_CAP:
        res = (dual_norm_D if space.kind == "S" else dual_norm_Bstar)(v, base)
        if res.exact:
            return res.value, res.witness, True
    l1 = BaseNorm.lp(1)
    if space.kind == "S":
        val, idx = norm_B_witness(v, l1)
    else:
        val, idx = norm_S_witness(v, l1)
    g = np.zeros_like(v)
    idx = list(idx)
    g[idx] = np.sign(v[idx])
    return val, g, False


class Annihilator:
    """The subspace ``{w : <w, v> = 0 for v in V}`` of ``space``, ready for distance queries.

    ``V`` lives in the dual of ``space``.  For a dual space (``D`` or ``Bdual``) the
    members of ``V`` are primal vectors and the subspace is their annihilator there.
    """

    def __init__(self, V: Sequence, space: SpaceTag):
        self.space = space
        self.V = [as_array(v) for v in V]
        self._norming = None
        if len(self.V) == 1:
            self._norming = self._prepare_single(self.V[0])

    def _prepare_single(self, v):
        space = self.space
        if space.kind in ("S", "B"):
            lower, g, exact = _dual_norm_lower(v, space)
            return lower, g, exact
        if space.kind in ("D", "Bdual"):
            primal = space.dual
            value = norm(v, primal)
            return value, _norming_functional(v, primal), space.base.is_lp
        raise UnsupportedSpace(str(space))

    def _exact_lp_available(self, depth: int) -> bool:
        base = self.space.base
        if base is None or not base.is_lp or not (base.p == 1 or math.isinf(base.p)):
            return False
        if self.space.kind == "S":
            return depth <= config.antichain_cap()
        if self.space.kind == "B":
            return depth <= config.branch_cap()
        return False

    def distance(self, x) -> DistanceResult:
        x = as_array(x)
        if not self.V:
            return DistanceResult(0.0, x.copy(), True, "empty")
        products = np.array([x @ v for v in self.V])
        scale = max(1.0, float(np.max([np.abs(v).max(initial=0.0) for v in self.V])))
        if np.all(np.abs(products) <= 1e-14 * scale):
            return DistanceResult(0.0, x.copy(), True, "already-annihilated")
        depth = depth_for_size(x.size)
        if self._exact_lp_available(depth):
            return self._exact_lp(x)
        if self._norming is not None:
            value, g, exact = self._norming
            pg = float(g @ self.V[0])
            w = x - products[0] / pg * g
            return DistanceResult(abs(products[0]) / value, w, exact, "hahn-banach")
        return self._dictionary_bound(x, products)

    def _exact_lp(self, x: np.ndarray) -> DistanceResult:
        n = x.size
        depth = depth_for_size(n)
        base = self.space.base
        # variables: w+ (n) | w- (n) | a (n) | tau
        nv = 3 * n + 1
        A, b = [], []
        I = np.eye(n)
        A.append(np.hstack([-I, I, -I, np.zeros((n, 1))]))
        b.append(-x)
        A.append(np.hstack([I, -I, -I, np.zeros((n, 1))]))
        b.append(x)
        if math.isinf(base.p):
            A.append(np.hstack([np.zeros((n, 2 * n)), I, -np.ones((n, 1))]))
            b.append(np.zeros(n))
        else:
            sets = maximal_antichain_index_sets(depth) if self.space.kind == "S" else branch_index_sets(depth)
            rows = np.zeros((len(sets), nv))
            for r, s in enumerate(sets):
                rows[r, 2 * n + np.array(s)] = 1.0
                rows[r, -1] = -1.0
            A.append(rows)
            b.append(np.zeros(len(sets)))
        Vm = np.array(self.V)
        A_eq = np.hstack([Vm, -Vm, np.zeros((len(self.V), n + 1))])
        c = np.zeros(nv)
        c[-1] = 1.0
        res = linprog(c, np.vstack(A), np.concatenate(b), A_eq, np.zeros(len(self.V)))
        if not res.ok:
            raise RuntimeError(f"distance LP failed: {res.status}")
        w = res.x[:n] - res.x[n : 2 * n]
        return DistanceResult(float(norm(x - w, self.space)), w, True, "epigraph-lp")

    def _dictionary_bound(self, x: np.ndarray, products: np.ndarray) -> DistanceResult:
        """Upper bound: cheapest correction ``d`` with ``<d, v> = <x, v>``; ``w = x - d``."""
        n = x.size
        weight = np.sum([np.abs(v) for v in self.V], axis=0)
        top = np.argsort(-weight, kind="stable")[: min(n, 4 * len(self.V) + 4)]
        atoms, costs = [x], [norm(x, self.space)]
        for i in top:
            e = np.zeros(n)
            e[i] = 1.0
            atoms.append(e)
            costs.append(1.0)
        for v in self.V:
            _, g, _ = self._prepare_single(v)
            if np.any(g):
                atoms.append(g)
                costs.append(norm(g, self.space))
        G = np.array([[a @ v for a in atoms] for v in self.V])
        costs = np.array(costs)
        res = linprog(np.concatenate([costs, costs]), A_eq=np.hstack([G, -G]), b_eq=products)
        if not res.ok:
            return DistanceResult(norm(x, self.space), np.zeros(n), False, "trivial-bound")
        coef = res.x[: len(atoms)] - res.x[len(atoms) :]
        d = np.array(atoms).T @ coef
        if self.space.kind in ("S", "B"):
            value = norm(d, self.space)
        else:
            value = float(np.abs(coef) @ costs)
        return DistanceResult(float(value), x - d, False, "dictionary")


def distance_to_annihilator(x, V: Sequence, space: SpaceTag) -> DistanceResult:
    """``min ||x - w||`` over ``w`` annihilated by every member of ``V``."""
    return Annihilator(V, space).distance(x)
