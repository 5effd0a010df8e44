"""Factorisation of the identity through an operator with large diagonal on a D^E truncation.

The construction picks nodes ``s_t`` in standard order, each inside a cone reserved for it
below its predecessor's image, keeping the coupling ``<e_{s_t}, T f_{s_u}>`` to earlier
nodes small and shrinking the reserved cones so that later nodes couple weakly back.
With ``G[i, j] = T[s_i, s_j] / T[s_i, s_i]`` (the compression ``UTJ`` in node
coordinates) one gets ``A = G^{-1} diag(1/T[s_i, s_i]) Q`` and ``B`` the selection of the
``f_{s_t}``, so that ``ATB = I`` on the output truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base_norm import BaseNorm
from .errors import DiagonalBelowDelta, InvalidInput, UnsupportedSpace
from .operators import OperatorMatrix, op_norm_lower
from .spaces import SpaceTag, norm_S
from .tree import Node, SubtreeEmbedding, Truncation, order_index, verify_embedding

NEUMANN_DIRECT_SWITCH = 0.5
NEUMANN_TOL = 1e-17


def default_eta0(delta: float, eta: float, slack: float = 0.9) -> float:
    """``slack`` times the largest ``η₀`` with ``1 / (1 - η₀/(3δ)) <= 1 + η``."""
    if not (delta > 0 and eta > 0):
        raise InvalidInput("delta and eta must be positive")
    return slack * 3 * delta * eta / (1 + eta)


def eta0_admissible(eta0: float, delta: float, eta: float) -> bool:
    r = eta0 / (3 * delta)
    return 0 <= r < 1 and 1 / (1 - r) <= 1 + eta + 1e-15


# ---------------------------------------------------------------- sign normalisation


def sign_normalize(T: OperatorMatrix) -> tuple[OperatorMatrix, np.ndarray]:
    """``T' = T S`` with ``S = diag(sign T[s, s])``, so that ``T'`` has positive diagonal.

    ``S`` is an isometry by unconditionality; a certificate ``A T' B = I`` for ``T'``
    becomes ``A T (S B) = I`` for ``T``.
    """
    d = T.diagonal()
    zero = np.flatnonzero(d == 0)
    if zero.size:
        node = Node.from_index(int(zero[0]))
        raise DiagonalBelowDelta(f"zero diagonal entry at node {str(node)!r}", node, 0.0)
    signs = np.sign(d)
    return OperatorMatrix(T.entries * signs[None, :], T.space, T.depth, T.out_depth), signs


# ---------------------------------------------------------------- coupling bounds


def _cone_mask(roots, size: int) -> np.ndarray:
    mask = np.zeros(size, dtype=bool)
    for r in roots:
        lo = hi = r
        while lo < size:
            mask[lo : hi + 1] = True
            lo, hi = 2 * lo + 1, 2 * hi + 2
    return mask


def coupling_bound(T: np.ndarray, row: int, roots, base: BaseNorm) -> float:
    """``sup_{||x||_D <= 1} |<e_row, T (x restricted to the cones)>|``.

    The supremum is the S-norm of the row restricted to the cones, computed exactly by
    the antichain DP.
    """
    r = np.where(_cone_mask(roots, T.shape[1]), T[row], 0.0)
    return norm_S(r, base)


@dataclass
class SpliceResult:
    roots: list[int]
    bound: float
    history: list[float]
    descents: int
    shallow: bool

    def to_json(self) -> dict:
        return {
            "roots": [str(Node.from_index(r)) for r in self.roots],
            "bound": self.bound,
            "history": self.history,
            "descents": self.descents,
            "shallow": self.shallow,
        }


def splice_subtrees(
    T: OperatorMatrix | np.ndarray,
    row: int | Node,
    roots,
    target: float = 0.0,
    max_lengths=None,
    budget: int = 1000,
    base: BaseNorm | None = None,
) -> SpliceResult:
    """Shrink a family of pairwise incomparable cones to weaken their coupling to ``row``.

    Each step replaces one cone root by one of its children, choosing the replacement
    with the smallest resulting bound, until the bound is at most ``target``, no step
    helps, or ``budget`` steps were taken.  ``max_lengths[i]`` caps the depth of root ``i``
    (room must remain below it); a family that cannot descend further while above target
    is flagged shallow.  Bounds never increase since the cones only shrink.
    """
    if isinstance(T, OperatorMatrix):
        base = base or T.space.base
        T = T.entries
    base = base or BaseNorm.lp(1)
    row = row.index if isinstance(row, Node) else int(row)
    roots = [r.index if isinstance(r, Node) else int(r) for r in roots]
    size = T.shape[1]
    caps = [None] * len(roots) if max_lengths is None else list(max_lengths)
    for a in range(len(roots)):
        for b in range(a + 1, len(roots)):
            if Node.from_index(roots[a]).comparable(Node.from_index(roots[b])):
                raise InvalidInput("cone roots must be pairwise incomparable")
    bound = coupling_bound(T, row, roots, base)
    history = [bound]
    descents = 0
    shallow = False
    while bound > target and descents < budget:
        best = None
        blocked = True
        for i, r in enumerate(roots):
            for child in (2 * r + 1, 2 * r + 2):
                if child >= size:
                    continue
                if caps[i] is not None and Node.from_index(child).length > caps[i]:
                    continue
                blocked = False
                trial = roots[:i] + [child] + roots[i + 1 :]
                value = coupling_bound(T, row, trial, base)
                if best is None or value < best[0] - 1e-15:
                    best = (value, trial)
        if best is None or best[0] >= bound:
            shallow = blocked or best is None
            break
        bound, roots = best
        history.append(bound)
        descents += 1
    if bound > target and not shallow:
        shallow = all(
            2 * r + 1 >= size or (caps[i] is not None and Node.from_index(r).length + 1 > caps[i])
            for i, r in enumerate(roots)
        )
    return SpliceResult(roots, bound, history, descents, shallow)


# ---------------------------------------------------------------- node selection


@dataclass
class PickResult:
    node: Node | None
    value: float
    met: bool
    scanned: int


def pick_small_node(
    T: OperatorMatrix | np.ndarray,
    priors,
    root: int | Node,
    threshold: float,
    after: int = -1,
    max_length: int | None = None,
) -> PickResult:
    """First node of the cone of ``root`` (breadth-first) with small coupling to ``priors``.

    The coupling is ``sum_u |<e_s, T f_u>|`` over prior nodes ``u``.  Candidates must come
    after index ``after`` in the standard order and have length at most ``max_length``.
    Without a qualifying node the minimiser is returned with ``met=False``.
    """
    T = T.entries if isinstance(T, OperatorMatrix) else np.asarray(T, dtype=float)
    root = root.index if isinstance(root, Node) else int(root)
    prior_idx = np.array([p.index if isinstance(p, Node) else int(p) for p in priors], dtype=int)
    size = T.shape[0]
    best = None
    scanned = 0
    lo = hi = root
    level = Node.from_index(root).length
    while lo < size and (max_length is None or level <= max_length):
        start = max(lo, after + 1)
        if start <= hi:
            cand = np.arange(start, hi + 1)
            vals = np.abs(T[np.ix_(cand, prior_idx)]).sum(axis=1) if prior_idx.size else np.zeros(cand.size)
            scanned += cand.size
            ok = np.flatnonzero(vals <= threshold)
            if ok.size:
                j = int(ok[0])
                return PickResult(Node.from_index(int(cand[j])), float(vals[j]), True, scanned)
            j = int(np.argmin(vals))
            if best is None or vals[j] < best[1]:
                best = (int(cand[j]), float(vals[j]))
        lo, hi, level = 2 * lo + 1, 2 * hi + 2, level + 1
    if best is None:
        return PickResult(None, np.inf, False, scanned)
    return PickResult(Node.from_index(best[0]), best[1], False, scanned)


# ---------------------------------------------------------------- the construction


@dataclass
class FactorisationCertificate:
    A: OperatorMatrix
    B: OperatorMatrix
    residual: float
    residual_probe: float
    norm_product_bound: float
    norm_product_probe: float
    delta: float
    eta: float
    eta0: float
    neumann_bound: float
    invertible: bool
    inversion: str
    output_depth: int
    requested_depth: int
    embedding: SubtreeEmbedding
    diagonal_signs: list[int]
    selection_log: list[dict] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.output_depth == self.requested_depth

    def to_json(self) -> dict:
        return {
            "A": self.A.to_json(),
            "B": self.B.to_json(),
            "residual": self.residual,
            "residual_probe": self.residual_probe,
            "norm_product_bound": self.norm_product_bound,
            "norm_product_probe": self.norm_product_probe,
            "delta": self.delta,
            "eta": self.eta,
            "eta0": self.eta0,
            "neumann_bound": self.neumann_bound,
            "invertible": self.invertible,
            "inversion": self.inversion,
            "output_depth": self.output_depth,
            "requested_depth": self.requested_depth,
            "embedding": self.embedding.to_json(),
            "diagonal_signs": self.diagonal_signs,
            "selection_log": self.selection_log,
        }


def _neumann_inverse(G: np.ndarray) -> np.ndarray:
    """``sum_k (I - G)^k`` until the terms vanish at double precision."""
    n = G.shape[0]
    R = np.eye(n) - G
    total = np.eye(n)
    term = np.eye(n)
    for _ in range(10_000):
        term = term @ R
        total = total + term
        if np.abs(term).max() <= NEUMANN_TOL:
            break
    return total


def _select(T: np.ndarray, base: BaseNorm, n: int, k: int, eta0: float):
    """Pick the images ``s_t``; returns (images by source heap index, completed depth, log)."""
    size = T.shape[0]
    src = list(Truncation(k).nodes())
    images: dict[int, int] = {}
    slots: dict[tuple[int, int], int] = {}  # (source index, direction) -> cone root
    log: list[dict] = []
    last = -1
    done_depth = -1
    for t in src:
        threshold = eta0 * 4.0 ** (-order_index(t))
        if t.length == 0:
            pick = PickResult(Node.root(), 0.0, True, 1)
        else:
            key = (t.predecessor().index, t.last_bit())
            pick = pick_small_node(
                T, [Node.from_index(s) for s in images.values()], slots.pop(key), threshold,
                after=last, max_length=n - (k - t.length),
            )
        if pick.node is None:
            log.append({"t": str(t), "status": "truncation-exhausted"})
            break
        s = pick.node.index
        images[t.index] = s
        last = s
        if t.length < k:
            for alpha in (0, 1):
                slots[(t.index, alpha)] = 2 * s + 1 + alpha
        # shrink the open cones so later nodes couple weakly back into row s
        keys = list(slots)
        caps = [n - (k - Node.from_index(u).length - 1) for u, _ in keys]
        spl = splice_subtrees(T, s, [slots[q] for q in keys], target=threshold, max_lengths=caps, base=base)
        for q, r in zip(keys, spl.roots):
            slots[q] = r
        log.append({
            "t": str(t),
            "s_t": str(Node.from_index(s)),
            "threshold": threshold,
            "offdiagonal_sum": pick.value,
            "threshold_met": pick.met,
            "splice_bound": spl.bound,
            "splice_met": spl.bound <= threshold,
            "splice_descents": spl.descents,
            "shallow_family": spl.shallow,
        })
        if t.index == (1 << (t.length + 1)) - 2:  # last node of its level
            done_depth = t.length
    return images, done_depth, log


def diagonalize_D(
    T: OperatorMatrix,
    delta: float,
    eta: float,
    output_depth: int,
    eta0: float | None = None,
    probe_trials: int = 40,
    seed: int = 0,
) -> FactorisationCertificate:
    """Build ``A, B`` with ``A T B = I`` on the depth-``output_depth`` truncation.

    ``residual`` is the certified bound ``sum |(ATB - I)_{ij}|`` on the operator norm of
    ``ATB - I`` on D^E (coordinates are dominated by the norm and ``||f_j|| = 1``);
    ``residual_probe`` is a probed lower bound.  ``norm_product_bound`` is
    ``1 / (min_t T[s_t, s_t] (1 - ||G - I||))`` with the same entrywise bound on
    ``||G - I||``; it is infinite when that bound reaches 1.
    """
    if T.space.kind != "D":
        raise UnsupportedSpace("the factorisation runs on D^E truncations")
    if not T.is_square:
        raise InvalidInput("T must be square")
    n, k = T.depth, output_depth
    if not 0 <= k <= n:
        raise InvalidInput("output depth must lie between 0 and the host depth")
    if eta0 is None:
        eta0 = default_eta0(delta, eta)
    elif not eta0_admissible(eta0, delta, eta):
        raise InvalidInput("eta0 violates the Neumann condition for these delta and eta")
    d = T.diagonal()
    low = np.flatnonzero(np.abs(d) < delta)
    if low.size:
        node = Node.from_index(int(low[0]))
        raise DiagonalBelowDelta(
            f"|<e_s, T f_s>| = {abs(d[low[0]]):.6g} < delta at node {str(node)!r}", node, float(d[low[0]])
        )
    Tn, signs = sign_normalize(T)
    base = T.space.base
    images, done, log = _select(Tn.entries, base, n, k, eta0)
    if done < 0:
        raise InvalidInput("no node could be selected")
    m = (1 << (done + 1)) - 1
    sel = np.array([images[i] for i in range(m)])
    emb = SubtreeEmbedding(done, tuple(Node.from_index(int(s)) for s in sel))
    check = verify_embedding(emb)
    if not check:
        raise RuntimeError(f"selected nodes do not form an embedding: {check.reason} at {check.witness}")

    N = Tn.entries.shape[0]
    Q = np.zeros((m, N))
    Q[np.arange(m), sel] = 1.0
    Bsel = Q.T.copy()
    diag_sel = Tn.entries[sel, sel]
    G = Tn.entries[np.ix_(sel, sel)] / diag_sel[:, None]
    offsum = float(np.abs(G - np.eye(m)).sum())
    invertible = offsum < 1
    if offsum < NEUMANN_DIRECT_SWITCH:
        Ginv, how = _neumann_inverse(G), "neumann"
    else:
        Ginv, how = np.linalg.solve(G, np.eye(m)), "direct"
    A = Ginv @ (Q / diag_sel[:, None])
    B = signs[:, None] * Bsel  # certificate for the original T
    space = T.space
    A_op = OperatorMatrix(A, space, n, done)
    B_op = OperatorMatrix(B, space, done, n)
    R = A @ T.entries @ B - np.eye(m)
    residual = float(np.abs(R).sum())
    R_op = OperatorMatrix(R, space, done, done)
    residual_probe = op_norm_lower(R_op, trials=probe_trials, seed=seed).value if residual > 0 else 0.0
    bound = 1.0 / (diag_sel.min() * (1.0 - offsum)) if invertible else np.inf
    probe = op_norm_lower(A_op, trials=probe_trials, seed=seed).value  # ||B|| = 1
    return FactorisationCertificate(
        A_op, B_op, residual, float(residual_probe), float(bound), float(probe), delta, eta, eta0,
        offsum, invertible, how, done, k, emb, [int(v) for v in signs], log,
    )
