"""Base sequence norms E and sample-based checks of the properties assumed of them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidInput
from .tree import Node, cone

EXACT_TOL = 1e-12


@dataclass(frozen=True)
class BaseNorm:
    """Either ``lp`` with exponent ``p`` in ``[1, inf]`` or a ``custom`` evaluation rule.

    A custom rule receives the entries in index order as a 1-d float array.
    """

    kind: str
    p: float = 1.0
    name: str = ""
    rule: Callable[[np.ndarray], float] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "lp":
            if not (self.p >= 1):
                raise InvalidInput(f"lp exponent must be >= 1, got {self.p}")
        elif self.kind == "custom":
            if self.rule is None:
                raise InvalidInput("custom base norm needs an evaluation rule")
        else:
            raise InvalidInput(f"unknown base norm kind {self.kind!r}")

    @classmethod
    def lp(cls, p: float) -> BaseNorm:
        return cls("lp", float(p))

    @classmethod
    def custom(cls, name: str, rule: Callable[[np.ndarray], float]) -> BaseNorm:
        return cls("custom", name=name, rule=rule)

    @property
    def is_lp(self) -> bool:
        return self.kind == "lp"

    @property
    def conjugate(self) -> float:
        """Conjugate exponent ``p'`` (lp only)."""
        if self.p == 1:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1)

    def __str__(self) -> str:
        if self.is_lp:
            return "linf" if math.isinf(self.p) else f"l{self.p:g}"
        return self.name

    def __call__(self, values) -> float:
        return eval_norm(self, values)

    def to_json(self) -> dict:
        if self.is_lp:
            return {"kind": "lp", "p": "inf" if math.isinf(self.p) else self.p}
        return {"kind": "custom", "name": self.name}

    @classmethod
    def from_json(cls, data, rules: dict[str, Callable] | None = None) -> BaseNorm:
        if data.get("kind") == "lp":
            p = data["p"]
            return cls.lp(math.inf if p in ("inf", "Infinity", math.inf) else float(p))
        if data.get("kind") == "custom":
            name = data["name"]
            if not rules or name not in rules:
                raise InvalidInput(f"no evaluation rule registered for custom norm {name!r}")
            return cls.custom(name, rules[name])
        raise InvalidInput(f"cannot decode base norm {data!r}")

    @classmethod
    def parse(cls, text: str) -> BaseNorm:
        """``"lp:2"``, ``"lp:inf"``, ``"l1"`` and friends."""
        body = text.split(":", 1)[1] if ":" in text else text.lstrip("l").lstrip("p")
        if body in ("inf", "infty", "oo"):
            return cls.lp(math.inf)
        try:
            return cls.lp(float(body))
        except ValueError:
            raise InvalidInput(f"cannot parse base norm {text!r}") from None


def eval_norm(norm: BaseNorm, values: Sequence[float]) -> float:
    if norm.kind == "custom":
        return float(norm.rule(np.asarray(values, dtype=float).ravel()))
    v = np.abs(np.asarray(values, dtype=float).ravel())
    v = v[v != 0]  # zeros cannot change an l^p norm, but they would change the summation order
    if v.size == 0:
        return 0.0
    p = norm.p
    if math.isinf(p):
        return float(v.max())
    if p == 1:
        return float(v.sum())
    if p == 2:
        return float(np.sqrt(np.dot(v, v)))
    scale = v.max()
    if scale == 0:
        return 0.0
    return float(scale * np.sum((v / scale) ** p) ** (1.0 / p))


# ---------------------------------------------------------------- property checks


@dataclass
class SubsymmetryReport:
    trials: int
    unconditional_violation: float
    spreading_violation: float
    tolerance: float = EXACT_TOL

    @property
    def passed(self) -> bool:
        return max(self.unconditional_violation, self.spreading_violation) <= self.tolerance


def _spread(values: np.ndarray, rng: np.random.Generator, max_gap: int = 3) -> np.ndarray:
    gaps = rng.integers(0, max_gap + 1, size=values.size)
    out = np.zeros(values.size + int(gaps.sum()))
    positions = np.arange(values.size) + np.cumsum(gaps)
    out[positions] = values
    return out


def check_subsymmetry(norm: BaseNorm, trials: int = 200, seed: int = 0) -> SubsymmetryReport:
    """Sample the 1-unconditional and 1-spreading inequalities.

    Unconditionality is checked as ``|| (g_i a_i) || <= max|g_i| * || (a_i) ||`` with
    random multipliers (sign flips included); spreading as equality of the norm under
    insertion of zero gaps.  Violations are relative to the unmodified norm.
    """
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    rng = np.random.default_rng(seed)
    unc = spr = 0.0
    for _ in range(trials):
        size = int(rng.integers(1, 9))
        a = rng.standard_normal(size)
        base = eval_norm(norm, a)
        scale = max(base, 1e-300)
        signs = rng.choice([-1.0, 1.0], size=size)
        gamma = signs * rng.uniform(0, 1, size=size)
        gamma[rng.integers(size)] = signs[0]
        for mult in (signs, gamma):
            lhs = eval_norm(norm, mult * a)
            unc = max(unc, (lhs - np.abs(mult).max() * base) / scale)
        spread = _spread(a, rng)
        spr = max(spr, abs(eval_norm(norm, spread) - base) / scale)
    return SubsymmetryReport(trials, max(unc, 0.0), spr)


@dataclass
class LowerEstimateReport:
    r: float
    worst_constant: float
    declared_constant: float
    families: int

    @property
    def passed(self) -> bool:
        return self.worst_constant >= self.declared_constant - EXACT_TOL


def incomparable_family(depth: int, count: int, rng: np.random.Generator) -> list[list[Node]]:
    """``count`` pairwise incomparable node sets: random subsets of disjoint cones.

    The cone roots are the first ``count`` nodes of the level ``ceil(log2 count)``.
    """
    level = max(0, math.ceil(math.log2(count))) if count > 1 else 0
    if level > depth:
        raise InvalidInput(f"cannot fit {count} incomparable cones into depth {depth}")
    roots = [Node(level, b) for b in range(count)]
    family = []
    for root in roots:
        nodes = list(cone(root, depth))
        k = int(rng.integers(1, len(nodes) + 1))
        picked = rng.choice(len(nodes), size=k, replace=False)
        family.append([nodes[i] for i in sorted(picked)])
    return family


def _family_vectors(family, rng, depth):
    size = (1 << (depth + 1)) - 1
    zs = []
    for sigma in family:
        z = np.zeros(size)
        for node in sigma:
            z[node.index] = rng.standard_normal()
        zs.append(z)
    return zs


def check_lower_r_estimate(
    norm: BaseNorm,
    r: float,
    families: int = 200,
    max_family: int = 16,
    depth: int = 5,
    declared: float = 1.0,
    seed: int = 0,
) -> LowerEstimateReport:
    """Smallest observed ``||sum z_j|| / (sum ||z_j||^r)^(1/r)`` over incomparable families.

    Vectors live on the depth-``depth`` truncation and are fed to the base norm in
    standard order, which is how E sees a tree-indexed vector.
    """
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(families):
        count = int(rng.integers(1, max_family + 1))
        zs = _family_vectors(incomparable_family(depth, count, rng), rng, depth)
        total = eval_norm(norm, np.sum(zs, axis=0))
        parts = np.array([eval_norm(norm, z) for z in zs])
        denom = float(parts.max()) if math.isinf(r) else float(np.sum(parts**r) ** (1 / r))
        if denom > 0:
            worst = min(worst, total / denom)
    return LowerEstimateReport(r, worst, declared, families)


def lower_r_constant_for_count(norm: BaseNorm, r: float, count: int) -> float:
    """Ratio attained by ``count`` unit vectors on incomparable nodes."""
    v = np.ones(count)
    return eval_norm(norm, v) / (count ** (1 / r) if not math.isinf(r) else 1.0)


def estimate_incomparably_non_c0(
    norm: BaseNorm, n_max: int = 8, nodes_per_set: int = 2, seed: int = 0
) -> list[float]:
    """Brute-force the inner supremum of the incomparably-non-c0 condition for ``a_j = 1/N``.

    The canonical family is ``N`` disjoint cones at level ``ceil(log2 N)``; an antichain
    meets each cone in at most ``nodes_per_set`` nodes (spreading makes their position
    irrelevant, so only the number of active coordinates per set matters).  For every
    pattern of active counts the ratio ``sum_j ||z_j|| / (N ||sum z_j||)`` is maximised over
    magnitudes by multistart local search.  Returns one value per ``N = 1..n_max``.
    """
    if n_max > 12:
        raise InvalidInput("n_max must be <= 12")
    rng = np.random.default_rng(seed)
    out = []
    for n in range(1, n_max + 1):
        best = 0.0
        for m in range(1, nodes_per_set + 1):
            # every set gets m active nodes; fewer-node patterns are faces of this one
            sizes = [m] * n
            cuts = np.cumsum(sizes)[:-1]

            def ratio(x):
                x = np.abs(x)
                total = eval_norm(norm, x)
                if total == 0:
                    return 0.0
                parts = sum(eval_norm(norm, seg) for seg in np.split(x, cuts))
                return parts / (n * total)

            dim = sum(sizes)
            starts = [np.ones(dim)] + [np.eye(dim)[i] + 1e-3 for i in range(min(dim, 4))]
            starts += [rng.uniform(0, 1, dim) for _ in range(4)]
            for x0 in starts:
                best = max(best, ratio(x0))
                res = minimize(lambda x: -ratio(x), x0, method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400 * dim})
                best = max(best, ratio(res.x))
        out.append(best)
    return out
