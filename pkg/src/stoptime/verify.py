"""Seeded property suites, one check per acceptance criterion.

Each check returns a :class:`CheckResult` carrying the measured quantities, the wall
time and the time budget.  Suites group the checks by module; ``all`` runs every one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .base_norm import BaseNorm
from .factorization import diagonalize_D
from .game import (
    RandomAdversary,
    check_maxideal_hypotheses,
    exhaustive_signs,
    run_rep_game,
    select_signs,
    verify_transcript,
)
from .operators import OperatorMatrix, build_B_Q
from .ramsey import Coloring, check_result, find_monochromatic_subtree
from .spaces import (
    SpaceTag,
    dual_norm_Bstar,
    dual_norm_D,
    dual_norm_D_enumerated,
    norm,
    norm_B,
    norm_S,
    norm_S_enumerated,
    pairing,
)
from .tree import antichain_count, enumerate_antichains, random_embedding

RESIDUAL_FLOOR = 1e-12


@dataclass
class CheckResult:
    name: str
    criterion: int
    ok: bool
    seconds: float
    limit: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.ok and self.seconds <= self.limit

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        timing = f"{self.seconds:.1f}s/{self.limit:.0f}s"
        return f"[{status}] criterion {self.criterion:2d} {self.name} ({timing})"

    def to_json(self, timings: bool = True) -> dict:
        out = {"name": self.name, "criterion": self.criterion, "passed": self.passed, "ok": self.ok,
               "limit_seconds": self.limit, "detail": self.detail}
        if timings:
            out["seconds"] = self.seconds
        return out


@dataclass
class SuiteReport:
    suite: str
    seed: int
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self, timings: bool = True) -> dict:
        return {"suite": self.suite, "seed": self.seed, "passed": self.passed,
                "checks": [c.to_json(timings) for c in self.checks]}


def _timed(name: str, criterion: int, limit: float, body: Callable[[], tuple[bool, dict]]) -> CheckResult:
    start = time.perf_counter()
    ok, detail = body()
    return CheckResult(name, criterion, bool(ok), time.perf_counter() - start, limit, detail)


# ---------------------------------------------------------------- norms


def check_norm_engines(seed: int, vectors: int = 500, depth: int = 3) -> CheckResult:
    """DP ``norm_S`` against exhaustive antichain enumeration for four l^p bases."""

    def body():
        rng = np.random.default_rng(seed)
        size = (1 << (depth + 1)) - 1
        worst, comparisons = 0.0, 0
        for _ in range(vectors):
            x = rng.standard_normal(size) * (rng.random(size) < 0.8)
            for p in (1, 1.5, 2, math.inf):
                base = BaseNorm.lp(p)
                dp = norm_S(x, base)
                oracle, _ = norm_S_enumerated(x, base)
                worst = max(worst, abs(dp - oracle) / max(1.0, abs(oracle)))
                comparisons += 1
        return worst <= 1e-12, {"vectors": vectors, "comparisons": comparisons, "worst_relative_error": worst}

    return _timed("norm engine equivalence", 1, 30.0, body)


def check_antichain_census(max_depth: int = 4) -> CheckResult:
    def body():
        counts = {n: sum(1 for _ in enumerate_antichains(n, cap=max_depth)) for n in range(max_depth + 1)}
        expected = {n: antichain_count(n) for n in counts}
        return counts == expected, {"counts": counts, "expected": expected}

    return _timed("antichain census", 2, 10.0, body)


def check_duality(seed: int, functionals: int = 200, depth: int = 3) -> CheckResult:
    """Constraint-generation D-norm against the full LP, plus an equality witness each time."""

    def body():
        rng = np.random.default_rng(seed)
        l1 = BaseNorm.lp(1)
        size = (1 << (depth + 1)) - 1
        worst_gap, worst_witness, worst_holder = 0.0, 0.0, 0.0
        for _ in range(functionals):
            y = rng.standard_normal(size) * (rng.random(size) < 0.7)
            res = dual_norm_D(y, l1)
            full = dual_norm_D_enumerated(y, cap=depth)
            worst_gap = max(worst_gap, abs(res.value - full))
            w = res.witness
            # the witness lies in the S unit ball and attains the dual norm
            worst_witness = max(worst_witness, abs(pairing(w, y) - res.value), norm_S(w, l1) - 1.0)
            for _ in range(3):
                x = rng.standard_normal(size)
                worst_holder = max(worst_holder, abs(pairing(x, y)) - norm_S(x, l1) * res.value)
        ok = worst_gap <= 1e-9 and worst_witness <= 1e-9 and worst_holder <= 1e-9
        return ok, {"functionals": functionals, "worst_gap": worst_gap, "worst_witness_defect": worst_witness,
                    "worst_holder_excess": worst_holder}

    return _timed("dual norm duality", 4, 60.0, body)


def check_annihilation_sums(seed: int, functionals: int = 200, depth: int = 4) -> CheckResult:
    """Dual-unit functionals have branch sums (D side) and antichain sums (B side) at most 1."""

    def body():
        rng = np.random.default_rng(seed)
        l1 = BaseNorm.lp(1)
        size = (1 << (depth + 1)) - 1
        worst_branch, worst_antichain = 0.0, 0.0
        for _ in range(functionals):
            y = rng.standard_normal(size) * (rng.random(size) < 0.6)
            if not y.any():
                y[0] = 1.0
            yd = y / dual_norm_D(y, l1).value
            worst_branch = max(worst_branch, norm_B(yd, l1))  # largest branch l1 sum
            yb = y / dual_norm_Bstar(y, l1).value
            worst_antichain = max(worst_antichain, norm_S(yb, l1))  # largest antichain l1 sum
        ok = worst_branch <= 1 + 1e-9 and worst_antichain <= 1 + 1e-9
        return ok, {"functionals": functionals, "max_branch_sum": worst_branch, "max_antichain_sum": worst_antichain}

    return _timed("branch and antichain sums of dual-unit functionals", 5, 30.0, body)


# ---------------------------------------------------------------- operators


def check_embedding_operators(seed: int, embeddings: int = 20, vectors: int = 1000) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        worst_Q, worst_B, qb_exact = 0.0, 0.0, True
        for _ in range(embeddings):
            host = int(rng.integers(1, 5))
            e = random_embedding(int(rng.integers(0, host + 1)), host, rng)
            m, n = (1 << (e.source_depth + 1)) - 1, (1 << (host + 1)) - 1
            for p in (1, 2, math.inf):
                for space in (SpaceTag.S(BaseNorm.lp(p)), SpaceTag.B(BaseNorm.lp(p))):
                    B, Q = build_B_Q(e, host, space)
                    qb_exact &= bool(np.array_equal((Q @ B).entries, np.eye(m)))
                    for _ in range(vectors):
                        x, y = rng.standard_normal(m), rng.standard_normal(n)
                        nx, ny = norm(x, space), norm(y, space)
                        worst_B = max(worst_B, abs(norm(B(x), space) - nx) / max(nx, 1e-300))
                        worst_Q = max(worst_Q, (norm(Q(y), space) - ny) / max(ny, 1e-300))
        ok = qb_exact and worst_B <= 1e-12 and worst_Q <= 1e-12
        return ok, {"embeddings": embeddings, "vectors_each": vectors, "QB_equals_I": qb_exact,
                    "worst_isometry_defect": worst_B, "worst_contraction_excess": worst_Q}

    return _timed("embedding operators B and Q", 3, 60.0, body)


# ---------------------------------------------------------------- ramsey


def check_ramsey(seed: int, colorings: int = 100, hosts=(6, 8, 10)) -> CheckResult:
    def body():
        failures, unverified, depths = [], 0, []
        for i in range(colorings):
            c = Coloring.random(max(hosts), seed * 1000 + i)
            row = []
            for n in hosts:
                r = find_monochromatic_subtree(c.restrict(n), n)
                unverified += not check_result(c.restrict(n), r)
                row.append(r.achieved_depth)
            if any(a > b for a, b in zip(row, row[1:])):
                failures.append({"coloring": i, "depths": row})
            depths.append(row)
        even = Coloring.from_rule(8, lambda s: 1 if s.length % 2 == 0 else 2)
        r_even = find_monochromatic_subtree(even, 8)
        even_ok = check_result(even, r_even) and r_even.achieved_depth >= 2
        arr = np.array(depths)
        ok = not failures and unverified == 0 and even_ok
        return ok, {"colorings": colorings, "monotonicity_failures": failures, "unverified": unverified,
                    "mean_depth_by_host": {str(n): float(arr[:, j].mean()) for j, n in enumerate(hosts)},
                    "even_length_depth": r_even.achieved_depth}

    return _timed("monochromatic subtree finder", 6, 120.0, body)


# ---------------------------------------------------------------- game


def check_games(seed: int, games: int = 20, eta: float = 0.1, host_depth: int = 10, play_depth: int = 2) -> CheckResult:
    def body():
        space = SpaceTag.S(BaseNorm.lp(1))
        bad = []
        for g in range(games):
            tr = run_rep_game(RandomAdversary(seed * 1000 + g, eta=eta), play_depth, host_depth, space)
            rep = verify_transcript(tr, C_target=1.0, samples=200, seed=seed * 1000 + g)
            if not (tr.all_ok and rep.passed):
                bad.append({"game": g, "turns_ok": tr.all_ok,
                            "items": {k: v.ok for k, v in rep.items.items()}})
        return not bad, {"games": games, "failures": bad}

    return _timed("reproducibility game against random adversary", 7, 120.0, body)


def check_sign_selection(seed: int, instances: int = 200, depth: int = 4) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        size = (1 << (depth + 1)) - 1
        below, mismatch, compared = 0, 0, 0
        for i in range(instances):
            T = rng.standard_normal((size, size))
            m = int(rng.integers(1, 9))
            E = [int(v) for v in rng.choice(size, size=m, replace=False)]
            lam, mu = rng.uniform(0.5, 1.5, m), rng.uniform(0.5, 1.5, m)
            mode = "at-least" if i % 2 == 0 else "at-most"
            sel = select_signs(T, E, lam, mu, mode)
            below += not sel.satisfied
            if m <= 4:
                best, _ = exhaustive_signs(T, E, lam, mu, mode)
                compared += 1
                mismatch += abs(best - sel.value) > 1e-12 * max(1.0, abs(best))
        return below == 0 and mismatch == 0, {"instances": instances, "average_violations": below,
                                              "exhaustive_compared": compared, "exhaustive_mismatches": mismatch}

    return _timed("sign derandomization", 8, 30.0, body)


def check_maxideal(seed: int, instances: int = 50, depth: int = 6, eta: float = 0.5) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        size = (1 << (depth + 1)) - 1
        thr = eta / (1 + eta)
        sides, bad = {1: 0, 2: 0}, []
        for i in range(instances):
            T = 0.05 * rng.standard_normal((size, size))
            np.fill_diagonal(T, rng.uniform(0, 2 * thr, size))  # straddles the threshold
            rep = check_maxideal_hypotheses(OperatorMatrix(T, SpaceTag.S(BaseNorm.lp(1))), eta)
            if rep.side in sides and rep.satisfied:
                sides[rep.side] += 1
            else:
                bad.append(i)
        return not bad, {"instances": instances, "side_counts": {str(k): v for k, v in sides.items()},
                         "failures": bad}

    return _timed("maximal-ideal dichotomy", 10, 60.0, body)


# ---------------------------------------------------------------- factorization


def perturbed_diagonal(host_depth: int, delta: float, seed: int) -> np.ndarray:
    """``D + εN`` with diagonal in ``[δ, 2]``, ``|N_ij| <= 1`` and ``ε = δ / (100 · nodes)``."""
    rng = np.random.default_rng(seed)
    n = (1 << (host_depth + 1)) - 1
    eps = delta / (100 * n)
    return np.diag(rng.uniform(delta, 2.0, n)) + eps * rng.uniform(-1, 1, (n, n))


def check_factorization(seed: int, seeds: int = 20, delta: float = 0.5, eta: float = 0.5, out_depth: int = 2) -> CheckResult:
    def body():
        D = SpaceTag.D(BaseNorm.lp(1))
        rng = np.random.default_rng(seed)
        diag_worst_res, diag_worst_prod = 0.0, 0.0
        for _ in range(5):
            T = np.diag(rng.uniform(delta, 2.0, 31))
            c = diagonalize_D(OperatorMatrix(T, D), delta, eta, out_depth)
            diag_worst_res = max(diag_worst_res, c.residual)
            diag_worst_prod = max(diag_worst_prod, c.norm_product_bound)
        part_a = diag_worst_res <= 1e-10 and diag_worst_prod <= 1 / delta + 1e-6
        medians, worst_at5, bound_bad, incomplete = {}, 0.0, 0, 0
        for host in (4, 5, 6):
            res = []
            for s in range(seeds):
                T = perturbed_diagonal(host, delta, seed * 1000 + s)
                c = diagonalize_D(OperatorMatrix(T, D), delta, eta, out_depth)
                res.append(c.residual)
                if c.complete and c.invertible:
                    bound_bad += c.norm_product_bound > (1 + eta) / delta
                else:
                    incomplete += 1
                if host == 5:
                    worst_at5 = max(worst_at5, c.residual)
            medians[host] = float(np.median(res))
        m = [medians[h] for h in (4, 5, 6)]
        monotone = all(b <= max(a, RESIDUAL_FLOOR) for a, b in zip(m, m[1:]))
        part_b = worst_at5 <= 0.05 and monotone and bound_bad == 0
        return part_a and part_b, {
            "diagonal_worst_residual": diag_worst_res, "diagonal_worst_norm_product": diag_worst_prod,
            "perturbed_worst_residual_host5": worst_at5, "median_residual_by_host": {str(k): v for k, v in medians.items()},
            "median_non_increasing": monotone, "norm_product_violations": bound_bad, "incomplete": incomplete,
        }

    return _timed("identity factorisation through large diagonal", 9, 300.0, body)


# ---------------------------------------------------------------- suites

SUITES: dict[str, list[Callable[[int], CheckResult]]] = {
    "norms": [check_norm_engines, lambda seed: check_antichain_census(), check_duality, check_annihilation_sums],
    "operators": [check_embedding_operators],
    "ramsey": [check_ramsey],
    "game": [check_games, check_sign_selection, check_maxideal],
    "factorization": [check_factorization],
}


def run_suite(name: str, seed: int) -> SuiteReport:
    if name == "all":
        funcs = [f for key in SUITES for f in SUITES[key]]
    elif name in SUITES:
        funcs = SUITES[name]
    else:
        raise ValueError(f"unknown suite {name!r}")
    checks = sorted((f(seed) for f in funcs), key=lambda c: c.criterion)
    return SuiteReport(name, seed, checks)
