import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stoptime.errors import InvalidInput
from stoptime.ramsey import (
    Coloring,
    check_result,
    find_monochromatic_subtree,
    is_monochromatic,
    split_index_family,
    split_partition,
)
from stoptime.tree import Node, SubtreeEmbedding, Truncation, relate, verify_embedding


def brute_force_exists(c: Coloring, color: int, k: int, oriented: bool) -> bool:
    """Backtracking over all images in standard order, checking every pair as it goes."""
    src = list(Truncation(k).nodes())
    hosts = [s for s in Truncation(c.depth).nodes() if c(s) == color]
    chosen: list[Node] = []

    def ok(s: Node) -> bool:
        t = src[len(chosen)]
        if chosen and not chosen[-1] < s:
            return False
        if oriented and t.length:
            parent = chosen[t.predecessor().index]
            if not parent.child(t.last_bit()).is_prefix_of(s):
                return False
        return all(relate(chosen[i], s) is relate(src[i], t) for i in range(len(chosen)))

    def rec() -> bool:
        if len(chosen) == len(src):
            return True
        for s in hosts:
            if ok(s):
                chosen.append(s)
                if rec():
                    return True
                chosen.pop()
        return False

    return rec()


def brute_depth(c: Coloring, oriented: bool) -> int:
    best = -1
    for k in range(c.depth + 1):
        if any(brute_force_exists(c, col, k, oriented) for col in (1, 2)):
            best = k
        else:
            break
    return best


def test_constant_coloring_gives_identity():
    r = find_monochromatic_subtree(Coloring.constant(5, 1), 5)
    assert r.color == 1 and r.achieved_depth == 5
    assert r.embedding == SubtreeEmbedding.identity(5)


def test_first_bit_coloring():
    n = 7
    c = Coloring.from_rule(n, lambda s: 1 if s.length == 0 or s.word[0] == 0 else 2)
    r = find_monochromatic_subtree(c, n)
    assert r.achieved_depth == n - 1
    assert check_result(c, r)


def test_even_length_coloring_depth_8():
    c = Coloring.from_rule(8, lambda s: 1 if s.length % 2 == 0 else 2)
    r = find_monochromatic_subtree(c, 2)
    assert r.achieved_depth == 2 and r.color == 1
    assert is_monochromatic(c, r.embedding, 1)
    assert verify_embedding(r.embedding)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.sampled_from([0.3, 0.5, 0.7]))
def test_finder_matches_oriented_brute_force(seed, p):
    c = Coloring.random(4, seed, p)
    r = find_monochromatic_subtree(c, 4)
    assert check_result(c, r)
    assert r.achieved_depth == brute_depth(c, oriented=True)
    # unrestricted order-isomorphic embeddings can only do better
    assert r.achieved_depth <= brute_depth(c, oriented=False)


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_achieved_depth_monotone_in_host(seed):
    c = Coloring.random(9, seed)
    depths = [find_monochromatic_subtree(c.restrict(n), n).achieved_depth for n in (5, 7, 9)]
    assert depths == sorted(depths)


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_results_always_verify(seed):
    c = Coloring.random(8, seed, 0.6)
    r = find_monochromatic_subtree(c, 8)
    assert r.embedding is not None and check_result(c, r)
    assert all(c(s) == r.color for s in r.embedding.images)


def test_small_budget_reports_exhaustion():
    c = Coloring.random(10, 0)
    r = find_monochromatic_subtree(c, 10, budget=50)
    assert check_result(c, r)
    assert r.budget_exhausted


def test_target_validation():
    with pytest.raises(InvalidInput):
        find_monochromatic_subtree(Coloring.constant(3), 4)


def test_coloring_json_roundtrip():
    c = Coloring.random(4, 3)
    back = Coloring.from_json(c.to_json())
    assert np.array_equal(back.colors, c.colors)


def test_split_partition_everything_in_n1():
    nodes = list(Truncation(4).nodes())
    side, r = split_partition(nodes, 4, 4)
    assert side == 1 and r.achieved_depth == 4


def test_split_partition_empty_n1_picks_side_2():
    side, r = split_partition([], 4, 3)
    assert side == 2 and r.achieved_depth == 3


def test_split_index_family():
    full = [Coloring.constant(4, 1) for _ in range(3)]
    res = split_index_family(full, 2)
    assert res.side == 1 and res.indices == [1, 2, 3]
    alternating = [Coloring.constant(4, 1 + (i % 2)) for i in range(5)]
    res = split_index_family(alternating, 2)
    assert res.side == 1 and res.indices == [1, 3, 5] and res.majority
    for i, e in res.embeddings.items():
        assert verify_embedding(e) and is_monochromatic(alternating[i - 1], e, 1)


def test_split_index_family_degenerate_slice():
    slices = [Coloring.constant(0, 1), Coloring.constant(4, 2)]
    res = split_index_family(slices, 2)
    assert res.side == 2 and res.indices == [2]
