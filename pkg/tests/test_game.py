import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stoptime.base_norm import BaseNorm
from stoptime.errors import InvalidInput
from stoptime.game import (
    EmptyAdversary,
    GameTranscript,
    RandomAdversary,
    ReplayAdversary,
    UsedFunctionalsAdversary,
    build_supporting_blocks,
    check_maxideal_hypotheses,
    check_supporting_blocks,
    exhaustive_signs,
    run_rep_game,
    select_signs,
    sign_value,
    verify_transcript,
)
from stoptime.operators import OperatorMatrix, distance_to_annihilator
from stoptime.ramsey import Coloring
from stoptime.spaces import SpaceTag
from stoptime.tree import Node, SubtreeEmbedding, Truncation, verify_embedding

L1 = BaseNorm.lp(1)
S1, B1 = SpaceTag.S(L1), SpaceTag.B(L1)


# ---------------------------------------------------------------- game


def test_empty_adversary_gives_identity_and_zero_distances():
    tr = run_rep_game(EmptyAdversary(), 3, 6, S1)
    assert tr.all_ok
    assert tr.embedding() == SubtreeEmbedding.identity(3)
    assert all(t.dist_V == 0 and t.dist_F == 0 for t in tr.turns)
    rep = verify_transcript(tr)
    assert rep.passed and set(rep.items) == {"i", "ii", "iii", "iv"}


def test_used_functionals_adversary_is_harmless():
    tr = run_rep_game(UsedFunctionalsAdversary(0.01), 2, 6, S1)
    assert tr.all_ok
    used = set()
    for turn in tr.turns:
        assert turn.E[0] not in used
        used.add(turn.E[0])
    assert verify_transcript(tr).passed


@pytest.mark.parametrize("space", [S1, B1])
def test_random_adversary_games_succeed(space):
    for g in range(3):
        tr = run_rep_game(RandomAdversary(g, eta=0.1), 2, 10, space)
        assert tr.all_ok
        assert verify_embedding(tr.embedding())
        rep = verify_transcript(tr, C_target=1.0, samples=50)
        assert rep.passed, rep.to_json()
        assert max(t.dist_V for t in tr.turns) <= 0.1


def test_recorded_distances_match_independent_formula():
    # one functional per turn: dist(e_s, ker v) = |v_s| / ||v||_D exactly
    tr = run_rep_game(RandomAdversary(5, eta=0.1), 2, 10, S1)
    for turn in tr.turns:
        (v,) = turn.move.V
        e = np.zeros(v.size)
        e[turn.E[0].index] = 1.0
        assert turn.dist_V == pytest.approx(distance_to_annihilator(e, [v], S1).value, rel=1e-9)


def test_fabricated_node_fails_item_i():
    tr = run_rep_game(EmptyAdversary(), 2, 5, S1)
    data = tr.to_json()
    data["turns"][4]["E"] = ["11"]  # image of (0,1) moved right of the image of (1)
    bad = GameTranscript.from_json(data)
    rep = verify_transcript(bad)
    assert not rep.items["i"].passed
    assert rep.items["i"].witness is not None


def test_transcript_json_roundtrip_and_replay(tmp_path):
    tr = run_rep_game(RandomAdversary(9, eta=0.2), 2, 8, S1)
    path = tmp_path / "tr.json"
    path.write_text(json.dumps(tr.to_json()))
    back = GameTranscript.from_json(json.loads(path.read_text()))
    assert [t.E for t in back.turns] == [t.E for t in tr.turns]
    again = run_rep_game(ReplayAdversary(path), 2, 8, S1)
    assert [t.E for t in again.turns] == [t.E for t in tr.turns]
    assert [t.signs for t in again.turns] == [t.signs for t in tr.turns]


def test_game_input_validation():
    with pytest.raises(InvalidInput):
        run_rep_game(EmptyAdversary(), 4, 3, S1)
    with pytest.raises(InvalidInput):
        ReplayAdversary({"nope": []})
    with pytest.raises(InvalidInput):
        EmptyAdversary(eta=0).move(Node.root(), 3, [])


def test_incomplete_transcript_fails_every_item():
    tr = run_rep_game(EmptyAdversary(), 2, 5, S1)
    tr.turns.pop()
    rep = verify_transcript(tr)
    assert not any(item.passed for item in rep.items.values())


# ---------------------------------------------------------------- supporting blocks


def test_supporting_blocks_everything_in_n1():
    blocks = build_supporting_blocks(list(Truncation(3).nodes()), 3)
    assert blocks.side == 1
    assert blocks.embedding == SubtreeEmbedding.identity(3)
    assert np.array_equal(blocks.pairings(), np.ones(15))
    rep = check_supporting_blocks(blocks, S1)
    assert all(rep[k] for k in ("i", "ii", "iii", "iv"))


def test_supporting_blocks_even_odd():
    c = Coloring.from_rule(8, lambda s: 1 if s.length % 2 == 0 else 2)
    blocks = build_supporting_blocks(c, 8, target_depth=3)
    assert blocks.side in (1, 2) and verify_embedding(blocks.embedding)
    assert all(c(s) == blocks.side for s in blocks.embedding.images)
    rep = check_supporting_blocks(blocks, B1)
    assert all(rep[k] for k in ("i", "ii", "iii", "iv"))


def test_adversarial_signs_keep_pairings():
    rng = np.random.default_rng(0)
    signs = [int(v) for v in rng.choice([-1, 1], 7)]
    blocks = build_supporting_blocks(list(Truncation(2).nodes()), 2, signs=signs)
    assert np.array_equal(blocks.pairings(), np.ones(7))
    with pytest.raises(InvalidInput):
        build_supporting_blocks(list(Truncation(2).nodes()), 2, signs=[1])


# ---------------------------------------------------------------- signs


def test_diagonal_T_signs_hit_the_average():
    T = np.diag(np.arange(1.0, 16.0))
    sel = select_signs(T, [1, 4, 9, 11, 13, 14], mode="at-least")
    assert sel.value == pytest.approx(sel.average)


def test_two_node_block_matches_exhaustive():
    T = np.eye(3)
    T[1, 2] = 0.7
    for mode in ("at-least", "at-most"):
        sel = select_signs(T, [1, 2], mode=mode)
        assert sel.value == pytest.approx(exhaustive_signs(T, [1, 2], mode=mode)[0])


@settings(max_examples=100)
@given(st.integers(0, 10**6), st.integers(1, 9), st.sampled_from(["at-least", "at-most"]))
def test_select_signs_beats_average(seed, m, mode):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((15, 15))
    E = [int(v) for v in rng.choice(15, size=m, replace=False)]
    lam, mu = rng.uniform(0.2, 2, m), rng.uniform(0.2, 2, m)
    sel = select_signs(T, E, lam, mu, mode)
    assert sel.satisfied
    # the average over all sign patterns really is the trace
    values = []
    for pattern in range(1 << m):
        eps = np.array([1.0 if pattern >> r & 1 else -1.0 for r in range(m)])
        values.append(sign_value(mu[:, None] * T[np.ix_(E, E)] * lam[None, :], eps))
    assert np.mean(values) == pytest.approx(sel.average, abs=1e-9)
    if m <= 4:
        best = max(values) if mode == "at-least" else min(values)
        assert sel.value == pytest.approx(best, abs=1e-12)


def test_select_signs_validation():
    with pytest.raises(InvalidInput):
        select_signs(np.eye(3), [0], mode="sideways")


# ---------------------------------------------------------------- max ideal dichotomy


def test_maxideal_identity_is_side_2():
    rep = check_maxideal_hypotheses(OperatorMatrix.identity(4, S1), 0.5)
    assert rep.side == 2 and rep.satisfied
    assert min(rep.block_values) >= 0.5 / 1.5


def test_maxideal_zero_is_side_1():
    rep = check_maxideal_hypotheses(OperatorMatrix(np.zeros((31, 31)), S1), 0.5)
    assert rep.side == 1 and rep.satisfied
    assert max(rep.block_values) == 0


@settings(max_examples=30)
@given(st.integers(0, 10**6))
def test_maxideal_report_is_consistent(seed):
    rng = np.random.default_rng(seed)
    eta = 0.5
    T = 0.05 * rng.standard_normal((127, 127))
    np.fill_diagonal(T, rng.uniform(0, 2 * eta / (1 + eta), 127))
    rep = check_maxideal_hypotheses(OperatorMatrix(T, S1), eta)
    assert rep.side in (1, 2) and rep.satisfied
    # recompute the values from the operator directly
    thr = eta / (1 + eta)
    d = np.diag(T)
    in_n1 = d <= thr
    assert rep.n1_size == int(in_n1.sum())
    for v in rep.block_values:
        assert (v <= eta) if rep.side == 1 else (v >= thr)
