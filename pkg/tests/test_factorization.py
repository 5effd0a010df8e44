import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stoptime.base_norm import BaseNorm
from stoptime.errors import DiagonalBelowDelta, InvalidInput, UnsupportedSpace
from stoptime.factorization import (
    _neumann_inverse,
    coupling_bound,
    default_eta0,
    diagonalize_D,
    eta0_admissible,
    pick_small_node,
    sign_normalize,
    splice_subtrees,
)
from stoptime.operators import OperatorMatrix, ball_vertices
from stoptime.spaces import SpaceTag, norm_S_enumerated
from stoptime.tree import Node, verify_embedding
from stoptime.verify import perturbed_diagonal

L1 = BaseNorm.lp(1)
D1 = SpaceTag.D(L1)


def N(text):
    return Node.parse(text)


# ---------------------------------------------------------------- sign normalisation


def test_sign_normalize_examples(rng):
    T = OperatorMatrix(np.diag([1.0, 2.0, 3.0]), D1)
    Tn, signs = sign_normalize(T)
    assert np.array_equal(Tn.entries, T.entries) and signs.tolist() == [1, 1, 1]
    Tn, signs = sign_normalize(OperatorMatrix(-np.eye(7), D1))
    assert np.array_equal(Tn.entries, np.eye(7))
    R = rng.standard_normal((15, 15))
    Tn, _ = sign_normalize(OperatorMatrix(R, D1))
    assert np.array_equal(np.diag(Tn.entries), np.abs(np.diag(R)))


def test_sign_normalize_zero_diagonal():
    T = np.eye(3)
    T[2, 2] = 0
    with pytest.raises(DiagonalBelowDelta) as err:
        sign_normalize(OperatorMatrix(T, D1))
    assert err.value.node == N("1")


# ---------------------------------------------------------------- splicing


def _restricted_sup_by_vertices(T, row, roots, depth):
    """sup over the D unit ball of <e_row, T(x restricted)>, from the ball's vertices (qhull)."""
    mask = np.zeros(T.shape[1], dtype=bool)
    for r in roots:
        for s in range(T.shape[1]):
            if Node.from_index(r).is_prefix_of(Node.from_index(s)):
                mask[s] = True
    r = np.where(mask, T[row], 0.0)
    return max(abs(r @ v) for v in ball_vertices(D1, depth))


def test_coupling_bound_matches_vertex_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        T = rng.standard_normal((7, 7))
        for roots in ([1], [2], [1, 2], [3, 6], [4, 5, 2]):
            row = int(rng.integers(7))
            assert coupling_bound(T, row, roots, L1) == pytest.approx(
                _restricted_sup_by_vertices(T, row, roots, 2), rel=1e-9
            )


def test_diagonal_T_has_zero_coupling_off_the_row():
    T = np.diag(np.arange(1.0, 32.0))
    res = splice_subtrees(T, 0, [1, 2])
    assert res.bound == 0 and res.descents == 0


def test_splicing_below_rank_one_noise():
    rng = np.random.default_rng(1)
    T = np.eye(15)
    T[0] += rng.standard_normal(15)  # noise in the root's row
    res = splice_subtrees(T, 0, [1, 2], target=0.0, budget=2)
    oracle, _ = norm_S_enumerated(np.where(_mask(res.roots), T[0], 0.0), L1)
    assert res.bound == pytest.approx(oracle)
    assert res.descents == 2
    assert all(Node.from_index(r).length >= 1 for r in res.roots)


def _mask(roots, size=15):
    out = np.zeros(size, dtype=bool)
    for s in range(size):
        out[s] = any(Node.from_index(r).is_prefix_of(Node.from_index(s)) for r in roots)
    return out


@given(st.integers(0, 10**6))
def test_splice_bound_is_monotone(seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((63, 63))
    res = splice_subtrees(T, 0, [1, 2], target=0.0, budget=3)
    assert len(res.history) == 4
    assert all(b < a for a, b in zip(res.history, res.history[1:]))
    assert res.bound == coupling_bound(T, 0, res.roots, L1)


def test_splice_shallow_family_flag():
    T = np.ones((7, 7))
    res = splice_subtrees(T, 0, [1, 2], target=0.0, max_lengths=[1, 1])
    assert res.shallow and res.descents == 0
    with pytest.raises(InvalidInput):
        splice_subtrees(T, 0, [1, 3])


# ---------------------------------------------------------------- node picking


def test_pick_small_node_diagonal():
    T = np.diag(np.arange(1.0, 16.0))
    r = pick_small_node(T, [N(""), N("0")], N("0"), threshold=0.0, after=1)
    assert r.met and r.value == 0 and r.node == N("00")


def test_pick_small_node_unit_entry():
    T = np.eye(15)
    T[N("01").index, 0] = 1.0
    r = pick_small_node(T, [N("")], N("0"), threshold=0.0)
    assert r.met and r.node == N("0")
    r = pick_small_node(T, [N("")], N("01"), threshold=0.0)
    assert r.met and r.node == N("010")


def test_pick_small_node_flags_failure():
    T = np.ones((15, 15))
    r = pick_small_node(T, [N("")], N("1"), threshold=0.5)
    assert not r.met and r.value == 1 and r.node is not None
    r = pick_small_node(T, [N("")], N("1"), threshold=0.5, after=14)
    assert r.node is None


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_pick_small_node_returns_first_qualifier(seed):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((127, 127))
    priors = [N(""), N("1")]
    thr = 0.5
    r = pick_small_node(T, priors, N("0"), threshold=thr, max_length=6)
    values = {s.index: abs(T[s.index, 0]) + abs(T[s.index, 2]) for s in map(Node.from_index, range(127))
              if N("0").is_prefix_of(s)}
    qualifying = sorted(i for i, v in values.items() if v <= thr)
    if qualifying:
        assert r.met and r.node.index == qualifying[0]
    else:
        assert not r.met and r.value == pytest.approx(min(values.values()))


# ---------------------------------------------------------------- the construction


@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_default_eta0_is_admissible(delta, eta):
    eta0 = default_eta0(delta, eta)
    assert eta0_admissible(eta0, delta, eta)
    assert not eta0_admissible(eta0 / 0.9 * 1.01, delta, eta)


def test_scaled_identity_is_exact():
    c = 2.0
    cert = diagonalize_D(OperatorMatrix(c * np.eye(15), D1), 1.0, 0.5, 3)
    assert cert.residual == 0
    assert cert.norm_product_bound == pytest.approx(1 / c)
    assert [str(s) for s in cert.embedding.images] == [str(s) for s in map(Node.from_index, range(15))]
    assert np.allclose(cert.A.entries, np.eye(15) / c)
    assert np.array_equal(cert.B.entries, np.eye(15))


def test_scaled_identity_below_one():
    cert = diagonalize_D(OperatorMatrix(0.5 * np.eye(7), D1), 0.5, 0.5, 2)
    assert cert.residual == 0 and cert.norm_product_bound >= 1


def test_diagonal_operator():
    rng = np.random.default_rng(4)
    d = rng.uniform(0.5, 2, 31)
    cert = diagonalize_D(OperatorMatrix(np.diag(d), D1), 0.5, 0.5, 2)
    assert cert.residual <= 1e-10
    assert cert.norm_product_bound <= 2 + 1e-6
    assert cert.neumann_bound == 0  # cross terms vanish, so UTJ is the identity on Z
    sel = [s.index for s in cert.embedding.images]
    assert np.allclose(cert.A.entries[:, sel], np.diag(1 / d[sel]))


@pytest.mark.parametrize("host", [4, 5, 6])
def test_perturbed_diagonal(host):
    for seed in range(5):
        T = perturbed_diagonal(host, 0.5, seed)
        cert = diagonalize_D(OperatorMatrix(T, D1), 0.5, 0.5, 2)
        assert cert.complete and cert.invertible and cert.inversion == "neumann"
        # independent dense check of ATB = I
        R = cert.A.entries @ T @ cert.B.entries - np.eye(7)
        assert np.abs(R).max() <= 1e-10
        assert cert.residual <= 0.05
        assert cert.norm_product_bound <= 1.5 / 0.5
        assert cert.norm_product_probe <= cert.norm_product_bound * (1 + 1e-9)
        assert verify_embedding(cert.embedding)


def test_selection_log_invariants():
    rng = np.random.default_rng(8)
    T = np.diag(rng.uniform(1, 2, 63)) + 0.05 * rng.standard_normal((63, 63))
    cert = diagonalize_D(OperatorMatrix(T, D1), 0.8, 0.5, 2)
    assert len(cert.selection_log) == 7
    for entry in cert.selection_log:
        if entry["threshold_met"]:
            assert entry["offdiagonal_sum"] <= entry["threshold"]
        assert entry["splice_met"] == (entry["splice_bound"] <= entry["threshold"])
    # logged coupling sums recomputed from the operator
    imgs = [s.index for s in cert.embedding.images]
    Tn = np.abs(T * np.sign(np.diag(T))[None, :])
    for i, entry in enumerate(cert.selection_log):
        assert entry["offdiagonal_sum"] == pytest.approx(Tn[imgs[i], imgs[:i]].sum())


def test_sign_undo_commutes():
    rng = np.random.default_rng(2)
    T = perturbed_diagonal(4, 0.5, 3) * rng.choice([-1, 1], 31)[None, :]
    cert = diagonalize_D(OperatorMatrix(T, D1), 0.5, 0.5, 2)
    Tn, _ = sign_normalize(OperatorMatrix(T, D1))
    cert_n = diagonalize_D(Tn, 0.5, 0.5, 2)
    assert cert.residual == cert_n.residual
    assert cert.embedding == cert_n.embedding


def test_non_invertible_certificate():
    T = 5 * np.ones((15, 15)) - 4 * np.eye(15)
    cert = diagonalize_D(OperatorMatrix(T, D1), 1.0, 0.5, 1)
    assert not cert.invertible and cert.inversion == "direct"
    assert cert.norm_product_bound == np.inf
    assert not any(e["threshold_met"] for e in cert.selection_log[1:])


def test_neumann_inverse_matches_numpy():
    rng = np.random.default_rng(0)
    G = np.eye(7) + 0.05 * rng.standard_normal((7, 7))
    assert np.allclose(_neumann_inverse(G), np.linalg.inv(G), atol=1e-14)


def test_preconditions():
    T = np.eye(15)
    T[5, 5] = 0.2
    with pytest.raises(DiagonalBelowDelta) as err:
        diagonalize_D(OperatorMatrix(T, D1), 0.5, 0.5, 2)
    assert err.value.node == N("10")
    with pytest.raises(UnsupportedSpace):
        diagonalize_D(OperatorMatrix(np.eye(7), SpaceTag.S(L1)), 0.5, 0.5, 1)
    with pytest.raises(InvalidInput):
        diagonalize_D(OperatorMatrix(np.eye(7), D1), 0.5, 0.5, 3)
    with pytest.raises(InvalidInput):
        diagonalize_D(OperatorMatrix(np.eye(7), D1), 0.5, 0.5, 1, eta0=10.0)


def test_certificate_json():
    cert = diagonalize_D(OperatorMatrix(2 * np.eye(7), D1), 1.0, 0.5, 1)
    data = cert.to_json()
    assert data["residual"] == 0 and data["output_depth"] == 1
    assert OperatorMatrix.from_json(data["A"]).entries.shape == (3, 7)
    assert len(data["selection_log"]) == 3
