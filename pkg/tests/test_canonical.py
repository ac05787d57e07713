"""Canonical form construction and index translation tests."""

from __future__ import annotations

import random

import pytest

from dacscanon.ratmat import RatMatrix, hstack, mat, qq
from dacscanon.systems import (
    Dacs,
    Odecs2,
    apply_em,
    apply_exfb,
    explicitate,
    verify_em,
    verify_exfb,
)
from dacscanon._chains import controllability_indices, frobenius_form
from dacscanon.geometry import invariant_subspaces
from dacscanon.morse import emnf, emtf
from dacscanon.canonical import (
    EmcfIndices,
    FbcfIndices,
    NotControllable,
    NotObservable,
    NotPrime,
    brunovsky_two_inputs,
    build_fbcf,
    emcf,
    emcf_system,
    fbcf,
    observable_dual_canonical,
    prime_canonical,
    translate_indices,
)
from test_systems import random_dacs, random_em, random_exfb, random_matrix


def circuit_dacs(Lv=1, Ca=1, R=1, R_G=1, R_F=1) -> Dacs:
    """An RLC network with an op-amp stage: 13 equations, 14 signals,
    2 controls, nonzero scalar parameters."""
    E = RatMatrix.zeros(13, 14).to_lists()
    E[0][4] = qq(Lv)
    E[1][2] = -qq(Ca)
    E[1][3] = qq(Ca)
    H = RatMatrix.zeros(13, 14).to_lists()
    for i, j, v in [
        (0, 0, 1), (1, 12, 1),
        (2, 1, -1), (2, 7, R_G),
        (3, 1, 1), (3, 2, -1), (3, 8, R_F),
        (4, 3, -1), (4, 9, R),
        (5, 5, 1), (6, 6, 1),
        (7, 0, 1), (7, 1, -1),
        (8, 4, -1), (8, 5, -1),
        (9, 6, 1), (9, 7, 1), (9, 8, -1),
        (10, 8, -1), (10, 10, 1), (10, 11, -1), (10, 12, 1),
        (11, 9, 1), (11, 12, 1), (11, 13, 1),
        (12, 2, -1),
    ]:
        H[i][j] = qq(v)
    L = RatMatrix.zeros(13, 2).to_lists()
    L[8][0] = qq(1)
    L[12][1] = qq(1)
    return Dacs(E=RatMatrix(E, cols=14), H=RatMatrix(H, cols=14), L=RatMatrix(L, cols=2))


def circuit_fbcf_expected() -> Dacs:
    """The canonical system of the circuit, independent of its parameters."""
    E = RatMatrix.zeros(13, 14).to_lists()
    E[0][0] = qq(1)
    E[1][2] = qq(1)
    H = RatMatrix.zeros(13, 14).to_lists()
    H[0][1] = qq(1)
    H[1][3] = qq(1)
    for r in range(9):
        H[4 + r][5 + r] = qq(1)
    L = RatMatrix.zeros(13, 2).to_lists()
    L[2][0] = qq(1)
    L[3][1] = qq(1)
    return Dacs(E=RatMatrix(E, cols=14), H=RatMatrix(H, cols=14), L=RatMatrix(L, cols=2))


# -- two-kind chain form --------------------------------------------------------


def test_brunovsky_two_inputs_single_chain():
    A = mat([[0, 1], [0, 0]])
    t, eps, eps_bar = brunovsky_two_inputs(A, mat([[0], [1]]), RatMatrix.zeros(2, 0))
    assert eps == [2] and eps_bar == []
    o = Odecs2(A, mat([[0], [1]]), RatMatrix.zeros(2, 0), RatMatrix.zeros(0, 2), RatMatrix.zeros(0, 1))
    assert verify_em(o, apply_em(o, t), t)


def test_brunovsky_second_kind_priority():
    # the chain tail can be fed by either input kind; the second kind wins
    A = mat([[0, 1], [0, 0]])
    B = mat([[0], [1]])
    t, eps, eps_bar = brunovsky_two_inputs(A, B, B)
    assert eps == [] and eps_bar == [2]


def test_brunovsky_not_controllable():
    with pytest.raises(NotControllable):
        brunovsky_two_inputs(mat([[1, 0], [0, 2]]), mat([[1], [0]]), RatMatrix.zeros(2, 0))


def test_brunovsky_surplus_inputs_are_dead():
    # one chain, three first-kind inputs: two columns end up feeding nothing
    A = RatMatrix.zeros(1, 1)
    B_u = mat([[1, 2, 3]])
    t, eps, eps_bar = brunovsky_two_inputs(A, B_u, RatMatrix.zeros(1, 0))
    assert eps == [1] and eps_bar == []
    o = Odecs2(A, B_u, RatMatrix.zeros(1, 0), RatMatrix.zeros(0, 1), RatMatrix.zeros(0, 3))
    res = apply_em(o, t)
    assert res.B_u.col(1) == [qq(0)] and res.B_u.col(2) == [qq(0)]


@pytest.mark.parametrize("seed", range(8))
def test_brunovsky_matches_classical_indices(seed):
    # chain lengths agree with the rank-increment controllability indices of
    # the merged pair
    rng = random.Random(100 + seed)
    n, m, s = rng.randint(1, 5), rng.randint(0, 2), rng.randint(0, 2)
    A = random_matrix(rng, n, n)
    B_u = random_matrix(rng, n, m)
    B_v = random_matrix(rng, n, s)
    try:
        _, eps, eps_bar = brunovsky_two_inputs(A, B_u, B_v)
    except NotControllable:
        return
    merged = controllability_indices(A, hstack([B_u, B_v]))
    assert sorted(eps + eps_bar, reverse=True) == merged


@pytest.mark.parametrize("seed", range(6))
def test_brunovsky_scramble_invariance(seed):
    rng = random.Random(200 + seed)
    eps = sorted((rng.randint(1, 3) for _ in range(rng.randint(0, 2))), reverse=True)
    eps_bar = sorted((rng.randint(1, 3) for _ in range(rng.randint(0, 2))), reverse=True)
    idx = EmcfIndices(eps=tuple(eps), eps_bar=tuple(eps_bar), A_nn=RatMatrix.zeros(0, 0),
                      sigma=(), delta=0, sigma_bar=(), eta=())
    o = emcf_system(idx)
    t = random_em(rng, o.n, o.m, o.s, o.p)
    o2 = apply_em(o, t)
    _, eps2, eps_bar2 = brunovsky_two_inputs(o2.A, o2.B_u, o2.B_v)
    assert tuple(eps2) == idx.eps and tuple(eps_bar2) == idx.eps_bar


# -- prime systems ---------------------------------------------------------------


def test_prime_pure_static():
    t, sigma, delta, sigma_bar = prime_canonical(
        RatMatrix.zeros(0, 0),
        RatMatrix.zeros(0, 3),
        RatMatrix.zeros(0, 0),
        RatMatrix.zeros(3, 0),
        RatMatrix.identity(3),
    )
    assert (sigma, delta, sigma_bar) == ([], 3, [])


def test_prime_rejects_unobserved_state():
    # a state that never reaches the output: V* is nonzero
    with pytest.raises(NotPrime):
        prime_canonical(
            mat([[0]]), mat([[1]]), RatMatrix.zeros(1, 0), RatMatrix.zeros(1, 1), mat([[1]])
        )


def test_prime_single_chain():
    # x' = u, y = x: one first-kind chain of length 1
    t, sigma, delta, sigma_bar = prime_canonical(
        mat([[0]]), mat([[1]]), RatMatrix.zeros(1, 0), mat([[1]]), RatMatrix.zeros(1, 1)
    )
    assert (sigma, delta, sigma_bar) == ([1], 0, [])


@pytest.mark.parametrize("seed", range(8))
def test_prime_scrambled_round_trip(seed):
    rng = random.Random(300 + seed)
    sigma = tuple(sorted((rng.randint(1, 2) for _ in range(rng.randint(0, 2))), reverse=True))
    sigma_bar = tuple(sorted((rng.randint(1, 2) for _ in range(rng.randint(0, 2))), reverse=True))
    delta = rng.randint(0, 2)
    idx = EmcfIndices(eps=(), eps_bar=(), A_nn=RatMatrix.zeros(0, 0),
                      sigma=sigma, delta=delta, sigma_bar=sigma_bar, eta=())
    o = emcf_system(idx)
    t = random_em(rng, o.n, o.m, o.s, o.p)
    o2 = apply_em(o, t)
    t2, sigma2, delta2, sigma_bar2 = prime_canonical(o2.A, o2.B_u, o2.B_v, o2.C, o2.D_u)
    assert (tuple(sigma2), delta2, tuple(sigma_bar2)) == (sigma, delta, sigma_bar)
    assert verify_em(o2, apply_em(o2, t2), t2)


# -- observable part --------------------------------------------------------------


def test_observable_single_chain():
    t, eta = observable_dual_canonical(mat([[1, 0]]), mat([[0, 1], [0, 0]]))
    assert eta == [2]


def test_observable_rejects_unobservable():
    with pytest.raises(NotObservable):
        observable_dual_canonical(mat([[1, 0]]), mat([[1, 0], [0, 2]]))


@pytest.mark.parametrize("seed", range(8))
def test_observable_duality(seed):
    # observability indices equal the controllability indices of the
    # transposed pair
    rng = random.Random(400 + seed)
    n, p = rng.randint(1, 5), rng.randint(1, 3)
    A = random_matrix(rng, n, n)
    C = random_matrix(rng, p, n)
    try:
        _, eta = observable_dual_canonical(C, A)
    except NotObservable:
        with pytest.raises(NotControllable):
            controllability_indices(A.T, C.T)
        return
    assert eta == controllability_indices(A.T, C.T)


def test_observable_dead_outputs_sorted_last():
    A = mat([[0, 1], [0, 0]])
    C = mat([[0, 0], [1, 0]])
    t, eta = observable_dual_canonical(C, A)
    assert eta == [2]
    o = Odecs2(A, RatMatrix.zeros(2, 0), RatMatrix.zeros(2, 0), C, RatMatrix.zeros(2, 0))
    res = apply_em(o, t)
    assert res.C.row(0) == [qq(1), qq(0)]
    assert res.C.row(1) == [qq(0), qq(0)]


# -- index records ----------------------------------------------------------------


def test_indices_reject_increasing_lists():
    with pytest.raises(ValueError):
        EmcfIndices(eps=(1, 2), eps_bar=(), A_nn=RatMatrix.zeros(0, 0),
                    sigma=(), delta=0, sigma_bar=(), eta=())
    with pytest.raises(ValueError):
        FbcfIndices(eps_p=(), eps_bar_p=(), sigma_p=(0,), sigma_bar_p=(),
                    eta_p=(), n_rho=0, A_rho=RatMatrix.zeros(0, 0))


def test_indices_size_bookkeeping():
    idx = EmcfIndices(eps=(2,), eps_bar=(1,), A_nn=mat([[3]]), sigma=(1,),
                      delta=1, sigma_bar=(2,), eta=(1,), dead_u=1, dead_v=2, dead_y=1)
    assert idx.n == 2 + 1 + 1 + 1 + 2 + 1
    assert idx.m == 1 + 1 + 1 + 1
    assert idx.s == 1 + 1 + 2
    assert idx.p == 1 + 1 + 1 + 1 + 1


# -- assembled canonical form -------------------------------------------------------


def random_emcf_indices(rng, allow_dead_v=True) -> EmcfIndices:
    def chains(max_count, max_len):
        return tuple(sorted((rng.randint(1, max_len) for _ in range(rng.randint(0, max_count))), reverse=True))

    n2 = rng.randint(0, 2)
    A_nn = frobenius_form(random_matrix(rng, n2, n2))[1]
    return EmcfIndices(
        eps=chains(2, 3),
        eps_bar=chains(2, 3),
        A_nn=A_nn,
        sigma=chains(2, 2),
        delta=rng.randint(0, 2),
        sigma_bar=chains(2, 2),
        eta=chains(2, 2),
        dead_u=rng.randint(0, 1),
        dead_v=rng.randint(0, 1) if allow_dead_v else 0,
        dead_y=rng.randint(0, 1),
    )


def test_emcf_empty_system():
    o = Odecs2(RatMatrix.zeros(0, 0), RatMatrix.zeros(0, 0), RatMatrix.zeros(0, 0),
               RatMatrix.zeros(0, 0), RatMatrix.zeros(0, 0))
    t, idx, o_can = emcf(emnf(emtf(o)))
    assert idx.eps == () and idx.eps_bar == () and idx.sigma == ()
    assert idx.sigma_bar == () and idx.eta == () and idx.delta == 0
    assert idx.A_nn.rows == 0


@pytest.mark.parametrize("seed", range(10))
def test_emcf_round_trip_from_known_indices(seed):
    # build a canonical system, scramble it, and recover identical indices
    rng = random.Random(500 + seed)
    idx = random_emcf_indices(rng)
    o = emcf_system(idx)
    t = random_em(rng, o.n, o.m, o.s, o.p)
    o2 = apply_em(o, t)
    t2, idx2, o_can = emcf(emnf(emtf(o2)))
    assert idx2 == idx
    assert o_can == o


def test_emcf_certificate_is_sound():
    rng = random.Random(77)
    idx = random_emcf_indices(rng)
    o2 = apply_em(emcf_system(idx), random_em(rng, idx.n, idx.m, idx.s, idx.p))
    nf = emnf(emtf(o2))
    t, _, o_can = emcf(nf)
    assert verify_em(nf.system, o_can, t)


def test_emcf_circuit():
    o, _ = explicitate(circuit_dacs())
    t, idx, o_can = emcf(emnf(emtf(o)))
    assert idx.eps == () and idx.eps_bar == (2, 2, 1)
    assert idx.sigma == () and idx.delta == 2 and idx.sigma_bar == (1,) * 9
    assert idx.eta == () and idx.A_nn.rows == 0
    assert (idx.dead_u, idx.dead_v, idx.dead_y) == (0, 0, 0)


# -- index translation ----------------------------------------------------------


def test_translate_shifts_and_identities():
    idx = EmcfIndices(eps=(3, 1), eps_bar=(2,), A_nn=mat([[7]]), sigma=(1,),
                      delta=0, sigma_bar=(2, 1), eta=(2,), dead_u=1, dead_y=1)
    f = translate_indices(idx)
    assert f.eps_p == (3, 1)          # unchanged
    assert f.eps_bar_p == (2,)        # state counts carry over unchanged
    assert f.sigma_p == (2,)          # one output equation appended
    assert f.sigma_bar_p == (2, 1)    # unchanged
    assert f.eta_p == (3, 1)          # one appended + a dead output as a 1
    assert f.n_rho == 1 and f.A_rho == mat([[7]])
    assert f.dead_u == 1


def test_translate_merges_statics_into_sigma():
    idx = EmcfIndices(eps=(), eps_bar=(), A_nn=RatMatrix.zeros(0, 0), sigma=(1,),
                      delta=2, sigma_bar=(), eta=())
    f = translate_indices(idx)
    assert f.sigma_p == (2, 1, 1)


def test_translate_rejects_dead_second_kind():
    idx = EmcfIndices(eps=(), eps_bar=(), A_nn=RatMatrix.zeros(0, 0), sigma=(),
                      delta=0, sigma_bar=(), eta=(), dead_v=1)
    with pytest.raises(ValueError):
        translate_indices(idx)


# -- implicit-side assembly -------------------------------------------------------


def test_build_fbcf_regular_block():
    f = FbcfIndices(eps_p=(), eps_bar_p=(), sigma_p=(), sigma_bar_p=(), eta_p=(),
                    n_rho=1, A_rho=mat([[5]]))
    d = build_fbcf(f)
    assert d.E == mat([[1]]) and d.H == mat([[5]]) and d.L.shape == (1, 0)


def test_build_fbcf_block_shapes():
    f = FbcfIndices(eps_p=(2,), eps_bar_p=(2,), sigma_p=(2,), sigma_bar_p=(1,),
                    eta_p=(2,), n_rho=1, A_rho=mat([[0]]), dead_u=1)
    d = build_fbcf(f)
    assert d.l == 2 + 1 + 1 + 2 + 1 + 2
    assert d.n == 2 + 2 + 1 + 1 + 1 + 1
    assert d.m == 1 + 1 + 1
    assert (d.l, d.n, d.m) == (f.l, f.n, f.m)
    # the dead input column is zero
    assert all(d.L[i, 2] == 0 for i in range(d.l))


def test_build_fbcf_circuit_matrix():
    f = FbcfIndices(eps_p=(), eps_bar_p=(2, 2, 1), sigma_p=(1, 1),
                    sigma_bar_p=(1,) * 9, eta_p=(), n_rho=0,
                    A_rho=RatMatrix.zeros(0, 0))
    assert build_fbcf(f) == circuit_fbcf_expected()


# -- the full pipeline -------------------------------------------------------------


@pytest.mark.parametrize("params", [(1, 1, 1, 1, 1), (2, 3, 5, 7, 11)])
def test_fbcf_circuit(params):
    d = circuit_dacs(*params)
    cert, fidx, d_can = fbcf(d)
    assert fidx.eps_p == () and fidx.eps_bar_p == (2, 2, 1)
    assert fidx.sigma_p == (1, 1) and fidx.sigma_bar_p == (1,) * 9
    assert fidx.eta_p == () and fidx.n_rho == 0 and fidx.dead_u == 0
    assert d_can == circuit_fbcf_expected()
    assert verify_exfb(d, d_can, cert)
    # row/state/input bookkeeping of the canonical system
    assert (d_can.l, d_can.n, d_can.m) == (13, 14, 2)


def test_fbcf_circuit_subspace_dimensions():
    o, rec = explicitate(circuit_dacs())
    assert rec.q == 2
    assert (o.n, o.m, o.s, o.p) == (14, 2, 12, 11)
    inv = invariant_subspaces(o)
    assert inv.V_star.dim == 5
    assert inv.W_star.dim == 14
    assert inv.U_star.dim == 3
    assert inv.Y_star.dim == 11


def test_fbcf_fixed_point_on_elementary_blocks():
    cases = [
        Dacs(E=mat([[1]]), H=mat([[5]]), L=RatMatrix.zeros(1, 0)),
        Dacs(E=RatMatrix.identity(2), H=mat([[0, 1], [0, 0]]), L=mat([[0], [1]])),
        Dacs(E=mat([[1, 0]]), H=mat([[0, 1]]), L=RatMatrix.zeros(1, 0)),
        Dacs(E=mat([[0]]), H=mat([[1]]), L=RatMatrix.zeros(1, 0)),
        Dacs(E=mat([[0]]), H=mat([[0]]), L=mat([[1]])),
        Dacs(E=RatMatrix.zeros(1, 0), H=RatMatrix.zeros(1, 0), L=RatMatrix.zeros(1, 0)),
        Dacs(E=mat([[1], [0]]), H=mat([[0], [1]]), L=RatMatrix.zeros(2, 0)),
        Dacs(E=mat([[1], [0]]), H=mat([[0], [1]]), L=mat([[1], [0]])),
    ]
    for d in cases:
        _, fidx, d_can = fbcf(d)
        _, fidx2, d_can2 = fbcf(d_can)
        assert d_can2 == d_can
        assert fidx2 == fidx


@pytest.mark.parametrize("seed", range(12))
def test_fbcf_total_and_scramble_invariant(seed):
    # any input has a canonical form; equivalent inputs share it exactly
    rng = random.Random(600 + seed)
    l, n, m = rng.randint(0, 5), rng.randint(0, 5), rng.randint(0, 3)
    d = random_dacs(rng, l, n, m)
    cert, fidx, d_can = fbcf(d)
    assert verify_exfb(d, d_can, cert)
    d2 = apply_exfb(d, random_exfb(rng, l, n, m))
    cert2, fidx2, d_can2 = fbcf(d2)
    assert fidx2 == fidx
    assert d_can2 == d_can


@pytest.mark.parametrize("seed", range(8))
def test_fbcf_from_known_indices(seed):
    # build a canonical system from indices, scramble, and recover both the
    # indices and the very same canonical matrices
    rng = random.Random(700 + seed)
    idx = random_emcf_indices(rng, allow_dead_v=False)
    f = translate_indices(idx)
    d = build_fbcf(f)
    cert, f2, d_can = fbcf(d)
    assert f2 == f
    assert d_can == d
    d_scr = apply_exfb(d, random_exfb(rng, d.l, d.n, d.m))
    cert3, f3, d_can3 = fbcf(d_scr)
    assert f3 == f
    assert d_can3 == d


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
