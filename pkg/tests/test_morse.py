"""Triangular form, normal form, and Sylvester solver tests."""

from __future__ import annotations

import random

import pytest

from dacscanon.ratmat import RatMatrix, hstack, inverse, qq, rank, vstack
from dacscanon.systems import (
    EmTransform,
    MorseTransform,
    Odecs2,
    apply_em,
    verify_em,
)
from dacscanon.geometry import invariant_subspaces
from dacscanon._chains import charpoly, poly_gcd
from dacscanon.morse import (
    MtfSystem,
    NonUniqueWarning,
    NoSolution,
    emnf,
    emtf,
    mnf,
    mtf,
    solve_constrained_sylvester,
    solve_sylvester,
)
from test_systems import random_em, random_matrix, random_odecs


def mat(rows, cols=None):
    return RatMatrix([[qq(x) for x in r] for r in rows], cols=cols)


# -- Sylvester ----------------------------------------------------------------


def test_sylvester_scalar():
    X = solve_sylvester(mat([[0]]), mat([[1]]), mat([[-2]]))
    assert X == mat([[2]])


def test_sylvester_no_solution():
    with pytest.raises(NoSolution):
        solve_sylvester(RatMatrix.zeros(1, 1), RatMatrix.zeros(1, 1), mat([[1]]))


def test_sylvester_disjoint_spectra_exact():
    rng = random.Random(7)
    A = mat([[1, 1], [0, 2]])
    B = mat([[3, 1, 0], [0, 4, 1], [0, 0, 5]])
    for _ in range(5):
        C = random_matrix(rng, 2, 3)
        X = solve_sylvester(A, B, C)
        assert A * X - X * B == C


def test_sylvester_nonunique_warns():
    with pytest.warns(NonUniqueWarning):
        X = solve_sylvester(RatMatrix.zeros(1, 1), RatMatrix.zeros(1, 1), RatMatrix.zeros(1, 1))
    assert X == RatMatrix.zeros(1, 1)


def test_constrained_vacuous_matches_plain():
    A = mat([[1, 1], [0, 2]])
    B = mat([[5]])
    C = mat([[3], [4]])
    assert solve_constrained_sylvester(A, B, C) == solve_sylvester(A, B, C)
    assert solve_constrained_sylvester(
        A, B, C, right_zero=RatMatrix.zeros(1, 0), left_zero=RatMatrix.zeros(0, 2)
    ) == solve_sylvester(A, B, C)


def test_constrained_construct_then_solve():
    rng = random.Random(8)
    for _ in range(5):
        A = random_matrix(rng, 3, 3)
        B = random_matrix(rng, 2, 2)
        X0 = random_matrix(rng, 3, 2)
        R = random_matrix(rng, 2, 2)
        L = random_matrix(rng, 1, 3)
        X = solve_constrained_sylvester(
            A,
            B,
            A * X0 - X0 * B,
            right_zero=R,
            target_r=X0 * R,
            left_zero=L,
            target_l=L * X0,
        )
        assert A * X - X * B == A * X0 - X0 * B
        assert X * R == X0 * R
        assert L * X == L * X0


def test_constrained_conflicting_constraints():
    Z = RatMatrix.zeros(1, 1)
    with pytest.raises(NoSolution):
        solve_constrained_sylvester(
            Z, Z, Z,
            right_zero=RatMatrix.identity(1), target_r=RatMatrix.zeros(1, 1),
            left_zero=RatMatrix.identity(1), target_l=mat([[1]]),
        )


# -- triangular form ----------------------------------------------------------


def group_sizes(o):
    """(m1u, s1): how the first input group splits between the two kinds."""
    inv = invariant_subspaces(o)
    v_space_basis = vstack([RatMatrix.zeros(o.m, o.s), RatMatrix.identity(o.s)])
    s1 = 0
    for j in range(inv.U_star.dim):
        col = inv.U_star.basis.col(j)
        if all(col[i] == 0 for i in range(o.m)):
            s1 += 1
    return inv.U_star.dim - s1, s1


def blocks_of(r):
    d = r.dims
    offs = [0, d.n1, d.n1 + d.n2, d.n1 + d.n2 + d.n3, d.n1 + d.n2 + d.n3 + d.n4]
    return [list(range(offs[i], offs[i + 1])) for i in range(4)]


def check_triangular_pattern(r):
    o = r.system
    d = r.dims
    A, B_w, C, D_w = o.merged()
    b1, b2, b3, b4 = blocks_of(r)
    m1u, s1 = group_sizes(o)
    g1 = list(range(m1u)) + list(range(o.m, o.m + s1))
    g3 = list(range(m1u, o.m)) + list(range(o.m + s1, o.m + o.s))
    y3, y4 = list(range(d.p3)), list(range(d.p3, o.p))
    for rows, cols in [(b2, b1), (b2, b3), (b3, b1), (b3, b2), (b4, b1), (b4, b2), (b4, b3)]:
        assert A.submatrix(rows, cols).is_zero()
    assert B_w.take_rows(b2 + b4).is_zero()
    assert B_w.submatrix(b3, g1).is_zero()
    assert C.submatrix(y3, b1 + b2).is_zero()
    assert C.submatrix(y4, b1 + b2 + b3).is_zero()
    assert D_w.take_cols(g1).is_zero()
    assert D_w.take_rows(y4).is_zero()
    return b1, b2, b3, b4, g1, g3, y3, y4


def check_block_properties(r):
    """Controllability of block 1, observability of block 4, primeness of
    block 3, via independent rank/subspace tests."""
    o = r.system
    d = r.dims
    A, B_w, C, D_w = o.merged()
    b1, b2, b3, b4, g1, g3, y3, y4 = check_triangular_pattern(r)
    A1 = A.submatrix(b1, b1)
    B1 = B_w.submatrix(b1, g1)
    ctrb = []
    cur = B1
    for _ in range(max(d.n1, 1)):
        ctrb.append(cur)
        cur = A1 * cur
    assert rank(hstack(ctrb)) == d.n1
    A4 = A.submatrix(b4, b4)
    C4 = C.submatrix(y4, b4)
    obs = []
    cur = C4
    for _ in range(max(d.n4, 1)):
        obs.append(cur)
        cur = cur * A4
    assert rank(vstack(obs)) == d.n4
    # block 3 is prime: no output-nulling states, no useless inputs, and the
    # conditioned/reachable pair fills everything
    m1u, s1 = group_sizes(o)
    sub = Odecs2(
        A.submatrix(b3, b3),
        o.B_u.submatrix(b3, range(m1u, o.m)),
        o.B_v.submatrix(b3, range(s1, o.s)),
        C.submatrix(y3, b3),
        o.D_u.submatrix(y3, range(m1u, o.m)),
    )
    inv3 = invariant_subspaces(sub)
    assert inv3.V_star.dim == 0
    assert inv3.U_star.dim == 0
    assert inv3.W_star.dim == sub.n
    assert inv3.Y_star.dim == sub.p


def as_em(t):
    return t.to_em() if isinstance(t, MorseTransform) else t


def test_mtf_random_systems():
    rng = random.Random(11)
    for n, m, p in [(3, 1, 1), (4, 2, 2), (3, 2, 1), (2, 1, 2)]:
        for _ in range(2):
            o = random_odecs(rng, n, m, 0, p)
            r = mtf(o)
            assert isinstance(r.transform, MorseTransform)
            assert verify_em(o, r.system, as_em(r.transform))
            inv = invariant_subspaces(o)
            assert r.dims == (inv.n1, inv.n2, inv.n3, inv.n4, inv.m1, inv.m3, inv.p3, inv.p4)
            check_block_properties(r)


def test_mtf_accepts_plain_tuple():
    A = mat([[0, 1], [0, 0]])
    B = mat([[0], [1]])
    C = mat([[1, 0]])
    D = RatMatrix.zeros(1, 1)
    r = mtf((A, B, C, D))
    assert r.system.n == 2 and r.system.s == 0
    check_triangular_pattern(r)


def test_mtf_rejects_second_kind_inputs():
    rng = random.Random(12)
    o = random_odecs(rng, 2, 1, 1, 1)
    with pytest.raises(ValueError):
        mtf(o)


def tight_blocks_system(rng):
    """A system already in triangular coordinates with all four blocks
    nontrivial; returns it with its expected dimensions."""
    A12 = random_matrix(rng, 2, 1)
    A13 = random_matrix(rng, 2, 1)
    A14 = random_matrix(rng, 2, 1)
    A24 = random_matrix(rng, 1, 1)
    A34 = random_matrix(rng, 1, 1)
    A = vstack(
        [
            hstack([mat([[0, 1], [0, 0]]), A12, A13, A14]),
            hstack([RatMatrix.zeros(1, 2), mat([[3]]), RatMatrix.zeros(1, 1), A24]),
            hstack([RatMatrix.zeros(1, 3), mat([[0]]), A34]),
            hstack([RatMatrix.zeros(1, 4), mat([[0]])]),
        ]
    )
    B12 = random_matrix(rng, 2, 1)
    B = vstack(
        [
            hstack([mat([[0], [1]]), B12]),
            RatMatrix.zeros(1, 2),
            hstack([RatMatrix.zeros(1, 1), mat([[1]])]),
            RatMatrix.zeros(1, 2),
        ]
    )
    C34 = random_matrix(rng, 1, 1)
    C = vstack(
        [
            hstack([RatMatrix.zeros(1, 3), mat([[1]]), C34]),
            hstack([RatMatrix.zeros(1, 4), mat([[1]])]),
        ]
    )
    D = RatMatrix.zeros(2, 2)
    return Odecs2(A, B, RatMatrix.zeros(5, 0), C, D), (2, 1, 1, 1, 1, 1, 1, 1)


def test_mtf_dims_match_tight_construction():
    rng = random.Random(13)
    o, expected = tight_blocks_system(rng)
    inv = invariant_subspaces(o)
    assert (inv.n1, inv.n2, inv.n3, inv.n4, inv.m1, inv.m3, inv.p3, inv.p4) == expected
    r = mtf(o)
    assert tuple(r.dims) == expected
    check_block_properties(r)


def test_mtf_dims_invariant_under_scrambling():
    rng = random.Random(14)
    o, expected = tight_blocks_system(rng)
    for _ in range(3):
        t = random_em(rng, 5, 2, 0, 2)
        scrambled = apply_em(o, t)
        r = mtf(scrambled)
        assert tuple(r.dims) == expected
        assert verify_em(scrambled, r.system, as_em(r.transform))


def test_emtf_random_systems():
    rng = random.Random(15)
    for n, m, s, p in [(3, 1, 1, 1), (4, 2, 1, 2), (3, 1, 2, 1)]:
        for _ in range(2):
            o = random_odecs(rng, n, m, s, p)
            r = emtf(o)
            assert isinstance(r.transform, EmTransform)
            assert verify_em(o, r.system, r.transform)
            check_block_properties(r)
            T_w, _ = r.transform.merged_input()
            W = inverse(T_w)
            assert W.submatrix(range(m), range(m, m + s)).is_zero()


def test_emtf_with_no_second_kind_matches_mtf():
    rng = random.Random(16)
    o = random_odecs(rng, 3, 2, 0, 2)
    r1 = mtf(o)
    r2 = emtf(o)
    assert r1.system == r2.system
    assert r1.dims == r2.dims
    assert as_em(r1.transform) == r2.transform


# -- normal form --------------------------------------------------------------


def check_diagonal_pattern(r):
    b1, b2, b3, b4, g1, g3, y3, y4 = check_triangular_pattern(r)
    A, B_w, C, D_w = r.system.merged()
    for rows, cols in [(b1, b2), (b1, b3), (b1, b4), (b2, b4), (b3, b4)]:
        assert A.submatrix(rows, cols).is_zero()
    assert B_w.submatrix(b1, g3).is_zero()
    assert C.submatrix(y3, b4).is_zero()
    polys = [charpoly(A.submatrix(b, b)) for b in (b1, b2, b3, b4)]
    for i in range(4):
        for j in range(i + 1, 4):
            assert poly_gcd(polys[i], polys[j]) == [qq(1)]


def test_mnf_on_already_diagonal_system_is_identity():
    # a triangular-form system with no coupling blocks and disjoint block
    # spectra: the normal-form stages have nothing to do
    rng = random.Random(20)
    o, expected = tight_blocks_system(rng)
    base = mtf(o)
    d = base.dims
    first = mnf(base)
    diag = first.system
    wrapped = MtfSystem(
        system=diag,
        dims=d,
        transform=MorseTransform(
            T_x=RatMatrix.identity(5),
            T_u=RatMatrix.identity(2),
            T_y=RatMatrix.identity(2),
            F_u=RatMatrix.zeros(2, 5),
            K=RatMatrix.zeros(5, 2),
        ),
    )
    again = mnf(wrapped)
    assert again.system == diag
    t = as_em(again.transform)
    assert t.T_x == RatMatrix.identity(5)
    assert t.F_u.is_zero() and t.K.is_zero()


def test_mnf_random_pipeline():
    rng = random.Random(17)
    for n, m, p in [(3, 1, 1), (4, 2, 2), (3, 2, 1)]:
        for _ in range(2):
            o = random_odecs(rng, n, m, 0, p)
            r = mnf(mtf(o))
            assert isinstance(r.transform, MorseTransform)
            assert verify_em(o, r.system, as_em(r.transform))
            check_diagonal_pattern(r)


def test_emnf_random_pipeline_and_identity_input_transform():
    rng = random.Random(18)
    for n, m, s, p in [(3, 1, 1, 1), (4, 2, 1, 2)]:
        o = random_odecs(rng, n, m, s, p)
        base = emtf(o)
        r = emnf(base)
        assert verify_em(o, r.system, r.transform)
        check_diagonal_pattern(r)
        # the normal-form stages add no input or output transform on top of
        # the triangular one
        assert r.transform.T_u == base.transform.T_u
        assert r.transform.T_v == base.transform.T_v
        assert r.transform.R == base.transform.R
        assert r.transform.T_y == base.transform.T_y


def test_mnf_rejects_non_triangular_input():
    rng = random.Random(19)
    o = random_odecs(rng, 3, 1, 0, 1)
    r = mtf(o)
    dense = random_odecs(rng, 3, 1, 0, 1)
    with pytest.raises(ValueError):
        mnf(MtfSystem(system=dense, dims=r.dims, transform=r.transform))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
