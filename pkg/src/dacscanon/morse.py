"""Triangular and block-diagonal forms for linear systems with two input
kinds, plus the exact Sylvester machinery used to decouple them.

The triangular form splits the state into four parts along the invariant
subspaces (the compatible part V* ∩ W*, the rest of V*, the rest of W*, and
a completion), the inputs into the part that can act inside V* and the rest,
and the outputs into the reachable image and a completion.  In the adapted
coordinates a feedback stage and an output-injection stage, each a single
exact linear solve, zero out every block below the diagonal staircase.  The
normal form then removes the remaining coupling blocks with a state-space
similarity assembled from Sylvester solutions, after (if necessary) an exact
pole placement has made the four diagonal blocks' characteristic polynomials
pairwise coprime.

Both input kinds are handled in merged form; only the *second* kind may mix
into the first through the input transform, never the reverse, so the
certificates keep the lower-block-triangular input structure throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Tuple, Union

from ._chains import NotControllable, charpoly, pole_place, poly_gcd, poly_mul
from .geometry import invariant_subspaces
from .ratmat import (
    InternalInvariantViolation,
    RatMatrix,
    Subspace,
    block_diag,
    complement,
    hstack,
    inverse,
    is_invertible,
    kernel_basis,
    qq,
    rank,
    rank_rref,
    right_inverse,
    solve,
    solve_left,
    subspace_intersect,
    subspace_sum,
    vstack,
)
from .systems import (
    EmTransform,
    MorseTransform,
    Odecs2,
    apply_em,
    em_compose,
    em_from_merged,
    em_inverse,
    verify_em,
)


class NoSolution(ValueError):
    """The (constrained) Sylvester system is inconsistent."""


class NonUniqueWarning(UserWarning):
    """The Sylvester solution is not unique; the first echelon solution was
    returned."""


class BlockDims(NamedTuple):
    n1: int
    n2: int
    n3: int
    n4: int
    m1: int
    m3: int
    p3: int
    p4: int


@dataclass(frozen=True)
class MtfSystem:
    """A system in triangular form together with its certificate."""

    system: Odecs2
    dims: BlockDims
    transform: Union[MorseTransform, EmTransform]


@dataclass(frozen=True)
class MnfSystem:
    """A system in block-diagonal normal form together with its certificate."""

    system: Odecs2
    dims: BlockDims
    transform: Union[MorseTransform, EmTransform]


# ---------------------------------------------------------------------------
# Sylvester machinery
# ---------------------------------------------------------------------------


def _kron(A: RatMatrix, B: RatMatrix) -> RatMatrix:
    rows = A.rows * B.rows
    cols = A.cols * B.cols
    out = [[qq(0)] * cols for _ in range(rows)]
    for i in range(A.rows):
        for j in range(A.cols):
            a = A[i, j]
            if a == 0:
                continue
            for k in range(B.rows):
                for l in range(B.cols):
                    out[i * B.rows + k][j * B.cols + l] = a * B[k, l]
    return RatMatrix(out, cols=cols)


def _vec(M: RatMatrix) -> RatMatrix:
    """Column-major vectorization."""
    return RatMatrix([[M[i, j]] for j in range(M.cols) for i in range(M.rows)], cols=1)


def _unvec(v: RatMatrix, rows: int, cols: int) -> RatMatrix:
    return RatMatrix(
        [[v[j * rows + i, 0] for j in range(cols)] for i in range(rows)], cols=cols
    )


def _sylvester_operator(A: RatMatrix, B: RatMatrix) -> RatMatrix:
    """Matrix of X -> A X - X B under column-major vectorization."""
    return _kron(RatMatrix.identity(B.rows), A) - _kron(B.T, RatMatrix.identity(A.rows))


def _matrix_poly_eval(p: List, A: RatMatrix) -> RatMatrix:
    """p(A) for an ascending coefficient list, by Horner's rule."""
    M = RatMatrix.zeros(A.rows, A.rows)
    for c in reversed(p):
        M = M * A + RatMatrix.identity(A.rows).scale(c)
    return M


def _adjugate_coeffs(B: RatMatrix) -> Tuple[List, List[RatMatrix]]:
    """Characteristic polynomial q of B and the coefficient matrices N_k of
    adj(s I - B) = sum_k N_k s^k, via the descending Horner recursion
    N_{d-1} = I, N_{k-1} = B N_k + q_k I (the constant step is Cayley-
    Hamilton and is left implicit)."""
    d = B.rows
    q = charpoly(B)
    if d == 0:
        return q, []
    N = [RatMatrix.identity(d)] * d
    for k in range(d - 1, 0, -1):
        N[k - 1] = B * N[k] + RatMatrix.identity(d).scale(q[k])
    return q, N


def _pencil_poly_inverse(P0: RatMatrix, n_dyn: int) -> List[RatMatrix]:
    """Coefficients Q_k of the polynomial inverse of P(s) = P0 - s J, where
    J is the identity on the first ``n_dyn`` coordinates and zero after.

    The pencil of a prime block is unimodular -- its determinant is a nonzero
    constant -- so the inverse is again a polynomial matrix, of degree at
    most n_dyn.  It is found by inverting at n_dyn + 1 sample points and
    interpolating entrywise; the final product check certifies both the
    degree bound and the primeness assumption."""
    size = P0.rows
    deg = n_dyn
    pts = [qq(i) for i in range(deg + 1)]
    invs = []
    for s in pts:
        M = P0.to_lists()
        for j in range(n_dyn):
            M[j][j] -= s
        try:
            invs.append(inverse(RatMatrix(M, cols=size)))
        except ValueError as exc:
            raise InternalInvariantViolation(
                "prime pencil is singular at a sample point"
            ) from exc
    Q = [RatMatrix.zeros(size, size) for _ in range(deg + 1)]
    for i, s_i in enumerate(pts):
        basis = [qq(1)]
        denom = qq(1)
        for j, s_j in enumerate(pts):
            if j != i:
                basis = poly_mul(basis, [-s_j, qq(1)])
                denom *= s_i - s_j
        for k, c in enumerate(basis):
            if c != 0:
                Q[k] = Q[k] + invs[i].scale(c / denom)
    for k in range(deg + 2):
        term = RatMatrix.zeros(size, size)
        if k <= deg:
            term = term + P0 * Q[k]
        if 1 <= k <= deg + 1:
            prev = Q[k - 1]
            term = term - vstack(
                [prev.take_rows(range(n_dyn)), RatMatrix.zeros(size - n_dyn, size)]
            )
        expected = RatMatrix.identity(size) if k == 0 else RatMatrix.zeros(size, size)
        if term != expected:
            raise InternalInvariantViolation("pencil inverse is not polynomial")
    return Q


def solve_sylvester(A: RatMatrix, B: RatMatrix, C: RatMatrix) -> RatMatrix:
    """Exact X with A X - X B = C.

    Raises NoSolution if inconsistent; warns NonUniqueWarning (and returns the
    first echelon solution) when the operator is singular but consistent.  The
    solution is unique exactly when the characteristic polynomials of A and B
    are coprime.
    """
    if A.rows != A.cols or B.rows != B.cols:
        raise ValueError("Sylvester coefficients must be square")
    if C.rows != A.rows or C.cols != B.rows:
        raise ValueError("right-hand side has shape %s, expected %dx%d" % (C.shape, A.rows, B.rows))
    if poly_gcd(charpoly(A), charpoly(B)) == [qq(1)]:
        # Coprime spectra: the operator is bijective and the unique solution
        # has a closed form.  Multiplying X (sI - B) = (sI - A) X + C by
        # adj(sI - B) and evaluating the polynomial identity at s = A (acting
        # from the left) kills the unknown-bearing term and leaves
        # q(A) X = sum_k A^k C N_k with q = charpoly(B), q(A) invertible.
        q, N = _adjugate_coeffs(B)
        S = RatMatrix.zeros(A.rows, B.rows)
        powC = C
        for k in range(B.rows):
            S = S + powC * N[k]
            if k + 1 < B.rows:
                powC = A * powC
        X = inverse(_matrix_poly_eval(q, A)) * S
        if A * X - X * B != C:
            raise InternalInvariantViolation("closed-form Sylvester solution failed")
        return X
    M = _sylvester_operator(A, B)
    x = solve(M, _vec(C))
    if x is None:
        raise NoSolution("Sylvester equation is inconsistent")
    if rank(M) < M.cols:
        warnings.warn("Sylvester solution is not unique", NonUniqueWarning, stacklevel=2)
    return _unvec(x, A.rows, B.rows)


def solve_constrained_sylvester(
    A: RatMatrix,
    B: RatMatrix,
    C: RatMatrix,
    right_zero: Optional[RatMatrix] = None,
    target_r: Optional[RatMatrix] = None,
    left_zero: Optional[RatMatrix] = None,
    target_l: Optional[RatMatrix] = None,
) -> RatMatrix:
    """Exact X with A X - X B = C, X*right_zero = target_r, left_zero*X = target_l.

    Omitted targets default to zero matrices (the constraints then pin the
    named products to zero, hence the parameter names).  Raises NoSolution if
    the joint linear system is inconsistent.
    """
    if A.rows != A.cols or B.rows != B.cols:
        raise ValueError("Sylvester coefficients must be square")
    nA, nB = A.rows, B.rows
    if C.rows != nA or C.cols != nB:
        raise ValueError("right-hand side has shape %s, expected %dx%d" % (C.shape, nA, nB))
    rows = [_sylvester_operator(A, B)]
    rhs = [_vec(C)]
    if right_zero is not None:
        if right_zero.rows != nB:
            raise ValueError("right constraint must have %d rows" % nB)
        if target_r is None:
            target_r = RatMatrix.zeros(nA, right_zero.cols)
        rows.append(_kron(right_zero.T, RatMatrix.identity(nA)))
        rhs.append(_vec(target_r))
    if left_zero is not None:
        if left_zero.cols != nA:
            raise ValueError("left constraint must have %d columns" % nA)
        if target_l is None:
            target_l = RatMatrix.zeros(left_zero.rows, nB)
        rows.append(_kron(RatMatrix.identity(nB), left_zero))
        rhs.append(_vec(target_l))
    M = vstack(rows)
    x = solve(M, vstack(rhs))
    if x is None:
        raise NoSolution("constrained Sylvester system is inconsistent")
    if rank(M) < M.cols:
        warnings.warn(
            "constrained Sylvester solution is not unique", NonUniqueWarning, stacklevel=2
        )
    return _unvec(x, nA, nB)


# ---------------------------------------------------------------------------
# triangular form
# ---------------------------------------------------------------------------


def _state_blocks(d: BlockDims) -> List[List[int]]:
    n1, n2, n3, n4 = d.n1, d.n2, d.n3, d.n4
    offs = [0, n1, n1 + n2, n1 + n2 + n3, n1 + n2 + n3 + n4]
    return [list(range(offs[i], offs[i + 1])) for i in range(4)]


def _input_groups(m: int, s: int, m1u: int, s1: int) -> Tuple[List[int], List[int]]:
    g1 = list(range(m1u)) + list(range(m, m + s1))
    g3 = list(range(m1u, m)) + list(range(m + s1, m + s))
    return g1, g3


def _stage0(o: Odecs2) -> Tuple[EmTransform, BlockDims, int, int]:
    """Coordinate changes adapted to the invariant subspaces."""
    inv = invariant_subspaces(o)
    d = BlockDims(inv.n1, inv.n2, inv.n3, inv.n4, inv.m1, inv.m3, inv.p3, inv.p4)
    n, m, s, p = o.n, o.m, o.s, o.p

    vw = subspace_intersect(inv.V_star, inv.W_star)
    basis_x = hstack(
        [
            vw.basis,
            complement(vw, inv.V_star),
            complement(vw, inv.W_star),
            complement(subspace_sum(inv.V_star, inv.W_star), Subspace.full(n)),
        ]
    )
    if basis_x.cols != n or not is_invertible(basis_x):
        raise InternalInvariantViolation("state blocks do not assemble to a basis")
    T_x = inverse(basis_x)

    v_space = Subspace.from_columns(
        vstack([RatMatrix.zeros(m, s), RatMatrix.identity(s)])
    )
    u_v = subspace_intersect(inv.U_star, v_space)
    t_u1 = complement(u_v, inv.U_star)
    t_u3 = complement(subspace_sum(inv.U_star, v_space), Subspace.full(m + s))
    t_v1 = u_v.basis
    t_v3 = complement(u_v, v_space)
    basis_w = hstack([t_u1, t_u3, t_v1, t_v3])
    m1u, s1 = t_u1.cols, t_v1.cols
    if m1u + t_u3.cols != m or s1 + t_v3.cols != s or not is_invertible(basis_w):
        raise InternalInvariantViolation("input groups do not assemble to a basis")
    if not basis_w.submatrix(range(m), range(m, m + s)).is_zero():
        raise InternalInvariantViolation("second-kind inputs leaked into the first kind")
    T_w = inverse(basis_w)

    basis_y = hstack([inv.Y_star.basis, complement(inv.Y_star, Subspace.full(p))])
    if not is_invertible(basis_y):
        raise InternalInvariantViolation("output blocks do not assemble to a basis")
    T_y = inverse(basis_y)

    t0 = em_from_merged(
        T_x, T_w, T_y, RatMatrix.zeros(m + s, n), RatMatrix.zeros(n, p), m
    )
    return t0, d, m1u, s1


def _assert_stage0(o: Odecs2, d: BlockDims, g1: List[int]) -> None:
    A, B_w, C, D_w = o.merged()
    lower = list(range(d.n1, o.n))
    if not B_w.submatrix(lower, g1).is_zero():
        raise InternalInvariantViolation("group-1 inputs act outside the first block")
    if not D_w.take_cols(g1).is_zero():
        raise InternalInvariantViolation("group-1 inputs feed through")
    y4 = list(range(d.p3, o.p))
    if not D_w.take_rows(y4).is_zero():
        raise InternalInvariantViolation("feedthrough leaves the reachable output block")
    if not C.submatrix(y4, range(d.n1 + d.n2 + d.n3)).is_zero():
        raise InternalInvariantViolation("unreachable outputs see blocks 1-3")


def _f_stage(o: Odecs2, d: BlockDims, g3: List[int]) -> Tuple[Odecs2, EmTransform]:
    A, B_w, C, D_w = o.merged()
    n = o.n
    rows34 = list(range(d.n1 + d.n2, n))
    cols12 = list(range(d.n1 + d.n2))
    y3 = list(range(d.p3))
    coeff = vstack([B_w.submatrix(rows34, g3), D_w.submatrix(y3, g3)])
    rhs = -vstack([A.submatrix(rows34, cols12), C.submatrix(y3, cols12)])
    sol = solve(coeff, rhs)
    if sol is None:
        raise InternalInvariantViolation("feedback stage is unsolvable")
    F = [[qq(0)] * n for _ in range(o.m + o.s)]
    for a, gi in enumerate(g3):
        for b, cj in enumerate(cols12):
            F[gi][cj] = sol[a, b]
    F = RatMatrix(F, cols=n)
    t = replace(
        EmTransform.identity(n, o.m, o.s, o.p),
        F_u=F.take_rows(range(o.m)),
        F_v=F.take_rows(range(o.m, o.m + o.s)),
    )
    return apply_em(o, t), t


def _k_stage(o: Odecs2, d: BlockDims, g3: List[int]) -> Tuple[Odecs2, EmTransform]:
    A, B_w, C, D_w = o.merged()
    n = o.n
    b2 = list(range(d.n1, d.n1 + d.n2))
    b3 = list(range(d.n1 + d.n2, d.n1 + d.n2 + d.n3))
    b4 = list(range(d.n1 + d.n2 + d.n3, n))
    y3 = list(range(d.p3))
    coeff = hstack([C.submatrix(y3, b3), D_w.submatrix(y3, g3)])
    target = -vstack(
        [
            hstack([A.submatrix(b2, b3), B_w.submatrix(b2, g3)]),
            hstack([A.submatrix(b4, b3), B_w.submatrix(b4, g3)]),
        ]
    )
    sol = solve_left(coeff, target)
    if sol is None:
        raise InternalInvariantViolation("output-injection stage is unsolvable")
    K = [[qq(0)] * o.p for _ in range(n)]
    for a, ri in enumerate(b2 + b4):
        for b, yj in enumerate(y3):
            K[ri][yj] = sol[a, b]
    t = replace(EmTransform.identity(n, o.m, o.s, o.p), K=RatMatrix(K, cols=o.p))
    return apply_em(o, t), t


def _d_normalize(
    o: Odecs2, d: BlockDims, m1u: int
) -> Tuple[Odecs2, EmTransform]:
    """Input/output changes on group 3 bringing the feedthrough block to
    [[0, 0], [0, I]]."""
    p3 = d.p3
    u3 = list(range(m1u, o.m))
    D3 = o.D_u.submatrix(range(p3), u3)
    delta, R, T = rank_rref(D3)
    top = R.take_rows(range(delta))
    swap = RatMatrix.zeros(p3, p3).to_lists()
    for i in range(p3 - delta):
        swap[i][delta + i] = qq(1)
    for i in range(delta):
        swap[p3 - delta + i][i] = qq(1)
    T_a = RatMatrix(swap, cols=p3) * T
    T_b_inv = hstack([kernel_basis(top).basis, right_inverse(top)])
    if not is_invertible(T_b_inv):
        raise InternalInvariantViolation("feedthrough normalizer is singular")
    expected = RatMatrix.zeros(p3, len(u3)).to_lists()
    for i in range(delta):
        expected[p3 - delta + i][len(u3) - delta + i] = qq(1)
    if T_a * D3 * T_b_inv != RatMatrix(expected, cols=len(u3)):
        raise InternalInvariantViolation("feedthrough block did not normalize")
    t = replace(
        EmTransform.identity(o.n, o.m, o.s, o.p),
        T_u=block_diag([RatMatrix.identity(m1u), inverse(T_b_inv)]),
        T_y=block_diag([T_a, RatMatrix.identity(o.p - p3)]),
    )
    return apply_em(o, t), t


def _assert_triangular(
    o: Odecs2, d: BlockDims, m1u: int, s1: int, normalized: bool = True
) -> None:
    A, B_w, C, D_w = o.merged()
    b1, b2, b3, b4 = _state_blocks(d)
    g1, g3 = _input_groups(o.m, o.s, m1u, s1)
    y3 = list(range(d.p3))
    y4 = list(range(d.p3, o.p))
    zero_blocks = [
        (b2, b1), (b2, b3), (b3, b1), (b3, b2), (b4, b1), (b4, b2), (b4, b3),
    ]
    for rows, cols in zero_blocks:
        if not A.submatrix(rows, cols).is_zero():
            raise InternalInvariantViolation("state coupling block is not zero")
    if not B_w.take_rows(b2 + b4).is_zero():
        raise InternalInvariantViolation("inputs act on blocks 2 or 4")
    if not B_w.submatrix(b3, g1).is_zero():
        raise InternalInvariantViolation("group-1 inputs act on block 3")
    if not C.submatrix(y3, b1 + b2).is_zero():
        raise InternalInvariantViolation("reachable outputs see blocks 1-2")
    if not C.submatrix(y4, b1 + b2 + b3).is_zero():
        raise InternalInvariantViolation("unreachable outputs see blocks 1-3")
    if not D_w.take_cols(g1).is_zero() or not D_w.take_rows(y4).is_zero():
        raise InternalInvariantViolation("feedthrough outside the group-3 block")
    if normalized:
        u3 = list(range(m1u, o.m))
        D3 = o.D_u.submatrix(y3, u3)
        delta = rank(D3)
        expected = RatMatrix.zeros(d.p3, len(u3)).to_lists()
        for i in range(delta):
            expected[d.p3 - delta + i][len(u3) - delta + i] = qq(1)
        if D3 != RatMatrix(expected, cols=len(u3)):
            raise InternalInvariantViolation("feedthrough block is not normalized")


def _triangular_form(o: Odecs2) -> Tuple[Odecs2, EmTransform, BlockDims, int, int]:
    t0, d, m1u, s1 = _stage0(o)
    o1 = apply_em(o, t0)
    g1, g3 = _input_groups(o.m, o.s, m1u, s1)
    _assert_stage0(o1, d, g1)
    o2, t1 = _f_stage(o1, d, g3)
    o3, t2 = _k_stage(o2, d, g3)
    o4, t3 = _d_normalize(o3, d, m1u)
    total = em_compose(em_compose(em_compose(t0, t1), t2), t3)
    _assert_triangular(o4, d, m1u, s1)
    if not verify_em(o, o4, total):
        raise InternalInvariantViolation("triangular-form certificate failed to verify")
    return o4, total, d, m1u, s1


def mtf(o) -> MtfSystem:
    """Triangular form of a single-input-kind system (certificate included).

    Accepts an Odecs2 with s = 0 or a plain (A, B, C, D) tuple.
    """
    if isinstance(o, tuple):
        A, B, C, D = o
        o = Odecs2(A, B, RatMatrix.zeros(A.rows, 0), C, D)
    if o.s != 0:
        raise ValueError("mtf expects no second-kind inputs; use emtf")
    sys4, total, d, _, _ = _triangular_form(o)
    return MtfSystem(system=sys4, dims=d, transform=MorseTransform.from_em(total))


def emtf(o: Odecs2) -> MtfSystem:
    """Triangular form with both input kinds; the input transform never mixes
    second-kind inputs into the first kind."""
    sys4, total, d, _, _ = _triangular_form(o)
    return MtfSystem(system=sys4, dims=d, transform=total)


# ---------------------------------------------------------------------------
# normal form
# ---------------------------------------------------------------------------


def _recover_groups(o: Odecs2, d: BlockDims) -> Tuple[int, int]:
    """Group sizes (m1u, s1) of a system already in triangular coordinates."""
    inv = invariant_subspaces(o)
    v_space = Subspace.from_columns(
        vstack([RatMatrix.zeros(o.m, o.s), RatMatrix.identity(o.s)])
    )
    s1 = subspace_intersect(inv.U_star, v_space).dim
    if inv.m1 != d.m1:
        raise ValueError("recorded dims do not match the system")
    return d.m1 - s1, s1


def _disjoint_spectra_stage(
    o: Odecs2, d: BlockDims, g1: List[int], g3: List[int]
) -> EmTransform:
    """Feedback and output injection (preserving the triangular pattern) that
    make the four diagonal blocks' characteristic polynomials pairwise
    coprime.  Identity when they already are."""
    A, B_w, C, D_w = o.merged()
    b1, b2, b3, b4 = _state_blocks(d)
    y4 = list(range(d.p3, o.p))
    blocks = [A.submatrix(b, b) for b in (b1, b2, b3, b4)]
    polys = [charpoly(Ab) for Ab in blocks]
    t_id = EmTransform.identity(o.n, o.m, o.s, o.p)
    if _pairwise_coprime(polys):
        return t_id
    poly2 = polys[1]
    n = o.n
    for attempt in range(n + 1):
        base = attempt * n
        t1 = [base + i + 1 for i in range(d.n1)]
        t3 = [base + d.n1 + i + 1 for i in range(d.n3)]
        t4 = [base + d.n1 + d.n3 + i + 1 for i in range(d.n4)]
        try:
            F1 = pole_place(blocks[0], B_w.submatrix(b1, g1), t1)
            F2 = pole_place(blocks[2], B_w.submatrix(b3, g3), t3)
            K3 = pole_place(blocks[3].T, C.submatrix(y4, b4).T, t4).T
        except NotControllable as exc:
            raise InternalInvariantViolation(
                "triangular form lost block controllability/observability"
            ) from exc
        new_polys = [
            charpoly(blocks[0] + B_w.submatrix(b1, g1) * F1),
            poly2,
            charpoly(blocks[2] + B_w.submatrix(b3, g3) * F2),
            charpoly(blocks[3] + K3 * C.submatrix(y4, b4)),
        ]
        if not _pairwise_coprime(new_polys):
            continue
        F = [[qq(0)] * n for _ in range(o.m + o.s)]
        for a, gi in enumerate(g1):
            for b, cj in enumerate(b1):
                F[gi][cj] = F1[a, b]
        for a, gi in enumerate(g3):
            for b, cj in enumerate(b3):
                F[gi][cj] = F2[a, b]
        K = [[qq(0)] * o.p for _ in range(n)]
        for a, ri in enumerate(b4):
            for b, yj in enumerate(y4):
                K[ri][yj] = K3[a, b]
        F = RatMatrix(F, cols=n)
        return replace(
            t_id,
            F_u=F.take_rows(range(o.m)),
            F_v=F.take_rows(range(o.m, o.m + o.s)),
            K=RatMatrix(K, cols=o.p),
        )
    raise InternalInvariantViolation("no disjoint integer spectra found")


def _pairwise_coprime(polys: List[List]) -> bool:
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            if poly_gcd(polys[i], polys[j]) != [qq(1)]:
                return False
    return True


def _coupling_corrections(
    o: Odecs2, d: BlockDims, g3: List[int]
) -> Tuple[EmTransform, RatMatrix, RatMatrix]:
    """Output injection into block 1 and feedback from block 4 that make the
    later similarity stage able to zero B's block-(1,3) columns and C's
    block-(3,4) rows.

    Solves the two joint linear systems

        A1 T2 - T2 A3 - K1 C3 = A13,   T2 B3 + K1 D3 = -B13,
        A3 T5 - T5 A4 - B3 F3 = A34,   C3 T5 - D3 F3 = C34,

    each uniquely solvable because the middle block is prime (its system
    matrix [[A3 - s I, B3], [C3, D3]] has full rank for every s).  Returns
    the (K, F) stage plus the T2, T5 blocks for the similarity."""
    A, B_w, C, D_w = o.merged()
    b1, b2, b3, b4 = _state_blocks(d)
    y3 = list(range(d.p3))
    n1, n3, n4, p3 = d.n1, d.n3, d.n4, d.p3
    A1 = A.submatrix(b1, b1)
    A3 = A.submatrix(b3, b3)
    A4 = A.submatrix(b4, b4)
    B3 = B_w.submatrix(b3, g3)
    C3 = C.submatrix(y3, b3)
    D3 = D_w.submatrix(y3, g3)
    if d.m3 != p3:
        raise InternalInvariantViolation("prime block has unequal input/output counts")
    m3 = len(g3)

    # Both joint systems are driven by the same prime pencil
    #     P(s) = [[A3 - s I, B3], [C3, D3]],
    # which is unimodular, so its inverse Q(s) is a polynomial matrix.  The
    # first system says [T2 K1] P(s) = [(A1 - s I) T2 - A13, -B13] for every
    # s; evaluating at s = A1 from the left kills the unknown-bearing term:
    #     [T2 K1] = -sum_k A1^k [A13 B13] Q_k.
    A13 = A.submatrix(b1, b3)
    B13 = B_w.submatrix(b1, g3)
    Q = _pencil_poly_inverse(
        vstack([hstack([A3, B3]), hstack([C3, D3])]), n3
    )
    acc1 = RatMatrix.zeros(n1, n3 + m3)
    pow1 = hstack([A13, B13])
    for k, Qk in enumerate(Q):
        acc1 = acc1 + pow1 * Qk
        if k + 1 < len(Q):
            pow1 = A1 * pow1
    T2 = acc1.take_cols(range(n3)).scale(qq(-1))
    K1 = acc1.take_cols(range(n3, n3 + m3)).scale(qq(-1))
    if A1 * T2 - T2 * A3 - K1 * C3 != A13 or T2 * B3 + K1 * D3 != -B13:
        raise InternalInvariantViolation("block-(1,3) correction failed")

    # The second system uses the column-sign-flipped pencil P(s) J with
    # J = diag(I, -I), whose inverse is J Q(s):
    #     [[T5], [F3]] = sum_k J Q_k [[A34], [C34]] A4^k.
    A34 = A.submatrix(b3, b4)
    C34 = C.submatrix(y3, b4)
    acc2 = RatMatrix.zeros(n3 + m3, n4)
    pow2 = vstack([A34, C34])
    for k, Qk in enumerate(Q):
        flipped = vstack(
            [Qk.take_rows(range(n3)), Qk.take_rows(range(n3, n3 + m3)).scale(qq(-1))]
        )
        acc2 = acc2 + flipped * pow2
        if k + 1 < len(Q):
            pow2 = pow2 * A4
    T5 = acc2.take_rows(range(n3))
    F3 = acc2.take_rows(range(n3, n3 + m3))
    if A3 * T5 - T5 * A4 - B3 * F3 != A34 or C3 * T5 - D3 * F3 != C34:
        raise InternalInvariantViolation("block-(3,4) correction failed")

    n = o.n
    K = [[qq(0)] * o.p for _ in range(n)]
    for a, ri in enumerate(b1):
        for b, yj in enumerate(y3):
            K[ri][yj] = K1[a, b]
    F = [[qq(0)] * n for _ in range(o.m + o.s)]
    for a, gi in enumerate(g3):
        for b, cj in enumerate(b4):
            F[gi][cj] = F3[a, b]
    F = RatMatrix(F, cols=n)
    stage = replace(
        EmTransform.identity(n, o.m, o.s, o.p),
        F_u=F.take_rows(range(o.m)),
        F_v=F.take_rows(range(o.m, o.m + o.s)),
        K=RatMatrix(K, cols=o.p),
    )
    return stage, T2, T5


def _similarity_stage(
    o: Odecs2, d: BlockDims, T2: RatMatrix, T5: RatMatrix
) -> EmTransform:
    """Unipotent state similarity removing the remaining coupling blocks."""
    A = o.A
    b1, b2, b3, b4 = _state_blocks(d)
    A1, A2, A4 = (A.submatrix(b, b) for b in (b1, b2, b4))
    try:
        T1 = solve_sylvester(A1, A2, A.submatrix(b1, b2))
        T4 = solve_sylvester(A2, A4, A.submatrix(b2, b4))
        T3 = solve_sylvester(
            A1,
            A4,
            A.submatrix(b1, b4) + T1 * A.submatrix(b2, b4) + T2 * A.submatrix(b3, b4),
        )
    except NoSolution as exc:
        raise InternalInvariantViolation("decoupling equations are inconsistent") from exc
    n = o.n
    S = RatMatrix.identity(n).to_lists()
    for block_rows, block_cols, X in [
        (b1, b2, T1),
        (b1, b3, T2),
        (b1, b4, T3),
        (b2, b4, T4),
        (b3, b4, T5),
    ]:
        for a, ri in enumerate(block_rows):
            for b, cj in enumerate(block_cols):
                S[ri][cj] = X[a, b]
    return replace(
        EmTransform.identity(n, o.m, o.s, o.p), T_x=RatMatrix(S, cols=n)
    )


def _assert_diagonal(o: Odecs2, d: BlockDims, m1u: int, s1: int) -> None:
    _assert_triangular(o, d, m1u, s1, normalized=False)
    A, B_w, C, D_w = o.merged()
    b1, b2, b3, b4 = _state_blocks(d)
    g1, g3 = _input_groups(o.m, o.s, m1u, s1)
    y3 = list(range(d.p3))
    for rows, cols in [(b1, b2), (b1, b3), (b1, b4), (b2, b4), (b3, b4)]:
        if not A.submatrix(rows, cols).is_zero():
            raise InternalInvariantViolation("coupling block survived decoupling")
    if not B_w.submatrix(b1, g3).is_zero():
        raise InternalInvariantViolation("group-3 inputs still act on block 1")
    if not C.submatrix(y3, b4).is_zero():
        raise InternalInvariantViolation("reachable outputs still see block 4")
    polys = [charpoly(A.submatrix(b, b)) for b in (b1, b2, b3, b4)]
    if not _pairwise_coprime(polys):
        raise InternalInvariantViolation("diagonal blocks share eigenvalues")


def _normal_form(m: MtfSystem) -> Tuple[Odecs2, EmTransform, int, int]:
    o, d = m.system, m.dims
    m1u, s1 = _recover_groups(o, d)
    try:
        _assert_triangular(o, d, m1u, s1, normalized=False)
    except InternalInvariantViolation as exc:
        raise ValueError("input system is not in triangular form") from exc
    g1, g3 = _input_groups(o.m, o.s, m1u, s1)
    t_spec = _disjoint_spectra_stage(o, d, g1, g3)
    o_bar = apply_em(o, t_spec)
    t_corr, T2, T5 = _coupling_corrections(o_bar, d, g3)
    o_corr = apply_em(o_bar, t_corr)
    t_sim = _similarity_stage(o_corr, d, T2, T5)
    o_mnf = apply_em(o_corr, t_sim)
    _assert_diagonal(o_mnf, d, m1u, s1)
    return o_mnf, em_compose(em_compose(t_spec, t_corr), t_sim), m1u, s1


def _finish_normal_form(m: MtfSystem) -> Tuple[Odecs2, EmTransform]:
    o_mnf, t_stages, _, _ = _normal_form(m)
    prior = m.transform if isinstance(m.transform, EmTransform) else m.transform.to_em()
    total = em_compose(prior, t_stages)
    original = apply_em(m.system, em_inverse(prior))
    if not verify_em(original, o_mnf, total):
        raise InternalInvariantViolation("normal-form certificate failed to verify")
    return o_mnf, total


def mnf(m: MtfSystem) -> MnfSystem:
    """Block-diagonal normal form of a triangular-form system; the composed
    certificate maps the system the triangular form was computed from."""
    if m.system.s != 0:
        raise ValueError("mnf expects no second-kind inputs; use emnf")
    o_mnf, total = _finish_normal_form(m)
    return MnfSystem(system=o_mnf, dims=m.dims, transform=MorseTransform.from_em(total))


def emnf(m: MtfSystem) -> MnfSystem:
    """Two-input-kind normal form; the extra stages use no input transform at
    all, so the composed certificate stays lower-block-triangular."""
    o_mnf, total = _finish_normal_form(m)
    return MnfSystem(system=o_mnf, dims=m.dims, transform=total)
