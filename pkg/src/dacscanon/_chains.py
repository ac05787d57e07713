"""Exact polynomial and chain machinery: characteristic/minimal polynomials,
controllability indices, Brunovsky normalization, pole placement, Frobenius
(rational canonical) form.

Polynomials are coefficient lists low-to-high degree over the exact scalar
type.  The Brunovsky construction is dual: chain heads are row functionals
drawn from the annihilator filtration

    K_i = { tau : tau [B, AB, ..., A^{i-1}B] = 0 },

which decreases from everything (K_0) to zero (controllable pairs).  A head
tau of length k satisfies tau A^l B = 0 for l < k-1, so the tower
(tau, tau A, ..., tau A^{k-1}) turns into a pure integrator chain in the new
coordinates — no cleanup pass needed afterwards.
"""

from __future__ import annotations

import random
from typing import List, Sequence, Tuple

from .ratmat import (
    InternalInvariantViolation,
    RatMatrix,
    Subspace,
    complement,
    hstack,
    image,
    inverse,
    is_invertible,
    kernel_basis,
    qq,
    rank,
    rank_rref,
    solve,
    subspace_sum,
    vstack,
)


class NotControllable(ValueError):
    """The pair (A, B) is not controllable."""


class NotObservable(ValueError):
    """The pair (C, A) is not observable."""


# ---------------------------------------------------------------------------
# polynomials (coefficient lists, low degree first)
# ---------------------------------------------------------------------------


def poly_trim(p: List) -> List:
    i = len(p)
    while i > 0 and p[i - 1] == 0:
        i -= 1
    return p[:i]


def poly_mul(p: List, q: List) -> List:
    if not p or not q:
        return []
    out = [qq(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return poly_trim(out)


def poly_add(p: List, q: List) -> List:
    out = [qq(0)] * max(len(p), len(q))
    for i, a in enumerate(p):
        out[i] += a
    for i, b in enumerate(q):
        out[i] += b
    return poly_trim(out)


def poly_scale(p: List, c) -> List:
    return poly_trim([a * qq(c) for a in p])


def poly_divmod(p: List, q: List) -> Tuple[List, List]:
    q = poly_trim(list(q))
    if not q:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(p)
    quo = [qq(0)] * max(0, len(r) - len(q) + 1)
    lead = q[-1]
    while len(poly_trim(r)) >= len(q):
        r = poly_trim(r)
        shift = len(r) - len(q)
        c = r[-1] / lead
        quo[shift] = c
        for i, b in enumerate(q):
            r[shift + i] -= c * b
    return poly_trim(quo), poly_trim(r)


def poly_gcd(p: List, q: List) -> List:
    """Monic greatest common divisor over the rationals."""
    a, b = poly_trim(list(p)), poly_trim(list(q))
    while b:
        _, r = poly_divmod(a, b)
        a, b = b, r
    if not a:
        return []
    return [c / a[-1] for c in a]


def poly_from_roots(roots: Sequence) -> List:
    p = [qq(1)]
    for r in roots:
        p = poly_mul(p, [-qq(r), qq(1)])
    return p


def charpoly(A: RatMatrix) -> List:
    """Characteristic polynomial det(lambda I - A), computed by the
    Faddeev-LeVerrier trace recursion (division-safe over the rationals)."""
    n = A.rows
    coeffs = [qq(0)] * (n + 1)
    coeffs[n] = qq(1)
    M = RatMatrix.identity(n)
    for k in range(1, n + 1):
        AM = A * M
        tr = sum((AM[i, i] for i in range(n)), qq(0))
        c = -tr / qq(k)
        coeffs[n - k] = c
        M = AM + RatMatrix.identity(n).scale(c)
    return coeffs


def minimal_polynomial(A: RatMatrix) -> List:
    """Monic minimal polynomial via the first linear dependence among powers."""
    n = A.rows
    if n == 0:
        return [qq(1)]
    powers = [RatMatrix.identity(n)]
    while True:
        k = len(powers)
        nxt = A * powers[-1]
        stacked = RatMatrix(
            [[P[i, j] for P in powers] for i in range(n) for j in range(n)], cols=k
        )
        target = RatMatrix([[nxt[i, j]] for i in range(n) for j in range(n)], cols=1)
        c = solve(stacked, target)
        if c is not None:
            return poly_trim([-c[i, 0] for i in range(k)] + [qq(1)])
        powers.append(nxt)
        if k > n:
            raise InternalInvariantViolation("minimal polynomial degree exceeded n")


# ---------------------------------------------------------------------------
# controllability and chain construction
# ---------------------------------------------------------------------------


def controllability_indices(A: RatMatrix, B: RatMatrix) -> List[int]:
    """Classical indices from the rank increments of [B, AB, A^2 B, ...].

    Returns the positive indices sorted nonincreasing; their sum is n iff
    the pair is controllable (no exception raised here — this is the
    independent cross-check oracle, not the construction).
    """
    n = A.rows
    blocks = []
    cur = B
    ranks = [0]
    for _ in range(n):
        blocks.append(cur)
        ranks.append(rank(hstack(blocks)))
        cur = A * cur
    increments = [ranks[i + 1] - ranks[i] for i in range(n)]
    # increments[k-1] counts the chains of length >= k, so exact-length-k
    # chains number increments[k-1] - increments[k]
    out: List[int] = []
    for k in range(n, 0, -1):
        longer = increments[k] if k < n else 0
        out.extend([k] * (increments[k - 1] - longer))
    return sorted(out, reverse=True)


def functional_chains(A: RatMatrix, B: RatMatrix) -> List[Tuple[RatMatrix, int]]:
    """Chain heads (row functional, length) for a controllable pair,
    longest first.  Raises NotControllable otherwise."""
    n = A.rows
    if n == 0:
        return []
    K: List[Subspace] = [Subspace.full(n)]
    ctrb = B
    while K[-1].dim > 0:
        K.append(kernel_basis(ctrb.T))
        if len(K) > n + 1:
            break
        ctrb = hstack([ctrb, A * (ctrb.take_cols(range(ctrb.cols - B.cols, ctrb.cols)))])
    if K[-1].dim != 0:
        raise NotControllable("annihilator filtration did not reach zero")
    mu = len(K) - 1
    chains: List[Tuple[RatMatrix, int]] = []
    for i in range(mu, 0, -1):
        reps = [
            (tau * _matrix_power(A, k - i)) for tau, k in chains if k > i
        ]  # level-i representatives of longer chains, living in K_{i-1}
        inner = K[i]
        for r in reps:
            inner = subspace_sum(inner, image(r.T))
        new_heads = complement(inner, K[i - 1])
        for j in range(new_heads.cols):
            chains.append((RatMatrix([new_heads.col(j)], cols=n), i))
    total = sum(k for _, k in chains)
    if total != n:
        raise InternalInvariantViolation("chain lengths sum to %d, not n=%d" % (total, n))
    return chains


def _matrix_power(A: RatMatrix, k: int) -> RatMatrix:
    M = RatMatrix.identity(A.rows)
    for _ in range(k):
        M = M * A
    return M


def tower_matrix(chains: Sequence[Tuple[RatMatrix, int]], A: RatMatrix) -> RatMatrix:
    """Stack each chain's functional tower tau, tau A, ..., tau A^{k-1}."""
    rows = []
    for tau, k in chains:
        cur = tau
        for _ in range(k):
            rows.append(cur)
            cur = cur * A
    return vstack(rows) if rows else RatMatrix.zeros(0, A.rows)


def brunovsky_single(
    A: RatMatrix, B: RatMatrix
) -> Tuple[RatMatrix, RatMatrix, RatMatrix, List[int]]:
    """(T_x, T_u, F, kappa) with T_x (A + B F) T_x^{-1} in chain form and
    T_x B T_u^{-1} the matching input selections.

    Chain j occupies a state block of size kappa[j] (ones on the
    superdiagonal) and is driven by new input j at its last row; surplus
    inputs (columns m > number of chains) drive nothing.
    """
    n, m = A.rows, B.cols
    chains = functional_chains(A, B)
    T_x = tower_matrix(chains, A)
    if not is_invertible(T_x):
        raise InternalInvariantViolation("chain tower is not a basis")
    gamma_rows = [tau * _matrix_power(A, k - 1) * B for tau, k in chains]
    Gamma = vstack(gamma_rows) if gamma_rows else RatMatrix.zeros(0, m)
    extra = complement(image(Gamma.T), Subspace.full(m)).T
    T_u = vstack([Gamma, extra]) if m else RatMatrix.identity(0)
    if not is_invertible(T_u):
        raise InternalInvariantViolation("chain tails do not extend to an input basis")
    tails = [tau * _matrix_power(A, k) for tau, k in chains]
    M = vstack(tails + [RatMatrix.zeros(m - len(chains), n)]) if m else RatMatrix.zeros(0, n)
    F = -(inverse(T_u) * M) if m else RatMatrix.zeros(0, n)
    kappa = [k for _, k in chains]
    _assert_chain_form(T_x * (A + B * F) * inverse(T_x), T_x * B * inverse(T_u), kappa)
    return T_x, T_u, F, kappa


def _assert_chain_form(A: RatMatrix, B: RatMatrix, kappa: Sequence[int]) -> None:
    n = A.rows
    expectA = RatMatrix.zeros(n, n).to_lists()
    expectB = RatMatrix.zeros(n, B.cols).to_lists()
    off = 0
    for j, k in enumerate(kappa):
        for l in range(k - 1):
            expectA[off + l][off + l + 1] = qq(1)
        expectB[off + k - 1][j] = qq(1)
        off += k
    if A != RatMatrix(expectA, cols=n) or B != RatMatrix(expectB, cols=B.cols):
        raise InternalInvariantViolation("Brunovsky normalization produced a wrong pattern")


def pole_place(A: RatMatrix, B: RatMatrix, targets: Sequence) -> RatMatrix:
    """F with charpoly(A + B F) = prod (lambda - t) over the targets.

    Exact coefficient matching per chain in Brunovsky coordinates; requires
    len(targets) = n and a controllable pair.
    """
    n = A.rows
    targets = [qq(t) for t in targets]
    if len(targets) != n:
        raise ValueError("need exactly n target poles")
    if n == 0:
        return RatMatrix.zeros(B.cols, 0)
    T_x, T_u, F0, kappa = brunovsky_single(A, B)
    G = RatMatrix.zeros(B.cols, n).to_lists()
    off = 0
    for j, k in enumerate(kappa):
        coeffs = poly_from_roots(targets[off : off + k])
        for l in range(k):
            G[j][off + l] = -coeffs[l]
        off += k
    F = F0 + inverse(T_u) * RatMatrix(G, cols=n) * T_x
    if charpoly(A + B * F) != poly_from_roots(targets):
        raise InternalInvariantViolation("pole placement missed the target polynomial")
    return F


# ---------------------------------------------------------------------------
# Frobenius (rational canonical) form
# ---------------------------------------------------------------------------


def companion(p: List) -> RatMatrix:
    """Companion matrix of a monic polynomial: subdiagonal ones, negated
    coefficients in the last column."""
    d = len(p) - 1
    M = RatMatrix.zeros(d, d).to_lists()
    for i in range(d - 1):
        M[i + 1][i] = qq(1)
    for i in range(d):
        M[i][d - 1] = -p[i]
    return RatMatrix(M, cols=d)


def _cyclic_vector(A: RatMatrix, degree: int) -> RatMatrix:
    """A column whose Krylov space has dimension = deg(minimal polynomial)."""
    n = A.rows
    candidates = [RatMatrix.from_column([qq(1) if i == j else qq(0) for i in range(n)]) for j in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            e = [qq(0)] * n
            e[i], e[j] = qq(1), qq(1)
            candidates.append(RatMatrix.from_column(e))
    rng = random.Random(987654321)
    for _ in range(200):
        candidates.append(RatMatrix.from_column([qq(rng.randint(-3, 3)) for _ in range(n)]))
    for v in candidates:
        if v.is_zero():
            continue
        cols = [v]
        for _ in range(degree - 1):
            cols.append(A * cols[-1])
        if rank(hstack(cols)) == degree:
            return v
    raise InternalInvariantViolation("no cyclic vector found for the minimal polynomial")


def frobenius_form(A: RatMatrix) -> Tuple[RatMatrix, RatMatrix, List[List]]:
    """(T, Fr, factors) with T A T^{-1} = Fr = diag of companion blocks.

    factors is the invariant-factor list, degree nonincreasing, each
    dividing the previous; their product is the characteristic polynomial.
    """
    T, blocks, factors = _frobenius_rec(A)
    Fr = _block_diag_square(blocks)
    if T * A != Fr * T:
        raise InternalInvariantViolation("Frobenius transformation mismatch")
    prod = [qq(1)]
    for f in factors:
        prod = poly_mul(prod, f)
    if prod != charpoly(A):
        raise InternalInvariantViolation("invariant factors do not multiply to the charpoly")
    for f1, f2 in zip(factors, factors[1:]):
        if poly_divmod(f1, f2)[1]:
            raise InternalInvariantViolation("invariant factor divisibility chain broken")
    return T, Fr, factors


def _frobenius_rec(A: RatMatrix) -> Tuple[RatMatrix, List[RatMatrix], List[List]]:
    n = A.rows
    if n == 0:
        return RatMatrix.identity(0), [], []
    mp = minimal_polynomial(A)
    d = len(mp) - 1
    v = _cyclic_vector(A, d)
    cols = [v]
    for _ in range(d - 1):
        cols.append(A * cols[-1])
    V = hstack(cols)
    e_last = RatMatrix.from_column([qq(0)] * (d - 1) + [qq(1)])
    phi_t = solve(V.T, e_last)
    if phi_t is None:
        raise InternalInvariantViolation("dual cyclic functional does not exist")
    phi = phi_t.T
    tower = [phi]
    for _ in range(d - 1):
        tower.append(tower[-1] * A)
    Phi = vstack(tower)
    W = kernel_basis(Phi).basis
    P = hstack([V, W])
    if not is_invertible(P):
        raise InternalInvariantViolation("cyclic split is not a direct sum")
    Ap = inverse(P) * A * P
    sub = Ap.submatrix(range(d, n), range(d, n))
    if not (
        Ap.submatrix(range(d), range(d, n)).is_zero()
        and Ap.submatrix(range(d, n), range(d)).is_zero()
    ):
        raise InternalInvariantViolation("cyclic complement is not invariant")
    T_sub, blocks_sub, factors_sub = _frobenius_rec(sub)
    T = _embed_block_diag(RatMatrix.identity(d), T_sub) * inverse(P)
    return T, [companion(mp)] + blocks_sub, [mp] + factors_sub


def _embed_block_diag(M1: RatMatrix, M2: RatMatrix) -> RatMatrix:
    return vstack(
        [
            hstack([M1, RatMatrix.zeros(M1.rows, M2.cols)]),
            hstack([RatMatrix.zeros(M2.rows, M1.cols), M2]),
        ]
    )


def _block_diag_square(blocks: List[RatMatrix]) -> RatMatrix:
    out = RatMatrix.identity(0)
    for b in blocks:
        out = _embed_block_diag(out, b)
    return out
