"""System types, explicitation, certificates and their verification.

The two protagonists:

* ``Dacs`` — an implicit system E x' = H x + L u with E possibly singular
  or rectangular (l equations, n states, m controls).
* ``Odecs2`` — an explicit system x' = Ax + B_u u + B_v v, y = Cx + D_u u
  with *two kinds* of inputs: the original controls u and the driving
  variables v that parameterize ker E after explicitation.

Explicitation attaches an Odecs2 to a Dacs; the attachment is canonical
here (deterministic Q from the echelon certificate, pivot-column right
inverse, echelon kernel basis) and is recorded so that it can be undone
or compared.  Two certificate types realize the two equivalences:
``ExFbTransform`` (Q, P, F, G) acts on implicit systems, ``EmTransform``
(T_x, T_u, T_v, T_y, F_u, F_v, R, K) acts on explicit ones with the
triangular input structure (v may be fed back with x and u, u only with
x).  verify_* re-check the defining matrix identities exactly, so any
pipeline output can be audited independently of how it was produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

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
    rank_rref,
    right_inverse,
    solve,
    vstack,
)


class SingularTransform(ValueError):
    """A transformation block that must be invertible is not."""


class NotAProlongation(ValueError):
    """v_reduce input does not have the prolongation structure z2' = v."""


# ---------------------------------------------------------------------------
# system types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dacs:
    """Implicit system E x' = H x + L u."""

    E: RatMatrix
    H: RatMatrix
    L: RatMatrix

    def __post_init__(self):
        if self.E.shape != self.H.shape:
            raise ValueError("E and H must share shape, got %s vs %s" % (self.E.shape, self.H.shape))
        if self.L.rows != self.E.rows:
            raise ValueError("L row count %d != l = %d" % (self.L.rows, self.E.rows))

    @property
    def l(self) -> int:
        return self.E.rows

    @property
    def n(self) -> int:
        return self.E.cols

    @property
    def m(self) -> int:
        return self.L.cols


@dataclass(frozen=True)
class Odecs2:
    """Explicit system x' = Ax + B_u u + B_v v, y = Cx + D_u u."""

    A: RatMatrix
    B_u: RatMatrix
    B_v: RatMatrix
    C: RatMatrix
    D_u: RatMatrix

    def __post_init__(self):
        n = self.A.rows
        if self.A.cols != n:
            raise ValueError("A must be square")
        if self.B_u.rows != n or self.B_v.rows != n:
            raise ValueError("B blocks must have n rows")
        if self.C.cols != n:
            raise ValueError("C must have n columns")
        if self.D_u.shape != (self.C.rows, self.B_u.cols):
            raise ValueError("D_u shape %s != (p, m)" % (self.D_u.shape,))

    @property
    def n(self) -> int:
        return self.A.rows

    @property
    def m(self) -> int:
        return self.B_u.cols

    @property
    def s(self) -> int:
        return self.B_v.cols

    @property
    def p(self) -> int:
        return self.C.rows

    def merged(self) -> Tuple[RatMatrix, RatMatrix, RatMatrix, RatMatrix]:
        """The single-input-kind view (A, B_w, C, D_w) with w = (u, v)."""
        B_w = hstack([self.B_u, self.B_v])
        D_w = hstack([self.D_u, RatMatrix.zeros(self.p, self.s)])
        return self.A, B_w, self.C, D_w


@dataclass(frozen=True)
class ExplicitationRecord:
    """The choices (Q, E1^+, B_v) made when explicitating a Dacs."""

    Q: RatMatrix
    E1_dagger: RatMatrix
    B_v: RatMatrix
    q: int


@dataclass(frozen=True)
class ExFbTransform:
    """Certificate for implicit-side equivalence: E -> QEP^-1 etc."""

    Q: RatMatrix
    P: RatMatrix
    F: RatMatrix
    G: RatMatrix

    @staticmethod
    def identity(l: int, n: int, m: int) -> "ExFbTransform":
        return ExFbTransform(
            RatMatrix.identity(l), RatMatrix.identity(n), RatMatrix.zeros(m, n), RatMatrix.identity(m)
        )


@dataclass(frozen=True)
class EmTransform:
    """Certificate for explicit-side equivalence (the 8-tuple action)."""

    T_x: RatMatrix
    T_u: RatMatrix
    T_v: RatMatrix
    T_y: RatMatrix
    F_u: RatMatrix
    F_v: RatMatrix
    R: RatMatrix
    K: RatMatrix

    @staticmethod
    def identity(n: int, m: int, s: int, p: int) -> "EmTransform":
        return EmTransform(
            RatMatrix.identity(n),
            RatMatrix.identity(m),
            RatMatrix.identity(s),
            RatMatrix.identity(p),
            RatMatrix.zeros(m, n),
            RatMatrix.zeros(s, n),
            RatMatrix.zeros(s, m),
            RatMatrix.zeros(n, p),
        )

    def merged_input(self) -> Tuple[RatMatrix, RatMatrix]:
        """(T_w, F_w) of the merged single-input-kind view.

        T_w^{-1} = [[T_u^{-1}, 0], [R T_u^{-1}, T_v^{-1}]] is block lower
        triangular; its inverse T_w = [[T_u, 0], [-T_v R, T_v]].
        """
        m, s = self.T_u.rows, self.T_v.rows
        T_w = vstack(
            [
                hstack([self.T_u, RatMatrix.zeros(m, s)]),
                hstack([-(self.T_v * self.R), self.T_v]),
            ]
        )
        F_w = vstack([self.F_u, self.F_v + self.R * self.F_u])
        return T_w, F_w


@dataclass(frozen=True)
class MorseTransform:
    """Single-input-kind (s = 0) specialization of EmTransform."""

    T_x: RatMatrix
    T_u: RatMatrix
    T_y: RatMatrix
    F_u: RatMatrix
    K: RatMatrix

    def to_em(self) -> EmTransform:
        n, m = self.T_x.rows, self.T_u.rows
        return EmTransform(
            self.T_x,
            self.T_u,
            RatMatrix.identity(0),
            self.T_y,
            self.F_u,
            RatMatrix.zeros(0, n),
            RatMatrix.zeros(0, m),
            self.K,
        )

    @staticmethod
    def from_em(t: EmTransform) -> "MorseTransform":
        if t.T_v.rows != 0:
            raise ValueError("not a single-input-kind transform (s != 0)")
        return MorseTransform(t.T_x, t.T_u, t.T_y, t.F_u, t.K)


def em_from_merged(
    T_x: RatMatrix, T_w: RatMatrix, T_y: RatMatrix, F_w: RatMatrix, K: RatMatrix, m: int
) -> EmTransform:
    """Split a merged-input Morse transformation into the 8-tuple.

    Requires the triangular structure: the upper-right m x s block of
    T_w^{-1} must vanish (u-coordinates may not involve v).
    """
    s = T_w.rows - m
    W = inverse(T_w)
    if not W.submatrix(range(m), range(m, m + s)).is_zero():
        raise InternalInvariantViolation("merged input transform is not triangular")
    T_u = inverse(W.submatrix(range(m), range(m)))
    T_v = inverse(W.submatrix(range(m, m + s), range(m, m + s)))
    R = W.submatrix(range(m, m + s), range(m)) * T_u
    F_u = F_w.take_rows(range(m))
    F_v = F_w.take_rows(range(m, m + s)) - R * F_u
    return EmTransform(T_x, T_u, T_v, T_y, F_u, F_v, R, K)


# ---------------------------------------------------------------------------
# explicitation
# ---------------------------------------------------------------------------


def explicitate(d: Dacs) -> Tuple[Odecs2, ExplicitationRecord]:
    """Attach the canonical explicit two-input-kind system to a Dacs.

    Deterministic choices: Q is the row-operation certificate of the
    echelon form of E (nonzero rows first), E1^+ the pivot-column right
    inverse, B_v the echelon kernel basis of E.
    """
    q, R, Q = rank_rref(d.E)
    E1 = R.take_rows(range(q))
    QH = Q * d.H
    QL = Q * d.L
    H1, H2 = QH.take_rows(range(q)), QH.take_rows(range(q, d.l))
    L1, L2 = QL.take_rows(range(q)), QL.take_rows(range(q, d.l))
    E1d = right_inverse(E1)
    B_v = kernel_basis(d.E).basis
    o = Odecs2(A=E1d * H1, B_u=E1d * L1, B_v=B_v, C=H2, D_u=L2)
    rec = ExplicitationRecord(Q=Q, E1_dagger=E1d, B_v=B_v, q=q)
    assert E1 * o.A == H1 and E1 * o.B_u == L1, "explicitation identities failed"
    return o, rec


# ---------------------------------------------------------------------------
# applying and verifying transformations
# ---------------------------------------------------------------------------


def apply_exfb(d: Dacs, t: ExFbTransform) -> Dacs:
    for M, name in ((t.Q, "Q"), (t.P, "P"), (t.G, "G")):
        if not is_invertible(M):
            raise SingularTransform(name + " is singular")
    Pinv = inverse(t.P)
    return Dacs(
        E=t.Q * d.E * Pinv,
        H=t.Q * (d.H + d.L * t.F) * Pinv,
        L=t.Q * d.L * t.G,
    )


def apply_em(o: Odecs2, t: EmTransform) -> Odecs2:
    for M, name in ((t.T_x, "T_x"), (t.T_u, "T_u"), (t.T_v, "T_v"), (t.T_y, "T_y")):
        if not is_invertible(M):
            raise SingularTransform(name + " is singular")
    Txi = inverse(t.T_x)
    Tui = inverse(t.T_u)
    Tvi = inverse(t.T_v)
    A = t.T_x * (o.A + o.B_u * t.F_u + o.B_v * (t.F_v + t.R * t.F_u) + t.K * (o.C + o.D_u * t.F_u)) * Txi
    B_u = t.T_x * (o.B_u + o.B_v * t.R + t.K * o.D_u) * Tui
    B_v = t.T_x * o.B_v * Tvi
    C = t.T_y * (o.C + o.D_u * t.F_u) * Txi
    D_u = t.T_y * o.D_u * Tui
    return Odecs2(A=A, B_u=B_u, B_v=B_v, C=C, D_u=D_u)


def verify_exfb(d1: Dacs, d2: Dacs, t: ExFbTransform) -> bool:
    """Exact check of the defining identities E2 = Q E1 P^-1, etc."""
    if (d1.l, d1.n, d1.m) != (d2.l, d2.n, d2.m):
        return False
    if not (is_invertible(t.Q) and is_invertible(t.P) and is_invertible(t.G)):
        return False
    Pinv = inverse(t.P)
    return (
        d2.E == t.Q * d1.E * Pinv
        and d2.H == t.Q * (d1.H + d1.L * t.F) * Pinv
        and d2.L == t.Q * d1.L * t.G
    )


def verify_em(o1: Odecs2, o2: Odecs2, t: EmTransform) -> bool:
    if (o1.n, o1.m, o1.s, o1.p) != (o2.n, o2.m, o2.s, o2.p):
        return False
    for M in (t.T_x, t.T_u, t.T_v, t.T_y):
        if not is_invertible(M):
            return False
    return o2 == apply_em(o1, t)


def exfb_compose(t1: ExFbTransform, t2: ExFbTransform) -> ExFbTransform:
    """Certificate for applying t1 first, then t2."""
    return ExFbTransform(
        Q=t2.Q * t1.Q,
        P=t2.P * t1.P,
        F=t1.F + t1.G * t2.F * t1.P,
        G=t1.G * t2.G,
    )


def exfb_inverse(t: ExFbTransform) -> ExFbTransform:
    Qi, Pi, Gi = inverse(t.Q), inverse(t.P), inverse(t.G)
    return ExFbTransform(Q=Qi, P=Pi, F=-(Gi * t.F * Pi), G=Gi)


def em_compose(t1: EmTransform, t2: EmTransform) -> EmTransform:
    """Certificate for applying t1 first, then t2 (merged-form algebra)."""
    Tw1, Fw1 = t1.merged_input()
    Tw2, Fw2 = t2.merged_input()
    T_x = t2.T_x * t1.T_x
    T_y = t2.T_y * t1.T_y
    T_w = Tw2 * Tw1
    F_w = Fw1 + inverse(Tw1) * Fw2 * t1.T_x
    K = t1.K + inverse(t1.T_x) * t2.K * t1.T_y
    return em_from_merged(T_x, T_w, T_y, F_w, K, t1.T_u.rows)


def em_inverse(t: EmTransform) -> EmTransform:
    Tw, Fw = t.merged_input()
    Txi = inverse(t.T_x)
    return em_from_merged(
        Txi,
        inverse(Tw),
        inverse(t.T_y),
        -(Tw * Fw * Txi),
        -(t.T_x * t.K * inverse(t.T_y)),
        t.T_u.rows,
    )


# ---------------------------------------------------------------------------
# explicitation-class membership
# ---------------------------------------------------------------------------


def expl_membership(
    o: Odecs2, d: Dacs
) -> Optional[Tuple[RatMatrix, RatMatrix, RatMatrix, RatMatrix, RatMatrix]]:
    """Witness (F_v, R, K, T_v, T_y) relating o to the canonical
    explicitation of d, or None when o is not an explicitation of d.

    The defining relations (with (A, B_u, B_v, C, D_u) the canonical
    explicitation) are

        o.A   = A + K C + B_v F_v
        o.B_u = B_u + B_v R + K D_u
        o.B_v = B_v T_v^{-1}
        o.C   = T_y C
        o.D_u = T_y D_u

    which is a finite exact linear-solvability problem in the unknowns.
    """
    o0, _rec = explicitate(d)
    if (o.n, o.m, o.s, o.p) != (o0.n, o0.m, o0.s, o0.p):
        return None
    n, m, s, p = o0.n, o0.m, o0.s, o0.p

    # T_v from B_v T_v^{-1} = o.B_v (B_v has full column rank)
    X = solve(o0.B_v, o.B_v)
    if X is None or not is_invertible(X):
        return None
    T_v = inverse(X)

    # joint linear system for (K, F_v, R), vectorized column-major
    M1 = o.A - o0.A
    M2 = o.B_u - o0.B_u
    nK, nF, nR = n * p, s * n, s * m
    rows = []
    rhs = []
    # eq1: K*C + B_v*F_v = M1   (n x n entries)
    for j in range(n):  # column of the n x n equation
        for i in range(n):  # row
            coeff = [qq(0)] * (nK + nF + nR)
            for k in range(p):
                coeff[k * n + i] = o0.C[k, j]  # (K C)[i,j] = sum_k K[i,k] C[k,j]
            for k in range(s):
                coeff[nK + j * s + k] = o0.B_v[i, k]  # (B_v F_v)[i,j]
            rows.append(coeff)
            rhs.append([M1[i, j]])
    # eq2: K*D_u + B_v*R = M2   (n x m entries)
    for j in range(m):
        for i in range(n):
            coeff = [qq(0)] * (nK + nF + nR)
            for k in range(p):
                coeff[k * n + i] = o0.D_u[k, j]
            for k in range(s):
                coeff[nK + nF + j * s + k] = o0.B_v[i, k]
            rows.append(coeff)
            rhs.append([M2[i, j]])
    sol = solve(RatMatrix(rows, cols=nK + nF + nR), RatMatrix(rhs, cols=1))
    if sol is None:
        return None
    K = RatMatrix([[sol[k * n + i, 0] for k in range(p)] for i in range(n)], cols=p)
    F_v = RatMatrix([[sol[nK + j * s + k, 0] for j in range(n)] for k in range(s)], cols=n)
    R = RatMatrix([[sol[nK + nF + j * s + k, 0] for j in range(m)] for k in range(s)], cols=m)

    # invertible T_y with T_y [C D_u] = [o.C o.D_u]
    G = hstack([o0.C, o0.D_u])
    Gt = hstack([o.C, o.D_u])
    r, RG, TG = rank_rref(G)
    Rr = RG.take_rows(range(r))
    S = solve_rows_in_terms_of(Rr, Gt)
    if S is None:
        return None
    rt, _, _ = rank_rref(Gt)
    if rt != r:
        return None  # no invertible output transform can exist
    S_c = complement(image(S), Subspace.full(p)) if r < p else RatMatrix.zeros(p, 0)
    T_y = hstack([S, S_c]) * TG if p else RatMatrix.identity(0)
    if not is_invertible(T_y):
        return None

    # final audit of all five identities
    ok = (
        o.A == o0.A + K * o0.C + o0.B_v * F_v
        and o.B_u == o0.B_u + o0.B_v * R + K * o0.D_u
        and o.B_v == o0.B_v * inverse(T_v)
        and o.C == T_y * o0.C
        and o.D_u == T_y * o0.D_u
    )
    return (F_v, R, K, T_v, T_y) if ok else None


def solve_rows_in_terms_of(Rr: RatMatrix, Gt: RatMatrix) -> Optional[RatMatrix]:
    """S with S * Rr = Gt, or None (Rr has full row rank)."""
    St = solve(Rr.T, Gt.T)
    return None if St is None else St.T


# ---------------------------------------------------------------------------
# prolongation / v-reduction / implicitation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSystem:
    """x1' = A1 x1 + A2 z2 + B_u u,  y = C1 x1 + C2 z2 + D_u u.

    The free variables z2 enter statically (they are the reduced form of
    driving variables after dropping the prolongation rows z2' = v).
    """

    A1: RatMatrix
    A2: RatMatrix
    B_u: RatMatrix
    C1: RatMatrix
    C2: RatMatrix
    D_u: RatMatrix

    @property
    def n1(self) -> int:
        return self.A1.rows

    @property
    def s(self) -> int:
        return self.A2.cols

    @property
    def m(self) -> int:
        return self.B_u.cols

    @property
    def p(self) -> int:
        return self.C1.rows


def prolong(lz: SplitSystem) -> Odecs2:
    """Append the dynamics z2' = v, making z2 part of the state."""
    n1, s, m, p = lz.n1, lz.s, lz.m, lz.p
    A = vstack(
        [
            hstack([lz.A1, lz.A2]),
            RatMatrix.zeros(s, n1 + s),
        ]
    )
    B_u = vstack([lz.B_u, RatMatrix.zeros(s, m)])
    B_v = vstack([RatMatrix.zeros(n1, s), RatMatrix.identity(s)])
    C = hstack([lz.C1, lz.C2])
    return Odecs2(A=A, B_u=B_u, B_v=B_v, C=C, D_u=lz.D_u)


def v_reduce(o: Odecs2) -> Tuple[SplitSystem, RatMatrix]:
    """Undo a prolongation: drop the z2' = v rows and free the z2 states.

    Requires each column of B_v to be a distinct standard basis vector
    whose state row in [A B_u] is zero (up to the state permutation that
    is computed here and returned as a permutation matrix P_x mapping
    original state coordinates to (kept..., prolonged...) order).
    """
    n, s = o.n, o.s
    prolonged: List[int] = []
    for j in range(s):
        col = o.B_v.col(j)
        nz = [i for i, x in enumerate(col) if x != 0]
        if len(nz) != 1 or col[nz[0]] != 1:
            raise NotAProlongation("B_v column %d is not a standard basis vector" % j)
        k = nz[0]
        if k in prolonged:
            raise NotAProlongation("B_v columns are not distinct")
        if any(x != 0 for x in o.A.row(k)) or any(x != 0 for x in o.B_u.row(k)):
            raise NotAProlongation("state %d has dynamics beyond z2' = v" % k)
        prolonged.append(k)
    kept = [i for i in range(n) if i not in set(prolonged)]
    order = kept + prolonged  # stable: kept states keep their relative order
    P_rows = RatMatrix.zeros(n, n).to_lists()
    for new, old in enumerate(order):
        P_rows[new][old] = qq(1)
    P_x = RatMatrix(P_rows, cols=n)
    A1 = o.A.submatrix(kept, kept)
    A2 = o.A.submatrix(kept, prolonged)
    B_u = o.B_u.take_rows(kept)
    C1 = o.C.take_cols(kept)
    C2 = o.C.take_cols(prolonged)
    return SplitSystem(A1=A1, A2=A2, B_u=B_u, C1=C1, C2=C2, D_u=o.D_u), P_x


def implicitate(lz: SplitSystem) -> Dacs:
    """Set y = 0: the split system becomes a Dacs in states (x1, z2)."""
    n1, s, p = lz.n1, lz.s, lz.p
    E = vstack(
        [
            hstack([RatMatrix.identity(n1), RatMatrix.zeros(n1, s)]),
            RatMatrix.zeros(p, n1 + s),
        ]
    )
    H = vstack([hstack([lz.A1, lz.A2]), hstack([lz.C1, lz.C2])])
    L = vstack([lz.B_u, lz.D_u])
    return Dacs(E=E, H=H, L=L)


# ---------------------------------------------------------------------------
# desk-scale simulation (solution-correspondence checks)
# ---------------------------------------------------------------------------


def simulate_odecs(
    o: Odecs2,
    x0: Sequence,
    u_seq: Sequence[Sequence],
    v_seq: Sequence[Sequence],
    h,
    steps: int,
) -> Tuple[List[RatMatrix], List[RatMatrix]]:
    """Explicit Euler with exact rational step h; piecewise-constant inputs.

    Returns (states x_0..x_N, outputs y_0..y_{N-1}).
    """
    h = qq(h)
    if h <= 0:
        raise ValueError("step must be positive")
    x = RatMatrix.from_column(x0)
    xs = [x]
    ys = []
    for k in range(steps):
        u = RatMatrix.from_column(u_seq[k]) if o.m else RatMatrix.zeros(0, 1)
        v = RatMatrix.from_column(v_seq[k]) if o.s else RatMatrix.zeros(0, 1)
        ys.append(o.C * x + o.D_u * u)
        dx = o.A * x + o.B_u * u + o.B_v * v
        x = x + dx.scale(h)
        xs.append(x)
    return xs, ys


def dacs_residuals(d: Dacs, xs: Sequence[RatMatrix], u_seq: Sequence[Sequence], h) -> List[RatMatrix]:
    """Exact residuals E (x_{k+1}-x_k)/h - H x_k - L u_k along a trajectory."""
    h = qq(h)
    res = []
    for k in range(len(xs) - 1):
        u = RatMatrix.from_column(u_seq[k]) if d.m else RatMatrix.zeros(0, 1)
        r = (d.E * (xs[k + 1] - xs[k])).scale(1 / h) - d.H * xs[k] - d.L * u
        res.append(r)
    return res


def simulate(sys_obj, x0, u_seq, v_seq=None, h=None, steps=None, trajectory=None):
    """Dispatch: Odecs2 -> Euler trajectory; Dacs -> residuals along one."""
    if isinstance(sys_obj, Odecs2):
        return simulate_odecs(sys_obj, x0, u_seq, v_seq or [], h, steps)
    if isinstance(sys_obj, Dacs):
        if trajectory is None:
            raise ValueError("Dacs simulation reports residuals along a supplied trajectory")
        return dacs_residuals(sys_obj, trajectory, u_seq, h)
    raise TypeError("expected Dacs or Odecs2")
