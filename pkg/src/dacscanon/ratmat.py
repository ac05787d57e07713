"""Exact rational dense matrices and the subspace lattice.

Everything downstream (explicitation, Wong sequences, Morse forms, the
feedback canonical form) is built on the operations in this module.  All
arithmetic is exact: entries are arbitrary-precision rationals, kept in
lowest terms with positive denominator by the scalar type itself.  Ranks,
kernels and the lattice operations (sum, intersection, preimage,
complement) are therefore decidable, and subspaces get a *canonical*
basis — column-reduced echelon form — so subspace equality is plain
matrix equality.

Determinism rules (fixed so that certificates and canonical forms are
reproducible):
  * pivoting: leftmost column, first nonzero row;
  * complement: greedily extend the inner basis by the outer basis
    columns in index order;
  * right inverse: inverse of the pivot-column submatrix placed in the
    pivot rows, zeros elsewhere.

gmpy2.mpq is used when available (it is markedly faster than
fractions.Fraction on the dense eliminations done here); the stdlib
Fraction is a drop-in fallback.
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Tuple, Union

try:  # pragma: no cover - exercised implicitly by the import
    from gmpy2 import mpq as QQ
    from gmpy2 import gcd as _int_gcd
    from gmpy2 import lcm as _int_lcm
except ImportError:  # pragma: no cover
    from fractions import Fraction as QQ
    from math import gcd as _int_gcd
    from math import lcm as _int_lcm

Rat = Union[int, str, "QQ"]

_ZERO = QQ(0)
_ONE = QQ(1)


def qq(x: Rat, den: int = None) -> "QQ":
    """Coerce an int, 'p/q' string or rational scalar to the scalar type.

    qq(p, q) builds the fraction p/q directly.
    """
    if den is None:
        if type(x) is QQ:
            return x
        if isinstance(x, float):
            raise TypeError("floats are not allowed in exact matrices: %r" % (x,))
        return QQ(x)
    return QQ(x, den)


def _int_row(row: Sequence["QQ"]) -> Tuple[List, "int"]:
    """(numerators, d): the row scaled by its common denominator d."""
    d = 1
    for x in row:
        xd = x.denominator
        if xd != 1:
            d = _int_lcm(d, xd)
    return [x.numerator * (d // x.denominator) for x in row], d


class NotNested(ValueError):
    """complement(inner, outer) called with inner not contained in outer."""


class NotFullRowRank(ValueError):
    """right_inverse called on a matrix without full row rank."""


class InternalInvariantViolation(AssertionError):
    """A mathematical fact the algorithms rely on failed to hold at runtime.

    This is never a user error: it means a proof obligation (solvability of
    a linear system, invertibility of a constructed block, a canonical zero
    pattern) was violated, i.e. a bug.
    """


class RatMatrix:
    """Immutable dense matrix over the rationals, row-major.

    Zero-row and zero-column matrices are representable (pass explicit
    ``cols`` when there are no rows).  Instances are never mutated after
    construction; all operations return new matrices.
    """

    __slots__ = ("rows", "cols", "_d")

    def __init__(self, data: Sequence[Sequence[Rat]], cols: Optional[int] = None):
        d = [[qq(x) for x in row] for row in data]
        self.rows = len(d)
        if d:
            self.cols = len(d[0])
            if any(len(r) != self.cols for r in d):
                raise ValueError("ragged rows")
            if cols is not None and cols != self.cols:
                raise ValueError("cols mismatch")
        else:
            if cols is None:
                raise ValueError("empty matrix needs explicit cols")
            self.cols = cols
        self._d = d

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def zeros(rows: int, cols: int) -> "RatMatrix":
        return RatMatrix([[_ZERO] * cols for _ in range(rows)], cols=cols)

    @staticmethod
    def identity(n: int) -> "RatMatrix":
        m = [[_ZERO] * n for _ in range(n)]
        for i in range(n):
            m[i][i] = _ONE
        return RatMatrix(m, cols=n)

    @staticmethod
    def from_column(v: Sequence[Rat]) -> "RatMatrix":
        return RatMatrix([[x] for x in v], cols=1)

    # -- basic access ----------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def __getitem__(self, ij: Tuple[int, int]) -> "QQ":
        i, j = ij
        return self._d[i][j]

    def row(self, i: int) -> List["QQ"]:
        return list(self._d[i])

    def col(self, j: int) -> List["QQ"]:
        return [r[j] for r in self._d]

    def to_lists(self) -> List[List["QQ"]]:
        return [list(r) for r in self._d]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RatMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self._d == other._d
        )

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, tuple(tuple(r) for r in self._d)))

    def __repr__(self) -> str:
        if self.rows == 0 or self.cols == 0:
            return "RatMatrix(%dx%d)" % (self.rows, self.cols)
        body = "\n".join("[" + "  ".join(str(x) for x in r) + "]" for r in self._d)
        return "RatMatrix(%dx%d)\n%s" % (self.rows, self.cols, body)

    def is_zero(self) -> bool:
        return all(x == 0 for r in self._d for x in r)

    # -- arithmetic --------------------------------------------------------------

    def __add__(self, other: "RatMatrix") -> "RatMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch %s + %s" % (self.shape, other.shape))
        return RatMatrix(
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self._d, other._d)],
            cols=self.cols,
        )

    def __sub__(self, other: "RatMatrix") -> "RatMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch %s - %s" % (self.shape, other.shape))
        return RatMatrix(
            [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self._d, other._d)],
            cols=self.cols,
        )

    def __neg__(self) -> "RatMatrix":
        return RatMatrix([[-x for x in r] for r in self._d], cols=self.cols)

    def scale(self, c: Rat) -> "RatMatrix":
        c = qq(c)
        return RatMatrix([[c * x for x in r] for r in self._d], cols=self.cols)

    def __mul__(self, other: "RatMatrix") -> "RatMatrix":
        if not isinstance(other, RatMatrix):
            return NotImplemented
        if self.cols != other.rows:
            raise ValueError("inner dims %s * %s" % (self.shape, other.shape))
        # Scale both factors to integers (one common denominator per row)
        # and do the inner products in plain integer arithmetic; rational
        # normalization then happens once per output entry instead of once
        # per multiply-add.
        ocols = other.cols
        L = 1
        bint = []
        for rb in other._d:
            ints, d = _int_row(rb)
            bint.append((ints, d))
            if d != 1:
                L = _int_lcm(L, d)
        if L != 1:
            bint = [
                (ints if d == L else [x * (L // d) for x in ints], L)
                for ints, d in bint
            ]
        brows = [ints for ints, _ in bint]
        out = []
        for ra in self._d:
            ia, da = _int_row(ra)
            D = da * L
            acc = [0] * ocols
            for k, a in enumerate(ia):
                if a:
                    rb = brows[k]
                    for j in range(ocols):
                        b = rb[j]
                        if b:
                            acc[j] += a * b
            out.append([qq(x, D) if x else _ZERO for x in acc])
        return RatMatrix(out, cols=ocols)

    @property
    def T(self) -> "RatMatrix":
        return RatMatrix(
            [[self._d[i][j] for i in range(self.rows)] for j in range(self.cols)],
            cols=self.rows,
        )

    # -- slicing / stacking -------------------------------------------------------

    def submatrix(self, row_idx: Iterable[int], col_idx: Iterable[int]) -> "RatMatrix":
        ri = list(row_idx)
        ci = list(col_idx)
        return RatMatrix([[self._d[i][j] for j in ci] for i in ri], cols=len(ci))

    def take_rows(self, row_idx: Iterable[int]) -> "RatMatrix":
        return self.submatrix(row_idx, range(self.cols))

    def take_cols(self, col_idx: Iterable[int]) -> "RatMatrix":
        return self.submatrix(range(self.rows), col_idx)


def hstack(mats: Sequence[RatMatrix]) -> RatMatrix:
    mats = [m for m in mats]
    if not mats:
        raise ValueError("hstack of nothing")
    rows = mats[0].rows
    if any(m.rows != rows for m in mats):
        raise ValueError("hstack row mismatch")
    cols = sum(m.cols for m in mats)
    out = [[] for _ in range(rows)]
    for m in mats:
        for i in range(rows):
            out[i].extend(m._d[i])
    return RatMatrix(out, cols=cols)


def vstack(mats: Sequence[RatMatrix]) -> RatMatrix:
    mats = [m for m in mats]
    if not mats:
        raise ValueError("vstack of nothing")
    cols = mats[0].cols
    if any(m.cols != cols for m in mats):
        raise ValueError("vstack col mismatch")
    out = []
    for m in mats:
        out.extend(m.to_lists())
    return RatMatrix(out, cols=cols)


def block_diag(mats: Sequence[RatMatrix]) -> RatMatrix:
    rows = sum(m.rows for m in mats)
    cols = sum(m.cols for m in mats)
    out = [[_ZERO] * cols for _ in range(rows)]
    r0 = c0 = 0
    for m in mats:
        for i in range(m.rows):
            row = out[r0 + i]
            mrow = m._d[i]
            for j in range(m.cols):
                row[c0 + j] = mrow[j]
        r0 += m.rows
        c0 += m.cols
    return RatMatrix(out, cols=cols)


def mat(data: Sequence[Sequence[Rat]], cols: Optional[int] = None) -> RatMatrix:
    """Shorthand constructor used pervasively in tests and fixtures."""
    return RatMatrix(data, cols=cols)


# -- elimination -------------------------------------------------------------------


def rank_rref(M: RatMatrix) -> Tuple[int, RatMatrix, RatMatrix]:
    """Reduced row echelon form with a row-operation certificate.

    Returns (rank, R, T) with T invertible and T*M = R exactly.  Pivoting
    is deterministic: leftmost column, first nonzero row at or below the
    current pivot row, so R's nonzero rows come first.
    """
    rows, cols = M.rows, M.cols
    # Each working row is an integer vector (the matrix part augmented with
    # the identity part) over a single positive denominator.  Normalizing a
    # pivot to 1 is then just a denominator change, and eliminations are
    # pure integer cross-multiplications followed by one gcd sweep, which is
    # markedly cheaper than per-entry rational arithmetic.  The produced
    # values are identical to the naive rational elimination.
    num: List[List] = []
    den: List = []
    for i in range(rows):
        ints, d = _int_row(M._d[i])
        ints.extend([0] * rows)
        ints[cols + i] = d
        num.append(ints)
        den.append(d)
    piv_r = 0
    for pc in range(cols):
        pr = None
        for i in range(piv_r, rows):
            if num[i][pc]:
                pr = i
                break
        if pr is None:
            continue
        if pr != piv_r:
            num[piv_r], num[pr] = num[pr], num[piv_r]
            den[piv_r], den[pr] = den[pr], den[piv_r]
        prow = num[piv_r]
        if prow[pc] < 0:
            prow = num[piv_r] = [-x for x in prow]
        e = den[piv_r] = prow[pc]
        for i in range(rows):
            if i == piv_r:
                continue
            f = num[i][pc]
            if not f:
                continue
            ri = num[i]
            nv = [e * a - f * b for a, b in zip(ri, prow)]
            nd = den[i] * e
            g = nd
            for x in nv:
                if x:
                    g = _int_gcd(g, x)
                    if g == 1:
                        break
            if g != 1:
                nv = [x // g for x in nv]
                nd //= g
            num[i] = nv
            den[i] = nd
        piv_r += 1
        if piv_r == rows:
            break
    a = [[qq(num[i][j], den[i]) if num[i][j] else _ZERO for j in range(cols)] for i in range(rows)]
    t = [
        [qq(num[i][cols + j], den[i]) if num[i][cols + j] else _ZERO for j in range(rows)]
        for i in range(rows)
    ]
    return piv_r, RatMatrix(a, cols=cols), RatMatrix(t, cols=rows)


def rank(M: RatMatrix) -> int:
    return rank_rref(M)[0]


def pivot_columns(R: RatMatrix, rk: int) -> List[int]:
    """Pivot column indices of a matrix already in RREF with given rank."""
    pivs = []
    j = 0
    for i in range(rk):
        while R[i, j] == 0:
            j += 1
        pivs.append(j)
        j += 1
    return pivs


def inverse(M: RatMatrix) -> RatMatrix:
    """Exact inverse of a square invertible matrix (the RREF certificate)."""
    if M.rows != M.cols:
        raise ValueError("inverse of non-square %s" % (M.shape,))
    rk, _, T = rank_rref(M)
    if rk != M.rows:
        raise ValueError("matrix is singular")
    return T


def is_invertible(M: RatMatrix) -> bool:
    return M.rows == M.cols and rank(M) == M.rows


def solve(M: RatMatrix, B: RatMatrix) -> Optional[RatMatrix]:
    """First echelon solution X of M*X = B, or None if inconsistent.

    Free variables are set to zero, which makes the result deterministic.
    """
    if M.rows != B.rows:
        raise ValueError("solve row mismatch")
    rk, R, T = rank_rref(M)
    TB = T * B
    for i in range(rk, M.rows):
        if any(x != 0 for x in TB._d[i]):
            return None
    pivs = pivot_columns(R, rk)
    X = [[_ZERO] * B.cols for _ in range(M.cols)]
    for i, p in enumerate(pivs):
        X[p] = list(TB._d[i])
    return RatMatrix(X, cols=B.cols)


def solve_left(M: RatMatrix, B: RatMatrix) -> Optional[RatMatrix]:
    """First echelon solution X of X*M = B, or None."""
    Xt = solve(M.T, B.T)
    return None if Xt is None else Xt.T


def right_inverse(M: RatMatrix) -> RatMatrix:
    """Right inverse with the inverse pivot-column submatrix in pivot rows."""
    rk, R, _ = rank_rref(M)
    if rk != M.rows:
        raise NotFullRowRank("matrix %dx%d has rank %d" % (M.rows, M.cols, rk))
    pivs = pivot_columns(R, rk)
    Mp_inv = inverse(M.take_cols(pivs))
    N = [[_ZERO] * M.rows for _ in range(M.cols)]
    for k, p in enumerate(pivs):
        N[p] = Mp_inv.row(k)
    return RatMatrix(N, cols=M.rows)


# -- subspaces ---------------------------------------------------------------------


class Subspace:
    """A subspace of Q^k held as a canonical full-column-rank basis.

    The basis is the column-reduced echelon form of any spanning set (the
    transpose of the RREF of the transposed columns), which is unique for
    the subspace, so ``==`` on Subspace is decidable subspace equality.
    """

    __slots__ = ("ambient_dim", "basis")

    def __init__(self, ambient_dim: int, basis: RatMatrix):
        if basis.rows != ambient_dim:
            raise ValueError("basis ambient mismatch")
        self.ambient_dim = ambient_dim
        self.basis = basis

    @staticmethod
    def from_columns(M: RatMatrix) -> "Subspace":
        """Span of the columns of M, canonicalized."""
        rk, R, _ = rank_rref(M.T)
        return Subspace(M.rows, R.take_rows(range(rk)).T)

    @staticmethod
    def zero(ambient_dim: int) -> "Subspace":
        return Subspace(ambient_dim, RatMatrix.zeros(ambient_dim, 0))

    @staticmethod
    def full(ambient_dim: int) -> "Subspace":
        return Subspace(ambient_dim, RatMatrix.identity(ambient_dim))

    @property
    def dim(self) -> int:
        return self.basis.cols

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Subspace)
            and self.ambient_dim == other.ambient_dim
            and self.basis == other.basis
        )

    def __hash__(self) -> int:
        return hash((self.ambient_dim, self.basis))

    def __repr__(self) -> str:
        return "Subspace(dim %d of Q^%d)" % (self.dim, self.ambient_dim)

    def contains_matrix(self, M: RatMatrix) -> bool:
        """Do all columns of M lie in this subspace?"""
        if M.cols == 0:
            return True
        return solve(self.basis, M) is not None

    def is_subspace_of(self, other: "Subspace") -> bool:
        return other.contains_matrix(self.basis)


def image(M: RatMatrix) -> Subspace:
    return Subspace.from_columns(M)


def kernel_basis(M: RatMatrix) -> Subspace:
    """Exact kernel {x : M x = 0} with dim = cols - rank."""
    rk, R, _ = rank_rref(M)
    pivs = pivot_columns(R, rk)
    piv_set = set(pivs)
    free = [j for j in range(M.cols) if j not in piv_set]
    cols = []
    for f in free:
        v = [_ZERO] * M.cols
        v[f] = _ONE
        for i, p in enumerate(pivs):
            v[p] = -R[i, f]
        cols.append(v)
    if not cols:
        return Subspace.zero(M.cols)
    B = RatMatrix(cols, cols=M.cols).T
    return Subspace.from_columns(B)


def preimage(M: RatMatrix, S: Subspace) -> Subspace:
    """{x : M x in S}, computed exactly."""
    if S.ambient_dim != M.rows:
        raise ValueError("preimage ambient mismatch")
    if S.dim == 0:
        return kernel_basis(M)
    K = kernel_basis(hstack([M, -S.basis]))
    return Subspace.from_columns(K.basis.take_rows(range(M.cols)))


def subspace_sum(S1: Subspace, S2: Subspace) -> Subspace:
    if S1.ambient_dim != S2.ambient_dim:
        raise ValueError("ambient mismatch")
    return Subspace.from_columns(hstack([S1.basis, S2.basis]))


def subspace_intersect(S1: Subspace, S2: Subspace) -> Subspace:
    if S1.ambient_dim != S2.ambient_dim:
        raise ValueError("ambient mismatch")
    if S1.dim == 0 or S2.dim == 0:
        return Subspace.zero(S1.ambient_dim)
    K = kernel_basis(hstack([S1.basis, S2.basis]))
    coeff = K.basis.take_rows(range(S1.dim))
    return Subspace.from_columns(S1.basis * coeff)


def orthogonal_complement(S: Subspace) -> Subspace:
    return kernel_basis(S.basis.T)


def complement(inner: Subspace, outer: Subspace) -> RatMatrix:
    """Columns extending inner to a direct-sum decomposition of outer.

    The choice is canonical: outer's echelon basis columns are added
    greedily in index order whenever they enlarge the span.  Raises
    NotNested if inner is not contained in outer.
    """
    if inner.ambient_dim != outer.ambient_dim:
        raise ValueError("ambient mismatch")
    if not inner.is_subspace_of(outer):
        raise NotNested("inner subspace not contained in outer")
    n = inner.ambient_dim
    # incremental row-echelon of the chosen vectors (as rows)
    reduced: List[Tuple[int, List["QQ"]]] = []  # (pivot index, reduced row)

    def try_add(v: List["QQ"]) -> bool:
        w = list(v)
        for p, r in reduced:
            f = w[p]
            if f != 0:
                for j in range(n):
                    if r[j] != 0:
                        w[j] = w[j] - f * r[j]
        for p in range(n):
            if w[p] != 0:
                inv = _ONE / w[p]
                w = [x * inv for x in w]
                reduced.append((p, w))
                return True
        return False

    for j in range(inner.dim):
        added = try_add(inner.basis.col(j))
        assert added, "inner basis not independent"
    chosen = []
    for j in range(outer.dim):
        v = outer.basis.col(j)
        if try_add(v):
            chosen.append(v)
    if len(chosen) != outer.dim - inner.dim:
        raise InternalInvariantViolation("complement dimension bookkeeping failed")
    if not chosen:
        return RatMatrix.zeros(n, 0)
    return RatMatrix(chosen, cols=n).T
