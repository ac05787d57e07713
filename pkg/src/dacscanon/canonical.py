"""Canonical forms under explicit-side and implicit-side feedback equivalence.

The block-diagonal normal form produced by :mod:`dacscanon.morse` still
contains arbitrary matrices inside its four diagonal blocks.  This module
finishes the classification:

* block 1 (controllable, no outputs, both input kinds) goes to a two-kind
  Brunovsky form: integrator chains terminated by a first-kind input
  (lengths ``eps``) or a second-kind input (lengths ``eps_bar``),
* block 2 (no inputs, no outputs) is replaced by the rational canonical
  (Frobenius) representative of its similarity class,
* block 3 (prime) becomes chains terminated by inputs and observed at their
  heads, plus a static identity between the last ``delta`` inputs and
  outputs (indices ``sigma``, ``delta``, ``sigma_bar``),
* block 4 (observable, no inputs) becomes output chains with observability
  indices ``eta``.

The resulting explicit canonical form is a complete invariant; translating
its indices and freeing the second-kind inputs back into states yields the
implicit-side feedback canonical form, a differential-algebraic system made
of six kinds of elementary blocks.  :func:`fbcf` runs the whole pipeline on
a Dacs and converts the accumulated explicit certificate into an implicit
one, which is verified before being returned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

from ._chains import (
    NotControllable,
    NotObservable,
    brunovsky_single,
    frobenius_form,
    functional_chains,
)
from .geometry import invariant_subspaces
from .morse import MnfSystem, _recover_groups, _state_blocks, emnf, emtf
from .ratmat import (
    InternalInvariantViolation,
    RatMatrix,
    Subspace,
    block_diag,
    complement,
    hstack,
    image,
    inverse,
    is_invertible,
    kernel_basis,
    preimage,
    qq,
    rank_rref,
    right_inverse,
    solve,
    solve_left,
    subspace_intersect,
    subspace_sum,
    vstack,
)
from .systems import (
    Dacs,
    EmTransform,
    ExFbTransform,
    MorseTransform,
    Odecs2,
    apply_em,
    em_compose,
    em_from_merged,
    explicitate,
    verify_em,
    verify_exfb,
)

__all__ = [
    "NotPrime",
    "NotControllable",
    "NotObservable",
    "EmcfIndices",
    "FbcfIndices",
    "brunovsky_two_inputs",
    "prime_canonical",
    "observable_dual_canonical",
    "emcf",
    "translate_indices",
    "build_fbcf",
    "fbcf",
]


class NotPrime(ValueError):
    """The 4-tuple fails one of the prime-system criteria."""


# ---------------------------------------------------------------------------
# index records
# ---------------------------------------------------------------------------


def _check_index_list(name: str, lst: Tuple[int, ...]) -> None:
    if any(k < 1 for k in lst):
        raise ValueError("%s entries must be >= 1" % name)
    if list(lst) != sorted(lst, reverse=True):
        raise ValueError("%s must be nonincreasing" % name)


@dataclass(frozen=True)
class EmcfIndices:
    """Complete invariant of a two-input-kind system under equivalence.

    ``eps``/``eps_bar`` are the chain lengths of the controllable
    unobserved part (first/second kind), ``A_nn`` the Frobenius
    representative of the uncontrollable unobserved dynamics, ``sigma``/
    ``delta``/``sigma_bar`` the prime-part data (``delta`` = rank of the
    static coupling), and ``eta`` the observability indices of the
    unactuated observable part.  ``dead_u``/``dead_v``/``dead_y`` count
    inputs and outputs that touch nothing; they carry no dynamics but are
    needed to reassemble systems of the original width.
    """

    eps: Tuple[int, ...]
    eps_bar: Tuple[int, ...]
    A_nn: RatMatrix
    sigma: Tuple[int, ...]
    delta: int
    sigma_bar: Tuple[int, ...]
    eta: Tuple[int, ...]
    dead_u: int = 0
    dead_v: int = 0
    dead_y: int = 0

    def __post_init__(self):
        for name in ("eps", "eps_bar", "sigma", "sigma_bar", "eta"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            _check_index_list(name, getattr(self, name))
        if self.A_nn.rows != self.A_nn.cols:
            raise ValueError("A_nn must be square")
        if min(self.delta, self.dead_u, self.dead_v, self.dead_y) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def n(self) -> int:
        return (
            sum(self.eps)
            + sum(self.eps_bar)
            + self.A_nn.rows
            + sum(self.sigma)
            + sum(self.sigma_bar)
            + sum(self.eta)
        )

    @property
    def m(self) -> int:
        return len(self.eps) + len(self.sigma) + self.delta + self.dead_u

    @property
    def s(self) -> int:
        return len(self.eps_bar) + len(self.sigma_bar) + self.dead_v

    @property
    def p(self) -> int:
        return len(self.sigma) + self.delta + len(self.sigma_bar) + len(self.eta) + self.dead_y


@dataclass(frozen=True)
class FbcfIndices:
    """Block data of the implicit-side feedback canonical form."""

    eps_p: Tuple[int, ...]
    eps_bar_p: Tuple[int, ...]
    sigma_p: Tuple[int, ...]
    sigma_bar_p: Tuple[int, ...]
    eta_p: Tuple[int, ...]
    n_rho: int
    A_rho: RatMatrix
    dead_u: int = 0

    def __post_init__(self):
        for name in ("eps_p", "eps_bar_p", "sigma_p", "sigma_bar_p", "eta_p"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            _check_index_list(name, getattr(self, name))
        if self.A_rho.rows != self.A_rho.cols or self.A_rho.rows != self.n_rho:
            raise ValueError("A_rho must be square of size n_rho")
        if self.dead_u < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def l(self) -> int:
        return (
            sum(self.eps_p)
            + sum(k - 1 for k in self.eps_bar_p)
            + self.n_rho
            + sum(self.sigma_p)
            + sum(self.sigma_bar_p)
            + sum(self.eta_p)
        )

    @property
    def n(self) -> int:
        return (
            sum(self.eps_p)
            + sum(self.eps_bar_p)
            + self.n_rho
            + sum(k - 1 for k in self.sigma_p)
            + sum(self.sigma_bar_p)
            + sum(k - 1 for k in self.eta_p)
        )

    @property
    def m(self) -> int:
        return len(self.eps_p) + len(self.sigma_p) + self.dead_u


# ---------------------------------------------------------------------------
# the two-kind chain engine
# ---------------------------------------------------------------------------


def _pow(A: RatMatrix, k: int) -> RatMatrix:
    M = RatMatrix.identity(A.rows)
    for _ in range(k):
        M = M * A
    return M


def _two_kind_chains(
    A: RatMatrix, B_u: RatMatrix, B_v: RatMatrix
) -> Tuple[List[Tuple[RatMatrix, int]], List[Tuple[RatMatrix, int]], RatMatrix, RatMatrix, RatMatrix]:
    """Chain decomposition of (A, [B_u B_v]) with second-kind priority.

    Each chain is found as a row functional tau with tau A^l [B_u B_v] = 0
    for l <= k-2; its tail row gamma = tau A^{k-1} [B_u B_v] decides the
    kind.  Chains are processed longest first and every new tail row is
    reduced against the already-fixed ones (subtracting shifted functionals
    tau_i A^{k_i - k}, which stay inside the same annihilator filtration),
    so the surviving entries of gamma are intrinsic: a nonzero second-kind
    entry makes the chain second-kind, with the smallest such column as
    pivot.

    Returns (u_chains, v_chains, T_x, T_w, F_w): chains as (tau, length)
    with pivots consumed, T_x the stacked functional towers (first-kind
    chains first, lengths nonincreasing within each kind), T_w the merged
    input transform whose rows are [u-chain tails, u-completions, v-chain
    tails, v-completions], and F_w the merged feedback killing the tails.
    T_w is block lower triangular: first-kind rows never involve
    second-kind columns.
    """
    n, m, s = A.rows, B_u.cols, B_v.cols
    B_w = hstack([B_u, B_v])
    raw = functional_chains(A, B_w)  # longest first; may raise NotControllable
    reduced: List[Tuple[RatMatrix, int, int, RatMatrix]] = []  # (tau, k, pivot, gamma)
    for tau, k in raw:
        gamma = tau * _pow(A, k - 1) * B_w
        for tau_i, k_i, piv_i, g_i in reduced:
            lam = gamma[0, piv_i] / g_i[0, piv_i]
            if lam != 0:
                tau = tau - (tau_i * _pow(A, k_i - k)).scale(lam)
                gamma = gamma - g_i.scale(lam)
        v_hits = [j for j in range(m, m + s) if gamma[0, j] != 0]
        if v_hits:
            piv = v_hits[0]  # second kind takes priority; smallest column
        else:
            u_hits = [j for j in range(m) if gamma[0, j] != 0]
            if not u_hits:
                raise InternalInvariantViolation("chain tail row vanished during reduction")
            piv = u_hits[0]
        reduced.append((tau, k, piv, gamma))

    u_chains = [c for c in reduced if c[2] < m]
    v_chains = [c for c in reduced if c[2] >= m]
    for _, _, _, g in u_chains:
        if any(g[0, j] != 0 for j in range(m, m + s)):
            raise InternalInvariantViolation("first-kind tail row touches second-kind columns")

    ordered = u_chains + v_chains
    towers = []
    for tau, k, _, _ in ordered:
        cur = tau
        for _ in range(k):
            towers.append(cur)
            cur = cur * A
    T_x = vstack(towers) if towers else RatMatrix.zeros(0, n)
    if T_x.rows != n or not is_invertible(T_x):
        raise InternalInvariantViolation("chain towers do not form a basis")

    u_pivots = {c[2] for c in u_chains}
    v_pivots = {c[2] for c in v_chains}
    eye = RatMatrix.identity(m + s)
    w_rows = (
        [g for _, _, _, g in u_chains]
        + [eye.take_rows([j]) for j in range(m) if j not in u_pivots]
        + [g for _, _, _, g in v_chains]
        + [eye.take_rows([j]) for j in range(m, m + s) if j not in v_pivots]
    )
    T_w = vstack(w_rows) if w_rows else RatMatrix.identity(0)
    if not is_invertible(T_w):
        raise InternalInvariantViolation("chain tails do not extend to an input basis")

    # tail-killing feedback: row r_j of M is tau_j A^{k_j}, zero elsewhere
    mrows = [RatMatrix.zeros(1, n)] * (m + s)
    for idx, (tau, k, _, _) in enumerate(u_chains):
        mrows[idx] = tau * _pow(A, k)
    for idx, (tau, k, _, _) in enumerate(v_chains):
        mrows[m + idx] = tau * _pow(A, k)
    M = vstack(mrows) if mrows else RatMatrix.zeros(0, n)
    F_w = -(inverse(T_w) * M) if m + s else RatMatrix.zeros(0, n)

    u_list = [(tau, k) for tau, k, _, _ in u_chains]
    v_list = [(tau, k) for tau, k, _, _ in v_chains]
    return u_list, v_list, T_x, T_w, F_w


def _chain_diag(lengths: Sequence[int]) -> RatMatrix:
    """Block diagonal of shift blocks (ones on the superdiagonal)."""
    blocks = []
    for k in lengths:
        Mk = RatMatrix.zeros(k, k).to_lists()
        for i in range(k - 1):
            Mk[i][i + 1] = qq(1)
        blocks.append(RatMatrix(Mk, cols=k))
    return block_diag(blocks)


def _tail_selectors(lengths: Sequence[int], n: int, cols: int) -> RatMatrix:
    """n x cols matrix whose column j selects the tail of chain j."""
    out = RatMatrix.zeros(n, cols).to_lists()
    off = 0
    for j, k in enumerate(lengths):
        out[off + k - 1][j] = qq(1)
        off += k
    return RatMatrix(out, cols=cols)


def _head_selectors(lengths: Sequence[int], offsets: Sequence[int], rows: int, n: int) -> RatMatrix:
    out = RatMatrix.zeros(rows, n).to_lists()
    for i, off in enumerate(offsets):
        out[i][off] = qq(1)
    return RatMatrix(out, cols=n)


def brunovsky_two_inputs(
    A: RatMatrix, B_u: RatMatrix, B_v: RatMatrix
) -> Tuple[EmTransform, List[int], List[int]]:
    """Chain form of a controllable system with two input kinds.

    The certificate brings (A, B_u, B_v) to integrator chains, each
    terminated by a fresh first-kind input (lengths ``eps``) or second-kind
    input (lengths ``eps_bar``); second kind takes priority when a chain
    tail can be fed by both.  Surplus inputs of either kind end up feeding
    nothing and are sorted last within their kind.  Raises NotControllable
    when (A, [B_u B_v]) is not controllable.
    """
    n, m, s = A.rows, B_u.cols, B_v.cols
    if B_u.rows != n or B_v.rows != n:
        raise ValueError("input matrices must have n rows")
    u_chains, v_chains, T_x, T_w, F_w = _two_kind_chains(A, B_u, B_v)
    t = em_from_merged(
        T_x, T_w, RatMatrix.identity(0), F_w, RatMatrix.zeros(n, 0), m
    )
    eps = [k for _, k in u_chains]
    eps_bar = [k for _, k in v_chains]

    got = apply_em(Odecs2(A, B_u, B_v, RatMatrix.zeros(0, n), RatMatrix.zeros(0, m)), t)
    want_A = _chain_diag(eps + eps_bar)
    want_Bu = hstack(
        [
            _tail_selectors(eps, n, len(eps)),
            RatMatrix.zeros(n, m - len(eps)),
        ]
    )
    off = sum(eps)
    want_Bv = RatMatrix.zeros(n, s).to_lists()
    for j, k in enumerate(eps_bar):
        want_Bv[off + k - 1][j] = qq(1)
        off += k
    if got.A != want_A or got.B_u != want_Bu or got.B_v != RatMatrix(want_Bv, cols=s):
        raise InternalInvariantViolation("two-kind chain normalization has a wrong pattern")
    return t, eps, eps_bar


# ---------------------------------------------------------------------------
# prime systems
# ---------------------------------------------------------------------------


def _static_normalizer(D: RatMatrix) -> Tuple[RatMatrix, RatMatrix, int]:
    """(T_y, T_u, delta) with T_y D T_u^{-1} = [[0,0],[0,I_delta]]."""
    p, m = D.rows, D.cols
    delta, R, Qy = rank_rref(D)
    Rd = R.take_rows(range(delta))
    if delta:
        W = kernel_basis(Rd).basis
        X = right_inverse(Rd)
        Tu_inv = hstack([W, X])
    else:
        Tu_inv = RatMatrix.identity(m)
    if not is_invertible(Tu_inv):
        raise InternalInvariantViolation("static rank factorization failed")
    perm = list(range(delta, p)) + list(range(delta))
    T_y = RatMatrix.identity(p).take_rows(perm) * Qy
    return T_y, inverse(Tu_inv), delta


class _PrimeChain:
    """One output-rooted chain of a prime core: mutable while being reduced.

    ``tower`` holds the functionals tau_1..tau_k as column vectors, with
    tau_1 = t * C a combination of the outputs, tau_{j+1} = tau_j A modulo
    rows of C, and tau_j B = 0 at every level but the last.  ``rho`` is the
    drive row tau_k B: the input combination that the chain's last state
    differentiates onto.
    """

    __slots__ = ("tower", "t", "rho")

    def __init__(self, tower: List[RatMatrix], t: RatMatrix, rho: RatMatrix):
        self.tower = tower
        self.t = t
        self.rho = rho

    @property
    def length(self) -> int:
        return len(self.tower)

    def absorb(self, other: "_PrimeChain", coef) -> None:
        """Subtract coef * other, aligned at the tails.

        Other must not be longer.  The other chain's head enters this tower
        mid-way as an output-injection correction, so the move costs nothing
        on the input side; the drives subtract accordingly.
        """
        d = self.length - other.length
        assert d >= 0
        for l in range(other.length):
            self.tower[d + l] = self.tower[d + l] - other.tower[l].scale(coef)
        self.rho = self.rho - other.rho.scale(coef)
        if d == 0:
            self.t = self.t - other.t.scale(coef)


def _output_chains(A: RatMatrix, B_w: RatMatrix, C_live: RatMatrix) -> List[_PrimeChain]:
    """Chain decomposition of a prime core rooted at the outputs.

    The input-side chain engine cannot be used here: which chains feed from
    which input kind is not decided by (A, B_u, B_v) alone, because output
    injection can reroute a chain's drive through the output matrix.  The
    towers therefore grow downward from output combinations, correcting each
    derivative by rows of C (the injection) so it stays input-free until the
    last level.

    Heads of depth-k towers form the spaces H_k = rowspace(C) `intersect`
    P_k with P_1 everything and P_{k+1} = {tau : tau B = 0, tau A in
    P_k + rowspace(C)}.  For a prime core the H_k dimension jumps count the
    chains of each length, any prolongation choice keeps the towers jointly
    independent, and every tower ends in a nonzero drive.  Longest first.
    """
    n = A.rows
    S1 = image(C_live.T)
    if S1.dim != C_live.rows:
        raise InternalInvariantViolation("prime core outputs are dependent")
    annB = kernel_basis(B_w.T)
    At, Ct = A.T, C_live.T
    P: List[Subspace] = [Subspace.full(n), Subspace.full(n)]
    for _ in range(n):
        P.append(subspace_intersect(annB, preimage(At, subspace_sum(P[-1], S1))))
    heads: List[Tuple[int, RatMatrix]] = []
    chosen = RatMatrix.zeros(n, 0)
    for k in range(n, 0, -1):
        new = complement(Subspace.from_columns(chosen), subspace_intersect(S1, P[k]))
        for j in range(new.cols):
            heads.append((k, new.take_cols([j])))
        if new.cols:
            chosen = hstack([chosen, new])
    if sum(k for k, _ in heads) != n:
        raise InternalInvariantViolation("prime output chains do not span the states")

    chains = []
    for k, head in heads:
        tower = [head]
        for level in range(2, k + 1):
            rhs = At * tower[-1]
            if level == k:
                tower.append(rhs)
                continue
            sol = solve(hstack([P[k - level + 1].basis, Ct]), rhs)
            if sol is None:
                raise InternalInvariantViolation("prime tower prolongation failed")
            kappa = sol.take_rows(range(P[k - level + 1].dim, sol.rows))
            tower.append(rhs - Ct * kappa)
        t = solve(Ct, head)
        if t is None:
            raise InternalInvariantViolation("prime chain head is not an output")
        chains.append(_PrimeChain(tower, t.T, tower[-1].T * B_w))
    return chains


def _prime_kind_split(
    chains: List[_PrimeChain], m3: int
) -> Tuple[List[_PrimeChain], List[_PrimeChain]]:
    """Assign each chain to an input kind and clean the first-kind drives.

    Shortest chains first, each drive is reduced against the second-kind
    pivots found so far (tail-aligned absorption, always free).  A chain
    whose second-kind coefficients all cancel feeds from the first kind;
    a surviving coefficient makes the chain second-kind and a new pivot.
    The second-kind orders collected this way are the rank jumps of the
    drive rows' second-kind parts along the length filtration, hence
    invariants.
    """
    u_chains: List[_PrimeChain] = []
    v_chains: List[_PrimeChain] = []
    pivots: List[Tuple[int, _PrimeChain]] = []
    w = chains[0].rho.cols if chains else m3
    for ch in sorted(chains, key=lambda c: c.length):
        for col, piv in pivots:
            coef = ch.rho[0, col] / piv.rho[0, col]
            if coef != 0:
                ch.absorb(piv, coef)
        vcol = next((j for j in range(m3, w) if ch.rho[0, j] != 0), None)
        if vcol is None:
            u_chains.append(ch)
        else:
            v_chains.append(ch)
            pivots.append((vcol, ch))
    key = lambda c: -c.length
    return sorted(u_chains, key=key), sorted(v_chains, key=key)


def prime_canonical(
    A: RatMatrix, B_u: RatMatrix, B_v: RatMatrix, C: RatMatrix, D_u: RatMatrix
) -> Tuple[EmTransform, List[int], int, List[int]]:
    """Canonical form of a prime system.

    A system is prime when its four limiting subspaces are trivial in the
    strong sense: no output-nulling states (V* = 0), every state reachable
    through the output-nulling dynamics (W* = everything), no input
    directions that never show up (U* = 0), and every output direction
    excited (Y* = everything).  Primeness forces the total input count
    m + s to equal the output count p.

    The certificate produces chains observed exactly at their heads: chains
    fed by first-kind inputs (lengths ``sigma``), a static identity block
    of size ``delta`` = rank D_u between the last inputs and the middle
    outputs, and chains fed by second-kind inputs (lengths ``sigma_bar``).
    Raises NotPrime otherwise.
    """
    o = Odecs2(A=A, B_u=B_u, B_v=B_v, C=C, D_u=D_u)
    n, m, s, p = o.n, o.m, o.s, o.p
    inv = invariant_subspaces(o)
    failures = []
    if inv.V_star.dim != 0:
        failures.append("V* is nonzero")
    if inv.W_star.dim != n:
        failures.append("W* is not the whole state space")
    if inv.U_star.dim != 0:
        failures.append("U* is nonzero")
    if inv.Y_star.dim != p:
        failures.append("Y* is not the whole output space")
    if failures:
        raise NotPrime("; ".join(failures))
    if m + s != p:
        raise InternalInvariantViolation("prime system with m + s != p")

    # 1) rotate the static part of D into the last inputs and outputs
    T_y0, T_u0, delta = _static_normalizer(D_u)
    t_d = replace(EmTransform.identity(n, m, s, p), T_u=T_u0, T_y=T_y0)
    o1 = apply_em(o, t_d)

    # 2) absorb the static columns of B and rows of C
    Kk = RatMatrix.zeros(n, p).to_lists()
    Fk = RatMatrix.zeros(m, n).to_lists()
    for j in range(delta):
        for i in range(n):
            Kk[i][p - delta + j] = -o1.B_u[i, m - delta + j]
            Fk[m - delta + j][i] = -o1.C[p - delta + j, i]
    t_kill = replace(
        EmTransform.identity(n, m, s, p),
        K=RatMatrix(Kk, cols=p),
        F_u=RatMatrix(Fk, cols=n),
    )
    o2 = apply_em(o1, t_kill)
    for j in range(delta):
        if any(o2.B_u[i, m - delta + j] != 0 for i in range(n)):
            raise InternalInvariantViolation("static input columns survived the kill")
        if any(o2.C[p - delta + j, i] != 0 for i in range(n)):
            raise InternalInvariantViolation("static output rows survived the kill")

    # 3) output-rooted chain decomposition of the destaticized part.  The
    #   input-side engine is useless here: output injection can reroute a
    #   chain's drive through C, so the u/v split is not decided by the
    #   input matrices alone.
    m3 = m - delta
    C_live = o2.C.take_rows(range(p - delta))
    B_w = hstack([o2.B_u.take_cols(range(m3)), o2.B_v])
    chains = _output_chains(o2.A, B_w, C_live)
    u_chains, v_chains = _prime_kind_split(chains, m3)
    sigma = [ch.length for ch in u_chains]
    sigma_bar = [ch.length for ch in v_chains]
    if len(sigma) != m3 or len(sigma_bar) != s:
        raise InternalInvariantViolation("prime chain counts do not exhaust the inputs")
    ordered = u_chains + v_chains
    c, d = len(sigma), len(sigma_bar)

    # 4) assemble the certificate: towers stack into T_x, drives into T_w,
    #   head coefficients into T_y, and K soaks up every correction the
    #   towers borrowed from the outputs.
    T_x = (
        vstack([col.T for ch in ordered for col in ch.tower])
        if ordered
        else RatMatrix.identity(n)
    )
    if not is_invertible(T_x):
        raise InternalInvariantViolation("prime towers are not independent")
    T_w_core = vstack([ch.rho for ch in ordered]) if ordered else RatMatrix.zeros(0, 0)
    if not is_invertible(T_w_core):
        raise InternalInvariantViolation("prime drive rows are dependent")
    N = (
        vstack([ch.tower[-1].T * o2.A for ch in ordered])
        if ordered
        else RatMatrix.zeros(0, n)
    )
    F_w_core = -(inverse(T_w_core) * N)

    # widen by the static inputs, which sit in the last u slots untouched
    T_w = RatMatrix.zeros(m + s, m + s).to_lists()
    F_w = RatMatrix.zeros(m + s, n).to_lists()
    for i in range(m3 + s):
        ri = i if i < m3 else i + delta
        for j in range(m3 + s):
            T_w[ri][j if j < m3 else j + delta] = T_w_core[i, j]
        F_w[ri] = F_w_core.row(i)
    for j in range(delta):
        T_w[m3 + j][m3 + j] = qq(1)
    T_w = RatMatrix(T_w, cols=m + s)
    F_w = RatMatrix(F_w, cols=n)

    # output order [sigma heads, statics, sigma_bar heads]
    T_y_rows = RatMatrix.zeros(p, p).to_lists()
    for i, ch in enumerate(u_chains):
        T_y_rows[i] = ch.t.row(0) + [qq(0)] * delta
    for j in range(delta):
        T_y_rows[c + j][p - delta + j] = qq(1)
    for i, ch in enumerate(v_chains):
        T_y_rows[c + delta + i] = ch.t.row(0) + [qq(0)] * delta
    T_y1 = RatMatrix(T_y_rows, cols=p)

    A_canon = _chain_diag(sigma + sigma_bar)
    M = inverse(T_x) * A_canon * T_x - o2.A - hstack([o2.B_u, o2.B_v]) * F_w
    K = solve_left(o2.C, M)
    if K is None:
        raise InternalInvariantViolation("prime corrections are not output injections")
    t_chain = em_from_merged(T_x, T_w, T_y1, F_w, K, m)
    o3 = apply_em(o2, t_chain)

    total = em_compose(em_compose(t_d, t_kill), t_chain)
    if o3 != _prime_system(sigma, delta, sigma_bar):
        raise InternalInvariantViolation("prime normalization has a wrong pattern")
    return total, sigma, delta, sigma_bar


def _prime_system(sigma: Sequence[int], delta: int, sigma_bar: Sequence[int]) -> Odecs2:
    """The canonical prime system with the given indices."""
    c, d = len(sigma), len(sigma_bar)
    n = sum(sigma) + sum(sigma_bar)
    m, s, p = c + delta, d, c + delta + d
    A = _chain_diag(list(sigma) + list(sigma_bar))
    B_u = RatMatrix.zeros(n, m).to_lists()
    B_v = RatMatrix.zeros(n, s).to_lists()
    offsets = []
    off = 0
    for k in list(sigma) + list(sigma_bar):
        offsets.append(off)
        off += k
    for j, k in enumerate(sigma):
        B_u[offsets[j] + k - 1][j] = qq(1)
    for j, k in enumerate(sigma_bar):
        B_v[offsets[c + j] + k - 1][j] = qq(1)
    C = RatMatrix.zeros(p, n).to_lists()
    for i in range(c):
        C[i][offsets[i]] = qq(1)
    for i in range(d):
        C[c + delta + i][offsets[c + i]] = qq(1)
    D = RatMatrix.zeros(p, m).to_lists()
    for i in range(delta):
        D[c + i][c + i] = qq(1)
    return Odecs2(
        A=A,
        B_u=RatMatrix(B_u, cols=m),
        B_v=RatMatrix(B_v, cols=s),
        C=RatMatrix(C, cols=n),
        D_u=RatMatrix(D, cols=m),
    )


# ---------------------------------------------------------------------------
# observable part
# ---------------------------------------------------------------------------


def observable_dual_canonical(C4: RatMatrix, A4: RatMatrix) -> Tuple[EmTransform, List[int]]:
    """Chain form of an observable pair via its dual.

    Runs the single-kind chain construction on (A4^T, C4^T) and transposes
    the certificate back: the dual feedback becomes output injection, the
    dual input transform an output transform.  Each chain is then reversed
    so the dynamics run down the chain and the output reads its head.
    Surplus outputs read nothing and are sorted last.  Raises NotObservable.
    """
    n, p = A4.rows, C4.rows
    if C4.cols != n:
        raise ValueError("C4 must have as many columns as A4")
    try:
        T_xd, T_ud, Fd, kappa = brunovsky_single(A4.T, C4.T)
    except NotControllable as exc:
        raise NotObservable("the pair (C4, A4) is not observable") from exc
    rev = []
    off = 0
    for k in kappa:
        rev.extend(off + k - 1 - i for i in range(k))
        off += k
    P_rev = RatMatrix.identity(n).take_rows(rev)
    t = EmTransform(
        T_x=P_rev * inverse(T_xd.T),
        T_u=RatMatrix.identity(0),
        T_v=RatMatrix.identity(0),
        T_y=inverse(T_ud.T),
        F_u=RatMatrix.zeros(0, n),
        F_v=RatMatrix.zeros(0, n),
        R=RatMatrix.identity(0),
        K=Fd.T,
    )
    got = apply_em(
        Odecs2(A4, RatMatrix.zeros(n, 0), RatMatrix.zeros(n, 0), C4, RatMatrix.zeros(p, 0)), t
    )
    offsets = []
    off = 0
    for k in kappa:
        offsets.append(off)
        off += k
    want_C = vstack(
        [
            _head_selectors(kappa, offsets, len(kappa), n),
            RatMatrix.zeros(p - len(kappa), n),
        ]
    ) if p else RatMatrix.zeros(0, n)
    if got.A != _chain_diag(kappa) or got.C != want_C:
        raise InternalInvariantViolation("dual chain normalization has a wrong pattern")
    return t, list(kappa)


# ---------------------------------------------------------------------------
# the assembled explicit canonical form
# ---------------------------------------------------------------------------


def emcf_system(idx: EmcfIndices) -> Odecs2:
    """The canonical system carrying the given indices."""
    eps, eps_bar = idx.eps, idx.eps_bar
    sigma, delta, sigma_bar, eta = idx.sigma, idx.delta, idx.sigma_bar, idx.eta
    a, b, c, d, e = len(eps), len(eps_bar), len(sigma), len(sigma_bar), len(eta)
    n, m, s, p = idx.n, idx.m, idx.s, idx.p

    all_lengths = list(eps) + list(eps_bar) + list(sigma) + list(sigma_bar) + list(eta)
    n2 = idx.A_nn.rows
    A = block_diag([_chain_diag(eps + eps_bar), idx.A_nn, _chain_diag(sigma + sigma_bar + eta)])

    offsets = {}
    off = 0
    for t, k in enumerate(eps):
        offsets[("cu", t)] = off
        off += k
    for t, k in enumerate(eps_bar):
        offsets[("cv", t)] = off
        off += k
    off += n2
    for t, k in enumerate(sigma):
        offsets[("pu", t)] = off
        off += k
    for t, k in enumerate(sigma_bar):
        offsets[("pv", t)] = off
        off += k
    for t, k in enumerate(eta):
        offsets[("o", t)] = off
        off += k
    assert off == n and sum(all_lengths) + n2 == n

    B_u = RatMatrix.zeros(n, m).to_lists()
    for t, k in enumerate(eps):
        B_u[offsets[("cu", t)] + k - 1][t] = qq(1)
    for t, k in enumerate(sigma):
        B_u[offsets[("pu", t)] + k - 1][a + t] = qq(1)
    B_v = RatMatrix.zeros(n, s).to_lists()
    for t, k in enumerate(eps_bar):
        B_v[offsets[("cv", t)] + k - 1][t] = qq(1)
    for t, k in enumerate(sigma_bar):
        B_v[offsets[("pv", t)] + k - 1][b + t] = qq(1)
    C = RatMatrix.zeros(p, n).to_lists()
    for t in range(c):
        C[t][offsets[("pu", t)]] = qq(1)
    for t in range(d):
        C[c + delta + t][offsets[("pv", t)]] = qq(1)
    for t in range(e):
        C[c + delta + d + t][offsets[("o", t)]] = qq(1)
    D = RatMatrix.zeros(p, m).to_lists()
    for i in range(delta):
        D[c + i][a + c + i] = qq(1)
    return Odecs2(
        A=A,
        B_u=RatMatrix(B_u, cols=m),
        B_v=RatMatrix(B_v, cols=s),
        C=RatMatrix(C, cols=n),
        D_u=RatMatrix(D, cols=m),
    )


def _embed(
    M: RatMatrix, row_off: int, col_off: int, rows: int, cols: int
) -> RatMatrix:
    out = RatMatrix.zeros(rows, cols).to_lists()
    for i in range(M.rows):
        for j in range(M.cols):
            out[row_off + i][col_off + j] = M[i, j]
    return RatMatrix(out, cols=cols)


def emcf(m: MnfSystem) -> Tuple[EmTransform, EmcfIndices, Odecs2]:
    """Finish a block-diagonal normal form into the canonical form.

    Dispatches the four diagonal blocks to the chain constructions above,
    embeds the per-block certificates into one system-wide transformation,
    and appends the input permutations that sort dead inputs last.  The
    returned transform maps ``m.system`` to the returned canonical system;
    the indices are the complete invariant.
    """
    o, dims = m.system, m.dims
    m1u, s1 = _recover_groups(o, dims)
    b1, b2, b3, b4 = _state_blocks(dims)
    n, mu, s, p = o.n, o.m, o.s, o.p
    n1, n2, n3, n4 = dims.n1, dims.n2, dims.n3, dims.n4
    u1, u3 = list(range(m1u)), list(range(m1u, mu))
    v1, v3 = list(range(s1)), list(range(s1, s))
    y3, y4 = list(range(dims.p3)), list(range(dims.p3, p))

    t1, eps, eps_bar = brunovsky_two_inputs(
        o.A.submatrix(b1, b1), o.B_u.submatrix(b1, u1), o.B_v.submatrix(b1, v1)
    )
    T2f, A_nn, _ = frobenius_form(o.A.submatrix(b2, b2))
    t3, sigma, delta, sigma_bar = prime_canonical(
        o.A.submatrix(b3, b3),
        o.B_u.submatrix(b3, u3),
        o.B_v.submatrix(b3, v3),
        o.C.submatrix(y3, b3),
        o.D_u.submatrix(y3, u3),
    )
    t4, eta = observable_dual_canonical(o.C.submatrix(y4, b4), o.A.submatrix(b4, b4))

    m3u, s3 = mu - m1u, s - s1
    t_blk = EmTransform(
        T_x=block_diag([t1.T_x, T2f, t3.T_x, t4.T_x]),
        T_u=block_diag([t1.T_u, t3.T_u]),
        T_v=block_diag([t1.T_v, t3.T_v]),
        T_y=block_diag([t3.T_y, t4.T_y]),
        F_u=vstack(
            [
                _embed(t1.F_u, 0, 0, m1u, n),
                _embed(t3.F_u, 0, n1 + n2, m3u, n),
            ]
        )
        if mu
        else RatMatrix.zeros(0, n),
        F_v=vstack(
            [
                _embed(t1.F_v, 0, 0, s1, n),
                _embed(t3.F_v, 0, n1 + n2, s3, n),
            ]
        )
        if s
        else RatMatrix.zeros(0, n),
        R=block_diag([t1.R, t3.R]),
        K=vstack(
            [
                RatMatrix.zeros(n1 + n2, p),
                _embed(t3.K, 0, 0, n3, p),
                _embed(t4.K, 0, dims.p3, n4, p),
            ]
        )
        if n
        else RatMatrix.zeros(0, p),
    )

    a, b, e = len(eps), len(eps_bar), len(eta)
    dead_u, dead_v, dead_y = m1u - a, s1 - b, dims.p4 - e
    uperm = list(range(a)) + list(range(m1u, mu)) + list(range(a, m1u))
    vperm = list(range(b)) + list(range(s1, s)) + list(range(b, s1))
    t_perm = replace(
        EmTransform.identity(n, mu, s, p),
        T_u=RatMatrix.identity(mu).take_rows(uperm),
        T_v=RatMatrix.identity(s).take_rows(vperm),
    )

    total = em_compose(t_blk, t_perm)
    idx = EmcfIndices(
        eps=tuple(eps),
        eps_bar=tuple(eps_bar),
        A_nn=A_nn,
        sigma=tuple(sigma),
        delta=delta,
        sigma_bar=tuple(sigma_bar),
        eta=tuple(eta),
        dead_u=dead_u,
        dead_v=dead_v,
        dead_y=dead_y,
    )
    if (idx.n, idx.m, idx.s, idx.p) != (n, mu, s, p):
        raise InternalInvariantViolation("index bookkeeping does not match the system size")
    result = apply_em(o, total)
    if result != emcf_system(idx):
        raise InternalInvariantViolation("assembled canonical form has a wrong pattern")
    return total, idx, result


# ---------------------------------------------------------------------------
# index translation and the implicit-side canonical form
# ---------------------------------------------------------------------------


def translate_indices(e: EmcfIndices) -> FbcfIndices:
    """Explicit-side indices to implicit-side block data.

    Chains fed by first-kind inputs keep their lengths; freeing the
    second-kind inputs keeps their chains' state counts; prime first-kind
    chains and observable chains each gain one row (the output equation),
    and purely static or dead outputs become size-1 blocks.  Dead
    second-kind inputs have no implicit counterpart (a kernel-basis column
    of E is never zero), so they are rejected.
    """
    if e.dead_v:
        raise ValueError("dead second-kind inputs cannot come from an implicit system")
    sigma_p = sorted([k + 1 for k in e.sigma] + [1] * e.delta, reverse=True)
    eta_p = sorted([k + 1 for k in e.eta] + [1] * e.dead_y, reverse=True)
    return FbcfIndices(
        eps_p=e.eps,
        eps_bar_p=e.eps_bar,
        sigma_p=tuple(sigma_p),
        sigma_bar_p=e.sigma_bar,
        eta_p=tuple(eta_p),
        n_rho=e.A_nn.rows,
        A_rho=e.A_nn,
        dead_u=e.dead_u,
    )


def _shift_block(k: int) -> RatMatrix:
    """k x k, ones on the superdiagonal."""
    M = RatMatrix.zeros(k, k).to_lists()
    for i in range(k - 1):
        M[i][i + 1] = qq(1)
    return RatMatrix(M, cols=k)


def build_fbcf(f: FbcfIndices) -> Dacs:
    """Assemble the implicit-side canonical system from its block data.

    Six diagonal groups of elementary blocks: for each ``eps_p`` entry an
    integrator chain driven by an input; for each ``eps_bar_p`` entry a
    chain with one equation fewer than states (one state stays free); the
    regular block (E = I, H = A_rho); for each ``sigma_p`` entry a chain
    with one equation more than states, driven and constrained (entry 1:
    the pure constraint 0 = u); for each ``sigma_bar_p`` entry a square
    constrained chain; for each ``eta_p`` entry an undriven chain with one
    equation more than states (entry 1: the zero row).  ``dead_u`` zero
    input columns close the input count.
    """
    e_blocks: List[RatMatrix] = []
    h_blocks: List[RatMatrix] = []
    for k in f.eps_p:
        e_blocks.append(RatMatrix.identity(k))
        h_blocks.append(_shift_block(k))
    for k in f.eps_bar_p:
        eye = RatMatrix.identity(k)
        e_blocks.append(eye.take_rows(range(k - 1)))
        h_blocks.append(eye.take_rows(range(1, k)))
    e_blocks.append(RatMatrix.identity(f.n_rho))
    h_blocks.append(f.A_rho)
    for k in f.sigma_p:
        eye = RatMatrix.identity(k - 1)
        e_blocks.append(vstack([RatMatrix.zeros(1, k - 1), eye]))
        h_blocks.append(vstack([eye, RatMatrix.zeros(1, k - 1)]))
    for k in f.sigma_bar_p:
        eye = RatMatrix.identity(k)
        E = vstack([RatMatrix.zeros(1, k), eye.take_rows(range(k - 1))])
        e_blocks.append(E)
        h_blocks.append(eye)
    for k in f.eta_p:
        eye = RatMatrix.identity(k - 1)
        e_blocks.append(vstack([eye, RatMatrix.zeros(1, k - 1)]))
        h_blocks.append(vstack([RatMatrix.zeros(1, k - 1), eye]))
    E = block_diag(e_blocks)
    H = block_diag(h_blocks)

    a, c = len(f.eps_p), len(f.sigma_p)
    m = a + c + f.dead_u
    L = RatMatrix.zeros(E.rows, m).to_lists()
    row = 0
    for t, k in enumerate(f.eps_p):
        L[row + k - 1][t] = qq(1)
        row += k
    row += sum(k - 1 for k in f.eps_bar_p) + f.n_rho
    for t, k in enumerate(f.sigma_p):
        L[row + k - 1][a + t] = qq(1)
        row += k
    d = Dacs(E=E, H=H, L=RatMatrix(L, cols=m))
    assert (d.l, d.n, d.m) == (f.l, f.n, f.m), "block bookkeeping mismatch"
    return d


# ---------------------------------------------------------------------------
# the full implicit-side pipeline
# ---------------------------------------------------------------------------


def _exfb_from_em(
    d: Dacs, rec, t: EmTransform, idx: EmcfIndices
) -> ExFbTransform:
    """Convert the explicit certificate d-explicitation -> canonical into an
    implicit certificate d -> build_fbcf(translate_indices(idx)).

    With Q0 E = [E1; 0] the explicitation's row normalization and
    (T_x, ..., K) the explicit certificate, the rows of the target system
    are a permutation of [E1~ T_x E1^+ | E1~ T_x K; 0 | T_y] Q0 applied to
    (E, H + L F_u, L T_u^{-1}), where E1~ keeps exactly the states that are
    not freed (not chain tails of the second kind).  The identity
    E1~ T_x B_v = E1~ B_v~ T_v = 0 makes every appearance of the unknown
    second-kind feedback drop out.
    """
    n, q, p = d.n, rec.q, d.l - rec.q
    eps, eps_bar = idx.eps, idx.eps_bar
    sigma, delta, sigma_bar, eta = idx.sigma, idx.delta, idx.sigma_bar, idx.eta
    c, dd, e = len(sigma), len(sigma_bar), len(eta)
    n2 = idx.A_nn.rows

    # state layout of the canonical explicit system
    spans = (
        [("cu", k) for k in eps]
        + [("cv", k) for k in eps_bar]
        + [("nn", n2)]
        + [("pu", k) for k in sigma]
        + [("pv", k) for k in sigma_bar]
        + [("o", k) for k in eta]
    )
    freed = set()
    off = 0
    starts = []
    for kind, k in spans:
        starts.append(off)
        if kind in ("cv", "pv"):
            freed.add(off + k - 1)
        off += k
    kept = [i for i in range(n) if i not in freed]
    if len(kept) != q:
        raise InternalInvariantViolation("freed state count does not match rank E")
    kept_pos = {state: i for i, state in enumerate(kept)}

    E1t = RatMatrix.identity(n).take_rows(kept)
    M = vstack(
        [
            hstack([E1t * t.T_x * rec.E1_dagger, E1t * t.T_x * t.K]),
            hstack([RatMatrix.zeros(p, q), t.T_y]),
        ]
    )
    Q_pre = M * rec.Q

    # interleave dynamics and output rows into the canonical block order
    rows: List[int] = []
    bi = 0
    for t_i, k in enumerate(eps):
        rows.extend(kept_pos[starts[bi] + i] for i in range(k))
        bi += 1
    for t_i, k in enumerate(eps_bar):
        rows.extend(kept_pos[starts[bi] + i] for i in range(k - 1))
        bi += 1
    rows.extend(kept_pos[starts[bi] + i] for i in range(n2))
    bi += 1
    for t_i, k in enumerate(sigma):
        rows.append(q + t_i)
        rows.extend(kept_pos[starts[bi] + i] for i in range(k))
        bi += 1
    for j in range(delta):
        rows.append(q + c + j)
    for t_i, k in enumerate(sigma_bar):
        rows.append(q + c + delta + t_i)
        rows.extend(kept_pos[starts[bi] + i] for i in range(k - 1))
        bi += 1
    for t_i, k in enumerate(eta):
        rows.extend(kept_pos[starts[bi] + k - 1 - i] for i in range(k))
        rows.append(q + c + delta + dd + t_i)
        bi += 1
    for j in range(idx.dead_y):
        rows.append(q + c + delta + dd + e + j)
    if sorted(rows) != list(range(d.l)):
        raise InternalInvariantViolation("row interleaving is not a permutation")

    # reverse each observable chain so its constraint sits at the bottom
    rev = list(range(n))
    bi = len(spans) - e
    for k in eta:
        o0 = starts[bi]
        for i in range(k):
            rev[o0 + i] = o0 + k - 1 - i
        bi += 1
    P = RatMatrix.identity(n).take_rows(rev) * t.T_x
    return ExFbTransform(Q=Q_pre.take_rows(rows), P=P, F=t.F_u, G=inverse(t.T_u))


def fbcf(d: Dacs) -> Tuple[ExFbTransform, FbcfIndices, Dacs]:
    """Feedback canonical form of a differential-algebraic system.

    Explicitates, triangularizes, block-diagonalizes and canonicalizes on
    the explicit side, then translates the indices and rebuilds the
    canonical implicit system.  The returned certificate maps ``d`` to the
    canonical system and is verified before being returned; every input
    admits a canonical form.
    """
    o, rec = explicitate(d)
    nf = emnf(emtf(o))
    trans = nf.transform
    if isinstance(trans, MorseTransform):
        trans = trans.to_em()
    t_can, idx, o_can = emcf(nf)
    t = em_compose(trans, t_can)
    if not verify_em(o, o_can, t):
        raise InternalInvariantViolation("explicit certificate failed to verify")
    fidx = translate_indices(idx)
    d_can = build_fbcf(fidx)
    cert = _exfb_from_em(d, rec, t, idx)
    if not verify_exfb(d, d_can, cert):
        raise InternalInvariantViolation("implicit certificate failed to verify")
    return cert, fidx, d_can
