"""Feedback canonical form of linear DACSs via explicitation, exactly.

The package turns a linear differential-algebraic control system
E x' = H x + L u into its feedback canonical form through an explicit
two-input-kind ODE detour, computing the invariant-subspace geometry and
the (extended) Morse triangular/normal/canonical forms on the way.  Every
step emits a transformation certificate that can be re-verified against
the defining matrix identities, and all arithmetic is exact rational.
"""

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
    mat,
    orthogonal_complement,
    preimage,
    qq,
    rank,
    rank_rref,
    right_inverse,
    solve,
    subspace_intersect,
    subspace_sum,
    vstack,
)
from .systems import (
    Dacs,
    EmTransform,
    ExFbTransform,
    ExplicitationRecord,
    MorseTransform,
    Odecs2,
    apply_em,
    apply_exfb,
    em_compose,
    em_from_merged,
    em_inverse,
    exfb_compose,
    exfb_inverse,
    expl_membership,
    explicitate,
    implicitate,
    prolong,
    simulate,
    verify_em,
    verify_exfb,
)
from .geometry import (
    InvariantResult,
    WongResult,
    dualize,
    invariant_subspaces,
    wong_sequences,
)
from .morse import (
    BlockDims,
    MnfSystem,
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
from .canonical import (
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
    translate_indices,
)
from .harness import Seeded, random_exfb_scramble, random_fbcf

__all__ = [
    # exact linear algebra
    "InternalInvariantViolation",
    "RatMatrix",
    "Subspace",
    "block_diag",
    "complement",
    "hstack",
    "image",
    "inverse",
    "is_invertible",
    "kernel_basis",
    "mat",
    "orthogonal_complement",
    "preimage",
    "qq",
    "rank",
    "rank_rref",
    "right_inverse",
    "solve",
    "subspace_intersect",
    "subspace_sum",
    "vstack",
    # systems and transformations
    "Dacs",
    "EmTransform",
    "ExFbTransform",
    "ExplicitationRecord",
    "MorseTransform",
    "Odecs2",
    "apply_em",
    "apply_exfb",
    "em_compose",
    "em_from_merged",
    "em_inverse",
    "exfb_compose",
    "exfb_inverse",
    "expl_membership",
    "explicitate",
    "implicitate",
    "prolong",
    "simulate",
    "verify_em",
    "verify_exfb",
    # invariant subspaces
    "InvariantResult",
    "WongResult",
    "dualize",
    "invariant_subspaces",
    "wong_sequences",
    # Morse forms and Sylvester solvers
    "BlockDims",
    "MnfSystem",
    "MtfSystem",
    "NonUniqueWarning",
    "NoSolution",
    "emnf",
    "emtf",
    "mnf",
    "mtf",
    "solve_constrained_sylvester",
    "solve_sylvester",
    # canonical forms
    "EmcfIndices",
    "FbcfIndices",
    "NotControllable",
    "NotObservable",
    "NotPrime",
    "brunovsky_two_inputs",
    "build_fbcf",
    "emcf",
    "emcf_system",
    "fbcf",
    "translate_indices",
    # seeded generators
    "Seeded",
    "random_exfb_scramble",
    "random_fbcf",
]
