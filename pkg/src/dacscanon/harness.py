"""Seeded random generators for stress-testing the canonical-form pipeline.

The two generators here bracket the pipeline from both ends:

* ``random_fbcf`` draws a random admissible index datum and materialises the
  canonical system it names.  Feeding that system back through ``fbcf`` must
  recover exactly the indices that were drawn, so the pair (system, indices)
  is a self-checking test vector.

* ``random_exfb_scramble`` hides a system behind a random implicit-side
  equivalence (invertible row/state/input changes plus state feedback).  The
  canonical form and its indices are invariants of that equivalence, so the
  scrambled copy must decode to the same answer as the original.

Everything is driven by ``random.Random`` seeded explicitly: the same seed
always reproduces the same system, which keeps failing cases replayable.
Entries are honest rationals with numerator and denominator bounded by a
small constant, so the generated matrices stay exactly representable and the
arithmetic stays fast.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Tuple, Union

from ._chains import frobenius_form
from .canonical import FbcfIndices, build_fbcf
from .ratmat import RatMatrix, is_invertible, qq
from .systems import Dacs, ExFbTransform, apply_exfb

__all__ = ["Seeded", "random_fbcf", "random_exfb_scramble"]


@dataclass(frozen=True)
class Seeded:
    """A reproducible randomness source: a seed plus an entry-size bound.

    ``entry_bound`` caps the magnitude of numerators and denominators of
    every rational entry the generators draw.  Two runs with equal ``Seeded``
    values produce identical output.
    """

    seed: int
    entry_bound: int = 3

    def __post_init__(self):
        if self.entry_bound < 0:
            raise ValueError("entry_bound must be nonnegative")

    def rng(self) -> random.Random:
        return random.Random(self.seed)


def _as_seeded(seed: Union[int, Seeded]) -> Seeded:
    return seed if isinstance(seed, Seeded) else Seeded(seed)


def _rat(rng: random.Random, bound: int):
    if bound < 1:
        return qq(0)
    return qq(rng.randint(-bound, bound), rng.randint(1, bound))


def _matrix(rng: random.Random, rows: int, cols: int, bound: int) -> RatMatrix:
    return RatMatrix(
        [[_rat(rng, bound) for _ in range(cols)] for _ in range(rows)], cols=cols
    )


def _invertible(rng: random.Random, n: int, bound: int) -> RatMatrix:
    # Resample until the determinant is nonzero; over a bounded box of
    # rationals that happens almost immediately.
    while True:
        M = _matrix(rng, n, n, max(bound, 1))
        if is_invertible(M):
            return M


def _index_list(rng: random.Random, max_blocks: int, max_index: int) -> List[int]:
    if max_blocks < 1 or max_index < 1:
        return []
    lst = [rng.randint(1, max_index) for _ in range(rng.randint(0, max_blocks))]
    return sorted(lst, reverse=True)


def random_fbcf(
    seed: Union[int, Seeded], bounds: Union[int, Tuple[int, int]] = (3, 4)
) -> Tuple[Dacs, FbcfIndices]:
    """A random feedback-canonical system together with its index datum.

    ``bounds`` is ``(max_blocks, max_index)``: each of the five index lists
    gets at most ``max_blocks`` entries, every entry (and the size of the
    uncontrollable-regular block) is at most ``max_index``.  A single integer
    is accepted as shorthand for using it in both roles.  With both bounds
    zero the result is the empty system.

    The square block of the uncontrollable-regular part is drawn at random
    and then put into its rational canonical form, so the returned indices
    are exactly what decoding the system reports.
    """
    sd = _as_seeded(seed)
    if isinstance(bounds, int):
        bounds = (bounds, bounds)
    max_blocks, max_index = bounds
    rng = sd.rng()
    lists = [_index_list(rng, max_blocks, max_index) for _ in range(5)]
    eps_p, eps_bar_p, sigma_p, sigma_bar_p, eta_p = lists
    n_rho = rng.randint(0, max_index) if max_blocks >= 1 and max_index >= 1 else 0
    A_rho = frobenius_form(_matrix(rng, n_rho, n_rho, sd.entry_bound))[1]
    dead_u = rng.randint(0, max_blocks) if max_blocks >= 1 else 0
    idx = FbcfIndices(
        eps_p=tuple(eps_p),
        eps_bar_p=tuple(eps_bar_p),
        sigma_p=tuple(sigma_p),
        sigma_bar_p=tuple(sigma_bar_p),
        eta_p=tuple(eta_p),
        n_rho=n_rho,
        A_rho=A_rho,
        dead_u=dead_u,
    )
    return build_fbcf(idx), idx


def random_exfb_scramble(
    d: Dacs, seed: Union[int, Seeded]
) -> Tuple[Dacs, ExFbTransform]:
    """Hide ``d`` behind a random equivalence; return the result and the key.

    The row change Q, state change P and input change G are resampled until
    invertible; the feedback F is arbitrary.  The returned certificate maps
    ``d`` to the scrambled system, so ``verify_exfb(d, scrambled, t)`` holds
    by construction, and the scrambled system has the same canonical form.
    """
    sd = _as_seeded(seed)
    rng = sd.rng()
    b = sd.entry_bound
    Q = _invertible(rng, d.l, b)
    P = _invertible(rng, d.n, b)
    G = _invertible(rng, d.m, b)
    F = _matrix(rng, d.m, d.n, b)
    t = ExFbTransform(Q=Q, P=P, F=F, G=G)
    return apply_exfb(d, t), t
