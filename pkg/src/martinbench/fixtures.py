"""Reference systems used across tests, demos and the acceptance suite.

The simple-walk fixture on the free group has closed-form Green and Martin
quantities (regular-tree walk), so it serves as the exact oracle; the other
fixtures exercise behaviour the tree fixture cannot show (nontrivial
Gouezel-Lalley decay, detours around forbidden balls, amenable targets).
"""

from __future__ import annotations

import numpy as np

from .base import BaseSystem, bernoulli_base
from .extension import ExtensionSystem
from .groups import FreeGroup, FreeProduct, PresentedGroup, triangle_group

__all__ = [
    "srw_f2",
    "srw_free",
    "srw_z",
    "trivial_extension",
    "nobacktrack_markov_f2",
    "asymmetric_f2",
    "srw_triangle_237",
    "srw_z2z3",
    "toy_extension",
    "tree_green",
    "tree_first_passage",
]


def srw_free(rank: int) -> ExtensionSystem:
    """Simple random walk on the free group: Bernoulli full shift, unit steps."""
    group = FreeGroup(rank)
    base = bernoulli_base(2 * rank)
    kappa = [(s,) for s in range(2 * rank)]
    return ExtensionSystem(base, group, kappa)


def srw_f2() -> ExtensionSystem:
    """The exact-oracle fixture: SRW on F2 as a Bernoulli(1/4) full-shift extension."""
    return srw_free(2)


def srw_z() -> ExtensionSystem:
    """SRW on Z (amenable target): rho = 1."""
    return srw_free(1)


def trivial_extension(alphabet: int = 4) -> ExtensionSystem:
    """kappa == id: the conservative base system itself."""
    group = FreeGroup(1)
    base = bernoulli_base(alphabet)
    kappa = [() for _ in range(alphabet)]
    return ExtensionSystem(base, group, kappa)


def _nb_weight_table(persist: float = 2.0, eps: float = 0.08, seed: int = 5) -> np.ndarray:
    """Sticky-channel depth-2 weights for the no-backtracking 6-symbol shift.

    Symbols 0..5 are a1, a2, A1, A2, b, B with the symbol involution
    (a1<->A1, a2<->A2, b<->B); channels {a1,A1} and {a2,A2} persist with
    factor ``persist``, and a small seeded perturbation breaks the channel
    swap symmetry (otherwise the double ratios of the GL scan vanish
    identically on the tree).
    """
    sinv = [2, 3, 0, 1, 5, 4]
    chan = [1, 2, 1, 2, 0, 0]
    W = np.ones((6, 6))
    for t in range(6):
        for s in range(6):
            if chan[s] and chan[t]:
                W[s, t] = persist if chan[s] == chan[t] else 1.0
    rng = np.random.default_rng(seed)
    W = np.abs(W * (1.0 + eps * rng.standard_normal((6, 6))))
    for t in range(6):
        for s in range(6):
            if t == sinv[s]:
                W[s, t] = 0.0
    return W


def nobacktrack_markov_f2(persist: float = 2.0, eps: float = 0.08, seed: int = 5) -> ExtensionSystem:
    """No-backtracking Markov fixture: depth-2 non-uniform weights over F2.

    Six symbols label the four F2 generators (the a-direction twice), the
    shift forbids a symbol followed by its symbol-inverse, and the sticky
    two-channel weight table produces genuinely dependent increments: Green
    values are no longer exactly multiplicative along geodesics, which is
    what the Gouezel-Lalley scan measures.
    """
    sinv = [2, 3, 0, 1, 5, 4]
    A = 6
    T = np.ones((A, A), dtype=np.int64)
    for s in range(A):
        T[s, sinv[s]] = 0
    W = _nb_weight_table(persist, eps, seed)
    logw = np.full((A, A), -np.inf)
    for s in range(A):
        for t in range(A):
            if T[s, t]:
                logw[s, t] = np.log(W[s, t])
    base = BaseSystem(A, T, 2, logw)
    group = FreeGroup(2)
    kappa = [(0,), (0,), (1,), (1,), (2,), (3,)]  # a, a, A, A, b, B
    return ExtensionSystem(base, group, kappa)


def asymmetric_f2(bias: float = 0.4) -> ExtensionSystem:
    """Biased-step walk on F2 (reversibility ratios bounded but != 1)."""
    group = FreeGroup(2)
    p = np.array([1.0 + bias, 1.0 - bias, 1.0, 1.0])
    p /= p.sum()
    base = bernoulli_base(4, p)
    return ExtensionSystem(base, group, [(0,), (1,), (2,), (3,)])


def srw_triangle_237() -> ExtensionSystem:
    """Uniform nearest-neighbour walk on the (2,3,7) von Dyck group.

    The Cayley graph has genuine detours around balls (unlike the tree
    fixtures), so restricted Green values along geodesics through a removed
    ball are positive and decay superexponentially in the ball radius.
    """
    group = triangle_group(2, 3, 7)
    base = bernoulli_base(3)
    kappa = [(0,), (1,), (2,)]  # x, y, y^-1
    return ExtensionSystem(base, group, kappa)


def srw_z2z3() -> ExtensionSystem:
    """Uniform walk on Z2 * Z3 (syllable normal forms)."""
    group = FreeProduct([2, 3])
    base = bernoulli_base(3)
    kappa = [(0,), (1,), (2,)]  # s, t, t^-1
    return ExtensionSystem(base, group, kappa)


def toy_extension(radius: int = 2) -> ExtensionSystem:
    """Small SRW-on-F2 system; with the given ball radius it yields
    4 * (2 * 3^radius - 1) atoms (30-300 atoms for radius 1-2 at depth 1)."""
    return srw_f2()


# -- closed forms for the regular-tree walk (the SRW oracle) -------------

def tree_green(r: float, q: int = 4) -> float:
    """Green value of the q-regular-tree simple walk: 2(q-1)/(q-2+sqrt(q^2-4(q-1)r^2))."""
    disc = q * q - 4.0 * (q - 1) * r * r
    if disc < 0:
        raise ValueError("r beyond the convergence radius")
    return 2.0 * (q - 1) / (q - 2 + np.sqrt(disc))


def tree_first_passage(r: float, q: int = 4) -> float:
    """First-passage generating value F(r) = (q - sqrt(q^2-4(q-1)r^2)) / (2(q-1)r)."""
    disc = q * q - 4.0 * (q - 1) * r * r
    if disc < 0:
        raise ValueError("r beyond the convergence radius")
    return (q - np.sqrt(disc)) / (2.0 * (q - 1) * r)
