"""Finite-type subshift base dynamics with depth-k potentials.

The potential is locally constant at depth k (log weights indexed by
admissible k-words), which keeps the transfer operator exactly
finite-dimensional on cylinder functions of depth >= k-1.  Construction
Ruelle-normalizes the weight table so the base operator fixes constants.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = ["BaseSystem", "CylinderWord", "dalpha_seminorm"]


class SpectralIterationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CylinderWord:
    """An admissible word w identifying the cylinder [w]."""

    symbols: tuple

    def __len__(self):
        return len(self.symbols)


@dataclass
class BaseSystem:
    """Topologically mixing subshift of finite type with a depth-k potential.

    Parameters
    ----------
    alphabet : int
        number of symbols (0..alphabet-1)
    transition : array (A, A) of 0/1
        transition[s, t] = 1 iff symbol s may be followed by t
    depth : int
        locality depth k of the potential
    log_weights : dict or array
        natural-log weight per admissible depth-k word; an array of shape
        (A,)*k, or a dict {word-tuple: logw}; entries on inadmissible words
        are ignored
    r_shift : float
        metric parameter of d_r(x, y) = r^(first disagreement index, 0-based)
    alpha_reg : float
        regularity exponent used by the D_alpha seminorm
    """

    alphabet: int
    transition: np.ndarray
    depth: int
    log_weights: object
    r_shift: float = 0.5
    alpha_reg: float = 1.0
    normalize: bool = True

    lambda_base: float = field(init=False, default=1.0)
    h_table: dict = field(init=False, default_factory=dict)
    norm_depth: int = field(init=False, default=1)
    _norm_weights: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.int64)
        A = self.alphabet
        if self.transition.shape != (A, A):
            raise ValueError("transition matrix shape mismatch")
        self._check_mixing()
        raw = self._raw_table()
        if any(w <= 0 for w in raw.values()):
            raise ValueError("all potential weights must be strictly positive")
        if self.normalize:
            self._ruelle_normalize(raw)
        else:
            self.lambda_base = 1.0
            self.norm_depth = max(self.depth, 1)
            self._norm_weights = {
                w: raw[w[: self.depth]] for w in self.admissible_tuples(self.norm_depth)
            }
            self.h_table = {w: 1.0 for w in self.admissible_tuples(max(self.norm_depth - 1, 1))}

    # -- admissibility ---------------------------------------------------

    def _check_mixing(self):
        A = self.alphabet
        M = (self.transition > 0).astype(np.int64)
        if not M.any(axis=1).all() or not M.any(axis=0).all():
            raise ValueError("transition matrix has a dead symbol")
        P = np.eye(A, dtype=np.int64)
        for _ in range((A - 1) ** 2 + 1):
            P = np.minimum(P @ M, 1)
        if not P.all():
            raise ValueError("transition matrix is not irreducible and aperiodic")

    def admissible_tuples(self, n: int):
        """All admissible words of length n, lexicographic order."""
        if n == 0:
            return [()]
        out = [(s,) for s in range(self.alphabet)]
        for _ in range(n - 1):
            out = [w + (t,) for w in out for t in range(self.alphabet) if self.transition[w[-1], t]]
        return out

    def admissible_words(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        return [CylinderWord(w) for w in self.admissible_tuples(n)]

    def is_admissible(self, word: tuple) -> bool:
        return all(self.transition[word[i], word[i + 1]] for i in range(len(word) - 1))

    # -- potential -------------------------------------------------------

    def _raw_table(self) -> dict:
        table = {}
        lw = self.log_weights
        for w in self.admissible_tuples(self.depth):
            if isinstance(lw, dict):
                table[w] = float(np.exp(lw[w]))
            else:
                table[w] = float(np.exp(np.asarray(lw)[w]))
        return table

    def weight(self, context: tuple) -> float:
        """Normalized weight of the depth-norm_depth context word."""
        return self._norm_weights[context[: self.norm_depth]]

    def cylinder_weight(self, w, x_class) -> float:
        """phi_w on the cylinder [x_class]: the weight product along the orbit of w.x.

        Requires the concatenation w.x_class admissible and len(x_class) deep
        enough to determine every factor.
        """
        wt = w.symbols if isinstance(w, CylinderWord) else tuple(w)
        xt = x_class.symbols if isinstance(x_class, CylinderWord) else tuple(x_class)
        if len(wt) == 0:
            return 1.0
        full = wt + xt
        if not self.is_admissible(full):
            raise ValueError("not in domain of tau_w")
        need = self.norm_depth - 1
        if len(xt) < need:
            raise ValueError(f"x_class must have depth >= {need}")
        out = 1.0
        for i in range(len(wt)):
            out *= self.weight(full[i : i + self.norm_depth])
        return out

    # -- Ruelle normalization --------------------------------------------

    def _ruelle_normalize(self, raw: dict, tol: float = 1e-12, max_iter: int = 100_000):
        """Perron normalization so that sum_s weight(s, context) = 1.

        Power iteration on the adjacency-weighted matrix over depth-j words
        (j = max(k-1, 1)); the normalized table is the standard conjugation
        by the Perron eigenfunction and eigenvalue.
        """
        j = max(self.depth - 1, 1)
        ctxs = self.admissible_tuples(j)
        ctx_index = {w: i for i, w in enumerate(ctxs)}
        n = len(ctxs)
        M = np.zeros((n, n))
        for v in ctxs:
            for s in range(self.alphabet):
                if not self.transition[s, v[0]]:
                    continue
                u = ((s,) + v)[:j]
                key = ((s,) + v)[: self.depth]
                M[ctx_index[u], ctx_index[v]] = raw[key]
        h = np.full(n, 1.0 / n)
        lam = 1.0
        for _ in range(max_iter):
            h_new = M.T @ h
            lam = float(np.max(h_new))
            h_new /= lam
            if np.max(np.abs(h_new - h)) < tol * np.max(np.abs(h_new)):
                h = h_new
                break
            h = h_new
        resid = float(np.max(np.abs(M.T @ h - lam * h)) / np.max(np.abs(h)))
        if resid > 1e-10:
            raise SpectralIterationError(f"spectral iteration failed (residual {resid:.2e})")
        self.lambda_base = lam
        self.h_table = {w: float(h[i]) for i, w in enumerate(ctxs)}
        h_const = np.max(h) / np.min(h) - 1.0 < 1e-12
        if h_const and self.depth == 1 and float(np.ptp(M.sum(axis=0))) < 1e-12 * lam:
            self.norm_depth = 1
            self._norm_weights = {
                (s,): raw[(s,)] / lam for s in range(self.alphabet)
            }
        else:
            self.norm_depth = j + 1
            weights = {}
            for v in ctxs:
                for s in range(self.alphabet):
                    if not self.transition[s, v[0]]:
                        continue
                    u = ((s,) + v)[:j]
                    key = ((s,) + v)[: self.depth]
                    weights[((s,) + v)[: j + 1]] = (
                        raw[key] * self.h_table[u] / (lam * self.h_table[v])
                    )
            self._norm_weights = weights
        # invariant: row sums after normalization are 1
        worst = self.row_sum_defect()
        if worst > 1e-12:
            raise SpectralIterationError(f"normalization defect {worst:.2e}")

    def row_sum_defect(self) -> float:
        """max over contexts of |sum_s weight(s . context) - 1|."""
        worst = 0.0
        j = self.norm_depth - 1 if self.norm_depth > 1 else 1
        for v in self.admissible_tuples(j):
            total = sum(
                self.weight(((s,) + v)[: self.norm_depth])
                for s in range(self.alphabet)
                if self.transition[s, v[0]]
            )
            worst = max(worst, abs(total - 1.0))
        return worst

    def d_r(self, x: tuple, y: tuple) -> float:
        """Shift metric r^(first index of disagreement), indices 0-based."""
        for i, (a, b) in enumerate(zip(x, y)):
            if a != b:
                return self.r_shift ** i
        return self.r_shift ** min(len(x), len(y))

    def __repr__(self):
        return (f"BaseSystem(alphabet={self.alphabet}, depth={self.depth}, "
                f"lambda_base={self.lambda_base:.6g})")


def bernoulli_base(alphabet: int, p=None) -> BaseSystem:
    """Full shift with i.i.d. weights (uniform 1/alphabet if p is None)."""
    if p is None:
        p = [1.0 / alphabet] * alphabet
    lw = np.log(np.asarray(p, dtype=float))
    T = np.ones((alphabet, alphabet), dtype=np.int64)
    return BaseSystem(alphabet, T, 1, lw)


def dalpha_seminorm(system: BaseSystem, f: dict, depth_m: int, alpha_reg: float = None) -> dict:
    """Local Hoelder coefficient table of a depth-m locally constant function.

    ``f`` maps (word tuple of length depth_m, group key) -> value.  Returns
    {(a, group key): sup |f(x)-f(y)| / d_r(x,y)^alpha} with the sup over
    depth-m refinements x, y of the depth-1 cylinder [a]; exact for locally
    constant f.
    """
    if alpha_reg is None:
        alpha_reg = system.alpha_reg
    groups = sorted({k[1] for k in f.keys()})
    words = system.admissible_tuples(depth_m)
    by_first = {}
    for w in words:
        by_first.setdefault(w[0], []).append(w)
    out = {}
    for a, ws in sorted(by_first.items()):
        for g in groups:
            sup = 0.0
            for w1, w2 in itertools.combinations(ws, 2):
                v1 = f.get((w1, g), 0.0)
                v2 = f.get((w2, g), 0.0)
                if v1 == v2:
                    continue
                d = system.d_r(w1, w2)
                sup = max(sup, abs(v1 - v2) / d ** alpha_reg)
            out[(a, g)] = sup
    return out
