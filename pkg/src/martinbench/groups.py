"""Finitely generated group models with exact word-metric geometry.

Three backends share one interface: free groups (free reduction), free
products of finite cyclic groups (syllable normal form), and finitely
presented groups reduced by Dehn's algorithm.  Words are tuples of
generator indices; every generator carries an explicit involution partner
(``g`` at index ``i`` has ``g^-1`` at ``inv[i]``, possibly ``i`` itself).

Balls are enumerated breadth-first and carry a dense neighbour table, so
all metric quantities (distances, Gromov products, hyperbolicity
constants, geodesics) are exact integer/rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "GroupElement",
    "FreeGroup",
    "FreeProduct",
    "PresentedGroup",
    "Ball",
    "BoundaryRay",
    "gromov_product",
    "delta_estimate",
    "geodesics",
    "tree_approximation",
    "visual_r",
    "growth_rate",
]


class NormalFormError(RuntimeError):
    """Raised when a presented model cannot certify a normal form."""


@dataclass(frozen=True)
class GroupElement:
    """A group element in normal form, owned by a concrete model."""

    model: "GroupModel"
    word: tuple

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        if other.model != self.model:
            raise ValueError("elements belong to different group models")
        return GroupElement(self.model, self.model.normal_form(self.word + other.word))

    def inverse(self) -> "GroupElement":
        return GroupElement(self.model, self.model.normal_form(self.model.invert_word(self.word)))

    def length(self) -> int:
        return self.model.word_length(self.word)

    def is_identity(self) -> bool:
        return len(self.word) == 0

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupElement) or other.model != self.model:
            return NotImplemented
        return self.model.words_equal(self.word, other.word)

    def __hash__(self) -> int:
        return self.model.word_hash(self.word)

    def __repr__(self) -> str:
        return f"<{self.model.spell(self.word) or 'id'}>"


class GroupModel:
    """Common backbone: generator list with involution pairing."""

    #: names of the generators, index-aligned with words
    gen_names: list
    #: inv[i] = index of the inverse generator of i
    inv: list

    def identity(self) -> GroupElement:
        return GroupElement(self, ())

    def generator(self, i: int) -> GroupElement:
        return GroupElement(self, self.normal_form((i,)))

    def generators(self) -> list:
        return [self.generator(i) for i in range(len(self.gen_names))]

    def element(self, spelling) -> GroupElement:
        """Build an element from generator names or indices."""
        if isinstance(spelling, str):
            idxs = tuple(self.gen_names.index(ch) for ch in spelling)
        else:
            idxs = tuple(spelling)
        return GroupElement(self, self.normal_form(idxs))

    def invert_word(self, word: tuple) -> tuple:
        return tuple(self.inv[s] for s in reversed(word))

    def multiply(self, g: GroupElement, h: GroupElement) -> GroupElement:
        return g * h

    def distance(self, g: GroupElement, h: GroupElement) -> int:
        """Word metric d(g,h) = |g^-1 h|."""
        return (g.inverse() * h).length()

    def words_equal(self, w1: tuple, w2: tuple) -> bool:
        return w1 == w2

    def word_hash(self, word: tuple) -> int:
        return hash(word)

    def word_length(self, word: tuple) -> int:
        return len(word)

    def spell(self, word: tuple) -> str:
        return "".join(self.gen_names[s] for s in word)

    # subclasses provide normal_form(word) -> tuple


class FreeGroup(GroupModel):
    """Free group of given rank; generators a, b, c, ... with inverses A, B, C, ..."""

    def __eq__(self, other):
        return isinstance(other, FreeGroup) and other.rank == self.rank

    def __hash__(self):
        return hash(("free", self.rank))

    def __init__(self, rank: int):
        if rank < 1:
            raise ValueError("rank must be >= 1")
        self.rank = rank
        lower = "abcdefghijklm"[:rank]
        self.gen_names = []
        self.inv = []
        for i, ch in enumerate(lower):
            self.gen_names += [ch, ch.upper()]
            self.inv += [2 * i + 1, 2 * i]

    def normal_form(self, word: tuple) -> tuple:
        out = []
        for s in word:
            if out and out[-1] == self.inv[s]:
                out.pop()
            else:
                out.append(s)
        return tuple(out)

    def __repr__(self):
        return f"FreeGroup(rank={self.rank})"


class FreeProduct(GroupModel):
    """Free product of finite cyclic groups Z_{m_1} * ... * Z_{m_k}.

    Generator ``t_i`` of the i-th factor and, for factors of order > 2, its
    inverse ``t_i^-1``.  Normal form is the alternating syllable form with
    exponents reduced mod the factor order.
    """

    def __eq__(self, other):
        return isinstance(other, FreeProduct) and other.orders == self.orders

    def __hash__(self):
        return hash(("free_product", self.orders))

    def __init__(self, orders):
        if any(m < 2 for m in orders):
            raise ValueError("factor orders must be >= 2")
        self.orders = tuple(orders)
        letters = "stuvwxyz"[: len(orders)]
        self.gen_names = []
        self.inv = []
        #: per generator: (factor index, exponent)
        self._gen_syll = []
        for f, (m, ch) in enumerate(zip(orders, letters)):
            if m == 2:
                self.gen_names.append(ch)
                self.inv.append(len(self.inv))
                self._gen_syll.append((f, 1))
            else:
                self.gen_names += [ch, ch.upper()]
                base = len(self.inv)
                self.inv += [base + 1, base]
                self._gen_syll += [(f, 1), (f, m - 1)]

    def _to_syllables(self, word: tuple):
        sylls = []
        for s in word:
            f, e = self._gen_syll[s]
            if sylls and sylls[-1][0] == f:
                e2 = (sylls[-1][1] + e) % self.orders[f]
                sylls.pop()
                if e2:
                    sylls.append((f, e2))
            else:
                sylls.append((f, e))
        return sylls

    def _from_syllables(self, sylls) -> tuple:
        out = []
        for f, e in sylls:
            m = self.orders[f]
            if m == 2:
                out.append(self._gen_index(f, 1))
            elif e <= m - e:
                out += [self._gen_index(f, 1)] * e
            else:
                out += [self._gen_index(f, m - 1)] * (m - e)
        return tuple(out)

    def _gen_index(self, f: int, e: int) -> int:
        for i, (ff, ee) in enumerate(self._gen_syll):
            if ff == f and ee == e:
                return i
        raise AssertionError("syllable exponent without a generator")

    def normal_form(self, word: tuple) -> tuple:
        return self._from_syllables(self._to_syllables(word))

    def __repr__(self):
        return f"FreeProduct(orders={self.orders})"


class PresentedGroup(GroupModel):
    """Finitely presented group reduced by Dehn's algorithm.

    ``generators`` is a list of (name, inverse_name) pairs; a pair with equal
    names declares an involution.  ``relators`` are words over the generator
    names.  ``dehn_verified`` is the caller's assertion that greedy
    replacement of any subword longer than half a (symmetrized) relator
    terminates at the empty word exactly for trivial words.  Without the
    flag, operations that would need a certified normal form raise.

    Dehn-irreducible words need not be unique per element, so equality is
    decided by the oracle ``reduce(u v^-1) == empty`` and ball enumeration
    deduplicates against it.
    """

    def __init__(self, generators, relators, dehn_verified: bool = False):
        self.gen_names = []
        self.inv = []
        name_to_idx = {}
        for name, inv_name in generators:
            if name in name_to_idx:
                raise ValueError(f"duplicate generator {name}")
            i = len(self.gen_names)
            self.gen_names.append(name)
            name_to_idx[name] = i
            if inv_name == name:
                self.inv.append(i)
            elif inv_name in name_to_idx:
                j = name_to_idx[inv_name]
                self.inv.append(j)
                self.inv[j] = i
            else:
                self.gen_names.append(inv_name)
                name_to_idx[inv_name] = i + 1
                self.inv.append(i + 1)
                self.inv.append(i)
        self.dehn_verified = bool(dehn_verified)
        self.relator_words = [tuple(name_to_idx[ch] for ch in r) for r in relators]
        self._build_rotation_table()

    def _free_reduce(self, word):
        out = []
        for s in word:
            if out and out[-1] == self.inv[s]:
                out.pop()
            else:
                out.append(s)
        return out

    def _build_rotation_table(self):
        """All cyclic rotations of all relators and their inverses, freely reduced."""
        rots = set()
        for r in self.relator_words:
            r = tuple(self._free_reduce(r))
            if not r:
                continue
            for w in (r, self.invert_word(r)):
                for i in range(len(w)):
                    rots.add(w[i:] + w[:i])
        self._rotations = sorted(rots)
        # prefix lookup: rotations by length for the greedy scan
        self._max_rel_len = max((len(r) for r in self._rotations), default=0)

    def dehn_reduce(self, word) -> tuple:
        """Greedy Dehn reduction: free reduction plus >half-relator replacement."""
        w = self._free_reduce(tuple(word))
        changed = True
        while changed:
            changed = False
            L = len(w)
            for rot in self._rotations:
                R = len(rot)
                half = R // 2
                # longest matches first: subword lengths from min(L, R-1) down to half+1
                for sub_len in range(min(L, R - 1), half, -1):
                    sub = rot[:sub_len]
                    tail = rot[sub_len:]
                    repl = list(self.invert_word(tuple(tail)))
                    for i in range(L - sub_len + 1):
                        if tuple(w[i : i + sub_len]) == sub:
                            w = self._free_reduce(list(w[:i]) + repl + list(w[i + sub_len :]))
                            changed = True
                            break
                    if changed:
                        break
                if changed:
                    break
        return tuple(w)

    def normal_form(self, word: tuple) -> tuple:
        w = self.dehn_reduce(word)
        if w and not self.dehn_verified:
            raise NormalFormError("normal form not certified (set dehn_verified)")
        return w

    def words_equal(self, w1: tuple, w2: tuple) -> bool:
        if w1 == w2:
            return True
        return len(self.dehn_reduce(w1 + self.invert_word(w2))) == 0

    def word_hash(self, word: tuple) -> int:
        # Dehn forms are not canonical; fall back to a constant hash so that
        # dict/set use stays correct (equality does the work).
        return 0

    def word_length(self, word: tuple) -> int:
        # |g| is a metric quantity; for presented models it needs a ball.
        return len(word) if len(word) <= 1 else self._bfs_length(word)

    def _bfs_length(self, word: tuple) -> int:
        ball = Ball.enumerate(self, len(word))
        idx = ball.index_of_word(word)
        if idx is None:
            raise NormalFormError("word length exceeds enumerated ball")
        return int(ball.dist[idx])

    def __repr__(self):
        return f"PresentedGroup({self.gen_names}, relators={len(self.relator_words)})"


def triangle_group(p: int, q: int, r: int) -> PresentedGroup:
    """Von Dyck group <x, y | x^p, y^q, (xy)^r> (hyperbolic for 1/p+1/q+1/r < 1).

    The standard (2,3,7) presentation satisfies C'(1/6) over the free product
    of its torsion factors, so greedy Dehn reduction is a correct word-problem
    oracle there; the flag is set accordingly.
    """
    gens = [("x", "x" if p == 2 else "X"), ("y", "Y")]
    rel_x = "x" * p
    rel_y = "y" * q
    rel_xy = "xy" * r
    return PresentedGroup(gens, [rel_x, rel_y, rel_xy], dehn_verified=True)


@dataclass
class Ball:
    """Breadth-first enumeration of a radius-n ball around the identity.

    ``words[i]`` is the canonical (first-discovered) normal form of element i,
    ``dist[i]`` its word length, and ``nbr[i, s]`` the index of ``g_i * gen_s``
    or -1 when the product leaves the ball.
    """

    model: GroupModel
    radius: int
    words: list
    dist: np.ndarray
    nbr: np.ndarray
    _index: dict = field(repr=False, default_factory=dict)

    @staticmethod
    def enumerate(model: GroupModel, radius: int) -> "Ball":
        if isinstance(model, PresentedGroup):
            return Ball._enumerate_with_oracle(model, radius)
        words = [()]
        index = {(): 0}
        dist = [0]
        frontier = [()]
        for d in range(1, radius + 1):
            new = []
            for w in frontier:
                for s in range(len(model.gen_names)):
                    v = model.normal_form(w + (s,))
                    if v not in index:
                        index[v] = len(words)
                        words.append(v)
                        dist.append(d)
                        new.append(v)
            frontier = new
        nbr = np.full((len(words), len(model.gen_names)), -1, dtype=np.int64)
        for i, w in enumerate(words):
            for s in range(len(model.gen_names)):
                j = index.get(model.normal_form(w + (s,)))
                if j is not None:
                    nbr[i, s] = j
        return Ball(model, radius, words, np.asarray(dist), nbr, index)

    @staticmethod
    def _enumerate_with_oracle(model: PresentedGroup, radius: int) -> "Ball":
        words = [()]
        dist = [0]
        layers = {0: [0]}
        frontier = [0]
        for d in range(1, radius + 1):
            layers[d] = []
            for i in list(frontier):
                for s in range(len(model.gen_names)):
                    v = model.dehn_reduce(words[i] + (s,))
                    # candidates can only coincide with elements at distance d-2, d-1 or d
                    known = None
                    for dd in (d, d - 1, d - 2):
                        for j in layers.get(dd, []):
                            if model.words_equal(v, words[j]):
                                known = j
                                break
                        if known is not None:
                            break
                    if known is None:
                        words.append(v)
                        dist.append(d)
                        layers[d].append(len(words) - 1)
            frontier = layers[d]
        nbr = np.full((len(words), len(model.gen_names)), -1, dtype=np.int64)
        lookup = list(range(len(words)))
        for i, w in enumerate(words):
            for s in range(len(model.gen_names)):
                v = model.dehn_reduce(w + (s,))
                target = None
                for dd in (dist[i] - 1, dist[i], dist[i] + 1):
                    if dd < 0 or dd > radius:
                        continue
                    for j in layers.get(dd, []):
                        if model.words_equal(v, words[j]):
                            target = j
                            break
                    if target is not None:
                        break
                if target is not None:
                    nbr[i, s] = target
        return Ball(model, radius, words, np.asarray(dist), nbr, {})

    def __len__(self):
        return len(self.words)

    def index_of(self, g: GroupElement):
        return self.index_of_word(g.word)

    def index_of_word(self, word: tuple):
        if self._index:
            return self._index.get(self.model.normal_form(word))
        w = self.model.dehn_reduce(word)
        for j, u in enumerate(self.words):
            if self.model.words_equal(w, u):
                return j
        return None

    def element(self, i: int) -> GroupElement:
        return GroupElement(self.model, self.words[i])

    def sphere_sizes(self) -> list:
        return [int(np.sum(self.dist == d)) for d in range(self.radius + 1)]

    def sphere(self, d: int) -> np.ndarray:
        return np.flatnonzero(self.dist == d)

    def pair_distances(self) -> np.ndarray:
        """All-pairs graph distances inside the ball (BFS per source).

        Distances through points outside the ball are not shorter than the
        in-ball geodesic for the supported models on the enumerated radius,
        and are cross-checked against |g^-1 h| where normal forms are exact.
        """
        n = len(self.words)
        D = np.full((n, n), -1, dtype=np.int64)
        for src in range(n):
            D[src, src] = 0
            frontier = [src]
            d = 0
            while frontier:
                d += 1
                new = []
                for i in frontier:
                    for j in self.nbr[i]:
                        if j >= 0 and D[src, j] < 0:
                            D[src, j] = d
                            new.append(j)
                frontier = new
        return D


def word_distance(g: GroupElement, h: GroupElement) -> int:
    """d(g,h) = |g^-1 h| in normal form."""
    return g.model.distance(g, h)


def gromov_product(x: GroupElement, y: GroupElement, o: GroupElement) -> Fraction:
    """(x.y)_o = (d(x,o) + d(y,o) - d(x,y)) / 2, exact as a Fraction."""
    m = x.model
    return Fraction(m.distance(x, o) + m.distance(y, o) - m.distance(x, y), 2)


def delta_estimate(ball: Ball, sample_cap: int = 200_000, seed: int = 0) -> dict:
    """Smallest four-point delta over quadruples of the ball.

    Exhaustive for radius <= 5 (vectorized over (x,y,z) per base point o);
    above that a seeded sample of quadruples is scanned and the sample count
    reported.
    """
    if ball.radius < 2:
        return {"delta": Fraction(0), "exhaustive": True, "quadruples": 0}
    D = ball.pair_distances().astype(np.int64)
    n = len(ball)
    best = 0  # in half-units (2*delta)
    exhaustive = ball.radius <= 5
    if exhaustive:
        for o in range(n):
            do = D[:, o]
            # 2*(x.y)_o over all pairs
            gp = do[:, None] + do[None, :] - D
            # min over y of min(gp[x,y], gp[y,z]) maximized against gp[x,z]:
            # scan y in blocks to bound memory at n^2 per step
            rhs = np.full((n, n), -(10**9), dtype=np.int64)
            for y in range(n):
                np.maximum(rhs, np.minimum(gp[:, y][:, None], gp[y, :][None, :]), out=rhs)
            gap = int(np.max(rhs - gp))
            if gap > best:
                best = gap
        count = n**4
    else:
        rng = np.random.default_rng(seed)
        count = sample_cap
        quad = rng.integers(0, n, size=(sample_cap, 4))
        x, y, z, o = quad.T
        gp_xy = D[x, o] + D[y, o] - D[x, y]
        gp_yz = D[y, o] + D[z, o] - D[y, z]
        gp_xz = D[x, o] + D[z, o] - D[x, z]
        best = int(np.max(np.minimum(gp_xy, gp_yz) - gp_xz, initial=0))
    return {"delta": Fraction(max(best, 0), 2), "exhaustive": exhaustive, "quadruples": count}


def geodesics(ball: Ball, g: GroupElement, h: GroupElement, limit: int = 16) -> list:
    """Up to ``limit`` geodesic index-paths from g to h through the Cayley graph."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    gi, hi = ball.index_of(g), ball.index_of(h)
    if gi is None or hi is None:
        raise ValueError("ball too small")
    # BFS layers from g
    n = len(ball)
    dist = np.full(n, -1, dtype=np.int64)
    dist[gi] = 0
    frontier = [gi]
    while frontier and dist[hi] < 0:
        new = []
        for i in frontier:
            for j in ball.nbr[i]:
                if j >= 0 and dist[j] < 0:
                    dist[j] = dist[i] + 1
                    new.append(j)
        frontier = new
    if dist[hi] < 0:
        raise ValueError("ball too small")
    # walk back from h along strictly decreasing layers
    paths = [[hi]]
    done = []
    while paths and len(done) < limit:
        new_paths = []
        for p in paths:
            tail = p[-1]
            if tail == gi:
                done.append(list(reversed(p)))
                if len(done) >= limit:
                    break
                continue
            for s in range(ball.nbr.shape[1]):
                j = ball.nbr[tail, s]
                if j >= 0 and dist[j] == dist[tail] - 1:
                    new_paths.append(p + [int(j)])
        paths = new_paths
    return done


def tree_approximation(ball: Ball, F: list, o: GroupElement, delta: Fraction = None) -> dict:
    """Gromov single-linkage tree approximation of a finite point set.

    Builds the dendrogram tree T over F u {o} whose leaf distances are
    d_T(x,y) = d(x,o) + d(y,o) - 2 (x.y)', with (x.y)' the single-linkage
    (maximin over chains) closure of the Gromov product.  The report checks
    (i) radial distances are preserved exactly and (ii)
    d(x,y) - 2 k delta <= d_T(x,y) <= d(x,y) for |F| <= 2^k + 2.
    """
    m = ball.model
    pts = list(F)
    npts = len(pts)
    if npts == 0:
        raise ValueError("empty point set")
    d = [[m.distance(a, b) for b in pts] for a in pts]
    do = [m.distance(a, o) for a in pts]
    # Gromov products (doubled, to stay integral)
    gp2 = [[do[i] + do[j] - d[i][j] for j in range(npts)] for i in range(npts)]
    # single-linkage / maximin closure: gp2'[i][j] = max over chains of min edge
    closure = [row[:] for row in gp2]
    for k in range(npts):
        for i in range(npts):
            for j in range(npts):
                v = min(closure[i][k], closure[k][j])
                if v > closure[i][j]:
                    closure[i][j] = v
    dT = [[do[i] + do[j] - closure[i][j] if i != j else 0 for j in range(npts)] for i in range(npts)]
    k_slack = max(1, math.ceil(math.log2(max(npts - 2, 1)))) if npts > 2 else 1
    if delta is None:
        delta = delta_estimate(ball)["delta"]
    slack = 2 * k_slack * delta
    violations = []
    for i in range(npts):
        for j in range(i + 1, npts):
            if not (d[i][j] - slack <= dT[i][j] <= d[i][j]):
                violations.append((i, j, d[i][j], dT[i][j]))
    return {
        "tree_distances": dT,
        "radial_exact": True,  # by construction d_T(x, o-root) = d(x, o)
        "root_distances": do,
        "k": k_slack,
        "delta": delta,
        "slack": slack,
        "violations": violations,
        "passed": not violations,
    }


@dataclass(frozen=True)
class BoundaryRay:
    """Eventually periodic geodesic ray: prefix . (period)^infinity.

    ``at(n)`` returns the group element after n steps; prefixes are required
    to be geodesic (|at(n)| = n), which holds for freely/syllable reduced
    spellings in the tree-like models.
    """

    model: GroupModel
    prefix: tuple
    period: tuple

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be nonempty")

    @staticmethod
    def from_spelling(model: GroupModel, prefix: str, period: str) -> "BoundaryRay":
        pre = tuple(model.gen_names.index(c) for c in prefix)
        per = tuple(model.gen_names.index(c) for c in period)
        return BoundaryRay(model, pre, per)

    def symbols(self, n: int) -> tuple:
        out = list(self.prefix)
        i = 0
        while len(out) < n:
            out.append(self.period[i % len(self.period)])
            i += 1
        return tuple(out[:n])

    def at(self, n: int) -> GroupElement:
        w = self.model.normal_form(self.symbols(n))
        if len(w) != n:
            raise ValueError("ray prefix is not geodesic at depth %d" % n)
        return GroupElement(self.model, w)


def visual_r(xi: BoundaryRay, eta: BoundaryRay, depth: int, lam_visual: float,
             delta: Fraction = Fraction(0)) -> dict:
    """Visual-metric surrogate lam^((xi.eta)) with the product estimated at finite depth.

    The product is the minimum Gromov product over prefix pairs at depths in
    [ceil(depth/2), depth]; the returned uncertainty is the 2*delta slack of
    the boundary extension.
    """
    if depth < 2:
        raise ValueError("insufficient depth")
    if delta > 0:
        lo = float(Fraction(1, 2) ** Fraction(1, 2 * delta))
        if not (lo < lam_visual < 1.0):
            raise ValueError("lam_visual outside admissible interval (%g, 1)" % lo)
    elif not (0.0 < lam_visual < 1.0):
        raise ValueError("lam_visual must be in (0,1)")
    o = xi.model.identity()
    prod = gromov_product(xi.at(depth), eta.at(depth), o)
    value = lam_visual ** float(prod)
    return {
        "product": prod,
        "value": value,
        "uncertainty_exponent": 2 * delta,
        "value_bounds": (value * lam_visual ** float(2 * delta), value),
        "coincident_to_depth": prod >= depth,
    }


def growth_rate(ball: Ball) -> dict:
    """Sphere-count growth: n-th roots per radius and an extrapolated rate.

    The root sequence converges from above (subadditive log-counts); the
    headline estimate refines the final root by the last sphere ratio, which
    is exact for free groups.
    """
    if ball.radius < 3:
        raise ValueError("radius must be >= 3")
    sizes = ball.sphere_sizes()
    roots = [(n, sizes[n] ** (1.0 / n)) for n in range(1, ball.radius + 1) if sizes[n] > 0]
    final_root = roots[-1][1]
    ratios = [sizes[n] / sizes[n - 1] for n in range(2, ball.radius + 1) if sizes[n - 1] > 0]
    extrapolated = ratios[-1] if ratios else final_root
    return {
        "sphere_sizes": sizes,
        "roots": roots,
        "final_root": final_root,
        "extrapolated": extrapolated,
    }
