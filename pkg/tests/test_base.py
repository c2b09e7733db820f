import numpy as np
import pytest

from martinbench.base import (
    BaseSystem,
    CylinderWord,
    SpectralIterationError,
    bernoulli_base,
    dalpha_seminorm,
)


def nobacktrack_transition(A=4):
    inv = {0: 1, 1: 0, 2: 3, 3: 2}
    T = np.ones((A, A), dtype=np.int64)
    for s in range(A):
        T[s, inv[s]] = 0
    return T


def test_admissible_word_counts():
    full = bernoulli_base(4)
    assert len(full.admissible_words(2)) == 16
    assert len(full.admissible_words(1)) == 4
    nb = BaseSystem(4, nobacktrack_transition(), 1, np.log(np.full(4, 0.25)),
                    normalize=False)
    assert len(nb.admissible_words(2)) == 12
    # count equals the sum of entries of T^(n-1)
    for n in (2, 3, 4):
        assert len(nb.admissible_words(n)) == int((np.linalg.matrix_power(
            nb.transition, n - 1)).sum())


def test_cylinder_weight_bernoulli():
    base = bernoulli_base(4)
    w = CylinderWord((0, 1, 2))
    x = CylinderWord((3,))
    assert base.cylinder_weight(w, x) == pytest.approx(1 / 64)
    assert base.cylinder_weight(CylinderWord(()), x) == 1.0


def test_cylinder_weight_depth2_product_of_three():
    rng = np.random.default_rng(3)
    lw = rng.normal(size=(4, 4))
    base = BaseSystem(4, np.ones((4, 4), dtype=np.int64), 2, lw, normalize=False)
    w = (0, 1, 2)
    x = (3,)
    expect = np.exp(lw[0, 1]) * np.exp(lw[1, 2]) * np.exp(lw[2, 3])
    assert base.cylinder_weight(CylinderWord(w), CylinderWord(x)) == pytest.approx(expect)


def test_cylinder_weight_multiplicativity():
    rng = np.random.default_rng(5)
    lw = rng.normal(size=(4, 4))
    base = BaseSystem(4, np.ones((4, 4), dtype=np.int64), 2, lw, normalize=False)
    u, v, x = (0, 2), (1, 3), (2,)
    full = base.cylinder_weight(CylinderWord(u + v), CylinderWord(x))
    left = base.cylinder_weight(CylinderWord(u), CylinderWord(v + x))
    right = base.cylinder_weight(CylinderWord(v), CylinderWord(x))
    assert full == pytest.approx(left * right)


def test_cylinder_weight_inadmissible():
    nb = BaseSystem(4, nobacktrack_transition(), 1, np.log(np.full(4, 0.25)),
                    normalize=False)
    with pytest.raises(ValueError, match="not in domain"):
        nb.cylinder_weight(CylinderWord((0,)), CylinderWord((1,)))  # a then a^-1


def test_normalization_bernoulli_identity():
    base = bernoulli_base(4)
    assert base.lambda_base == pytest.approx(1.0, abs=1e-12)
    assert base.norm_depth == 1
    assert base.row_sum_defect() < 1e-12


def test_normalization_constant_scaling():
    base = bernoulli_base(4, [0.5, 0.5, 0.5, 0.5])
    assert base.lambda_base == pytest.approx(2.0, abs=1e-12)
    assert all(v == pytest.approx(0.25) for v in base._norm_weights.values())


def test_normalization_random_depth2():
    rng = np.random.default_rng(11)
    lw = rng.normal(size=(4, 4))
    base = BaseSystem(4, np.ones((4, 4), dtype=np.int64), 2, lw)
    assert base.row_sum_defect() < 1e-12
    # the Perron data satisfy L h = lambda h on the context matrix
    ctxs = base.admissible_tuples(1)
    for v in ctxs:
        total = sum(np.exp(lw[s, v[0]]) * base.h_table[(s,)]
                    for s in range(4))
        assert total == pytest.approx(base.lambda_base * base.h_table[v], rel=1e-11)


def test_normalized_operator_fixes_constants():
    """L(1) = 1: the standing normalization, checked on the no-backtracking shift."""
    rng = np.random.default_rng(7)
    T = nobacktrack_transition()
    lw = rng.normal(size=(4, 4))
    base = BaseSystem(4, T, 2, lw)
    for v in base.admissible_tuples(base.norm_depth - 1):
        total = sum(base.weight(((s,) + v)[: base.norm_depth])
                    for s in range(4) if T[s, v[0]])
        assert total == pytest.approx(1.0, abs=1e-12)


def test_gibbs_markov_distortion_vanishes_below_depth():
    """Depth-k potentials are constant on depth-(k-1) refinements: the
    distortion constant is exactly zero at resolution below k."""
    rng = np.random.default_rng(13)
    lw = rng.normal(size=(4, 4))
    base = BaseSystem(4, np.ones((4, 4), dtype=np.int64), 2, lw, normalize=False)
    w = CylinderWord((1, 2))
    # phi_w on two points of the same depth-(k-1)=1 refinement class
    x1 = CylinderWord((3, 0, 1))
    x2 = CylinderWord((3, 2, 2))
    assert base.cylinder_weight(w, x1) == base.cylinder_weight(w, x2)


def test_mixing_rejects_reducible():
    T = np.array([[1, 0], [0, 1]])
    with pytest.raises(ValueError, match="irreducible"):
        BaseSystem(2, T, 1, np.log([0.5, 0.5]), normalize=False)


def test_positive_weights_required():
    with pytest.raises(ValueError, match="strictly positive"):
        BaseSystem(2, np.ones((2, 2), dtype=np.int64), 1,
                   np.array([-np.inf, 0.0]), normalize=False)


def test_dalpha_constant_zero():
    base = bernoulli_base(4)
    f = {(w, 0): 2.5 for w in base.admissible_tuples(2)}
    out = dalpha_seminorm(base, f, 2, alpha_reg=1.0)
    assert all(v == 0.0 for v in out.values())


def test_dalpha_indicator_depth2():
    base = bernoulli_base(4)  # r_shift = 1/2
    f = {(w, 0): 0.0 for w in base.admissible_tuples(2)}
    f[((0, 1), 0)] = 1.0
    out = dalpha_seminorm(base, f, 2, alpha_reg=1.0)
    assert out[(0, 0)] == pytest.approx(2.0)  # |1-0| / (1/2)^1
    assert out[(1, 0)] == 0.0


def test_dalpha_depth1_function_zero():
    base = bernoulli_base(4)
    f = {}
    for w in base.admissible_tuples(3):
        f[(w, 0)] = float(w[0])  # depth-1 locally constant
    out = dalpha_seminorm(base, f, 3)
    assert all(v == 0.0 for v in out.values())


def test_spectral_iteration_failure_message():
    # force failure with a zero iteration budget via monkeypatched tolerance
    rng = np.random.default_rng(1)
    lw = rng.normal(size=(4, 4))
    base = BaseSystem.__new__(BaseSystem)
    base.alphabet = 4
    base.transition = np.ones((4, 4), dtype=np.int64)
    base.depth = 2
    base.log_weights = lw
    base.r_shift = 0.5
    base.alpha_reg = 1.0
    base.normalize = True
    raw = {w: float(np.exp(lw[w])) for w in
           [(s, t) for s in range(4) for t in range(4)]}
    with pytest.raises(SpectralIterationError, match="spectral iteration failed"):
        base._ruelle_normalize(raw, max_iter=1)
