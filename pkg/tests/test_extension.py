import numpy as np
import pytest

import martinbench as mb
from martinbench import fixtures as fx
from martinbench.extension import DivergenceError


def test_operator_shape_and_ordering(op4):
    # 4 cylinder words x |B(4)| atoms, cylinder-major ordering
    assert op4.n_words == 4
    assert op4.n_atoms == 4 * 161
    assert op4.atom(op4.words[1], 5) == 1 * 161 + 5


def test_operator_state_count_noback_ball8():
    nb = fx.nobacktrack_markov_f2()
    # quoted count is for the 4-symbol shift; check the formula shape on ours
    op = mb.build_truncated_operator(nb, 1, 3)
    assert op.n_atoms == 6 * (2 * 3 ** 3 - 1)


def test_state_count_formula_4symbol_ball8(ball8):
    """4-symbol no-backtracking shift over F2: 4 x |B(8)| states.

    |B(8)| = 1 + 4(3^8-1)/2 = 13121 = 2*3^8 - 1 by the sphere formula
    2k(2k-1)^(n-1); the ball enumeration is the oracle.
    """
    inv = {0: 1, 1: 0, 2: 3, 3: 2}
    T = np.ones((4, 4), dtype=np.int64)
    for s in range(4):
        T[s, inv[s]] = 0
    from martinbench.base import BaseSystem
    base = BaseSystem(4, T, 1, np.log(np.full(4, 1 / 3)), normalize=False)
    sys_nb = mb.ExtensionSystem(base, mb.FreeGroup(2), [(0,), (1,), (2,), (3,)])
    op = mb.build_truncated_operator(sys_nb, 1, ball8)
    assert len(ball8) == 1 + sum(4 * 3 ** (k - 1) for k in range(1, 9)) == 13121
    assert op.n_atoms == 4 * len(ball8)


def test_depth_too_small_raises():
    gl = fx.nobacktrack_markov_f2()  # depth-2 potential -> m >= 1 ok; force m=0
    with pytest.raises(ValueError, match="function space not invariant"):
        mb.build_truncated_operator(gl, 0, 2)


def test_omega_identity_only(srw, ball4):
    op = mb.build_truncated_operator(srw, 1, ball4, omega=np.array([0]))
    # no one-step returns for SRW labels: every row leaving id leaves omega
    f = op.group_mask_vector([0])
    assert np.allclose(op.matrix @ f, 0.0)


def test_one_step_value(op4):
    """L(X_id)(x, a) = 1/4: one preimage symbol carries weight 1/4."""
    f = op4.group_mask_vector([0])
    out = op4.apply(f)
    ai = op4.ball.index_of(op4.system.group.element("a"))
    for w in op4.words:
        assert out[op4.atom(w, ai)] == pytest.approx(0.25)


def test_interior_row_sums(op4):
    one = np.ones(op4.n_atoms)
    L1 = op4.apply(one)
    assert np.allclose(L1[op4.interior], 1.0)
    assert np.all(L1 <= 1.0 + 1e-12)


def test_transfer_iterate_basics(op4):
    f = op4.group_mask_vector([0])
    assert np.array_equal(mb.transfer_iterate(op4, f, 0, 1.0), f)
    l2 = mb.transfer_iterate(op4, f, 2, 1.0)
    assert l2[op4.atom(op4.words[0], 0)] == pytest.approx(0.25)


def test_transfer_semigroup(op4):
    rng = np.random.default_rng(2)
    f = rng.random(op4.n_atoms)
    a = mb.transfer_iterate(op4, f, 5, 0.9)
    b = mb.transfer_iterate(op4, mb.transfer_iterate(op4, f, 2, 0.9), 3, 0.9)
    assert np.allclose(a, b, rtol=1e-13)


def test_index_mismatch():
    srw = fx.srw_f2()
    op = mb.build_truncated_operator(srw, 1, 2)
    with pytest.raises(ValueError, match="index mismatch"):
        mb.transfer_iterate(op, np.ones(3), 1)


def test_green_of_constant(op4):
    # G_r(1) = 1/(1-r) on the full space; at the centre atom the truncation
    # deficit decays like (r q_out)^radius, negligible at small r
    r = 0.3
    res = mb.green_apply(op4, np.ones(op4.n_atoms), r, tol=1e-12)
    v = res.value_at(op4, op4.words[0], 0)
    assert v <= 1 / (1 - r) + 1e-12
    assert v == pytest.approx(1 / (1 - r), rel=2e-3)


def test_green_srw_value_and_certificates(op8):
    res = mb.green_apply(op8, op8.group_mask_vector([0]), 1.0, tol=1e-10)
    v = res.value_at(op8, op8.words[0], 0)
    assert v == pytest.approx(fx.tree_green(1.0), abs=1e-3)
    assert res.converged
    assert res.tail_estimate < 1e-9
    assert res.exit_bound < 1e-4


def test_green_divergence_detected(op4):
    with pytest.raises(DivergenceError):
        mb.green_apply(op4, op4.group_mask_vector([0]), 1.6, tol=1e-10)


def test_green_monotone_in_r_omega_ball(srw, ball8, op8):
    f = op8.group_mask_vector([0])
    vals_r = []
    for r in (0.8, 1.0, 1.1):
        vals_r.append(mb.green_apply(op8, f, r, tol=1e-11).values)
    assert np.all(vals_r[1] >= vals_r[0] - 1e-12)
    assert np.all(vals_r[2] >= vals_r[1] - 1e-12)
    # restriction monotone in the set
    sub6 = np.flatnonzero(ball8.dist <= 6)
    sub4 = np.flatnonzero(ball8.dist <= 4)
    g6 = mb.green_apply(op8, f, 1.0, tol=1e-11, restrict=sub6).values
    g4 = mb.green_apply(op8, f, 1.0, tol=1e-11, restrict=sub4).values
    assert np.all(g4 <= g6 + 1e-12)
    # ball monotone: ball-4 operator vs ball-8 at the shared centre atom
    op4b = mb.build_truncated_operator(srw, 1, 4)
    v4 = mb.green_apply(op4b, op4b.group_mask_vector([0]), 1.0, tol=1e-11)
    assert v4.value_at(op4b, op4b.words[0], 0) <= \
        mb.green_apply(op8, f, 1.0, tol=1e-11).value_at(op8, op8.words[0], 0) + 1e-12


def test_green_x_independence_srw(op8):
    """Bernoulli base with depth-1 labels: values independent of the cylinder."""
    res = mb.green_apply(op8, op8.group_mask_vector([0]), 1.0, tol=1e-11)
    vals = res.values.reshape(op8.n_words, len(op8.ball))
    for w in range(1, op8.n_words):
        assert np.array_equal(vals[0], vals[w])


def test_green_row_matches_forward(op4):
    r = 1.0
    row = mb.green_row(op4, op4.atom(op4.words[0], 0), r, tol=1e-12)
    for gi in (0, 1, 5):
        fwd = mb.green_apply(op4, op4.group_mask_vector([gi]), r, tol=1e-12)
        assert row @ op4.group_mask_vector([gi]) == pytest.approx(
            fwd.value_at(op4, op4.words[0], 0), rel=1e-8)


def test_rho_estimate_srw(srw):
    est = mb.rho_estimate(srw, 1, 8, radii=[4, 6, 8])
    seq = [v for _, v in est["sequence"]]
    assert all(seq[i] <= seq[i + 1] + 1e-12 for i in range(len(seq) - 1))
    assert all(v <= np.sqrt(3) / 2 + 1e-9 for v in seq)
    assert est["rho_hat"] == pytest.approx(np.sqrt(3) / 2, abs=5e-3)
    # exact killed-ball Perron roots from the radial oracle
    assert seq[0] == pytest.approx(0.77222816, abs=1e-6)
    assert seq[2] == pytest.approx(0.83001490, abs=1e-6)


def test_rho_trivial_extension():
    triv = fx.trivial_extension()
    est = mb.rho_estimate(triv, 1, 2, radii=[0])
    assert est["rho_hat"] == pytest.approx(1.0, abs=1e-9)


def test_rho_amenable_z():
    z = fx.srw_z()
    est = mb.rho_estimate(z, 1, 16, radii=[8, 12, 16])
    assert est["rho_hat"] > 0.95  # 1-d walk: rho = 1, slow approach


def test_hr_apply(op8):
    f_id = op8.group_mask_vector([0])
    res = mb.hr_apply(op8, f_id, f_id, 1.0, tol=1e-10)
    # X_id masks the inner Green to its value at the identity fibre, so
    # H_1(X_id, X_id)(x, id) = G(1)^2 (double series, brute-force checked)
    G = fx.tree_green(1.0)
    brute = 0.0
    # independent oracle: sum_{m,n} L^m(X_id L^n(X_id))(id) via return probs
    # p_k of the tree walk; the double series collapses to (sum p)^2
    p = [1.0]
    import numpy as _np
    M = _np.zeros((15, 15))
    M[0, 1] = 1.0
    for d in range(1, 14):
        M[d, d - 1], M[d, d + 1] = 0.25, 0.75
    M[14, 13] = 0.25
    v = _np.zeros(15); v[0] = 1.0
    for _ in range(1000):
        v = M @ v
        p.append(float(v[0]))
    brute = sum(p) ** 2
    vv = res.value_at(op8, op8.words[0], 0)
    assert brute == pytest.approx(G * G, rel=1e-3)
    assert vv == pytest.approx(G * G, rel=5e-3)
    zero = mb.hr_apply(op8, f_id, np.zeros(op8.n_atoms), 1.0)
    assert np.all(zero.values == 0)


def test_distortion_scan_identity(op8):
    rep = mb.distortion_scan(op8, op8.system.group.identity(), r=1.0)
    assert rep["K_hat"] == pytest.approx(1.0, abs=1e-8)


def test_distortion_scan_generator(op8):
    rep = mb.distortion_scan(op8, op8.system.group.element("a"), r=1.0)
    assert rep["K_hat"] == pytest.approx(3.0, rel=0.05)


def test_reversibility_srw(op8):
    rep = mb.reversibility_check(op8, 1.0, 3, tol=1e-11)
    assert rep["min"] == pytest.approx(1.0, abs=1e-6)
    assert rep["max"] == pytest.approx(1.0, abs=1e-6)


def test_reversibility_asymmetric():
    asym = fx.asymmetric_f2()
    op = mb.build_truncated_operator(asym, 1, 6)
    rep = mb.reversibility_check(op, 1.0, 2, tol=1e-11)
    assert rep["max"] > 1.05 or rep["min"] < 0.95
    assert np.isfinite(rep["max"])


def test_erho_witness_srw(op8):
    rho_hat = mb.rho_estimate(op8.system, 1, 8, radii=[4, 6, 8])["rho_hat"]
    rep = mb.erho_witness(op8, rho_hat)
    assert rep["positive_on_core"]
    assert rep["violation"] < 1e-3


def test_erho_witness_trivial():
    triv = fx.trivial_extension()
    op = mb.build_truncated_operator(triv, 1, 1)
    rep = mb.erho_witness(op, 1.0)
    assert rep["constant"]
    assert rep["violation"] == pytest.approx(0.0, abs=1e-12)


def test_branch_green_estimate_small(srw):
    res = mb.branch_green_estimate(srw, 1, [2, 4, 6, 8], n_terms=1200)
    assert res["R_branch"] == pytest.approx(2 / np.sqrt(3), abs=1e-4)
    assert res["value"] == pytest.approx(3.0, abs=5e-3)
    assert res["collapse_residual"] < 1e-4
