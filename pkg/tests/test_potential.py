import numpy as np
import pytest

import martinbench as mb
from martinbench import potential as pt


R_TOY = 0.9


@pytest.fixture(scope="module")
def toy(toy_op):
    return toy_op


def delta_at(op, wi, gi):
    v = np.zeros(op.n_atoms)
    v[op.atom(op.words[wi], gi)] = 1.0
    return v


def test_adjoint_zero_and_push(toy):
    assert np.all(pt.adjoint_apply(toy, np.zeros(toy.n_atoms)) == 0)
    # delta at (a-cylinder, id): quarter mass to each of the 4 successor atoms
    m = delta_at(toy, 0, 0)
    push = pt.adjoint_apply(toy, m)
    assert push.sum() == pytest.approx(1.0)
    assert np.count_nonzero(push) == 4
    assert np.allclose(push[push > 0], 0.25)


def test_adjoint_fixed_point_trivial_extension():
    from martinbench import fixtures as fx
    triv = fx.trivial_extension()
    op = mb.build_truncated_operator(triv, 1, 1)
    # counting measure x Gibbs weights is fixed under the adjoint
    m = np.ones(op.n_atoms)
    push = pt.adjoint_apply(op, m)
    assert np.allclose(push, m)


def test_potential_is_excessive(toy):
    nu = delta_at(toy, 2, 3)
    mu = pt.green_adjoint_apply(toy, nu, R_TOY)
    rep = pt.check_excessive(toy, mu, R_TOY)
    assert rep["excessive"]
    # conformal everywhere except the charged atom
    charged = toy.atom(toy.words[2], 3)
    assert charged not in set(rep["conformal_atoms"].tolist())


def test_bare_delta_not_excessive(toy):
    # an atom with inflow: delta alone violates L* m <= m/r
    m = delta_at(toy, 0, 1)  # group coordinate 'a' has inflow from id
    rep = pt.check_excessive(toy, m, R_TOY)
    assert not rep["excessive"]


def test_uniform_excessive_on_trivial():
    from martinbench import fixtures as fx
    triv = fx.trivial_extension()
    op = mb.build_truncated_operator(triv, 1, 1)
    rep = pt.check_excessive(op, np.ones(op.n_atoms), 0.9)
    assert rep["excessive"]


def test_riesz_pure_potential(toy):
    nu = delta_at(toy, 1, 4)
    mu = pt.green_adjoint_apply(toy, nu, R_TOY)
    dec = pt.riesz_decompose(toy, mu, R_TOY)
    assert np.allclose(dec.charge, nu, atol=1e-12)
    assert np.max(dec.conformal_part) < 1e-10
    assert dec.reconstruction_residual < 1e-10


def test_riesz_linearity_and_uniqueness(toy):
    rng = np.random.default_rng(4)
    nu = np.abs(rng.random(toy.n_atoms)) * (rng.random(toy.n_atoms) < 0.2)
    mu = pt.green_adjoint_apply(toy, nu, R_TOY)
    dec1 = pt.riesz_decompose(toy, mu, R_TOY)
    recombined = dec1.conformal_part + pt.green_adjoint_apply(toy, dec1.charge, R_TOY)
    dec2 = pt.riesz_decompose(toy, recombined, R_TOY)
    assert np.allclose(dec1.charge, dec2.charge, atol=1e-10)
    assert np.allclose(dec1.conformal_part, dec2.conformal_part, atol=1e-10)


def test_first_entry_full_and_empty(toy):
    full = pt.first_entry_operator(toy, np.arange(toy.n_atoms), R_TOY)
    assert np.allclose(full, np.eye(toy.n_atoms))
    empty = pt.first_entry_operator(toy, np.array([], dtype=int), R_TOY)
    assert np.allclose(empty, 0.0)


def test_last_exit_full(toy):
    full = pt.last_exit_operator(toy, np.arange(toy.n_atoms), R_TOY)
    assert np.allclose(full, np.eye(toy.n_atoms))


def test_first_entry_srw_mass():
    """Mean F_A column mass over source cylinders at (., id) with
    A = Sigma x {a} equals the tree first passage 1/(q-1) = 1/3.

    Per-cylinder columns are deterministic in the first step (the cylinder
    encodes it): 1 from the a-cylinder and u^2 = 1/9 from the other three,
    averaging to 1/3.
    """
    import scipy.sparse as sp
    from martinbench import fixtures as fx
    srw = fx.srw_f2()
    op = mb.build_truncated_operator(srw, 1, 7)
    ai = op.ball.index_of(srw.group.element("a"))
    mask_A = op.group_mask_vector([ai])
    D_Ac = sp.diags(1.0 - mask_A)
    col_sums = []
    for wi in range(op.n_words):
        src = np.zeros(op.n_atoms)
        src[op.atom(op.words[wi], 0)] = 1.0
        term = src.copy()
        total = src.copy()
        for _ in range(6000):
            term = op.matrix @ (D_Ac @ term)
            total += term
            if term.max() < 1e-14:
                break
        col_sums.append(float((mask_A * total).sum()))
    assert col_sums[0] == pytest.approx(1.0, abs=1e-10)      # a-cylinder: immediate
    for c in col_sums[1:]:
        assert c == pytest.approx(1 / 9, abs=2e-3)
    assert np.mean(col_sums) == pytest.approx(1 / 3, abs=2e-3)


def test_appendix_identities_machine_precision(toy):
    r = R_TOY
    G = pt.green_operator_matrix(toy, r)
    ai = toy.ball.index_of(toy.system.group.element("a"))
    A = np.flatnonzero(toy.group_mask_vector([ai]) > 0)
    B = np.setdiff1d(np.arange(toy.n_atoms), A)
    FA = pt.first_entry_operator(toy, A, r)
    RA = pt.last_exit_operator(toy, A, r)
    GB = pt.restricted_green_operator(toy, B, r)
    scale = np.max(np.abs(G))
    assert np.max(np.abs(G - (GB + G @ FA))) < 1e-12 * scale
    assert np.max(np.abs(G @ FA - RA @ G)) < 1e-12 * scale
    # resolvent identity r L* G* = G* - Id
    resid = r * (toy.matrix.T @ G.T) - (G.T - np.eye(toy.n_atoms))
    assert np.max(np.abs(resid)) < 1e-12 * scale


def test_balayee_fixes_supported_charges(toy):
    rng = np.random.default_rng(8)
    ai = toy.ball.index_of(toy.system.group.element("a"))
    A = np.flatnonzero(toy.group_mask_vector([ai]) > 0)
    nu = np.zeros(toy.n_atoms)
    nu[A] = rng.random(len(A))
    RA = pt.last_exit_operator(toy, A, R_TOY)
    assert np.allclose(RA.T @ nu, nu, atol=1e-12)


def test_reduce_measure_properties_and_lp(toy):
    rng = np.random.default_rng(6)
    nu = np.abs(rng.random(toy.n_atoms)) * (rng.random(toy.n_atoms) < 0.3)
    mu = pt.green_adjoint_apply(toy, nu, R_TOY)
    ai = toy.ball.index_of(toy.system.group.element("a"))
    bi = toy.ball.index_of(toy.system.group.element("b"))
    A = np.flatnonzero(toy.group_mask_vector([0, ai, bi]) > 0)
    rep = pt.reduce_measure(toy, mu, A, R_TOY)
    assert rep["excessive"]
    lp = pt.reduced_measure_lp(toy, mu, A, R_TOY)
    assert np.max(np.abs(rep["measure"] - lp)) < 1e-8 * max(mu.max(), 1.0)


def test_reduce_measure_edge_sets(toy):
    rng = np.random.default_rng(9)
    nu = np.abs(rng.random(toy.n_atoms)) * (rng.random(toy.n_atoms) < 0.3)
    mu = pt.green_adjoint_apply(toy, nu, R_TOY)
    everything = pt.reduce_measure(toy, mu, np.arange(toy.n_atoms), R_TOY)
    assert np.allclose(everything["measure"], mu, atol=1e-10)
    nothing = pt.reduce_measure(toy, mu, np.array([], dtype=int), R_TOY)
    assert np.allclose(nothing["measure"], 0.0)


def test_reduce_measure_monotone(toy):
    rng = np.random.default_rng(10)
    nu = np.abs(rng.random(toy.n_atoms)) * (rng.random(toy.n_atoms) < 0.3)
    mu = pt.green_adjoint_apply(toy, nu, R_TOY)
    ai = toy.ball.index_of(toy.system.group.element("a"))
    A1 = np.flatnonzero(toy.group_mask_vector([0]) > 0)
    A2 = np.flatnonzero(toy.group_mask_vector([0, ai]) > 0)
    r1 = pt.reduce_measure(toy, mu, A1, R_TOY)["measure"]
    r2 = pt.reduce_measure(toy, mu, A2, R_TOY)["measure"]
    assert np.all(r1 <= r2 + 1e-10)
    # monotone in mu
    r_half = pt.reduce_measure(toy, 0.5 * mu, A2, R_TOY)["measure"]
    assert np.all(r_half <= r2 + 1e-10)


def test_measure_infimum(toy):
    rng = np.random.default_rng(12)
    m = rng.random(toy.n_atoms)
    assert np.array_equal(pt.measure_infimum([m]), m)
    assert np.array_equal(pt.measure_infimum([m, 2 * m]), m)
    # infimum of excessive measures is excessive (random pairs of potentials)
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        nu1 = np.abs(rng.random(toy.n_atoms)) * (rng.random(toy.n_atoms) < 0.25)
        nu2 = np.abs(rng.random(toy.n_atoms)) * (rng.random(toy.n_atoms) < 0.25)
        mu1 = pt.green_adjoint_apply(toy, nu1, R_TOY)
        mu2 = pt.green_adjoint_apply(toy, nu2, R_TOY)
        inf = pt.measure_infimum([mu1, mu2])
        assert pt.check_excessive(toy, inf, R_TOY)["excessive"]


def test_domination_principle(toy):
    rng = np.random.default_rng(14)
    ai = toy.ball.index_of(toy.system.group.element("a"))
    A = np.flatnonzero(toy.group_mask_vector([0, ai]) > 0)
    nu = np.zeros(toy.n_atoms)
    nu[A] = rng.random(len(A)) * (rng.random(len(A)) < 0.5)
    pot = pt.green_adjoint_apply(toy, nu, R_TOY)
    # trivial cases
    assert pt.domination_check(toy, pot, np.zeros(toy.n_atoms), A, R_TOY)["dominates"]
    eq = pt.domination_check(toy, pot, nu, A, R_TOY)
    assert eq["dominates"]
    assert abs(eq["margin"]) < 1e-10
    # dominated with positive margin after a strictly positive excessive bump
    bump = pt.green_adjoint_apply(toy, np.full(toy.n_atoms, 0.01), R_TOY)
    rep = pt.domination_check(toy, pot + bump, nu, A, R_TOY)
    assert rep["dominates"]
    assert rep["margin"] >= 0.01 - 1e-12


def test_domination_hypothesis_violated(toy):
    ai = toy.ball.index_of(toy.system.group.element("a"))
    A = np.flatnonzero(toy.group_mask_vector([ai]) > 0)
    nu = np.zeros(toy.n_atoms)
    nu[A] = 1.0
    small = np.zeros(toy.n_atoms)  # mu = 0 cannot dominate on A
    with pytest.raises(ValueError, match="hypothesis violated"):
        pt.domination_check(toy, small, nu, A, R_TOY)
