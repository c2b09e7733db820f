"""Exact measure calculus on a toy truncation: Riesz decomposition,
first-entry/last-exit operators, reduced measures, domination."""

import numpy as np

import martinbench as mb
from martinbench import fixtures as fx
from martinbench import potential as pt

srw = fx.srw_f2()
op = mb.build_truncated_operator(srw, 1, 2)
r = 0.9
print("toy truncation:", op.n_atoms, "atoms, r =", r)

rng = np.random.default_rng(0)
charge = np.abs(rng.random(op.n_atoms)) * (rng.random(op.n_atoms) < 0.25)
mu = pt.green_adjoint_apply(op, charge, r)
print("\npotential mu = G_r^*(nu): excessive =",
      pt.check_excessive(op, mu, r)["excessive"])

dec = pt.riesz_decompose(op, mu, r)
print("Riesz: |recovered charge - nu|_inf =",
      float(np.max(np.abs(dec.charge - charge))),
      " conformal part max =", float(dec.conformal_part.max()))

print("\n== operator identities (machine precision) ==")
G = pt.green_operator_matrix(op, r)
ai = op.ball.index_of(srw.group.element("a"))
A = np.flatnonzero(op.group_mask_vector([0, ai]) > 0)
B = np.setdiff1d(np.arange(op.n_atoms), A)
FA = pt.first_entry_operator(op, A, r)
RA = pt.last_exit_operator(op, A, r)
GB = pt.restricted_green_operator(op, B, r)
print("G = G^B + G F_A :", float(np.max(np.abs(G - (GB + G @ FA)))))
print("G F_A = R_A G   :", float(np.max(np.abs(G @ FA - RA @ G))))
print("resolvent       :", float(np.max(np.abs(
    r * (op.matrix.T @ G.T) - (G.T - np.eye(op.n_atoms))))))

print("\n== reduced measure vs the LP referee ==")
red = pt.reduce_measure(op, mu, A, r)["measure"]
lp = pt.reduced_measure_lp(op, mu, A, r)
print("|F_A^*(mu) - LP|_inf =", float(np.max(np.abs(red - lp))))

print("\n== domination principle ==")
nu_A = np.zeros(op.n_atoms)
nu_A[A] = rng.random(len(A))
pot = pt.green_adjoint_apply(op, nu_A, r)
print("mu = G^*(nu) dominated on A -> everywhere:",
      pt.domination_check(op, pot, nu_A, A, r))
