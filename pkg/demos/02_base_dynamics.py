"""Finite-type base dynamics: admissible words, Ruelle normalization and
local Hoelder seminorms of cylinder functions."""

import numpy as np

from martinbench.base import BaseSystem, CylinderWord, bernoulli_base, dalpha_seminorm

print("== admissible words ==")
full = bernoulli_base(4)
print("full 4-shift, n=2:", len(full.admissible_words(2)), "words")

inv = {0: 1, 1: 0, 2: 3, 3: 2}
T = np.ones((4, 4), dtype=np.int64)
for s in range(4):
    T[s, inv[s]] = 0
nb = BaseSystem(4, T, 1, np.log(np.full(4, 1 / 3)), normalize=False)
print("no-backtracking 4-shift, n=2:", len(nb.admissible_words(2)), "words (4*3)")

print("\n== cylinder weights ==")
print("Bernoulli(1/4), |w|=3:", full.cylinder_weight(CylinderWord((0, 1, 2)),
                                                     CylinderWord((3,))))

print("\n== Ruelle normalization ==")
print("Bernoulli(1/4): lambda =", full.lambda_base)
doubled = bernoulli_base(4, [0.5] * 4)
print("weights (1/2,..): lambda =", doubled.lambda_base, " (constant rescale)")

rng = np.random.default_rng(7)
markov = BaseSystem(4, np.ones((4, 4), dtype=np.int64), 2, rng.normal(size=(4, 4)))
print("random depth-2 table: lambda =", round(markov.lambda_base, 6),
      " row-sum defect =", markov.row_sum_defect())

print("\n== local Hoelder coefficients D_alpha ==")
f = {(w, 0): 0.0 for w in full.admissible_tuples(2)}
f[((0, 1), 0)] = 1.0
table = dalpha_seminorm(full, f, 2, alpha_reg=1.0)
print("indicator of the [01] cylinder:", {k: v for k, v in table.items() if v})
print("(two-point sup over refinements of [0], d_r = 1/2 -> coefficient 2)")
