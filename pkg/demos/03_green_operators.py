"""Truncated transfer and Green operators of the F2 simple-walk extension,
against the regular-tree closed forms."""

import numpy as np

import martinbench as mb
from martinbench import fixtures as fx

srw = fx.srw_f2()
print("building the ball-8 operator over F2 ...")
op = mb.build_truncated_operator(srw, 1, 8)
op.real_spectrum = True
print("atoms:", op.n_atoms, " nonzeros:", op.matrix.nnz)

f_id = op.group_mask_vector([0])
print("\n== transfer iterates ==")
print("two-step return weight:",
      mb.transfer_iterate(op, f_id, 2, 1.0)[op.atom(op.words[0], 0)],
      " (4 of 16 words return: 1/4)")

print("\n== Green values vs closed forms ==")
for r in (0.5, 1.0):
    res = mb.green_apply(op, f_id, r, tol=1e-10)
    print(f"G_{r}(X_id)(x, id) = {res.value_at(op, op.words[0], 0):.8f}"
          f"  closed form {fx.tree_green(r):.8f}"
          f"  [tail {res.tail_estimate:.1e}, exit {res.exit_bound:.1e}]")

print("\n== spectral radius from ball Perron roots ==")
est = mb.rho_estimate(srw, 1, 8, radii=[4, 6, 8])
print("sequence:", [(n, round(v, 6)) for n, v in est["sequence"]])
print("extrapolated:", round(est["rho_hat"], 6), " true sqrt(3)/2 =",
      round(np.sqrt(3) / 2, 6))

print("\n== the branch point by truncation collapse ==")
bp = mb.branch_green_estimate(srw, 1, [4, 6, 8, 10], n_terms=1500)
print(f"R_branch = {bp['R_branch']:.8f} (true 2/sqrt(3) = {2/np.sqrt(3):.8f})")
print(f"critical value = {bp['value']:.6f} (true 3), residual "
      f"{bp['collapse_residual']:.1e}")

print("\n== distortion and reversibility diagnostics ==")
print("K_hat(id):", round(mb.distortion_scan(op, srw.group.identity())["K_hat"], 6))
rev = mb.reversibility_check(op, 1.0, 3)
print("reversibility ratios over |g|<=3:", round(rev["min"], 8), "..",
      round(rev["max"], 8), " (symmetric steps: exactly 1)")
