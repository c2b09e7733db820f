"""Martin kernels, boundary measures and the Martin metric of the F2
simple-walk extension; everything here has a tree closed form."""

import numpy as np

import martinbench as mb
from martinbench import fixtures as fx
from martinbench import lab
from martinbench import martin as mt

srw = fx.srw_f2()
op = mb.build_truncated_operator(srw, 1, 8)
op.real_spectrum = True
model = srw.group
ray_a = mb.BoundaryRay.from_spelling(model, "", "a")
ray_b = mb.BoundaryRay.from_spelling(model, "", "b")

print("== Martin kernels along the a-ray ==")
state = (op.words[0], ray_a.at(6))
for spelled, expect in (("a", 3.0), ("b", 1 / 3), ("", 1.0)):
    k = mt.martin_kernel(op, model.element(spelled), state, 1.0)
    print(f"K(h={spelled or 'id'}) = {k['value']:.6f}   (tree value {expect:.6f})")

print("\n== boundary measure of sigma = a^inf ==")
est = mt.boundary_measure(op, ray_a, 1.0, [4, 5, 6], test_radius=3)
for n in (0, 1, 2, 3):
    gi = op.ball.index_of(model.element("a" * n))
    print(f"mu_sigma(X_a^{n}) = {est.table[(6, gi)]:.5f}  (tree 3^{n})")
print("conformality residual:",
      f"{mt.conformality_residual(op, est, 1.0, test_ball_radius=2):.2e}")

print("\n== divergence/decay of boundary measures (Thm-5.3(iii)-style) ==")
scan = mt.kernel_divergence_scan(op, ray_a, ray_b, 1.0, [0, 1, 2, 3], eval_depth=6)
for n, own, other in scan["table"]:
    print(f"n={n}: mu_a(X_a^n)={own:8.4f}   mu_b(X_a^n)={other:.5f}")

print("\n== the Martin metric and the Hoelder comparison ==")
scheme = mt.coefficients(op, 0.5, 1.0, tol=1e-11)
d_ab = mt.martin_distance_along_rays(op, ray_a, ray_b, 1.0, scheme, [5, 6])
print("d_Martin(a^inf, b^inf) ~", round(d_ab["value"], 6))
pairs = lab.visual_martin_pairs(op, 1.0, scheme, [1, 2, 3, 4], per_product=4, depth=6)
fit = mt.holder_fit([(dv, dm) for dv, dm, _ in pairs], 0.38, float(np.exp(-1)), 3.0)
print(f"log-log slope over {fit['n_pairs']} ray pairs: "
      f"{fit['slope']:.4f} in [{fit['alpha']:.4f}, {fit['beta']:.4f}], "
      f"R^2 = {fit['r2']:.4f}")

print("\n== Green decay along spheres ==")
scan = mt.green_decay_scan(op, 0, 1.0, 6)
print("n-th roots:", [(row["n"], round(row["root"], 4))
                      for row in scan["rows"] if row["root"]])
print("(-> first-passage value 1/3 as n grows)")
