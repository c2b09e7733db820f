"""Exact word-metric geometry on the supported group models.

Walks through ball enumeration, Gromov products, hyperbolicity constants,
tree approximation, the visual-boundary surrogate metric, and growth rates,
on the free group F2 and the modular group Z2 * Z3.
"""

import numpy as np

import martinbench as mb

F2 = mb.FreeGroup(2)
a, A, b, B = F2.generators()
e = F2.identity()

print("== multiplication and the word metric ==")
print("a * b        =", a * b)
print("ab * (ab)^-1 =", (a * b) * (a * b).inverse())
print("d(ab, aB)    =", F2.distance(a * b, a * B))

ball = mb.Ball.enumerate(F2, 5)
print("\n== balls and spheres ==")
print("|B(5)| =", len(ball), " spheres:", ball.sphere_sizes())
print("closed form 2k(2k-1)^(n-1):", [1] + [4 * 3 ** (n - 1) for n in range(1, 6)])

print("\n== Gromov products and hyperbolicity ==")
x, y = F2.element("ab"), F2.element("aBa")
print("(ab . aBa)_id =", mb.gromov_product(x, y, e), " (common prefix length 1)")
small = mb.Ball.enumerate(F2, 4)
print("four-point delta of F2 (radius 4, exhaustive):",
      mb.delta_estimate(small)["delta"])

Z23 = mb.FreeProduct([2, 3])
ball23 = mb.Ball.enumerate(Z23, 4)
rep = mb.delta_estimate(ball23)
print("four-point delta of Z2*Z3 (radius 4):", rep["delta"])

print("\n== tree approximation (single-linkage dendrogram) ==")
pts = [F2.element(w) for w in ("a", "ab", "aB", "ba")]
tree = mb.tree_approximation(small, pts, e)
print("passed:", tree["passed"], " slack:", tree["slack"],
      " (free groups embed isometrically)")

print("\n== boundary rays and the visual surrogate metric ==")
xi = mb.BoundaryRay.from_spelling(F2, "", "a")
eta = mb.BoundaryRay.from_spelling(F2, "a", "b")
lam = float(np.exp(-1))
print("r(a^inf, ab^inf) =", mb.visual_r(xi, eta, 8, lam)["value"],
      " (= e^-1: confluence at depth 1)")
print("r(a^inf, a^inf)  =", mb.visual_r(xi, xi, 8, lam)["value"],
      " (-> 0 with depth)")

print("\n== growth rates ==")
for name, model, rad in (("F2", F2, 8), ("Z2*Z3", Z23, 8)):
    g = mb.growth_rate(mb.Ball.enumerate(model, rad))
    print(f"{name}: final root={g['final_root']:.4f} "
          f"extrapolated={g['extrapolated']:.4f}")
