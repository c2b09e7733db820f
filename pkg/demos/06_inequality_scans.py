"""The experiment harness end to end: Ancona / Gouezel-Lalley / decay scans
with persisted JSON-lines records and summary."""

import json
import pathlib
import tempfile

from martinbench import lab

out = pathlib.Path(tempfile.mkdtemp(prefix="martinbench-demo-"))
print("running the quick-profile simple-walk config ...")
summary = lab.run("configs/srw_f2_quick.json", output_dir=str(out))
print("exit code:", summary["exit_code"], " runtime:", summary["runtime_s"], "s")
print("rho_hat:", round(summary["fitted"]["rho_hat"], 6),
      " R_hat:", round(summary["fitted"]["R_hat"], 6))
print("Ancona C_max per r:", {k: round(v, 4) for k, v in
                              summary["fitted"]["ancona_C_max"].items()})
print("GL scan degenerate on the tree fixture:",
      summary["fitted"]["gl_degenerate"])
print("assertions:", summary["assertions"])
print("artifacts:", sorted(p.name for p in out.iterdir()))

print("\nrunning the Markov-weight fixture (nontrivial GL decay) ...")
summary = lab.run("configs/markov_gl_f2.json", output_dir=str(out / "gl"))
print("fitted lambda_GL:", round(summary["fitted"]["lambda_gl"], 4),
      " R^2:", round(summary["fitted"]["gl_r2"], 6))

print("\nrunning the (2,3,7) triangle fixture (ball-avoiding decay) ...")
summary = lab.run("configs/triangle_237.json", output_dir=str(out / "tri"))
print("log2(-log2 value) points:", summary["fitted"]["superexp_points"])
print("assertions:", summary["assertions"])
