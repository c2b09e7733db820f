"""Command-line surface: ``martin-bench run <config.json>`` plus direct
subcommands mirroring the module operations.

Measure specifications for the potential-theory subcommands are JSON maps
from atom keys ``"<cylinder symbols>|<group spelling>"`` to values, e.g.
``{"0|": 1.0, "2|ab": 0.5}`` (empty spelling = identity).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import lab
from .extension import build_truncated_operator, green_apply, rho_estimate
from .groups import BoundaryRay
from .martin import (
    boundary_measure,
    coefficients,
    conformality_residual,
    holder_fit,
    martin_distance_along_rays,
    martin_kernel,
)
from .potential import (
    check_excessive,
    domination_check,
    green_adjoint_apply,
    reduce_measure,
    riesz_decompose,
)


def _emit(obj):
    json.dump(obj, sys.stdout, sort_keys=True, default=_jsonable)
    sys.stdout.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _build_op(args):
    cfg = lab.load_config(args.config)
    if args.profile:
        cfg["profile"] = args.profile
        trunc = dict(lab.PROFILES[args.profile])
        trunc.update({k: v for k, v in cfg.get("truncation", {}).items()
                      if k not in ("radius", "depth_m")})
        cfg["truncation"] = trunc
    if args.radius:
        cfg["truncation"]["radius"] = args.radius
    if args.depth:
        cfg["truncation"]["depth_m"] = args.depth
    system = lab.system_from_config(cfg)
    op = build_truncated_operator(system, cfg["truncation"]["depth_m"],
                                  cfg["truncation"]["radius"])
    op.real_spectrum = bool(cfg.get("real_spectrum", True))
    return cfg, system, op


def _parse_measure(op, path_or_json) -> np.ndarray:
    text = open(path_or_json).read() if os.path.exists(path_or_json) else path_or_json
    spec = json.loads(text)
    vec = np.zeros(op.n_atoms)
    model = op.system.group
    for key, value in spec.items():
        cyl_s, _, spelled = key.partition("|")
        word = tuple(int(ch) for ch in cyl_s) if cyl_s else op.words[0]
        gi = op.ball.index_of_word(
            tuple(model.gen_names.index(c) for c in spelled))
        if gi is None:
            raise SystemExit(f"atom {key!r}: group element outside ball")
        vec[op.atom(word, gi)] = float(value)
    return vec


def _ray(model, spec: str) -> BoundaryRay:
    prefix, _, period = spec.partition(":")
    return BoundaryRay.from_spelling(model, prefix, period or prefix[-1])


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="martin-bench")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("config")
        sp.add_argument("--profile", choices=sorted(lab.PROFILES), default=None)
        sp.add_argument("--radius", type=int, default=None)
        sp.add_argument("--depth", type=int, default=None)
        sp.add_argument("--r", type=float, default=1.0)
        sp.add_argument("--tol", type=float, default=1e-10)

    sp_run = sub.add_parser("run", help="execute the scans of a config file")
    sp_run.add_argument("config")
    sp_run.add_argument("--profile", choices=sorted(lab.PROFILES), default=None)
    sp_run.add_argument("--output-dir", default=None)

    for name in ("rho", "green", "kernel", "boundary-measure", "martin-metric",
                 "holder-fit", "ancona-scan", "gl-scan", "decay-scan",
                 "reduce", "riesz", "dominate"):
        spx = sub.add_parser(name)
        common(spx)
        if name == "kernel":
            spx.add_argument("--h", required=True, help="target group element spelling")
            spx.add_argument("--state", default=":", help="'<cyl>|<group>' evaluation state")
        if name in ("boundary-measure", "martin-metric"):
            spx.add_argument("--ray", required=True, help="'<prefix>:<period>'")
            spx.add_argument("--depths", default=None, help="comma list")
        if name == "martin-metric":
            spx.add_argument("--ray2", required=True)
            spx.add_argument("--lam-gl", type=float, default=0.5)
        if name == "holder-fit":
            spx.add_argument("--pairs", required=True,
                             help="JSON list of [d_visual, d_martin] pairs or CSV path")
            spx.add_argument("--lam-gl", type=float, required=True)
            spx.add_argument("--lam-visual", type=float, default=float(np.exp(-1)))
            spx.add_argument("--growth", type=float, required=True)
            spx.add_argument("--eps", type=float, default=0.1)
        if name in ("reduce", "riesz", "dominate"):
            spx.add_argument("--measure", required=True, help="atom->value JSON (or path)")
            spx.add_argument("--atoms", default=None, help="comma list of group spellings for A")
        if name == "dominate":
            spx.add_argument("--charge", required=True, help="atom->value JSON for nu")

    args = p.parse_args(argv)
    if args.cache_dir:
        os.environ["MARTINBENCH_CACHE"] = args.cache_dir

    if args.cmd == "run":
        summary = lab.run(args.config, output_dir=args.output_dir,
                          threads=args.threads, seed=args.seed)
        _emit(summary)
        return int(summary.get("exit_code", 2))

    if args.cmd == "holder-fit":
        if os.path.exists(args.pairs):
            rows = [line.strip().split(",") for line in open(args.pairs) if line.strip()]
            pairs = [(float(a), float(b)) for a, b in rows if a.replace(".", "").replace("-", "").isdigit() or True][1:]
        else:
            pairs = [tuple(map(float, pr)) for pr in json.loads(args.pairs)]
        _emit(holder_fit(pairs, args.lam_gl, args.lam_visual, args.growth, args.eps))
        return 0

    cfg, system, op = _build_op(args)
    model = system.group

    if args.cmd == "rho":
        _emit(rho_estimate(system, cfg["truncation"]["depth_m"],
                           cfg["truncation"]["radius"]))
        return 0
    if args.cmd == "green":
        res = green_apply(op, op.group_mask_vector([0]), args.r, tol=args.tol,
                          method="auto")
        _emit({"r": args.r, "value": res.value_at(op, op.words[0], 0),
               "tail": res.tail_estimate, "exit_bound": res.exit_bound,
               "iterations": res.iterations})
        return 0
    if args.cmd == "kernel":
        h = model.element(args.h)
        cyl_s, _, spelled = args.state.partition("|")
        word = tuple(int(c) for c in cyl_s) if cyl_s else op.words[0]
        gi = op.ball.index_of(model.element(spelled))
        _emit(martin_kernel(op, h, (word, gi), args.r, tol=args.tol))
        return 0
    if args.cmd == "boundary-measure":
        ray = _ray(model, args.ray)
        depths = [int(d) for d in (args.depths or "").split(",") if d] or \
            [op.ball.radius - 3, op.ball.radius - 2]
        est = boundary_measure(op, ray, args.r, depths, tol=args.tol)
        resid = conformality_residual(op, est, args.r)
        _emit({"depths": est.depths, "converged": est.converged,
               "cauchy_gap": est.cauchy_gap, "conformality_residual": resid})
        return 0
    if args.cmd == "martin-metric":
        ray1, ray2 = _ray(model, args.ray), _ray(model, args.ray2)
        depths = [int(d) for d in (args.depths or "").split(",") if d] or \
            [op.ball.radius - 3, op.ball.radius - 2]
        scheme = coefficients(op, args.lam_gl, args.r, tol=args.tol)
        _emit(martin_distance_along_rays(op, ray1, ray2, args.r, scheme, depths,
                                         tol=args.tol))
        return 0
    if args.cmd == "ancona-scan":
        blk = cfg.get("scans", {}).get("ancona", {})
        res = lab.ancona_scan(op, [args.r], int(blk.get("arm", 3)),
                              D=int(blk.get("D", 0)), cap=int(blk.get("cap", 500)),
                              seed=int(cfg.get("seed", 0)))
        _emit({"C_max": {repr(k): v for k, v in res["C_max"].items()},
               "n_records": len(res["records"])})
        return 0
    if args.cmd == "gl-scan":
        blk = cfg.get("scans", {}).get("gl", {})
        res = lab.gl_scan(op, args.r, blk.get("segment_lengths", [2, 3, 4, 5, 6]))
        _emit({k: res[k] for k in ("lambda_gl", "C", "r2", "degenerate", "max_quantity")})
        return 0
    if args.cmd == "decay-scan":
        arm = op.ball.radius // 2
        ball = op.ball
        gi = int(ball.sphere(arm)[0])
        dist_g = lab._bfs_from(ball, gi)
        cands = [int(i) for i in ball.sphere(arm) if dist_g[i] == 2 * arm]
        res = lab.superexp_decay_scan(op, args.r, list(range(0, arm)), gi, cands[0])
        _emit(res)
        return 0
    if args.cmd == "reduce":
        mu = _parse_measure(op, args.measure)
        A = _atoms_from_arg(op, model, args.atoms)
        res = reduce_measure(op, mu, A, args.r)
        _emit({"measure": res["measure"], "excessive": res["excessive"],
               "worst_excessive_violation": res["worst_excessive_violation"]})
        return 0
    if args.cmd == "riesz":
        mu = _parse_measure(op, args.measure)
        dec = riesz_decompose(op, mu, args.r)
        _emit({"conformal_part": dec.conformal_part, "charge": dec.charge,
               "reconstruction_residual": dec.reconstruction_residual,
               "conformal_defect": dec.conformal_defect})
        return 0
    if args.cmd == "dominate":
        mu = _parse_measure(op, args.measure)
        nu = _parse_measure(op, args.charge)
        A = _atoms_from_arg(op, model, args.atoms)
        _emit(domination_check(op, mu, nu, A, args.r))
        return 0
    return 2


def _atoms_from_arg(op, model, arg):
    if not arg:
        return np.arange(op.n_atoms)
    idxs = []
    for spelled in arg.split(","):
        gi = op.ball.index_of(model.element(spelled))
        if gi is None:
            raise SystemExit(f"group element {spelled!r} outside ball")
        for w in op.words:
            idxs.append(op.atom(w, gi))
    return np.asarray(sorted(idxs))


if __name__ == "__main__":
    raise SystemExit(main())
