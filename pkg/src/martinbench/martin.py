"""Martin kernels, boundary measures, the Martin metric and the
visual-to-Martin Hoelder comparison.

Kernel evaluations use Green rows (one adjoint solve per evaluation state
yields the kernel against every target simultaneously); limits along rays
are replaced by finite-depth sequences with Cauchy diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extension import TruncatedOperator, green_apply, green_row
from .groups import BoundaryRay, GroupElement

__all__ = [
    "martin_kernel",
    "kernel_along_ray",
    "BoundaryMeasureEstimate",
    "boundary_measure",
    "conformality_residual",
    "CoefficientScheme",
    "coefficients",
    "martin_delta",
    "martin_distance_along_rays",
    "holder_fit",
    "kernel_divergence_scan",
    "green_decay_scan",
]


class DisconnectedStateError(RuntimeError):
    pass


def _ball_index(op: TruncatedOperator, g):
    if isinstance(g, GroupElement):
        i = op.ball.index_of(g)
    elif isinstance(g, tuple):
        i = op.ball.index_of_word(g)
    else:
        i = int(g)
    if i is None:
        raise ValueError("group element outside enumerated ball")
    return i


def _state_atom(op: TruncatedOperator, state) -> int:
    word, g = state
    return op.atom(tuple(word), _ball_index(op, g))


def group_marginal(op: TruncatedOperator, vec: np.ndarray) -> np.ndarray:
    """Sum a vector over the cylinder coordinate: per-group-index masses."""
    return vec.reshape(op.n_words, len(op.ball)).sum(axis=0)


def martin_kernel(op: TruncatedOperator, h, state, r: float, tol: float = 1e-10,
                  row: np.ndarray = None) -> dict:
    """K_r(h, state) = G_r(X_h)(state) / G_r(X_id)(state) with error propagation.

    ``row`` may carry a precomputed Green row at the state; otherwise one
    adjoint solve is performed.
    """
    atom = _state_atom(op, state)
    if row is None:
        row = green_row(op, atom, r, tol=tol)
    hi = _ball_index(op, h)
    marg = group_marginal(op, row)
    num = float(marg[hi])
    den = float(marg[0])
    if den <= tol:
        raise DisconnectedStateError("state effectively disconnected at this truncation")
    value = num / den
    err = tol * (1.0 + value) / den
    return {"value": value, "numerator": num, "denominator": den, "err": err,
            "h": hi, "state_atom": atom, "r": r}


def kernel_along_ray(op: TruncatedOperator, h, ray: BoundaryRay, depths, r: float,
                     tol: float = 1e-10) -> dict:
    """Kernel sequence K_r(h, .) at successive ray states with a Cauchy report.

    Hard error when a prefix leaves the ball; the |h|+2 margin is reported as
    a flag so shallow-margin evaluations are visibly less trustworthy.
    """
    hi = _ball_index(op, h)
    h_len = int(op.ball.dist[hi])
    values = []
    margin_ok = True
    for d in depths:
        g = ray.at(d)
        gi = op.ball.index_of(g)
        if gi is None:
            raise ValueError("ball too small for depth %d" % d)
        if op.ball.radius - d < h_len + 2:
            margin_ok = False
        k = martin_kernel(op, hi, (op.words[0], gi), r, tol=tol)
        values.append((d, k["value"]))
    logs = [np.log(v) for _, v in values if v > 0]
    gaps = [abs(logs[i + 1] - logs[i]) for i in range(len(logs) - 1)]
    sup_tail = max(gaps[-max(1, len(gaps) // 2):], default=0.0)
    rate = None
    if len(gaps) >= 3 and all(g > 0 for g in gaps):
        ys = np.log(gaps)
        xs = np.arange(len(gaps), dtype=float)
        rate = float(np.exp(np.polyfit(xs, ys, 1)[0]))
    return {"values": values, "cauchy_gap": sup_tail, "fitted_decay": rate,
            "margin_ok": margin_ok}


@dataclass
class BoundaryMeasureEstimate:
    """Normalized Green row along a ray: mu_hat(f) = row . f at each depth."""

    ray: BoundaryRay
    r: float
    depths: list
    rows: list                  # normalized rows (denominator = 1 on X_id)
    table: dict                 # (depth, ball index) -> mu_hat(X_g)
    converged: bool
    cauchy_gap: float

    def measure_of(self, op: TruncatedOperator, f: np.ndarray, depth=None) -> float:
        row = self.rows[-1] if depth is None else self.rows[self.depths.index(depth)]
        return float(row @ f)


def boundary_measure(op: TruncatedOperator, ray: BoundaryRay, r: float, depths,
                     test_radius: int = None, tol: float = 1e-10,
                     cauchy_tol: float = 1e-3) -> BoundaryMeasureEstimate:
    """Estimate mu_sigma by kernel rows at increasing ray depth.

    The row at each depth is the Green row at the ray state divided by its
    X_id mass, so mu_hat(X_id) = 1 identically; convergence is declared when
    the last two depths agree within ``cauchy_tol`` on the test ball.
    """
    depths = sorted(depths)
    N = len(op.ball)
    if test_radius is None:
        test_radius = max(op.ball.radius - max(depths), 1)
    test_idx = np.flatnonzero(op.ball.dist <= test_radius)
    rows = []
    table = {}
    for d in depths:
        g = ray.at(d)
        gi = op.ball.index_of(g)
        if gi is None:
            raise ValueError("ball too small for depth %d" % d)
        atom = op.atom(op.words[0], gi)
        row = green_row(op, atom, r, tol=tol)
        marg = group_marginal(op, row)
        den = float(marg[0])
        if den <= tol:
            raise DisconnectedStateError("state effectively disconnected at this truncation")
        row = row / den
        rows.append(row)
        marg = marg / den
        for ti in test_idx:
            table[(d, int(ti))] = float(marg[int(ti)])
    gap = 0.0
    if len(depths) >= 2:
        d1, d2 = depths[-2], depths[-1]
        for ti in test_idx:
            a, b = table[(d1, int(ti))], table[(d2, int(ti))]
            if a > 0 and b > 0:
                gap = max(gap, abs(np.log(b) - np.log(a)))
    return BoundaryMeasureEstimate(ray, r, list(depths), rows, table,
                                   bool(gap < cauchy_tol), gap)


def conformality_residual(op: TruncatedOperator, estimate: BoundaryMeasureEstimate,
                          r: float, test_ball_radius: int = None) -> float:
    """max over h of |mu(L X_h) - (1/r) mu(X_h)| / ((1/r) mu(X_h)).

    A converged boundary-measure estimate should be 1/r-conformal; a defect
    O(1) flags a non-boundary measure.
    """
    row = estimate.rows[-1]
    if test_ball_radius is None:
        test_ball_radius = max(op.ball.radius // 3, 1)
    # mu(L X_h) = (L^T row) . X_h, so one transpose matvec covers every h
    lhs_marg = group_marginal(op, op.matrix.T @ row)
    rhs_marg = group_marginal(op, row) / r
    worst = 0.0
    for hi in np.flatnonzero(op.ball.dist <= test_ball_radius):
        lhs, rhs = float(lhs_marg[hi]), float(rhs_marg[hi])
        if rhs > 0:
            worst = max(worst, abs(lhs - rhs) / rhs)
    return worst


@dataclass
class CoefficientScheme:
    """Summable weights c_h for the Martin metric."""

    lam_gl: float
    ball_radius: int
    c: np.ndarray               # per ball index; 0 beyond the scheme radius
    log_green_at_id: np.ndarray

    def tail_bound(self, log_kernel_bound: float) -> float:
        lam2 = self.lam_gl ** 2
        # sum over |h| > ball_radius of c_h, against a uniform kernel bound
        tail_c = lam2 ** (self.ball_radius + 1) / (1.0 - lam2)
        return 2.0 * log_kernel_bound * tail_c


def coefficients(op: TruncatedOperator, lam_gl: float, r: float,
                 scheme_radius: int = None, tol: float = 1e-10) -> CoefficientScheme:
    """c_h = lam^(2|h|) / (#sphere(|h|) . |log G_r(X_h)(x, id)|), c_id by convention.

    The Green values at the identity state come from a single adjoint solve;
    the identity's vanishing log is replaced by max(|log G_r(X_id)|, 1),
    which changes the metric only by equivalence.
    """
    if not (0.0 < lam_gl < 1.0):
        raise ValueError("lam_gl must be in (0,1)")
    ball = op.ball
    if scheme_radius is None:
        scheme_radius = ball.radius
    row = green_row(op, op.atom(op.words[0], 0), r, tol=tol)
    N = len(ball)
    green_at_id = group_marginal(op, row)
    sphere_counts = np.array([int(np.sum(ball.dist == d)) for d in range(ball.radius + 1)])
    c = np.zeros(N)
    logs = np.zeros(N)
    for gi in range(N):
        d = int(ball.dist[gi])
        if d > scheme_radius or green_at_id[gi] <= 0:
            continue
        lg = abs(float(np.log(green_at_id[gi])))
        logs[gi] = lg
        denom_log = max(lg, 1.0) if d == 0 else lg
        if denom_log == 0.0:
            continue
        c[gi] = lam_gl ** (2 * d) / (sphere_counts[d] * denom_log)
    return CoefficientScheme(lam_gl, scheme_radius, c, logs)


def _log_kernel_table(op: TruncatedOperator, state, r: float, tol: float) -> np.ndarray:
    atom = _state_atom(op, state)
    row = green_row(op, atom, r, tol=tol)
    N = len(op.ball)
    vals = group_marginal(op, row)
    den = vals[0]
    if den <= tol:
        raise DisconnectedStateError("state effectively disconnected at this truncation")
    out = np.full(N, np.nan)
    pos = vals > 0
    out[pos] = np.log(vals[pos] / den)
    return out


def martin_delta(op: TruncatedOperator, state1, state2, r: float,
                 scheme: CoefficientScheme, tol: float = 1e-10) -> dict:
    """Delta_r(state1, state2) = sum_h c_h |log K(h,s1) - log K(h,s2)|, truncated.

    Returns the truncated sum plus the scheme's certified tail bound.
    """
    lk1 = _log_kernel_table(op, state1, r, tol)
    lk2 = _log_kernel_table(op, state2, r, tol)
    both = ~np.isnan(lk1) & ~np.isnan(lk2) & (scheme.c > 0)
    value = float(np.sum(scheme.c[both] * np.abs(lk1[both] - lk2[both])))
    log_bound = float(np.nanmax(np.abs(np.concatenate([lk1, lk2]))))
    return {"value": value, "tail_bound": scheme.tail_bound(log_bound)}


def martin_distance_along_rays(op: TruncatedOperator, ray1: BoundaryRay, ray2: BoundaryRay,
                               r: float, scheme: CoefficientScheme, depths,
                               tol: float = 1e-10) -> dict:
    """Delta_r at matched ray depths, approximating d_Martin(Xi sigma, Xi sigma~)."""
    seq = []
    for d in sorted(depths):
        s1 = (op.words[0], ray1.at(d))
        s2 = (op.words[0], ray2.at(d))
        seq.append((d, martin_delta(op, s1, s2, r, scheme, tol=tol)["value"]))
    vals = [v for _, v in seq]
    gap = abs(vals[-1] - vals[-2]) / max(abs(vals[-1]), 1e-300) if len(vals) >= 2 else 0.0
    return {"sequence": seq, "value": vals[-1], "relative_gap": gap,
            "converged": gap < 1e-2}


def holder_fit(pairs, lam_gl: float, lam_visual: float, growth: float,
               eps: float = 0.1) -> dict:
    """Least-squares slope of log d_Martin against log d_visual.

    ``pairs`` is a list of (d_visual, d_martin).  Returns the fitted slope
    with its standard error, the exponents alpha = log lam / log lam_visual
    and beta = (2 log lam - log(growth + eps)) / log lam_visual, and whether
    the slope lies in [alpha, beta] within fit error.
    """
    pts = [(dv, dm) for dv, dm in pairs if dv > 0 and dm > 0]
    if len(pts) < 3:
        raise ValueError("insufficient sample")
    xs = np.log([dv for dv, _ in pts])
    ys = np.log([dm for _, dm in pts])
    if np.ptp(xs) < 1e-12:
        raise ValueError("insufficient spread (single product value)")
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ys - A @ coef
    dof = max(len(pts) - 2, 1)
    s2 = float(resid @ resid) / dof
    slope_err = float(np.sqrt(s2 / np.sum((xs - xs.mean()) ** 2)))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    alpha = np.log(lam_gl) / np.log(lam_visual)
    beta = (2 * np.log(lam_gl) - np.log(growth + eps)) / np.log(lam_visual)
    lo, hi = min(alpha, beta), max(alpha, beta)
    within = (slope >= lo - 2 * slope_err) and (slope <= hi + 2 * slope_err)
    return {"slope": slope, "slope_err": slope_err, "intercept": intercept,
            "alpha": float(alpha), "beta": float(beta), "r2": r2,
            "within_bounds": bool(within), "n_pairs": len(pts)}


def kernel_divergence_scan(op: TruncatedOperator, ray1: BoundaryRay, ray2: BoundaryRay,
                           r: float, depths, eval_depth: int = None,
                           tol: float = 1e-10) -> dict:
    """mu_sigma(X_gamma) and mu_sigma~(X_gamma) for gamma along ray1.

    Checks the divergence/decay trend beyond a burn-in depth: the measure of
    its own ray's cells grows, the other ray's decays.
    """
    depths = sorted(depths)
    if eval_depth is None:
        eval_depth = op.ball.radius - 1
    est1 = boundary_measure(op, ray1, r, [eval_depth], tol=tol)
    est2 = boundary_measure(op, ray2, r, [eval_depth], tol=tol)
    marg1 = group_marginal(op, est1.rows[-1])
    marg2 = group_marginal(op, est2.rows[-1])
    table = []
    for d in depths:
        gi = op.ball.index_of(ray1.at(d))
        if gi is None:
            raise ValueError("ball too small for depth %d" % d)
        table.append((d, float(marg1[gi]), float(marg2[gi])))
    own = [v for _, v, _ in table]
    other = [v for _, _, v in table]
    burn = 1 if len(table) > 2 else 0
    grow = all(own[i + 1] > own[i] for i in range(burn, len(own) - 1))
    decay = all(other[i + 1] < other[i] for i in range(burn, len(other) - 1))
    return {"table": table, "diverges_along_own_ray": grow,
            "decays_along_other_ray": decay}


def green_decay_scan(op: TruncatedOperator, g, r: float, max_n: int,
                     tol: float = 1e-10) -> dict:
    """Sphere maxima of G_r(X_g)(., gamma) and their n-th roots."""
    gi = _ball_index(op, g)
    res = green_apply(op, op.group_mask_vector([gi]), r, tol=tol)
    vals = res.values.reshape(op.n_words, len(op.ball))
    rows = []
    for n in range(0, max_n + 1):
        sphere = np.flatnonzero(op.ball.dist == n)
        if len(sphere) == 0:
            break
        mx = float(np.max(vals[:, sphere]))
        root = mx ** (1.0 / n) if n >= 1 and mx > 0 else None
        rows.append({"n": n, "max": mx, "root": root})
    roots = [row["root"] for row in rows if row["root"] is not None]
    return {"rows": rows, "final_root": roots[-1] if roots else None}
