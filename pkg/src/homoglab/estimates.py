"""Measurement harness for the weighted inequalities.

Constants are estimated as suprema over seeded random trial families, never
as solved-for extremals: the stable lower envelope across parameter ladders
is the testable surrogate for "the constant is uniform".  Ratios follow the
squared-norm convention of the Dirichlet estimate, i.e. a reported constant
C bounds int |grad u|^2 w <= C int |f|^2 w on the trial family.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fem, geometry
from .weights import constant_weight, make_distance_weight


class EstimateError(ValueError):
    pass


@dataclass
class ConstantEstimate:
    inequality: str
    constant: float
    n_trials: int
    worst_trial: str
    config_hash: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class RateFit:
    ladder: np.ndarray
    errors: np.ndarray
    slope: float
    residual: float


@dataclass
class DecompositionProbe:
    records: list
    triangle_inequality_violation: float


def config_hash(obj):
    """Stable digest of a canonicalized JSON-able config document."""
    doc = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Dirichlet constants

def trial_flux(mesh, m, seed, trial, generator="trig"):
    """Seeded trial flux; the seed depends only on (seed, trial), never on
    the sweep cell, so families are shared across (eps, sigma) cells."""
    if generator == "trig":
        return fem.random_trig_flux(mesh, m, (int(seed), int(trial)))
    if generator == "piecewise":
        return fem.random_piecewise_flux(mesh, m, (int(seed), int(trial)))
    raise EstimateError(f"unknown flux generator '{generator}'")


def dirichlet_trial_bank(domain, coef, eps, h, trials, seed, generator="trig",
                         mesh=None):
    """Solve the Dirichlet problem for every trial flux at fixed (eps, h).

    Returns (mesh, list of (f, grad)); the factorization is reused across
    trials.
    """
    if mesh is None:
        mesh = geometry.triangulate(domain, h)
    system = fem.assemble(mesh, coef, eps, fem.ProblemData())
    solver = fem.factorized_solver(system)
    bank = []
    for t in range(trials):
        f = trial_flux(mesh, coef.m, seed, t, generator)
        sol = solver(fem.ProblemData(f=f))
        bank.append((f, sol.grad))
    return mesh, bank


def weighted_ratios(mesh, bank, w):
    """Per-trial ratios int |grad u|^2 w / int |f|^2 w (zero-norm trials NaN)."""
    out = np.empty(len(bank))
    for t, (f, grad) in enumerate(bank):
        den = fem.weighted_norm(f, w, mesh)
        out[t] = fem.weighted_norm(grad, w, mesh) / den if den > 0 else np.nan
    return out


def estimate_dirichlet_constant(domain, coef, eps, w, trials=20, seed=0,
                                h=None, generator="trig", mesh=None):
    """Sup over a trial family of the weighted Dirichlet ratio."""
    if h is None:
        h = eps / 8
    mesh, bank = dirichlet_trial_bank(domain, coef, eps, h, trials, seed,
                                      generator, mesh=mesh)
    ratios = weighted_ratios(mesh, bank, w)
    valid = np.isfinite(ratios)
    if not valid.any():
        raise EstimateError("all trials had zero-norm data")
    worst = int(np.nanargmax(ratios))
    return ConstantEstimate(
        inequality="dirichlet_weighted", constant=float(np.nanmax(ratios)),
        n_trials=int(valid.sum()), worst_trial=f"trial{worst}",
        extra={"ratios": ratios})


# ---------------------------------------------------------------------------
# Local solution probes

def _region_masks(local, ball):
    c = local.mesh.centroids()
    d2 = ((c - ball.center) ** 2).sum(axis=1)
    return d2 <= ball.radius ** 2, d2 <= (2 * ball.radius) ** 2


def _avg_sq_weighted(local, mask, w, field=None):
    """(1/|R|) int_R |field|^2 w over a triangle mask of the local submesh."""
    field = local.grad if field is None else field
    area = fem.region_area(local.mesh, mask)
    if area == 0:
        return None, 0.0
    return fem.weighted_norm(field, w, local.mesh, region=mask) / area, area


def check_reverse_holder(domain, coef, eps, w, balls, trials_per_ball=5,
                         seed=0, h=1 / 64, mesh=None):
    """Measured constant of the single-weight reverse Hoelder condition:
    avg_{B cap O} |grad u|^2 w <= C avg_{2B cap O} |grad u|^2 avg_B w
    over local solutions with random traces.

    avg_B w uses the same triangle quadrature restricted to B cap Omega, so
    a constant-gradient solution scores exactly 1 for any weight.
    """
    if mesh is None:
        mesh = geometry.triangulate(domain, h)
    one = constant_weight(1.0)
    sup, worst, n = -np.inf, "", 0
    for bi, ball in enumerate(balls):
        for t in range(trials_per_ball):
            loc = fem.solve_local(mesh, ball, coef, eps,
                                  seed=(int(seed), bi, t))
            in_b, in_2b = _region_masks(loc, ball)
            num, a1 = _avg_sq_weighted(loc, in_b, w)
            den_grad, a2 = _avg_sq_weighted(loc, in_2b, one)
            if num is None or den_grad is None or den_grad < 1e-14:
                continue  # degenerate trial or ball sliver
            ones = np.ones((loc.mesh.n_triangles, 1, 1))
            avg_w = fem.weighted_norm(ones, w, loc.mesh, region=in_b) / a1
            ratio = num / (den_grad * avg_w)
            n += 1
            if ratio > sup:
                sup, worst = ratio, f"ball{bi}:trial{t}"
    if n == 0:
        raise EstimateError("no admissible reverse-Hoelder trial")
    return ConstantEstimate(inequality="reverse_holder", constant=float(sup),
                            n_trials=n, worst_trial=worst)


def probe_higher_integrability(domain, coef, eps, w, balls, trials_per_ball=3,
                               p_ladder=(2.25, 2.5, 3.0, 4.0), cap=8.0,
                               seed=0, h=1 / 64, mesh=None):
    """Largest p with the weighted-gradient L^p/L^1 ratio under the cap:
    (avg_B |grad u . w^(1/2)|^p)^(1/p) <= C avg_{2B} |grad u . w^(1/2)|."""
    if mesh is None:
        mesh = geometry.triangulate(domain, h)
    sups = {p: 0.0 for p in p_ladder}
    n = 0
    for bi, ball in enumerate(balls):
        for t in range(trials_per_ball):
            loc = fem.solve_local(mesh, ball, coef, eps,
                                  seed=(int(seed), bi, t))
            in_b, in_2b = _region_masks(loc, ball)
            areas = loc.mesh.tri_areas()
            wq = w(loc.mesh.weight_quad_points().reshape(-1, 2)) \
                .reshape(-1, 3).mean(axis=1)
            v = np.sqrt((loc.grad ** 2).sum(axis=(1, 2)) * wq)
            a1, a2 = areas[in_b].sum(), areas[in_2b].sum()
            den = (v[in_2b] * areas[in_2b]).sum() / a2 if a2 > 0 else 0.0
            if a1 == 0 or den < 1e-14:
                continue
            n += 1
            for p in p_ladder:
                lhs = ((v[in_b] ** p * areas[in_b]).sum() / a1) ** (1.0 / p)
                sups[p] = max(sups[p], lhs / den)
    if n == 0:
        raise EstimateError("no admissible higher-integrability trial")
    passing = [p for p in p_ladder if sups[p] <= cap]
    p_star = max(passing) if passing else 0.0
    return ConstantEstimate(
        inequality="higher_integrability",
        constant=float(sups[p_star]) if p_star else float(sups[p_ladder[0]]),
        n_trials=n, worst_trial=f"p={p_star}", extra={"table": sups,
                                                      "largest_p": p_star})


# ---------------------------------------------------------------------------
# Two-scale expansion

def default_smooth_flux(mesh, m, power=1.75, scale=30.0):
    """Fixed smooth flux used for convergence-rate ladders.

    The gradient of a boundary-flat bubble: the homogenized solution then has
    a gradient vanishing toward the boundary, which keeps the eps ladder of
    the rate study out of the boundary-layer-dominated preasymptotic regime.
    """
    pts = mesh.edge_midpoints()
    x, y = pts[..., 0], pts[..., 1]
    lo, hi = mesh.domain.bounding_box
    xs = (x - lo[0]) / (hi[0] - lo[0])
    ys = (y - lo[1]) / (hi[1] - lo[1])
    q = xs * (1 - xs) * ys * (1 - ys)
    gx = power * q ** (power - 1) * (1 - 2 * xs) * ys * (1 - ys)
    gy = power * q ** (power - 1) * xs * (1 - xs) * (1 - 2 * ys)
    base = -scale * np.stack([gx, gy], axis=-1)
    out = np.zeros(pts.shape[:-1] + (m, 2))
    for al in range(m):
        out[..., al, :] = base / (1.0 + al)
    return out


def nodal_average(mesh, tri_field):
    """Area-weighted projection of a per-triangle field to vertices."""
    tri_field = np.asarray(tri_field, dtype=float)
    lead = tri_field.shape[1:]
    flat = tri_field.reshape(len(tri_field), -1)
    V = mesh.n_vertices
    acc = np.zeros((V, flat.shape[1]))
    wsum = np.zeros(V)
    w3 = np.repeat(mesh.tri_areas() / 3.0, 3)
    np.add.at(wsum, mesh.triangles.ravel(), w3)
    np.add.at(acc, mesh.triangles.ravel(),
              np.repeat(flat, 3, axis=0) * w3[:, None])
    return (acc / wsum[:, None]).reshape((V,) + lead)


def patch_recovery_hessian(mesh, grad):
    """Second-gradient estimate: per-triangle gradient of the node-recovered
    gradient (Zienkiewicz-Zhu style), (T, m, d, d)."""
    G = nodal_average(mesh, grad)                       # (V, m, d)
    Gt = G[mesh.triangles]                              # (T, 3, m, d)
    return np.einsum("txak,txi->taki", Gt, mesh.tri_grads())


def two_scale_error(domain, coef, cset, eps, h=None, f=None, tol=1e-10):
    """Two-scale expansion errors for matched oscillating/homogenized solves.

    Returns gradient norms of the full remainder w_eps, the corrector
    approximation error, the boundary-layer and interior-curvature terms of
    the energy bound, and the implied constant of that bound.
    """
    if h is None:
        h = eps / 16
    if h > eps / 16 * (1 + 1e-9):
        raise EstimateError("two-scale differences need h <= eps/16")
    mesh = geometry.triangulate(domain, h)
    m = coef.m
    if f is None:
        f = default_smooth_flux(mesh, m)
    data = fem.ProblemData(f=f)
    A_hat_coef = fem.constant_matrix_coefficient("homogenized", cset.A_hat,
                                                 m=m)
    sol_eps = fem.solve(fem.assemble(mesh, coef, eps, data), tol=tol)
    sol_0 = fem.solve(fem.assemble(mesh, A_hat_coef, 1.0, data), tol=tol)

    eta = geometry.build_cutoff(mesh, eps)
    grad0_nodal = nodal_average(mesh, sol_0.grad)       # (V, m, d)
    verts_y = mesh.vertices / eps
    tri_y = mesh.centroids() / eps

    # chi(x/eps) at vertices: (j, be, V, m); (grad chi)(x/eps) per triangle
    chi_v = np.stack([[cset.mesh.interpolate(cset.chi[j, be], verts_y)
                       for be in range(m)] for j in range(2)])
    cell_tri = cset.mesh.locate(tri_y)
    gchi_t = cset.grad_chi[:, :, cell_tri]              # (j, be, T, m, d)

    # w_eps = u_eps - u_0 - eps chi^eps (eta grad u_0):
    # correction_al = sum_{j,be} chi_j^{al be}(x/eps) eta(x) d_j u0^be(x)
    corr = np.einsum("jbva,v,vbj->va", chi_v, eta, grad0_nodal)
    w = sol_eps.u - sol_0.u - eps * corr
    grad_w = fem.gradient(w, mesh)

    eta_t = eta[mesh.triangles].mean(axis=1)
    gc = np.einsum("jbtai,t,tbj->tai", gchi_t, eta_t, sol_0.grad)
    approx = sol_eps.grad - sol_0.grad - gc

    one = constant_weight(1.0)
    layer5 = geometry.boundary_layer(mesh, 5 * eps)
    inner = np.setdiff1d(np.arange(mesh.n_triangles),
                         geometry.boundary_layer(mesh, 4 * eps))
    hess = patch_recovery_hessian(mesh, sol_0.grad)
    norm_w = np.sqrt(fem.weighted_norm(grad_w, one, mesh))
    norm_approx = np.sqrt(fem.weighted_norm(approx, one, mesh))
    bl = np.sqrt(fem.weighted_norm(sol_0.grad, one, mesh, region=layer5))
    curv = eps * np.sqrt(fem.weighted_norm(hess, one, mesh, region=inner))
    bound = bl + curv
    return {
        "grad_w": norm_w,
        "corrector_approx": norm_approx,
        "boundary_layer": bl,
        "interior_curvature": curv,
        "implied_constant": norm_w / bound if bound > 0 else np.inf,
        "grad_u0": np.sqrt(fem.weighted_norm(sol_0.grad, one, mesh)),
        "grad_ueps": np.sqrt(fem.weighted_norm(sol_eps.grad, one, mesh)),
    }


def fit_rate(ladder, errors):
    """Least-squares slope of log error against log eps."""
    ladder = np.asarray(ladder, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(np.diff(ladder) >= 0):
        raise EstimateError("ladder must be strictly decreasing")
    keep = errors > 0
    if keep.sum() < 3:
        raise EstimateError("insufficient data: need >= 3 positive errors")
    x, y = np.log(ladder[keep]), np.log(errors[keep])
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return RateFit(ladder=ladder[keep], errors=errors[keep],
                   slope=float(slope), residual=resid)


# ---------------------------------------------------------------------------
# Hardy inequality

def _p1_at_quad(mesh, nodal):
    """P1 evaluation of a nodal function at the offset weight-quad points."""
    q = mesh.weight_quad_points()                       # (T, 3, 2)
    tri = mesh.triangles
    v0 = mesh.vertices[tri[:, 0]]
    g = fem.gradient(nodal, mesh)                       # (T, 1, 2) for scalars
    base = np.asarray(nodal)[tri[:, 0]]
    return base[:, None] + np.einsum("tqi,ti->tq", q - v0[:, None, :],
                                     g[:, 0, :])


def hardy_trials(mesh, domain, n_random=50, seed=0):
    """Trial family: the analytic distance trial, fixed tent bumps, and
    seeded smooth dist-damped oscillations (all vanish on the boundary)."""
    trials = [("dist", mesh.vertex_dist.copy())]
    lo, hi = domain.bounding_box
    centers = lo + np.array([[0.3, 0.3], [0.7, 0.6], [0.45, 0.75]]) * (hi - lo)
    for k, c in enumerate(centers):
        if not domain.contains(c):
            continue
        rad = 0.18 * domain.diameter
        bump = np.clip(1 - np.linalg.norm(mesh.vertices - c, axis=1) / rad, 0, 1)
        trials.append((f"bump{k}", bump * (mesh.vertex_dist > 1e-12)))
    rng = np.random.default_rng(seed)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    for t in range(n_random):
        k, l = rng.integers(1, 4, 2)
        a, b, c, d = rng.standard_normal(4)
        osc = (a * np.sin(np.pi * k * x) * np.sin(np.pi * l * y)
               + b * np.cos(np.pi * l * x) * np.sin(np.pi * k * y)
               + 0.5 * c * np.sin(np.pi * x) + 0.5 * d * np.cos(np.pi * y))
        trials.append((f"random{t}", mesh.vertex_dist * osc))
    return trials


def hardy_check(domain, h=1 / 64, n_random=50, seed=0, mesh=None):
    """Measured Hardy constant sup int u^2 dist^-2 / int |grad u|^2."""
    if mesh is None:
        mesh = geometry.triangulate(domain, h)
    areas = mesh.tri_areas()
    q = mesh.weight_quad_points()
    dq = domain.distance_to_boundary(q.reshape(-1, 2)).reshape(-1, 3)
    sup, worst, n = -np.inf, "", 0
    table = {}
    for name, u in hardy_trials(mesh, domain, n_random, seed):
        gn = fem.weighted_norm(fem.gradient(u, mesh), constant_weight(), mesh)
        if gn < 1e-14:
            continue
        uq = _p1_at_quad(mesh, u)
        num = float((areas * ((uq / dq) ** 2).mean(axis=1)).sum())
        ratio = num / gn
        table[name] = ratio
        n += 1
        if ratio > sup:
            sup, worst = ratio, name
    return ConstantEstimate(inequality="hardy", constant=float(sup),
                            n_trials=n, worst_trial=worst,
                            extra={"table": table})


# ---------------------------------------------------------------------------
# Rough coefficients and the sigma range

def rough_coefficient_sigma_range(domain, sigma_ladder, trials=10, seed=0,
                                  h=1 / 96, blowup_factor=10.0):
    """Per-sigma Dirichlet constants for a deliberately rough coefficient at
    eps = 1; flags the first |sigma| where the constant exceeds the sigma=0
    baseline by the blow-up factor."""
    coef = fem.get_coefficient("rough")
    mesh = geometry.triangulate(domain, h)
    _, bank = dirichlet_trial_bank(domain, coef, 1.0, h, trials, seed,
                                   mesh=mesh)
    out = {}
    for sg in sigma_ladder:
        w = make_distance_weight(domain, sg) if sg != 0 else constant_weight()
        ratios = weighted_ratios(mesh, bank, w)
        worst = int(np.nanargmax(ratios))
        out[float(sg)] = ConstantEstimate(
            inequality="rough_sigma", constant=float(np.nanmax(ratios)),
            n_trials=int(np.isfinite(ratios).sum()),
            worst_trial=f"trial{worst}")
    base = out.get(0.0)
    base_c = base.constant if base else min(e.constant for e in out.values())
    flagged = [sg for sg, e in out.items()
               if e.constant > blowup_factor * base_c]
    return out, (min(np.abs(flagged)) if flagged else None)


# ---------------------------------------------------------------------------
# The F_B / R_B decomposition probe

def decomposition_probe(domain, coef, w, balls, trials=3, p0=1.5, p1=4.0,
                        seed=0, h=1 / 64, eps=1.0, mesh=None):
    """Measure the two-function decomposition built from localized loads.

    For the global solution u of div(A grad u) = div(f) and the local
    solution v of div(A grad v) = div(f phi_B) with phi_B a cutoff that is 1
    on 4B and supported in 5B, records per (ball, trial):
      n1_ratio: (avg_{2B} |grad v|^p0)^(1/p0) over the sup of local f p0-averages
      r_ratio:  the weighted p1-average of |grad(u-v)| over its bound shape
    and checks |grad u| <= |grad v| + |grad(u - v)| trianglewise.
    """
    if mesh is None:
        mesh = geometry.triangulate(domain, h)
    if not coef.is_constant and mesh.h > eps / 8 * (1 + 1e-9):
        raise EstimateError("oscillation unresolved for the probe mesh")
    system = fem.assemble(mesh, coef, eps, fem.ProblemData())
    solver = fem.factorized_solver(system)
    cent = mesh.centroids()
    areas = mesh.tri_areas()
    qpts = mesh.edge_midpoints()
    wq = w(mesh.weight_quad_points().reshape(-1, 2)).reshape(-1, 3).mean(axis=1)
    records = []
    viol = 0.0
    for t in range(trials):
        f = trial_flux(mesh, coef.m, seed, t)
        u = solver(fem.ProblemData(f=f))
        F = np.sqrt((u.grad ** 2).sum(axis=(1, 2)))
        fmag2 = (f ** 2).reshape(len(f), 3, -1).sum(axis=2)   # (T, 3)
        for bi, ball in enumerate(balls):
            c, r = ball.center, ball.radius
            phi_q = np.clip((5 * r - np.linalg.norm(qpts - c, axis=-1)) / r,
                            0.0, 1.0)
            v = solver(fem.ProblemData(f=f * phi_q[..., None, None]))
            FB = np.sqrt((v.grad ** 2).sum(axis=(1, 2)))
            RB = np.sqrt(((u.grad - v.grad) ** 2).sum(axis=(1, 2)))
            viol = max(viol, float((F - FB - RB).max()))
            d2 = ((cent - c) ** 2).sum(axis=1)
            in2, in8 = d2 <= (2 * r) ** 2, d2 <= (8 * r) ** 2
            a2 = areas[in2].sum()
            if a2 == 0:
                continue
            # sup over concentric balls B' >= B of the local f p0-average
            sup_f = 0.0
            for rr in np.geomspace(r, domain.diameter, 8):
                sel = d2 <= rr ** 2
                asel = areas[sel].sum()
                if asel == 0:
                    continue
                avg = (areas[sel, None] / 3.0 * fmag2[sel] ** (p0 / 2)).sum() / asel
                sup_f = max(sup_f, avg ** (1.0 / p0))
            if sup_f < 1e-14:
                continue
            n1 = ((areas[in2] * FB[in2] ** p0).sum() / a2) ** (1.0 / p0) / sup_f
            lhs = ((areas[in2] * RB[in2] ** p1 * wq[in2]).sum() / a2) ** (1.0 / p1)
            a8 = areas[in8].sum()
            f_avg8 = ((areas[in8] * F[in8] ** p0).sum() / a8) ** (1.0 / p0)
            in_b = d2 <= r ** 2
            ab = areas[in_b].sum()
            if ab == 0:
                continue  # ball below mesh resolution; skip like empty balls
            avg_w = (areas[in_b] * wq[in_b]).sum() / ab
            rhs = (f_avg8 + sup_f) * avg_w ** (1.0 / p1)
            if rhs <= 0:
                continue
            records.append({"ball": bi, "trial": t, "n1_ratio": float(n1),
                            "r_ratio": float(lhs / rhs)})
    return DecompositionProbe(records=records,
                              triangle_inequality_violation=viol)


# ---------------------------------------------------------------------------
# Sweeps

@dataclass
class SweepReport:
    rows: list            # dict rows in deterministic order
    config: dict
    hash: str

    def per_sigma_uniformity(self):
        """Per-sigma max/min of the constant across the eps ladder."""
        out = {}
        for row in self.rows:
            if row.get("status", "ok") != "ok":
                continue
            out.setdefault(row["sigma"], []).append(row["constant"])
        return {sg: max(v) / min(v) for sg, v in out.items() if min(v) > 0}


def _sweep_cell(task):
    """One eps-column of the sweep: shared trial bank, per-sigma constants."""
    domain = geometry.get_domain(task["domain"])
    coef = fem.get_coefficient(task["coef"])
    eps = task["eps"]
    h = eps / task["h_rule_den"]
    mesh, bank = dirichlet_trial_bank(domain, coef, eps, h, task["trials"],
                                      task["seed"], task["generator"])
    cells = []
    for sg in task["sigmas"]:
        w = make_distance_weight(domain, sg) if sg != 0 else constant_weight()
        ratios = weighted_ratios(mesh, bank, w)
        worst = int(np.nanargmax(ratios))
        cells.append({"sigma": sg, "constant": float(np.nanmax(ratios)),
                      "worst_trial": f"trial{worst}",
                      "trials": int(np.isfinite(ratios).sum())})
    return cells


def epsilon_sigma_sweep(domain_name, coef_name, eps_ladder, sigma_ladder,
                        trials=20, seed=0, h_rule_den=8, generator="trig",
                        jobs=1, digest=None):
    """Dirichlet-constant matrix over (eps, sigma) with shared trial seeds.

    Cells are independent jobs (parallel over the eps ladder); results are
    collected in deterministic (eps index, sigma index) order and failures
    are recorded as rows with a status field.
    """
    cfg = {"domain": domain_name, "coef": coef_name,
           "eps": list(map(float, eps_ladder)),
           "sigma": list(map(float, sigma_ladder)), "trials": trials,
           "seed": seed, "h_rule_den": h_rule_den, "generator": generator}
    if digest is None:
        digest = config_hash(cfg)
    tasks = [{"domain": domain_name, "coef": coef_name, "eps": float(e),
              "sigmas": list(map(float, sigma_ladder)), "trials": trials,
              "seed": seed, "h_rule_den": h_rule_den, "generator": generator}
             for e in eps_ladder]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]
    rows = []
    for eps, cells in zip(eps_ladder, results):
        if isinstance(cells, Exception):
            rows.append({"inequality": "dirichlet_weighted",
                         "domain": domain_name, "coef": coef_name,
                         "eps": float(eps), "sigma": float("nan"),
                         "ball_kind": "-", "trials": 0, "constant": float("nan"),
                         "worst_trial": "-", "config_hash": digest,
                         "status": f"failed:{cells}"})
            continue
        for cell_row in cells:
            rows.append({"inequality": "dirichlet_weighted",
                         "domain": domain_name, "coef": coef_name,
                         "eps": float(eps), "sigma": cell_row["sigma"],
                         "ball_kind": "-", "trials": cell_row["trials"],
                         "constant": cell_row["constant"],
                         "worst_trial": cell_row["worst_trial"],
                         "config_hash": digest, "status": "ok"})
    return SweepReport(rows=rows, config=cfg, hash=digest)
