"""Command line entry point.

Commands: cell, solve, sweep, probe {rh,hardy,decomp,maximal}, weights.
Exit codes: 0 success, 1 assertion-threshold violation (with --assert),
2 operational failure.  The HOMOGLAB_CACHE env variable overrides cache
directories; every output file name carries the config hash.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cell, estimates, fem, geometry, report
from .config import ConfigError, ExperimentConfig
from .weights import (BallSampling, constant_weight, estimate_ap_constant,
                      make_distance_weight, probe_reverse_holder)

EXIT_OK, EXIT_ASSERT, EXIT_FAIL = 0, 1, 2


def _cache_dir(args):
    d = os.environ.get("HOMOGLAB_CACHE") or getattr(args, "mesh_cache", None) \
        or getattr(args, "out", ".") or "."
    os.makedirs(d, exist_ok=True)
    return d


def _parse_weight(spec, domain):
    if spec in (None, "", "1", "const", "constant"):
        return constant_weight(1.0)
    if spec.startswith("sigma:"):
        return make_distance_weight(domain, float(spec.split(":", 1)[1]))
    if spec.startswith("const:"):
        return constant_weight(float(spec.split(":", 1)[1]))
    raise ValueError(f"unknown weight spec '{spec}' (use sigma:S or const:C)")


def cmd_cell(args):
    coef = fem.get_coefficient(args.coef)
    cset = cell.build_corrector_set(coef, args.res, tol=args.tol)
    d = cset.diagnostics
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"cell_{coef.name}_{args.res}.hlcell")
    cell.save_corrector_set(cset, path)
    chi_h1 = float(np.sqrt(np.abs(cset.chi).max() ** 2
                           + np.abs(cset.grad_chi).max() ** 2))
    print(f"coefficient {coef.name}  resolution {args.res}")
    print("A_hat =")
    print(np.array2string(cset.A_hat.reshape(2 * coef.m, 2 * coef.m),
                          precision=8))
    print(f"corrector residual (max) {max(d['corrector_residuals']):.3e}")
    print(f"chi sup-norm scale       {chi_h1:.3e}")
    print(f"b component Y-average    {d['b_average']:.3e}")
    print(f"b weak divergence        {d['b_weak_divergence']:.3e}")
    print(f"phi reconstruction       {d['phi_reconstruction']:.3e}")
    print(f"phi antisymmetry defect  {d['phi_antisymmetry']:.3e}")
    print(f"cache -> {path}")
    return EXIT_OK


def cmd_solve(args):
    domain = geometry.get_domain(args.domain)
    coef = fem.get_coefficient(args.coef)
    h = args.h or args.eps / 8
    cache = _cache_dir(args)
    mesh_path = os.path.join(cache, f"mesh_{args.domain}_{h:.6g}.hlmesh")
    if os.path.exists(mesh_path):
        mesh = geometry.load_mesh(mesh_path, domain)
    else:
        mesh = geometry.triangulate(domain, h)
        geometry.save_mesh(mesh, mesh_path)
    f = fem.random_trig_flux(mesh, coef.m, (args.seed, 0))
    system = fem.assemble(mesh, coef, args.eps, fem.ProblemData(f=f),
                          allow_coarse=args.allow_coarse)
    sol = fem.solve(system, tol=args.tol, max_iter=args.max_iter)
    one = constant_weight(1.0)
    ratio = fem.weighted_norm(sol.grad, one, mesh) / fem.weighted_norm(f, one, mesh)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    sol_path = os.path.join(out, f"solve_{args.domain}_{coef.name}"
                                 f"_{args.eps:.6g}.hlsol")
    fem.save_solution(sol, sol_path)
    print(f"domain {args.domain}  coef {coef.name}  eps {args.eps:g}  h {h:g}")
    print(f"unknowns {system.A_ff.shape[0]}  iterations {sol.iterations}  "
          f"residual {sol.residual:.2e}")
    print(f"energy ratio |grad u|^2/|f|^2 = {ratio:.6f}  "
          f"(mu^-2 = {coef.mu ** -2:.3f})")
    print(f"cache -> {sol_path}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = ExperimentConfig.from_json(args.config)
    rep = estimates.epsilon_sigma_sweep(
        cfg.domain, cfg.coef, cfg.eps, cfg.sigma, trials=cfg.trials,
        seed=cfg.seed, h_rule_den=cfg.h_rule_den, generator=cfg.generator,
        jobs=args.jobs, digest=cfg.hash)
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, f"sweep_{cfg.hash}.csv")
    svg_path = os.path.join(out, f"sweep_{cfg.hash}.svg")
    report.write_csv(rep.rows, csv_path)
    report.sweep_chart(rep, svg_path)
    uni = rep.per_sigma_uniformity()
    worst = 0.0
    for sg in sorted(uni):
        print(f"sigma {sg:+.2f}: max/min across eps = {uni[sg]:.4f}")
        worst = max(worst, uni[sg])
    failed = [r for r in rep.rows if r.get("status", "ok") != "ok"]
    print(f"rows {len(rep.rows)}  failures {len(failed)}  "
          f"worst uniformity {worst:.4f}")
    print(f"csv -> {csv_path}")
    print(f"svg -> {svg_path}")
    if failed:
        return EXIT_FAIL
    if args.assert_ and worst > args.uniformity_bound:
        print(f"ASSERT FAILED: uniformity {worst:.3f} > {args.uniformity_bound}")
        return EXIT_ASSERT
    return EXIT_OK


def _probe_rows(args, rows):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    scalars = {k: v for k, v in vars(args).items()
               if isinstance(v, (str, int, float, bool, type(None)))
               and k not in ("out", "mesh_cache", "jobs")}
    digest = estimates.config_hash(scalars | {"cmd": "probe"})
    for r in rows:
        r.setdefault("config_hash", digest)
    tag = getattr(args, "probe_cmd", args.cmd)
    path = os.path.join(out, f"probe_{tag}_{digest}.csv")
    report.write_csv(rows, path)
    print(f"csv -> {path}")


def cmd_probe(args):
    domain = geometry.get_domain(args.domain)
    w = _parse_weight(args.weight, domain)
    wlabel = args.weight or "const:1"
    if args.probe_cmd == "hardy":
        est = estimates.hardy_check(domain, h=args.h, n_random=args.trials,
                                    seed=args.seed)
        print(f"hardy constant (sup over {est.n_trials} trials) = "
              f"{est.constant:.6f}   worst: {est.worst_trial}")
        _probe_rows(args, [{
            "inequality": "hardy", "domain": args.domain, "coef": "-",
            "eps": 1.0, "sigma": -2.0, "ball_kind": "-",
            "trials": est.n_trials, "constant": est.constant,
            "worst_trial": est.worst_trial}])
        return EXIT_OK
    if args.probe_cmd == "rh":
        coef = fem.get_coefficient(args.coef)
        balls = geometry.sample_balls(domain, args.ball_kind, args.balls,
                                      (args.rmin, args.rmax), seed=args.seed)
        est = estimates.check_reverse_holder(domain, coef, args.eps, w, balls,
                                             trials_per_ball=args.trials,
                                             seed=args.seed, h=args.h)
        print(f"reverse-Hoelder constant = {est.constant:.6f} over "
              f"{est.n_trials} (ball, trial) pairs   worst: {est.worst_trial}")
        _probe_rows(args, [{
            "inequality": "reverse_holder", "domain": args.domain,
            "coef": coef.name, "eps": args.eps, "sigma": wlabel,
            "ball_kind": args.ball_kind, "trials": est.n_trials,
            "constant": est.constant, "worst_trial": est.worst_trial}])
        return EXIT_OK
    if args.probe_cmd == "decomp":
        coef = fem.get_coefficient(args.coef)
        balls = geometry.sample_balls(domain, args.ball_kind, args.balls,
                                      (args.rmin, args.rmax), seed=args.seed)
        probe = estimates.decomposition_probe(domain, coef, w, balls,
                                              trials=args.trials,
                                              seed=args.seed, h=args.h,
                                              eps=args.eps)
        n1 = max(r["n1_ratio"] for r in probe.records)
        rr = max(r["r_ratio"] for r in probe.records)
        print(f"decomposition probe: {len(probe.records)} records, "
              f"sup N1-ratio {n1:.4f}, sup R-ratio {rr:.4f}, "
              f"triangle-inequality violation "
              f"{probe.triangle_inequality_violation:.2e}")
        _probe_rows(args, [{
            "inequality": "decomposition", "domain": args.domain,
            "coef": coef.name, "eps": args.eps, "sigma": wlabel,
            "ball_kind": args.ball_kind, "trials": len(probe.records),
            "constant": max(n1, rr), "worst_trial": "-"}])
        return EXIT_OK
    if args.probe_cmd == "maximal":
        from .dyadic import GridFunction, verify_weighted_maximal_bounds
        n = args.grid
        rng = np.random.default_rng(args.seed)
        f = GridFunction(rng.random((n, n)))
        ball = ((0.5, 0.5), 0.45)
        rep = verify_weighted_maximal_bounds(f, w, ball, p=args.p)
        print(f"weighted maximal bounds on a {n}x{n} grid: "
              f"weak {rep.weak_ratio:.4f}  strong(p={args.p:g}) "
              f"{rep.strong_ratio:.4f}")
        _probe_rows(args, [{
            "inequality": "maximal_strong", "domain": args.domain, "coef": "-",
            "eps": 1.0, "sigma": wlabel, "ball_kind": "-", "trials": 1,
            "constant": rep.strong_ratio, "worst_trial": "-"}])
        return EXIT_OK
    raise ValueError(f"unknown probe '{args.probe_cmd}'")


def cmd_weights(args):
    domain = geometry.get_domain(args.domain)
    w = _parse_weight(args.weight, domain)
    lo, hi = domain.bounding_box
    sampling = BallSampling(n_balls=args.balls,
                            radius_range=(args.rmin, args.rmax),
                            quad_n=args.quad, seed=args.seed)
    est_p = estimate_ap_constant(w, args.p, (lo, hi), sampling)
    rh = probe_reverse_holder(w, (lo, hi), sampling)
    print(f"weight {args.weight or 'const:1'} on {args.domain}")
    print(f"A_{args.p:g} constant estimate = {est_p.constant:.4f} over "
          f"{est_p.n_balls} balls (worst r = {est_p.worst_ball[1]:.4f})")
    print(f"reverse-Hoelder: largest s = {rh.exponent:g} with constant "
          f"{rh.constant:.4f}")
    _probe_rows(args, [{
        "inequality": f"ap_p={args.p:g}", "domain": args.domain, "coef": "-",
        "eps": 1.0, "sigma": args.weight or "const:1", "ball_kind": "sampled",
        "trials": est_p.n_balls, "constant": est_p.constant,
        "worst_trial": f"r={est_p.worst_ball[1]:.5f}"}])
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="homoglab",
        description="Numerical laboratory for weighted-L2 homogenization "
                    "estimates on polygonal domains.")
    sub = p.add_subparsers(dest="cmd", required=True)

    pc = sub.add_parser("cell", help="solve periodic cell problems")
    pc.add_argument("--coef", required=True)
    pc.add_argument("--res", type=int, default=32)
    pc.add_argument("--tol", type=float, default=1e-12)
    pc.add_argument("--out", default=".")
    pc.set_defaults(fn=cmd_cell)

    ps = sub.add_parser("solve", help="one Dirichlet solve with seeded data")
    ps.add_argument("--domain", default="square")
    ps.add_argument("--coef", required=True)
    ps.add_argument("--eps", type=float, default=0.125)
    ps.add_argument("--h", type=float, default=None)
    ps.add_argument("--tol", type=float, default=1e-10)
    ps.add_argument("--max-iter", type=int, default=None)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--allow-coarse", action="store_true")
    ps.add_argument("--mesh-cache", default=None)
    ps.add_argument("--out", default=".")
    ps.set_defaults(fn=cmd_solve)

    pw = sub.add_parser("sweep", help="(eps, sigma) constant sweep from JSON")
    pw.add_argument("--config", required=True)
    pw.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    pw.add_argument("--out", default=None)
    pw.add_argument("--assert", dest="assert_", action="store_true")
    pw.add_argument("--uniformity-bound", type=float, default=2.0)
    pw.set_defaults(fn=cmd_sweep)

    pp = sub.add_parser("probe", help="single-inequality probes")
    pp.add_argument("probe_cmd", choices=["rh", "hardy", "decomp", "maximal"])
    pp.add_argument("--domain", default="square")
    pp.add_argument("--coef", default="identity")
    pp.add_argument("--weight", default=None)
    pp.add_argument("--eps", type=float, default=1.0)
    pp.add_argument("--h", type=float, default=1 / 64)
    pp.add_argument("--balls", type=int, default=16)
    pp.add_argument("--ball-kind", default="boundary",
                    choices=["interior", "boundary"])
    pp.add_argument("--rmin", type=float, default=0.02)
    pp.add_argument("--rmax", type=float, default=0.08)
    pp.add_argument("--trials", type=int, default=5)
    pp.add_argument("--grid", type=int, default=64)
    pp.add_argument("--p", type=float, default=2.0)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--out", default=".")
    pp.set_defaults(fn=cmd_probe)

    pg = sub.add_parser("weights", help="A_p / reverse-Hoelder estimation")
    pg.add_argument("--domain", default="square")
    pg.add_argument("--weight", default="sigma:-0.5")
    pg.add_argument("--p", type=float, default=1.0)
    pg.add_argument("--balls", type=int, default=500)
    pg.add_argument("--rmin", type=float, default=0.01)
    pg.add_argument("--rmax", type=float, default=0.2)
    pg.add_argument("--quad", type=int, default=32)
    pg.add_argument("--seed", type=int, default=42)
    pg.add_argument("--out", default=".")
    pg.set_defaults(fn=cmd_weights)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors already; normalize others
        return EXIT_FAIL if e.code not in (0,) else EXIT_OK
    try:
        return args.fn(args)
    except (ValueError, RuntimeError, OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
