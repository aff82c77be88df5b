import numpy as np
import pytest

from homoglab import estimates as est
from homoglab import fem, geometry as geo, report
from homoglab.weights import constant_weight, make_distance_weight


def test_fit_rate_exact_power_laws():
    eps = np.array([1 / 4, 1 / 8, 1 / 16, 1 / 32])
    fit = est.fit_rate(eps, 3.7 * eps)
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.residual < 1e-12
    fit2 = est.fit_rate(eps, 0.2 * np.sqrt(eps))
    assert fit2.slope == pytest.approx(0.5, abs=1e-12)


def test_fit_rate_input_validation():
    with pytest.raises(est.EstimateError, match="insufficient data"):
        est.fit_rate([1 / 2, 1 / 4, 1 / 8], [1.0, 0.0, -1.0])
    with pytest.raises(est.EstimateError, match="decreasing"):
        est.fit_rate([1 / 4, 1 / 2, 1 / 8], [1.0, 2.0, 3.0])


def test_fit_rate_excludes_nonpositive():
    fit = est.fit_rate([1 / 2, 1 / 4, 1 / 8, 1 / 16], [0.5, 0.25, 0.125, 0.0])
    assert len(fit.ladder) == 3
    assert fit.slope == pytest.approx(1.0, abs=1e-12)


# -- Dirichlet constants -------------------------------------------------------

def test_dirichlet_constant_positive_single_trial(square):
    ce = est.estimate_dirichlet_constant(square, fem.get_coefficient("identity"),
                                         1.0, constant_weight(), trials=1,
                                         seed=3, h=1 / 16)
    assert ce.constant > 0
    assert ce.n_trials == 1


def test_dirichlet_energy_bound_unweighted(square):
    for name in ("identity", "checkerboard"):
        coef = fem.get_coefficient(name)
        ce = est.estimate_dirichlet_constant(square, coef, 1 / 4,
                                             constant_weight(), trials=8,
                                             seed=0)
        assert ce.constant <= coef.mu ** -2 * (1 + 1e-9)


def test_dirichlet_constant_stable_across_eps(square):
    """Weighted constants for identity + omega_{-1/2} stay within 2x."""
    w = make_distance_weight(square, -0.5)
    coef = fem.get_coefficient("identity")
    vals = [est.estimate_dirichlet_constant(square, coef, e, w, trials=6,
                                            seed=2).constant
            for e in (1 / 4, 1 / 8, 1 / 16)]
    assert max(vals) / min(vals) <= 2.0


def test_ratio_invariant_under_flux_rescaling(square):
    mesh = geo.triangulate(square, 1 / 16)
    coef = fem.get_coefficient("identity")
    system = fem.assemble(mesh, coef, 1.0, fem.ProblemData())
    solver = fem.factorized_solver(system)
    w = make_distance_weight(square, -0.5)
    f = fem.random_trig_flux(mesh, 1, 5)
    r = []
    for c in (1.0, 37.5):
        sol = solver(fem.ProblemData(f=c * f))
        r.append(fem.weighted_norm(sol.grad, w, mesh)
                 / fem.weighted_norm(c * f, w, mesh))
    assert r[0] == pytest.approx(r[1], rel=1e-9)


# -- reverse Hoelder -----------------------------------------------------------

def test_reverse_holder_constant_gradient_identity(square, square_mesh_64):
    """Both sides reduce to |grad u|^2 avg_B(omega): ratio exactly 1."""
    from homoglab.estimates import _avg_sq_weighted, _region_masks
    w = make_distance_weight(square, -0.5)
    ball = geo.BallSpec((0.5, 0.5), 0.1, "interior")
    loc = fem.solve_local(square_mesh_64, ball, fem.get_coefficient("identity"),
                          trace=lambda p: (p @ np.array([0.8, -0.5]))[:, None],
                          tol=1e-13)
    in_b, in_2b = _region_masks(loc, ball)
    num, a1 = _avg_sq_weighted(loc, in_b, w)
    den, _ = _avg_sq_weighted(loc, in_2b, constant_weight())
    ones = np.ones((loc.mesh.n_triangles, 1, 1))
    avg_w = fem.weighted_norm(ones, w, loc.mesh, region=in_b) / a1
    assert num / (den * avg_w) == pytest.approx(1.0, abs=1e-10)


def test_reverse_holder_finite_and_stable(square, square_mesh_64):
    w = make_distance_weight(square, -0.5)
    balls = geo.sample_balls(square, "boundary", 8, (0.03, 0.08), seed=1)
    coef = fem.get_coefficient("identity")
    a = est.check_reverse_holder(square, coef, 1.0, w, balls,
                                 trials_per_ball=3, seed=0,
                                 mesh=square_mesh_64)
    b = est.check_reverse_holder(square, coef, 1.0, w, balls,
                                 trials_per_ball=6, seed=0,
                                 mesh=square_mesh_64)
    assert np.isfinite(a.constant) and a.constant >= 1.0 - 1e-9
    assert abs(b.constant - a.constant) / a.constant <= 0.25


# -- higher integrability -------------------------------------------------------

def test_higher_integrability_interior_smooth(square, square_mesh_64):
    balls = geo.sample_balls(square, "interior", 6, (0.02, 0.05), seed=4)
    hi = est.probe_higher_integrability(square, fem.get_coefficient("identity"),
                                        1.0, constant_weight(), balls,
                                        trials_per_ball=2, seed=0,
                                        mesh=square_mesh_64)
    assert hi.extra["largest_p"] == 4.0


def test_higher_integrability_constant_gradient_is_one(square, square_mesh_64):
    from homoglab.estimates import _region_masks
    ball = geo.BallSpec((0.5, 0.5), 0.08, "interior")
    loc = fem.solve_local(square_mesh_64, ball, fem.get_coefficient("identity"),
                          trace=lambda p: (p @ np.array([1.0, 2.0]))[:, None],
                          tol=1e-13)
    in_b, in_2b = _region_masks(loc, ball)
    areas = loc.mesh.tri_areas()
    v = np.sqrt((loc.grad ** 2).sum(axis=(1, 2)))   # constant, w == 1
    for p in (2.25, 2.5, 3.0, 4.0):
        lhs = ((v[in_b] ** p * areas[in_b]).sum() / areas[in_b].sum()) ** (1 / p)
        rhs = (v[in_2b] * areas[in_2b]).sum() / areas[in_2b].sum()
        assert lhs / rhs == pytest.approx(1.0, abs=1e-9)


def test_higher_integrability_weight_ordering(square, square_mesh_64):
    balls = geo.sample_balls(square, "boundary", 10, (0.02, 0.06), seed=5)
    coef = fem.get_coefficient("identity")
    t5 = est.probe_higher_integrability(
        square, coef, 1.0, make_distance_weight(square, -0.5), balls,
        trials_per_ball=2, seed=0, mesh=square_mesh_64).extra
    t9 = est.probe_higher_integrability(
        square, coef, 1.0, make_distance_weight(square, -0.9), balls,
        trials_per_ball=2, seed=0, mesh=square_mesh_64).extra
    assert t9["largest_p"] <= t5["largest_p"]
    assert all(t9["table"][p] >= t5["table"][p] - 1e-12 for p in t5["table"])


# -- two-scale -----------------------------------------------------------------

def test_two_scale_constant_coefficient_vanishes(square):
    coef = fem.get_coefficient("identity")
    from homoglab import cell
    cset = cell.build_corrector_set(coef, 32, with_flux=False)
    r = est.two_scale_error(square, coef, cset, 1 / 16)
    assert r["grad_w"] <= 1e-9
    assert r["corrector_approx"] <= 1e-9


def test_two_scale_resolution_guard(square, laminate_cset_64):
    with pytest.raises(est.EstimateError, match="eps/16"):
        est.two_scale_error(square, fem.get_coefficient("laminate"),
                            laminate_cset_64, 1 / 8, h=1 / 64)


def test_two_scale_error_decreases(square, laminate_cset_64):
    lam = fem.get_coefficient("laminate")
    r8 = est.two_scale_error(square, lam, laminate_cset_64, 1 / 8)
    r16 = est.two_scale_error(square, lam, laminate_cset_64, 1 / 16)
    assert r16["corrector_approx"] < r8["corrector_approx"]
    # the energy bound of the expansion holds with the reported constant
    for r in (r8, r16):
        assert r["implied_constant"] < np.inf
        assert r["grad_w"] <= r["implied_constant"] * (
            r["boundary_layer"] + r["interior_curvature"]) * (1 + 1e-12)


# -- hardy ---------------------------------------------------------------------

def test_hardy_distance_trial_is_exact(square):
    ce = est.hardy_check(square, h=1 / 64, n_random=5, seed=0)
    assert ce.extra["table"]["dist"] == pytest.approx(1.0, abs=1e-12)


def test_hardy_center_patch_poincare_oracle(square, square_mesh_64):
    """Support in [1/4,3/4]^2: dist >= 1/4 there, so the ratio is bounded by
    16 / lambda_1(patch) = 16 (1/2)^2 / (2 pi^2) = 2/pi^2 (Galerkin
    eigenvalues only overshoot)."""
    mesh = square_mesh_64
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    inside = (np.abs(x - 0.5) < 0.25) & (np.abs(y - 0.5) < 0.25)
    rng = np.random.default_rng(1)
    sup = 0.0
    areas = mesh.tri_areas()
    q = mesh.weight_quad_points()
    dq = square.distance_to_boundary(q.reshape(-1, 2)).reshape(-1, 3)
    from homoglab.estimates import _p1_at_quad
    for _ in range(10):
        u = np.where(inside, np.sin(4 * np.pi * x) * np.sin(4 * np.pi * y)
                     * rng.standard_normal() + rng.standard_normal()
                     * np.sin(2 * np.pi * (x - 0.25)) * np.sin(2 * np.pi * (y - 0.25)),
                     0.0)
        u = u * inside
        gn = fem.weighted_norm(fem.gradient(u, mesh), constant_weight(), mesh)
        if gn < 1e-14:
            continue
        uq = _p1_at_quad(mesh, u)
        num = float((areas * ((uq / dq) ** 2).mean(axis=1)).sum())
        sup = max(sup, num / gn)
    assert sup <= 2 / np.pi ** 2 * 1.05


def test_hardy_zero_trial_skipped(square):
    ce = est.hardy_check(square, h=1 / 32, n_random=0, seed=0)
    # only dist + bumps remain; all counted trials had positive gradient
    assert ce.n_trials >= 1


# -- rough sigma range -----------------------------------------------------------

def test_rough_sigma_range(square):
    out, flag = est.rough_coefficient_sigma_range(
        square, [-0.5, -0.3, -0.1, 0.0, 0.1], trials=4, seed=0, h=1 / 96)
    coef = fem.get_coefficient("rough")
    assert out[0.0].constant <= coef.mu ** -2
    # small sigma comparable to the baseline within 4x
    assert out[0.1].constant <= 4 * out[0.0].constant
    assert out[-0.1].constant <= 4 * out[0.0].constant
    # the A_1 side grows monotonically with |sigma| (measured property)
    assert out[-0.3].constant >= out[-0.1].constant
    assert out[-0.5].constant >= out[-0.3].constant
    assert flag is None


# -- decomposition probe -----------------------------------------------------------

def test_decomposition_probe_records(square):
    balls = geo.sample_balls(square, "interior", 10, (0.01, 0.04), seed=2) \
        + geo.sample_balls(square, "boundary", 15, (0.01, 0.04), seed=3)
    probe = est.decomposition_probe(square, fem.get_coefficient("identity"),
                                    constant_weight(), balls, trials=2,
                                    seed=0, h=1 / 48)
    assert len(probe.records) >= 40   # balls below mesh resolution skipped
    assert probe.triangle_inequality_violation <= 1e-12
    n1 = [r["n1_ratio"] for r in probe.records]
    rr = [r["r_ratio"] for r in probe.records]
    assert np.all(np.isfinite(n1)) and np.all(np.isfinite(rr))


def test_decomposition_zero_local_load(square):
    """f supported outside 5B gives v = 0, F_B = 0, R_B = |grad u|."""
    mesh = geo.triangulate(square, 1 / 32)
    coef = fem.get_coefficient("identity")
    ball = geo.BallSpec((0.25, 0.25), 0.02, "interior")
    qp = mesh.edge_midpoints()
    far = (np.linalg.norm(qp - ball.center, axis=-1) > 5 * ball.radius)
    f = est.trial_flux(mesh, 1, 0, 0) * far[..., None, None]
    system = fem.assemble(mesh, coef, 1.0, fem.ProblemData())
    solver = fem.factorized_solver(system)
    u = solver(fem.ProblemData(f=f))
    phi_q = np.clip((5 * ball.radius - np.linalg.norm(qp - ball.center, axis=-1))
                    / ball.radius, 0, 1)
    v = solver(fem.ProblemData(f=f * phi_q[..., None, None]))
    assert np.abs(v.grad).max() == 0.0
    assert np.allclose(u.grad - v.grad, u.grad)


# -- sweeps ------------------------------------------------------------------------

def test_sweep_single_cell_consistency(square):
    """A 1x1 sweep equals the direct estimate call with the same seeds."""
    rep = est.epsilon_sigma_sweep("square", "identity", [1 / 4], [-0.5],
                                  trials=4, seed=6)
    w = make_distance_weight(square, -0.5)
    ce = est.estimate_dirichlet_constant(square, fem.get_coefficient("identity"),
                                         1 / 4, w, trials=4, seed=6)
    assert len(rep.rows) == 1
    assert rep.rows[0]["constant"] == pytest.approx(ce.constant, rel=1e-12)


def test_sweep_sigma_zero_row_obeys_energy_bound(square):
    rep = est.epsilon_sigma_sweep("square", "checkerboard", [1 / 4, 1 / 8],
                                  [0.0], trials=4, seed=1)
    mu = fem.get_coefficient("checkerboard").mu
    for row in rep.rows:
        assert row["constant"] <= mu ** -2


def test_sweep_deterministic_bytes(tmp_path):
    outs = []
    for run in range(2):
        rep = est.epsilon_sigma_sweep("square", "identity", [1 / 4, 1 / 8],
                                      [0.0, -0.5], trials=3, seed=9)
        path = tmp_path / f"sweep{run}.csv"
        outs.append(report.write_csv(rep.rows, path))
    assert outs[0] == outs[1]


def test_sweep_parallel_matches_serial():
    a = est.epsilon_sigma_sweep("square", "identity", [1 / 4, 1 / 8], [0.0],
                                trials=2, seed=4, jobs=1)
    b = est.epsilon_sigma_sweep("square", "identity", [1 / 4, 1 / 8], [0.0],
                                trials=2, seed=4, jobs=2)
    for ra, rb in zip(a.rows, b.rows):
        assert ra == rb
