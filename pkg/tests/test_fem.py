import numpy as np
import pytest

from homoglab import fem, geometry as geo
from homoglab.weights import constant_weight, make_distance_weight


def reference_triangle_mesh(square):
    return geo.TriMesh(np.array([[0.0, 0], [1, 0], [0, 1]]),
                       np.array([[0, 1, 2]]), np.array([False] * 3),
                       np.zeros(3), 1.0, square)


def test_coefficient_registry_elliptic():
    for name in fem.COEFFICIENT_NAMES + ("rough", "laminate_sharp:0.25"):
        coef = fem.get_coefficient(name)
        assert fem.ellipticity_check(coef)


def test_unknown_coefficient():
    with pytest.raises(fem.FemError):
        fem.get_coefficient("nope")


def test_laminate_profile_range():
    y = np.linspace(0, 1, 2001)
    for w in (None, 0.5, 0.1):
        a = fem.laminate_profile(y, sharpness=w)
        assert a.min() >= 1.0 - 1e-9 and a.max() <= 4.0 + 1e-9


def test_nonelliptic_constant_rejected():
    with pytest.raises(fem.FemError, match="coefficient invalid"):
        fem.constant_matrix_coefficient("bad", np.array([[1.0, 3.0],
                                                         [3.0, 1.0]]))


def test_reference_element_matrix(square):
    """Hand integration: K = area * g g^T for the unit reference triangle."""
    mesh = reference_triangle_mesh(square)
    K = fem.assemble_stiffness(mesh, fem.get_coefficient("identity")).toarray()
    expected = 0.5 * np.array([[2.0, -1.0, -1.0],
                               [-1.0, 1.0, 0.0],
                               [-1.0, 0.0, 1.0]])
    assert np.allclose(K, expected, atol=1e-14)


def test_laplacian_interior_row_sums(square):
    mesh = geo.triangulate(square, 1 / 16)
    K = fem.assemble_stiffness(mesh, fem.get_coefficient("identity"))
    rows = np.asarray(K.sum(axis=1)).ravel()
    assert np.abs(rows[~np.repeat(mesh.boundary, 1)]).max() < 1e-13


def test_zero_data_gives_zero_solution(square):
    mesh = geo.triangulate(square, 1 / 8)
    system = fem.assemble(mesh, fem.get_coefficient("identity"), 1.0,
                          fem.ProblemData())
    sol = fem.solve(system)
    assert sol.iterations == 0
    assert np.all(sol.u == 0.0) and np.all(sol.grad == 0.0)


def test_oscillation_guard(square):
    mesh = geo.triangulate(square, 1 / 8)
    with pytest.raises(fem.FemError, match="oscillation unresolved"):
        fem.assemble(mesh, fem.get_coefficient("checkerboard"), 1 / 4,
                     fem.ProblemData())
    fem.assemble(mesh, fem.get_coefficient("checkerboard"), 1 / 4,
                 fem.ProblemData(), allow_coarse=True)


def manufactured_errors(square, h):
    """u = sin(pi x) sin(pi y) via f = -grad u (identity coefficient)."""
    mesh = geo.triangulate(square, h)

    def gradv(p):
        return np.stack([
            np.pi * np.cos(np.pi * p[..., 0]) * np.sin(np.pi * p[..., 1]),
            np.pi * np.sin(np.pi * p[..., 0]) * np.cos(np.pi * p[..., 1])],
            axis=-1)

    f = -gradv(mesh.edge_midpoints())[:, :, None, :]
    system = fem.assemble(mesh, fem.get_coefficient("identity"), 1.0,
                          fem.ProblemData(f=f))
    sol = fem.solve(system)
    v = np.sin(np.pi * mesh.vertices[:, 0]) * np.sin(np.pi * mesh.vertices[:, 1])
    err_l2 = np.sqrt(np.sum(mesh.vertex_areas() * (sol.u[:, 0] - v) ** 2))
    gv = gradv(mesh.centroids())
    err_h1 = np.sqrt(fem.weighted_norm(sol.grad - gv[:, None, :],
                                       constant_weight(), mesh))
    return err_l2, err_h1


def test_manufactured_solution_rates(square):
    l2a, h1a = manufactured_errors(square, 1 / 16)
    l2b, h1b = manufactured_errors(square, 1 / 32)
    assert l2a / l2b == pytest.approx(4.0, rel=0.2)   # O(h^2) in L2
    assert h1a / h1b == pytest.approx(2.0, rel=0.2)   # O(h) in H1


def test_energy_estimate_random_flux(square):
    """|grad u| <= mu^-1 |f| per trial, exactly up to solver residual."""
    mesh = geo.triangulate(square, 1 / 32)
    one = constant_weight(1.0)
    for name in ("identity", "checkerboard", "laminate"):
        coef = fem.get_coefficient(name)
        system = fem.assemble(mesh, coef, 1 / 4, fem.ProblemData())
        solver = fem.factorized_solver(system)
        for t in range(5):
            f = fem.random_trig_flux(mesh, coef.m, (13, t))
            sol = solver(fem.ProblemData(f=f))
            ratio = fem.weighted_norm(sol.grad, one, mesh) / \
                fem.weighted_norm(f, one, mesh)
            assert ratio <= coef.mu ** -2 * (1 + 1e-9)


def test_gradient_of_linear_field(square):
    mesh = geo.triangulate(square, 1 / 8)
    a = np.array([2.0, -3.0])
    u = mesh.vertices @ a
    g = fem.gradient(u, mesh)
    assert np.allclose(g[:, 0, :], a, atol=1e-13)
    assert np.all(fem.gradient(np.zeros(mesh.n_vertices), mesh) == 0.0)


def test_weighted_norm_examples(square, square_mesh_64):
    mesh = square_mesh_64
    ones = np.ones((mesh.n_triangles, 1, 1))
    one = constant_weight(1.0)
    # area
    assert fem.weighted_norm(ones, one, mesh) == pytest.approx(1.0, abs=1e-12)
    # sigma = 1 integrand (outside the Weight class range; plain callable):
    # int dist = 4 * int_0^(1/2) t (1 - 2t) dt = 1/6 by the coarea formula
    dist_w = lambda pts: square.distance_to_boundary(pts)
    assert fem.weighted_norm(ones, dist_w, mesh) == \
        pytest.approx(1 / 6, abs=mesh.h / 3)
    # restricted to the boundary layer with unit weight: |Sigma_0.1| = 0.36
    layer = geo.boundary_layer(mesh, 0.1)
    assert fem.weighted_norm(ones, one, mesh, region=layer) == \
        pytest.approx(0.36, abs=3 * mesh.h)
    # matches the unweighted norm exactly for w == 1
    rng = np.random.default_rng(0)
    field = rng.standard_normal((mesh.n_triangles, 1, 2))
    plain = float((mesh.tri_areas() * (field ** 2).sum(axis=(1, 2))).sum())
    assert fem.weighted_norm(field, one, mesh) == pytest.approx(plain, rel=1e-14)


def test_weighted_norm_quadrature_avoids_singularity(square, square_mesh_64):
    w = make_distance_weight(square, -0.5)
    ones = np.ones((square_mesh_64.n_triangles, 1, 1))
    val = fem.weighted_norm(ones, w, square_mesh_64)
    assert np.isfinite(val) and val > 1.0


# -- local solves -------------------------------------------------------------

def test_solve_local_zero_trace(square, square_mesh_64):
    ball = geo.BallSpec((0.5, 0.5), 0.1, "interior")
    loc = fem.solve_local(square_mesh_64, ball, fem.get_coefficient("identity"),
                          trace=lambda p: np.zeros((len(p), 1)))
    assert np.abs(loc.u).max() == 0.0


def test_solve_local_reproduces_linears(square, square_mesh_64):
    ball = geo.BallSpec((0.5, 0.5), 0.1, "interior")
    a = np.array([0.7, -1.3])
    loc = fem.solve_local(square_mesh_64, ball, fem.get_coefficient("identity"),
                          trace=lambda p: (p @ a)[:, None], tol=1e-13)
    assert np.abs(loc.u[:, 0] - loc.mesh.vertices @ a).max() < 1e-8
    assert np.abs(loc.grad[:, 0, :] - a).max() < 1e-6


def test_solve_local_maximum_principle(square, square_mesh_64):
    ball = geo.BallSpec((0.4, 0.6), 0.08, "interior")
    loc = fem.solve_local(square_mesh_64, ball, fem.get_coefficient("identity"),
                          seed=5)
    bd = loc.on_artificial_bdry | loc.on_domain_bdry
    u = loc.u[:, 0]
    assert u.min() >= u[bd].min() - 1e-9
    assert u.max() <= u[bd].max() + 1e-9


def test_solve_local_boundary_ball_zero_on_domain_boundary(square,
                                                           square_mesh_64):
    ball = geo.sample_balls(square, "boundary", 1, (0.03, 0.08), seed=9)[0]
    loc = fem.solve_local(square_mesh_64, ball, fem.get_coefficient("identity"),
                          seed=5)
    assert loc.on_domain_bdry.sum() > 0
    assert np.abs(loc.u[loc.on_domain_bdry]).max() == 0.0


def test_solve_local_misses_domain(square, square_mesh_64):
    ball = geo.BallSpec((5.0, 5.0), 0.01, "interior")
    with pytest.raises(fem.FemError, match="ball misses domain"):
        fem.solve_local(square_mesh_64, ball, fem.get_coefficient("identity"))


def test_nonsymmetric_direct_fallback(square):
    """A skew perturbation forces the direct path; solution still solves."""
    mesh = geo.triangulate(square, 1 / 16)
    skew = np.array([[1.0, 0.3], [-0.3, 1.0]])

    def fn(pts):
        out = np.zeros((len(pts), 2, 1, 2, 1))
        out[:, :, 0, :, 0] = skew
        return out

    coef = fem.CoefficientField(name="skewed", m=1, mu=0.5, fn=fn,
                                symmetric=False, is_constant=True)
    f = fem.random_trig_flux(mesh, 1, 3)
    system = fem.assemble(mesh, coef, 1.0, fem.ProblemData(f=f))
    sol = fem.solve(system)
    assert sol.residual < 1e-9


def test_solution_cache_roundtrip(tmp_path, square):
    mesh = geo.triangulate(square, 1 / 8)
    system = fem.assemble(mesh, fem.get_coefficient("identity"), 1.0,
                          fem.ProblemData(f=fem.random_trig_flux(mesh, 1, 0)))
    sol = fem.solve(system)
    path = tmp_path / "s.hlsol"
    fem.save_solution(sol, path)
    u, diag = fem.load_solution(path)
    assert np.allclose(u, sol.u)
    assert diag["residual"] == pytest.approx(sol.residual)
