"""P1 finite elements for divergence-form systems -div(A(x/eps) grad u) = div(f) + F.

Vector-valued (m components), Dirichlet conditions eliminated symmetrically,
stiffness integrated with the 3-point edge-midpoint rule (exact for affine
data and clear of boundary vertex singularities).  Coefficients are closed
form 1-periodic tensors from a small registry; the mesh must resolve their
oscillation (h <= eps/8) unless explicitly overridden.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRECT_CAP = 100_000   # unknowns; nonsymmetric systems beyond this are refused
AMG_THRESHOLD = 40_000  # unknowns; symmetric systems beyond this use AMG-CG


class FemError(ValueError):
    pass


class SolverStalledError(RuntimeError):
    pass


@dataclass(frozen=True)
class CoefficientField:
    """Closed-form 1-periodic coefficient tensor a_ij^{ab}(y).

    fn maps (N, 2) points to (N, d, m, d, m) arrays indexed [i, alpha, j, beta].
    mu is the declared ellipticity constant (quadratic form >= mu |xi|^2 and
    max entry <= 1/mu).
    """

    name: str
    m: int
    mu: float
    fn: object
    symmetric: bool = True
    is_constant: bool = False

    def __call__(self, points):
        return self.fn(np.asarray(points, dtype=float))


def _scalar_tensor(a_vals, m):
    """Embed a scalar coefficient as a * delta_ij * delta_ab."""
    n = len(a_vals)
    out = np.zeros((n, 2, m, 2, m))
    for i in range(2):
        for al in range(m):
            out[:, i, al, i, al] = a_vals
    return out


def scalar_coefficient(name, a_fn, mu, m=1, is_constant=False):
    def fn(pts):
        return _scalar_tensor(a_fn(pts), m)
    return CoefficientField(name=name, m=m, mu=mu, fn=fn, symmetric=True,
                            is_constant=is_constant)


def constant_matrix_coefficient(name, mat, m=1):
    """Wrap a constant (d, m, d, m) or scalar 2x2 tensor as a coefficient."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape == (2, 2):
        full = np.zeros((2, m, 2, m))
        for al in range(m):
            full[:, al, :, al] = mat
        mat = full
    if mat.shape != (2, m, 2, m):
        raise FemError("constant coefficient must be (d, m, d, m) or (2, 2)")
    flat = mat.reshape(2 * m, 2 * m)
    sym = 0.5 * (flat + flat.T)
    lam_min = float(np.linalg.eigvalsh(sym).min())
    mu = min(lam_min, 1.0 / np.abs(mat).max())
    if mu <= 0:
        raise FemError("coefficient invalid: constant matrix not elliptic")

    def fn(pts):
        return np.broadcast_to(mat, (len(pts),) + mat.shape).copy()

    return CoefficientField(name=name, m=m, mu=mu, fn=fn,
                            symmetric=bool(np.allclose(flat, flat.T)),
                            is_constant=True)


def laminate_profile(y1, sharpness=None):
    """Scalar laminate ramping between 1 and 4 across y1.

    The default is the raised cosine 2.5 - 1.5 cos(2 pi y1) (harmonic mean
    exactly 2, arithmetic mean exactly 2.5).  A sharpness w > 0 shapes it
    toward the hard step 1 <-> 4 as w -> 0.
    """
    if sharpness is None:
        return 2.5 - 1.5 * np.cos(2 * np.pi * y1)
    s = np.sin(2 * np.pi * y1)
    return 2.5 - 1.5 * np.tanh(np.cos(2 * np.pi * y1) / sharpness) / np.tanh(1.0 / sharpness)


def _system2_fn(pts):
    a = 2.0 + 0.5 * np.sin(2 * np.pi * pts[:, 0]) * np.sin(2 * np.pi * pts[:, 1])
    b = 0.5 + 0.25 * np.cos(2 * np.pi * pts[:, 0])
    out = np.zeros((len(pts), 2, 2, 2, 2))
    for i in range(2):
        out[:, i, 0, i, 0] = a
        out[:, i, 1, i, 1] = a
        out[:, i, 0, i, 1] = b
        out[:, i, 1, i, 0] = b
    return out


def get_coefficient(name):
    """Coefficient registry; laminate_sharp:W takes a sharpness parameter."""
    if name == "identity":
        return constant_matrix_coefficient("identity", np.eye(2))
    if name == "checkerboard":
        return scalar_coefficient(
            "checkerboard",
            lambda p: 2.0 + np.sin(2 * np.pi * p[:, 0]) * np.sin(2 * np.pi * p[:, 1]),
            mu=1.0 / 3.0)
    if name == "laminate":
        return scalar_coefficient(
            "laminate", lambda p: laminate_profile(p[:, 0]), mu=0.25)
    if name.startswith("laminate_sharp:"):
        w = float(name.split(":", 1)[1])
        if w <= 0:
            raise FemError("coefficient invalid: sharpness must be positive")
        return scalar_coefficient(
            name, lambda p: laminate_profile(p[:, 0], sharpness=w), mu=0.25)
    if name == "rough":
        # fine-scale laminate: 8 periods across the unit cell, fairly sharp
        return scalar_coefficient(
            "rough", lambda p: laminate_profile(8.0 * p[:, 0], sharpness=0.25),
            mu=0.25)
    if name == "system2":
        return CoefficientField(name="system2", m=2, mu=1.0 / 3.25,
                                fn=_system2_fn, symmetric=True)
    raise FemError(f"unknown coefficient '{name}'")


COEFFICIENT_NAMES = ("identity", "checkerboard", "laminate", "system2")


def ellipticity_check(coef, n_grid=32, n_xi=64, seed=11):
    """Spot-check mu |xi|^2 <= xi:A:xi and max entry <= 1/mu on a y-sample."""
    rng = np.random.default_rng(seed)
    t = (np.arange(n_grid) + 0.5) / n_grid
    pts = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
    A = coef(pts)
    if np.abs(A).max() > 1.0 / coef.mu + 1e-9:
        raise FemError("coefficient invalid: sup norm exceeds 1/mu")
    xi = rng.standard_normal((n_xi, 2, coef.m))
    xi /= np.sqrt((xi ** 2).sum(axis=(1, 2)))[:, None, None]
    quad = np.einsum("niajb,xia,xjb->nx", A, xi, xi)
    if quad.min() < coef.mu - 1e-9:
        raise FemError("coefficient invalid: ellipticity fails on sample")
    return True


@dataclass
class ProblemData:
    """Right-hand data: flux f (per triangle (T,m,d) or per quad node
    (T,3,m,d)), body force F per vertex (V,m), Dirichlet g per vertex (V,m)."""

    f: np.ndarray = None
    F: np.ndarray = None
    g: np.ndarray = None


@dataclass
class FemSystem:
    mesh: object
    m: int
    A_ff: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray      # free dof indices
    fixed: np.ndarray     # fixed dof indices
    g_fixed: np.ndarray   # Dirichlet values on fixed dofs
    symmetric: bool
    K_full: sp.csr_matrix = None


@dataclass
class FemSolution:
    u: np.ndarray          # (V, m)
    grad: np.ndarray       # (T, m, d)
    iterations: int
    residual: float


def assemble_stiffness(mesh, coef, eps=1.0, allow_coarse=False):
    """Full stiffness matrix with 3-midpoint quadrature of A(x/eps)."""
    if eps <= 0:
        raise FemError("eps must be positive")
    if not coef.is_constant and mesh.h > eps / 8 * (1 + 1e-9) and not allow_coarse:
        raise FemError("oscillation unresolved: need h <= eps/8 (or allow_coarse)")
    m = coef.m
    tris = mesh.triangles
    areas = mesh.tri_areas()
    grads = mesh.tri_grads()
    quad = mesh.edge_midpoints()
    T = len(tris)
    Aq = coef(quad.reshape(-1, 2) / eps).reshape(T, 3, 2, m, 2, m)
    Abar = Aq.mean(axis=1)
    elem = np.einsum("t,tiajb,txi,tyj->txayb", areas, Abar, grads, grads,
                     optimize=True)
    dof = tris[:, :, None] * m + np.arange(m)[None, None, :]   # (T, 3, m)
    rows = np.repeat(dof.reshape(T, 3 * m), 3 * m, axis=1).ravel()
    cols = np.tile(dof.reshape(T, 3 * m), (1, 3 * m)).ravel()
    K = sp.coo_matrix((elem.reshape(T, 3 * m, 3 * m).ravel(), (rows, cols)),
                      shape=(mesh.n_vertices * m,) * 2).tocsr()
    K.sum_duplicates()
    return K


def build_load(mesh, m, data):
    """Load vector: -int f . grad(phi) + int F phi with midpoint quadrature."""
    V = mesh.n_vertices
    b = np.zeros(V * m)
    tris = mesh.triangles
    areas = mesh.tri_areas()
    grads = mesh.tri_grads()
    if data.f is not None:
        f = np.asarray(data.f, dtype=float)
        if f.ndim == 3:        # per-triangle constants
            contrib = -np.einsum("t,tai,txi->txa", areas, f, grads)
        elif f.ndim == 4:      # per quad node (T, 3, m, d)
            contrib = -np.einsum("t,tqai,txi->txa", areas / 3.0, f, grads)
        else:
            raise FemError("flux data must be (T,m,d) or (T,3,m,d)")
        np.add.at(b.reshape(V, m), tris.ravel(), contrib.reshape(-1, m))
    if data.F is not None:
        F = np.asarray(data.F, dtype=float)
        Fq = 0.5 * (F[tris[:, (1, 2, 0)]] + F[tris[:, (2, 0, 1)]])  # (T,3,m)
        # phi_x at midpoint q: 1/2 when q != x else 0
        phi = 0.5 * (1 - np.eye(3))
        contrib = np.einsum("t,tqa,qx->txa", areas / 3.0, Fq, phi)
        np.add.at(b.reshape(V, m), tris.ravel(), contrib.reshape(-1, m))
    return b


def assemble(mesh, coef, eps, data, allow_coarse=False, fixed_vertices=None):
    """Assembled Dirichlet system with symmetric elimination.

    fixed_vertices defaults to the mesh boundary; pass a bool mask to use a
    different Dirichlet set (local problems do).
    """
    m = coef.m
    K = assemble_stiffness(mesh, coef, eps, allow_coarse)
    b = build_load(mesh, m, data)
    V = mesh.n_vertices
    if fixed_vertices is None:
        fixed_vertices = mesh.boundary
    fixed_mask = np.repeat(np.asarray(fixed_vertices, dtype=bool), m)
    fixed = np.nonzero(fixed_mask)[0]
    free = np.nonzero(~fixed_mask)[0]
    g_full = np.zeros(V * m)
    if data.g is not None:
        g_full = np.asarray(data.g, dtype=float).reshape(V * m)
    g_fixed = g_full[fixed]
    rhs = b[free] - K[free][:, fixed] @ g_fixed
    A_ff = K[free][:, free].tocsr()
    return FemSystem(mesh=mesh, m=m, A_ff=A_ff, rhs=rhs, free=free,
                     fixed=fixed, g_fixed=g_fixed, symmetric=coef.symmetric,
                     K_full=K)


def _amg_solve(A, rhs, tol, max_iter):
    import pyamg
    ml = pyamg.smoothed_aggregation_solver(A.tocsr(), max_coarse=200)
    res = []
    x = ml.solve(rhs, tol=tol, accel="cg", maxiter=max_iter or 400,
                 residuals=res)
    return x, len(res)


def _cg_solve(A, rhs, tol, max_iter):
    Minv = 1.0 / A.diagonal()
    M = spla.LinearOperator(A.shape, matvec=lambda x: Minv * x)
    x, info = spla.cg(A, rhs, rtol=tol, atol=0.0, M=M,
                      maxiter=max_iter or 10 * A.shape[0])
    if info > 0:
        raise SolverStalledError(f"solver stalled: CG info={info}")
    return x, info if info else 0


def solve(system, tol=1e-10, max_iter=None, method="auto"):
    """Solve the assembled system; residual is always checked.

    Symmetric systems use Jacobi-CG (AMG-accelerated CG above the size
    threshold); nonsymmetric ones fall back to a sparse direct solve below
    the unknown cap.
    """
    A, rhs = system.A_ff, system.rhs
    n = A.shape[0]
    V = system.mesh.n_vertices
    u = np.zeros(V * system.m)
    u[system.fixed] = system.g_fixed
    if n == 0:
        sol = u.reshape(V, system.m)
        return FemSolution(u=sol, grad=gradient(sol, system.mesh), iterations=0,
                           residual=0.0)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        x, iters = np.zeros(n), 0
    elif method == "direct" or (method == "auto" and not system.symmetric):
        if n > DIRECT_CAP:
            raise SolverStalledError(
                "solver stalled: nonsymmetric system above the direct-solve cap")
        x = spla.splu(A.tocsc()).solve(rhs)
        iters = 1
    elif n > AMG_THRESHOLD:
        x, iters = _amg_solve(A, rhs, tol, max_iter)
    else:
        x, iters = _cg_solve(A, rhs, tol, max_iter)
    residual = float(np.linalg.norm(A @ x - rhs) / rhs_norm) if rhs_norm else 0.0
    if rhs_norm and residual > max(50 * tol, 1e-9):
        raise SolverStalledError(
            f"solver stalled: relative residual {residual:.2e}")
    u[system.free] = x
    sol = u.reshape(V, system.m)
    return FemSolution(u=sol, grad=gradient(sol, system.mesh),
                       iterations=int(iters), residual=residual)


def factorized_solver(system):
    """LU-factorized free-block solver for repeated right-hand sides."""
    lu = spla.splu(system.A_ff.tocsc())
    V = system.mesh.n_vertices

    def solve_rhs(data):
        b = build_load(system.mesh, system.m, data)
        g_full = np.zeros(V * system.m)
        if data.g is not None:
            g_full = np.asarray(data.g, dtype=float).reshape(V * system.m)
        rhs = b[system.free] - system.K_full[system.free][:, system.fixed] \
            @ g_full[system.fixed]
        u = np.zeros(V * system.m)
        u[system.fixed] = g_full[system.fixed]
        if len(rhs):
            u[system.free] = lu.solve(rhs)
        sol = u.reshape(V, system.m)
        return FemSolution(u=sol, grad=gradient(sol, system.mesh),
                           iterations=1, residual=0.0)

    return solve_rhs


def gradient(u, mesh):
    """Exact P1 gradient per triangle, (T, m, d)."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    ut = u[mesh.triangles]                     # (T, 3, m)
    return np.einsum("txa,txi->tai", ut, mesh.tri_grads())


def weighted_norm(field, w, mesh, region=None):
    """Squared weighted L2 norm int |field|^2 w dx over the mesh (or region).

    Per-triangle fields (T, ...) use the triangle-averaged weight at the
    offset edge midpoints; per-quad-node fields (T, 3, ...) pair node values
    with node weights, which keeps Cauchy-Schwarz exact for energy checks.
    """
    field = np.asarray(field, dtype=float)
    areas = mesh.tri_areas()
    wq = w(mesh.weight_quad_points().reshape(-1, 2)).reshape(-1, 3)
    T = len(areas)
    if field.shape[0] != T:
        raise FemError("field must be per-triangle")
    per_node = field.ndim >= 2 and field.shape[1] == 3 and field.ndim > 2
    if per_node:
        mag2 = (field ** 2).reshape(T, 3, -1).sum(axis=2)
        vals = areas * (mag2 * wq).mean(axis=1)
    else:
        mag2 = (field ** 2).reshape(T, -1).sum(axis=1)
        vals = areas * mag2 * wq.mean(axis=1)
    if region is not None:
        vals = vals[region]
    return float(vals.sum())


def region_area(mesh, region=None):
    a = mesh.tri_areas()
    return float(a.sum() if region is None else a[region].sum())


def random_trig_flux(mesh, m, seed, max_mode=2, per_node=True):
    """Seeded random trigonometric flux field evaluated on the mesh.

    Returns (T, 3, m, d) per-quad-node values (or per-triangle constants),
    the same underlying function regardless of the mesh.
    """
    rng = np.random.default_rng(seed)
    modes = [(k, l) for k in range(max_mode + 1) for l in range(max_mode + 1)]
    coefs = rng.standard_normal((len(modes), 4, m, 2))

    def f(pts):
        out = np.zeros(pts.shape[:-1] + (m, 2))
        x, y = pts[..., 0], pts[..., 1]
        for (k, l), c in zip(modes, coefs):
            cx, sx = np.cos(np.pi * k * x), np.sin(np.pi * k * x)
            cy, sy = np.cos(np.pi * l * y), np.sin(np.pi * l * y)
            basis = np.stack([cx * cy, cx * sy, sx * cy, sx * sy], axis=-1)
            out += np.einsum("...q,qai->...ai", basis, c)
        return out

    pts = mesh.edge_midpoints() if per_node else mesh.centroids()
    return f(pts)


def random_piecewise_flux(mesh, m, seed, blocks=4):
    """Seeded random flux, constant on a coarse block partition of the bbox."""
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((blocks, blocks, m, 2))
    lo, hi = mesh.domain.bounding_box
    c = mesh.centroids()
    ix = np.clip(((c[:, 0] - lo[0]) / (hi[0] - lo[0]) * blocks).astype(int),
                 0, blocks - 1)
    iy = np.clip(((c[:, 1] - lo[1]) / (hi[1] - lo[1]) * blocks).astype(int),
                 0, blocks - 1)
    return vals[ix, iy]


@dataclass
class LocalSolution:
    """Solution of a local Dirichlet problem on the submesh around a ball."""

    mesh: object           # submesh as a TriMesh
    u: np.ndarray
    grad: np.ndarray
    tri_ids: np.ndarray    # submesh triangle -> parent triangle index
    on_domain_bdry: np.ndarray
    on_artificial_bdry: np.ndarray
    ball: object


def submesh_around(mesh, center, radius):
    """Conforming submesh of triangles whose centroid lies in the given disk."""
    from .geometry import TriMesh
    c = mesh.centroids()
    keep = ((c - np.asarray(center)) ** 2).sum(axis=1) <= radius ** 2
    tri_ids = np.nonzero(keep)[0]
    if len(tri_ids) == 0:
        raise FemError("ball misses domain")
    tris = mesh.triangles[tri_ids]
    used, inv = np.unique(tris, return_inverse=True)
    sub_tris = inv.reshape(-1, 3).astype(np.int64)
    sub_verts = mesh.vertices[used]
    # submesh boundary: edges adjacent to exactly one kept triangle
    edges = np.concatenate([sub_tris[:, [0, 1]], sub_tris[:, [1, 2]],
                            sub_tris[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    rim_vertices = np.unique(uniq[counts == 1])
    on_rim = np.zeros(len(used), dtype=bool)
    on_rim[rim_vertices] = True
    on_domain = mesh.boundary[used]
    sub = TriMesh(sub_verts, sub_tris, on_domain | on_rim,
                  mesh.vertex_dist[used], mesh.h, mesh.domain)
    return sub, tri_ids, used, on_domain, on_rim & ~on_domain


def random_trace(m, seed):
    """Smooth random Dirichlet trace for artificial boundaries."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((m, 6))

    def g(pts):
        x, y = pts[:, 0], pts[:, 1]
        basis = np.stack([np.ones_like(x), x, y,
                          np.sin(np.pi * x), np.cos(np.pi * y), x * y], axis=-1)
        return basis @ c.T
    return g


def solve_local(mesh, ball, coef, eps=1.0, trace=None, seed=0, tol=1e-10,
                allow_coarse=False):
    """Solve div(A(x/eps) grad u) = 0 on (4B cap Omega) with u = 0 on the
    domain boundary part and a supplied (or seeded random) trace on the
    artificial rim."""
    sub, tri_ids, used, on_domain, on_art = submesh_around(
        mesh, ball.center, 4.0 * ball.radius)
    m = coef.m
    g_full = np.zeros((sub.n_vertices, m))
    if trace is None:
        trace = random_trace(m, seed)
    if on_art.any():
        g_full[on_art] = trace(sub.vertices[on_art])
    fixed = on_domain | on_art
    data = ProblemData(g=g_full)
    system = assemble(sub, coef, eps, data, allow_coarse=allow_coarse,
                      fixed_vertices=fixed)
    sol = solve(system, tol=tol)
    return LocalSolution(mesh=sub, u=sol.u, grad=sol.grad, tri_ids=tri_ids,
                         on_domain_bdry=on_domain, on_artificial_bdry=on_art,
                         ball=ball)


SOL_MAGIC = b"HLSOL1"


def save_solution(sol, path, iterations=None, residual=None):
    """Versioned binary solution cache (header, counts, nodal values, diag)."""
    u = np.atleast_2d(sol.u if isinstance(sol, FemSolution) else sol)
    with open(path, "wb") as fh:
        fh.write(SOL_MAGIC)
        np.array([u.shape[0], u.shape[1]], dtype="<u8").tofile(fh)
        u.astype("<f8").tofile(fh)
        it = iterations if iterations is not None else getattr(sol, "iterations", 0)
        rs = residual if residual is not None else getattr(sol, "residual", 0.0)
        np.array([float(it), float(rs)], dtype="<f8").tofile(fh)


def load_solution(path):
    with open(path, "rb") as fh:
        if fh.read(len(SOL_MAGIC)) != SOL_MAGIC:
            raise FemError("bad solution cache header")
        nv, m = np.fromfile(fh, dtype="<u8", count=2)
        u = np.fromfile(fh, dtype="<f8", count=int(nv * m)).reshape(int(nv), int(m))
        diag = np.fromfile(fh, dtype="<f8", count=2)
    return u, {"iterations": int(diag[0]), "residual": float(diag[1])}
