"""Periodic cell problems on Y = [0,1)^2: correctors, the homogenized matrix,
the mean-zero oscillation tensor b, and flux (dual) correctors.

The cell mesh is a uniform triangulation of the torus (opposite faces
identified).  All periodic solves are singular with the constant vectors in
the kernel; they are run with a mean-penalty that deflates the nullspace and
the zero-mean normalization is re-imposed by projection afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import FemError, SolverStalledError


class CellError(RuntimeError):
    pass


@dataclass
class PeriodicMesh:
    """Uniform triangulation of the unit torus with n cells per side.

    Vertices are the n^2 lattice points (i/n, j/n); each square cell is split
    along the fixed antidiagonal, which keeps point location closed-form and
    the mesh invariant under integer lattice shifts.
    """

    n: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n < 4:
            raise CellError("cell mesh needs at least 4 cells per side")

    @property
    def n_vertices(self):
        return self.n * self.n

    @property
    def n_triangles(self):
        return 2 * self.n * self.n

    @property
    def h(self):
        return 1.0 / self.n

    def vertex_id(self, i, j):
        n = self.n
        return (np.asarray(i) % n) * n + (np.asarray(j) % n)

    def triangles(self):
        """Vertex triples (torus ids), lower/upper triangle of each cell."""
        if "tris" not in self._cache:
            n = self.n
            ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            v00 = self.vertex_id(ii, jj)
            v10 = self.vertex_id(ii + 1, jj)
            v01 = self.vertex_id(ii, jj + 1)
            v11 = self.vertex_id(ii + 1, jj + 1)
            lower = np.stack([v00, v10, v01], axis=-1).reshape(-1, 3)
            upper = np.stack([v10, v11, v01], axis=-1).reshape(-1, 3)
            self._cache["tris"] = np.concatenate([lower, upper], axis=0)
        return self._cache["tris"]

    def tri_coords(self):
        """Unwrapped coordinates of each triangle (periodic images resolved)."""
        if "coords" not in self._cache:
            n = self.n
            h = self.h
            ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            x0, y0 = ii.ravel() * h, jj.ravel() * h
            lower = np.stack([
                np.stack([x0, y0], -1),
                np.stack([x0 + h, y0], -1),
                np.stack([x0, y0 + h], -1)], axis=1)
            upper = np.stack([
                np.stack([x0 + h, y0], -1),
                np.stack([x0 + h, y0 + h], -1),
                np.stack([x0, y0 + h], -1)], axis=1)
            self._cache["coords"] = np.concatenate([lower, upper], axis=0)
        return self._cache["coords"]

    def tri_grads(self):
        if "grads" not in self._cache:
            c = self.tri_coords()
            d1 = c[:, 1] - c[:, 0]
            d2 = c[:, 2] - c[:, 0]
            area2 = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
            g = np.empty((len(c), 3, 2))
            for a in range(3):
                b, cc = (a + 1) % 3, (a + 2) % 3
                opp = c[:, cc] - c[:, b]
                g[:, a, 0] = -opp[:, 1] / area2
                g[:, a, 1] = opp[:, 0] / area2
            self._cache["grads"] = g
            self._cache["areas"] = 0.5 * area2
        return self._cache["grads"]

    def tri_areas(self):
        self.tri_grads()
        return self._cache["areas"]

    def edge_midpoints(self):
        if "mids" not in self._cache:
            c = self.tri_coords()
            mids = np.empty_like(c)
            for k in range(3):
                mids[:, k] = 0.5 * (c[:, (k + 1) % 3] + c[:, (k + 2) % 3])
            self._cache["mids"] = mids
        return self._cache["mids"]

    def locate(self, points):
        """Triangle index containing each point of the torus (closed form)."""
        p = np.mod(np.asarray(points, dtype=float), 1.0)
        n = self.n
        s = p * n
        i = np.minimum(s[..., 0].astype(int), n - 1)
        j = np.minimum(s[..., 1].astype(int), n - 1)
        fx, fy = s[..., 0] - i, s[..., 1] - j
        lower = fx + fy <= 1.0
        return np.where(lower, i * n + j, n * n + i * n + j)

    def interpolate(self, nodal, points):
        """P1 interpolation of nodal torus values at arbitrary points."""
        nodal = np.asarray(nodal, dtype=float)
        tid = self.locate(points)
        tris = self.triangles()[tid]
        coords = self.tri_coords()[tid]
        p = np.mod(np.asarray(points, dtype=float), 1.0)
        # barycentric coordinates w.r.t. the (unwrapped) triangle
        a, b, c = coords[..., 0, :], coords[..., 1, :], coords[..., 2, :]
        det = ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
               - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))
        # the point may sit in a periodic image of the located triangle
        q = p - a
        q -= np.round(q)  # wrap the offset into [-1/2, 1/2)
        l2 = ((c[..., 1] - a[..., 1]) * q[..., 0]
              - (c[..., 0] - a[..., 0]) * q[..., 1]) / det
        l3 = (-(b[..., 1] - a[..., 1]) * q[..., 0]
              + (b[..., 0] - a[..., 0]) * q[..., 1]) / det
        l1 = 1.0 - l2 - l3
        vals = nodal[tris]  # (..., 3) or (..., 3, m)
        lam = np.stack([l1, l2, l3], axis=-1)
        if vals.ndim == lam.ndim:
            return (vals * lam).sum(axis=-1)
        return np.einsum("...xm,...x->...m", vals, lam)


def periodic_stiffness(pmesh, coef, m=None):
    """Stiffness of the periodic weak form with 3-midpoint quadrature."""
    m = m if m is not None else coef.m
    tris = pmesh.triangles()
    grads = pmesh.tri_grads()
    areas = pmesh.tri_areas()
    quad = pmesh.edge_midpoints()
    T = len(tris)
    Aq = coef(quad.reshape(-1, 2)).reshape(T, 3, 2, m, 2, m)
    Abar = Aq.mean(axis=1)
    elem = np.einsum("t,tiajb,txi,tyj->txayb", areas, Abar, grads, grads,
                     optimize=True)
    dof = tris[:, :, None] * m + np.arange(m)[None, None, :]
    rows = np.repeat(dof.reshape(T, 3 * m), 3 * m, axis=1).ravel()
    cols = np.tile(dof.reshape(T, 3 * m), (1, 3 * m)).ravel()
    K = sp.coo_matrix((elem.reshape(-1), (rows, cols)),
                      shape=(pmesh.n_vertices * m,) * 2).tocsr()
    K.sum_duplicates()
    return K


def _solve_periodic(K, rhs, m, symmetric, tol=1e-12):
    """Solve the singular periodic system; kernel = per-component constants.

    Symmetric path: Jacobi-CG on K + tau * (componentwise mean projector);
    the penalty deflates the nullspace without densifying the matrix.
    Nonsymmetric fallback: augmented (Lagrange) sparse direct solve.
    """
    n = K.shape[0]
    nv = n // m
    rhs = rhs - rhs.reshape(nv, m).mean(axis=0)[None, :].repeat(nv, 0).ravel()
    tau = float(np.abs(K.diagonal()).mean())
    if symmetric:
        diag = K.diagonal() + tau / nv

        def matvec(x):
            means = x.reshape(nv, m).mean(axis=0)
            return K @ x + tau * np.repeat(means[None, :], nv, 0).ravel()

        A = spla.LinearOperator((n, n), matvec=matvec)
        M = spla.LinearOperator((n, n), matvec=lambda x: x / diag)
        x, info = spla.cg(A, rhs, rtol=tol, atol=0.0, M=M, maxiter=50 * nv)
        if info != 0:
            raise SolverStalledError("cell solve failed: CG stalled")
    else:
        cons = sp.csr_matrix(
            (np.ones(n) / nv, (np.tile(np.arange(m), nv), np.arange(n))),
            shape=(m, n))
        Aug = sp.bmat([[K, cons.T], [cons, None]], format="csc")
        sol = spla.splu(Aug).solve(np.concatenate([rhs, np.zeros(m)]))
        x = sol[:n]
    x = x - x.reshape(nv, m).mean(axis=0)[None, :].repeat(nv, 0).ravel()
    resid = np.linalg.norm(K @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return x, resid


@dataclass
class CorrectorSet:
    """chi, A_hat, b and flux correctors phi on a periodized cell mesh.

    Index conventions: chi[j, be] is the nodal field (V, m) of chi_j^be;
    grad_chi[j, be] the per-triangle (T, m, 2) gradient; A_hat has axes
    [i, al, j, be]; b has axes [T, i, al, j, be]; phi_tri has axes
    [k, i, j, al, be, T] and phi_nodal the same with V.
    """

    mesh: PeriodicMesh
    coef_name: str
    m: int
    chi: np.ndarray
    grad_chi: np.ndarray
    A_hat: np.ndarray = None
    b: np.ndarray = None
    phi_tri: np.ndarray = None
    phi_nodal: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


def solve_correctors(coef, resolution, tol=1e-12):
    """Solve the periodic corrector problems for each drift direction.

    For drift P_j^be the weak right-hand side is -int a_ij^{ab} d_i(phi_v);
    solutions are normalized to zero mean and the relative weak residual is
    recorded (must be <= 1e-8).
    """
    if resolution < 16:
        raise CellError("cell resolution must be >= 16 cells per side")
    pmesh = PeriodicMesh(resolution)
    m = coef.m
    K = periodic_stiffness(pmesh, coef)
    tris = pmesh.triangles()
    grads = pmesh.tri_grads()
    areas = pmesh.tri_areas()
    quad = pmesh.edge_midpoints()
    T = len(tris)
    V = pmesh.n_vertices
    Aq = coef(quad.reshape(-1, 2)).reshape(T, 3, 2, m, 2, m)
    Abar = Aq.mean(axis=1)

    chi = np.zeros((2, m, V, m))
    resids = []
    for j in range(2):
        for be in range(m):
            # load_v^al = -int a_{i l}^{al be} delta_{l j} d_i phi_v
            contrib = -np.einsum("t,tia,txi->txa", areas, Abar[:, :, :, j, be],
                                 grads)
            rhs = np.zeros(V * m)
            np.add.at(rhs.reshape(V, m), tris.ravel(), contrib.reshape(-1, m))
            x, res = _solve_periodic(K, rhs, m, coef.symmetric, tol=tol)
            if res > 1e-8:
                raise CellError(f"cell solve failed: residual {res:.2e}")
            chi[j, be] = x.reshape(V, m)
            resids.append(res)

    cs = CorrectorSet(mesh=pmesh, coef_name=coef.name, m=m, chi=chi,
                      grad_chi=_grad_fields(chi, pmesh))
    cs.diagnostics["corrector_residuals"] = resids
    cs.diagnostics["chi_mean"] = float(np.abs(chi.mean(axis=2)).max())
    return cs


def _grad_fields(chi, pmesh):
    """Per-triangle gradients of the corrector fields, (2, m, T, m, 2)."""
    tris = pmesh.triangles()
    grads = pmesh.tri_grads()
    # chi: (2, m, V, m) -> values at triangle vertices (2, m, T, 3, m)
    vals = chi[:, :, tris, :]
    return np.einsum("jbtxa,txi->jbtai", vals, grads)


def homogenize(coef, cset):
    """Homogenized tensor: Y-average of a + a grad(chi), axes [i, al, j, be]."""
    pmesh = cset.mesh
    m = cset.m
    quad = pmesh.edge_midpoints()
    areas = pmesh.tri_areas()
    T = pmesh.n_triangles
    Aq = coef(quad.reshape(-1, 2)).reshape(T, 3, 2, m, 2, m)
    Abar = Aq.mean(axis=1)
    base = np.einsum("t,tiajb->iajb", areas, Abar)
    # a_ik^{al ga} d_k chi_j^{ga be}: Abar axes [t, i, al, k, ga],
    # grad_chi axes [j, be, t, ga, k]
    osc = np.einsum("t,tiakg,jbtgk->iajb", areas, Abar, cset.grad_chi)
    A_hat = base + osc
    cset.A_hat = A_hat
    return A_hat


def compute_b(coef, cset):
    """Oscillation tensor b = a + a grad(chi) - A_hat per triangle.

    Also records the Y-average of each component (zero by construction up to
    round-off) and the weak-divergence functional bound measured against
    random periodic test fields.
    """
    if cset.A_hat is None:
        homogenize(coef, cset)
    pmesh = cset.mesh
    m = cset.m
    quad = pmesh.edge_midpoints()
    areas = pmesh.tri_areas()
    T = pmesh.n_triangles
    Aq = coef(quad.reshape(-1, 2)).reshape(T, 3, 2, m, 2, m)
    Abar = Aq.mean(axis=1)
    b = Abar + np.einsum("tiakg,jbtgk->tiajb", Abar, cset.grad_chi) \
        - cset.A_hat[None]
    cset.b = b
    avg = np.einsum("t,tiajb->iajb", areas, b)
    cset.diagnostics["b_average"] = float(np.abs(avg).max())
    return b


def weak_divergence_residual(cset, n_tests=100, seed=123, max_mode=3):
    """sup over random periodic P1 test fields of |int b_ij d_i psi| / |grad psi|."""
    pmesh = cset.mesh
    b = cset.b
    tris = pmesh.triangles()
    grads = pmesh.tri_grads()
    areas = pmesh.tri_areas()
    n = pmesh.n
    xs = (np.arange(n) / n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    worst = 0.0
    rng = np.random.default_rng(seed)
    for _ in range(n_tests):
        k, l = rng.integers(0, max_mode + 1, 2)
        a1, a2, ph1, ph2 = rng.standard_normal(4)
        psi = (a1 * np.cos(2 * np.pi * (k * X + l * Y) + ph1)
               + a2 * np.sin(2 * np.pi * (l * X - k * Y) + ph2)).ravel()
        gpsi = np.einsum("tx,txi->ti", psi[tris], grads)
        gnorm = np.sqrt(np.einsum("t,ti,ti->", areas, gpsi, gpsi))
        if gnorm < 1e-12:
            continue
        val = np.abs(np.einsum("t,tiajb,ti->ajb", areas, b, gpsi)).max()
        worst = max(worst, val / gnorm)
    cset.diagnostics["b_weak_divergence"] = worst
    return worst


def flux_correctors(cset, tol=1e-12):
    """Flux correctors from the Poisson lift Delta f_ij = b_ij.

    phi_kij = d_k f_ij - d_i f_kj is antisymmetric in (k, i) by construction;
    the defining identity d_k phi_kij = b_ij holds weakly up to the lift's
    discretization error, which refines at first order.
    """
    if cset.b is None:
        raise CellError("compute_b must run before flux_correctors")
    pmesh = cset.mesh
    m = cset.m
    b = cset.b
    tris = pmesh.triangles()
    grads = pmesh.tri_grads()
    areas = pmesh.tri_areas()
    V = pmesh.n_vertices
    lap = periodic_stiffness(pmesh, _laplace_coef(), m=1)
    f_nodal = np.zeros((2, 2, m, m, V))
    for i in range(2):
        for j in range(2):
            for al in range(m):
                for be in range(m):
                    # Delta f = b  <=>  int grad f . grad v = -int b v
                    load = np.repeat(areas * b[:, i, al, j, be] / 3.0, 3)
                    rhs = np.zeros(V)
                    np.add.at(rhs, tris.ravel(), load)
                    rhs = -rhs
                    x, res = _solve_periodic(lap, rhs, 1, True, tol=tol)
                    if res > 1e-8:
                        raise CellError(f"cell solve failed: Poisson residual {res:.1e}")
                    f_nodal[i, j, al, be] = x
    # per-triangle gradients d_k f_ij
    gf = np.einsum("ijabtx,txk->ijabtk", f_nodal[:, :, :, :, tris], grads)
    # phi_kij = d_k f_ij - d_i f_kj, axes [k, i, j, al, be, T]
    gf_kij = np.transpose(gf, (5, 0, 1, 2, 3, 4))  # [k, i, j, al, be, T]
    phi_tri = gf_kij - np.transpose(gf_kij, (1, 0, 2, 3, 4, 5))
    cset.phi_tri = phi_tri
    cset.phi_nodal = _project_to_nodes(phi_tri, pmesh)
    cset.diagnostics["phi_antisymmetry"] = float(
        np.abs(phi_tri + np.transpose(phi_tri, (1, 0, 2, 3, 4, 5))).max())
    return phi_tri


def _laplace_coef():
    from .fem import constant_matrix_coefficient
    return constant_matrix_coefficient("laplace", np.eye(2))


def _project_to_nodes(phi_tri, pmesh):
    """Area-weighted projection of per-triangle values to torus nodes."""
    tris = pmesh.triangles()
    areas = pmesh.tri_areas()
    V = pmesh.n_vertices
    lead = phi_tri.shape[:-1]
    flat = phi_tri.reshape(-1, phi_tri.shape[-1])
    out = np.zeros((len(flat), V))
    wsum = np.zeros(V)
    np.add.at(wsum, tris.ravel(), np.repeat(areas / 3.0, 3))
    for r, row in enumerate(flat):
        acc = np.zeros(V)
        np.add.at(acc, tris.ravel(), np.repeat(row * areas / 3.0, 3))
        out[r] = acc / wsum
    return out.reshape(lead + (V,))


def flux_reconstruction_residual(cset, n_tests=50, seed=321, max_mode=1):
    """sup over smooth periodic psi of |int phi_kij d_k psi + int b_ij psi| / |psi|.

    This is the weak form of (d_k phi_kij - b_ij, psi) = 0.
    """
    pmesh = cset.mesh
    tris = pmesh.triangles()
    grads = pmesh.tri_grads()
    areas = pmesh.tri_areas()
    n = pmesh.n
    xs = np.arange(n) / n
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_tests):
        k, l = rng.integers(0, max_mode + 1, 2)
        a1, a2, ph = rng.standard_normal(3)
        psi = (a1 * np.cos(2 * np.pi * (k * X + l * Y) + ph)
               + a2 * np.sin(2 * np.pi * (k * X - l * Y))).ravel()
        psin = psi[tris].mean(axis=1)             # triangle averages
        gpsi = np.einsum("tx,txi->ti", psi[tris], grads)
        nrm = np.sqrt(float(np.einsum("t,tx->", areas / 3.0, psi[tris] ** 2)))
        if nrm < 1e-12:
            continue
        term1 = np.einsum("t,kijabt,tk->ijab", areas, cset.phi_tri, gpsi)
        term2 = np.einsum("t,tiajb,t->ijab", areas, cset.b, psin)
        worst = max(worst, float(np.abs(term1 + term2).max()) / nrm)
    cset.diagnostics["phi_reconstruction"] = worst
    return worst


def build_corrector_set(coef, resolution, tol=1e-12, with_flux=True):
    """Full pipeline: correctors, homogenized tensor, b, flux correctors."""
    cset = solve_correctors(coef, resolution, tol=tol)
    homogenize(coef, cset)
    compute_b(coef, cset)
    weak_divergence_residual(cset)
    if with_flux:
        flux_correctors(cset, tol=tol)
        flux_reconstruction_residual(cset)
    return cset


def average_matrix(coef, center, radius, quad_n=48):
    """Componentwise average of A over a ball (constant-tensor output)."""
    from .weights import ball_quad_nodes
    if radius <= 0:
        raise CellError("ball radius must be positive")
    nodes = ball_quad_nodes(np.asarray(center, float), radius, quad_n)
    return coef(nodes).mean(axis=0)


def matrix_ellipticity(mat, m, n_xi=1000, seed=5):
    """Smallest Rayleigh quotient of a constant tensor over random xi."""
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_xi, 2, m))
    xi /= np.sqrt((xi ** 2).sum(axis=(1, 2)))[:, None, None]
    return float(np.einsum("iajb,xia,xjb->x", mat, xi, xi).min())


def vmo_modulus(coef, r_ladder, n_centers=40, radii_per_r=3, quad_n=24, seed=17):
    """Sampled VMO modulus: sup over balls of radius <= r of avg |A - avg A|.

    The deviation is measured in the Frobenius norm; the table is
    nondecreasing in r because the sup runs over all smaller radii too.
    """
    from .weights import ball_quad_nodes
    rng = np.random.default_rng(seed)
    centers = rng.random((n_centers, 2))
    r_ladder = np.asarray(sorted(r_ladder), dtype=float)
    samples = []  # (radius, deviation)
    for r in r_ladder:
        for fr in np.linspace(1.0, 1.0 / radii_per_r, radii_per_r):
            t = r * fr
            for c in centers:
                nodes = ball_quad_nodes(c, t, quad_n)
                A = coef(nodes)
                dev = A - A.mean(axis=0)
                frob = np.sqrt((dev ** 2).reshape(len(nodes), -1).sum(axis=1))
                samples.append((t, float(frob.mean())))
    samples = np.array(samples)
    table = {}
    for r in r_ladder:
        table[float(r)] = float(samples[samples[:, 0] <= r + 1e-12, 1].max())
    return table


CELL_MAGIC = b"HLCELL1"


def save_corrector_set(cset, path):
    """Versioned binary cache: resolution, chi nodal data, A_hat, phi nodal."""
    with open(path, "wb") as fh:
        fh.write(CELL_MAGIC)
        np.array([cset.mesh.n, cset.m], dtype="<u8").tofile(fh)
        cset.chi.astype("<f8").tofile(fh)
        cset.A_hat.astype("<f8").tofile(fh)
        has_phi = cset.phi_nodal is not None
        np.array([1 if has_phi else 0], dtype="<u8").tofile(fh)
        if has_phi:
            cset.phi_nodal.astype("<f8").tofile(fh)


def load_corrector_set(path, coef):
    with open(path, "rb") as fh:
        if fh.read(len(CELL_MAGIC)) != CELL_MAGIC:
            raise CellError("bad corrector cache header")
        n, m = (int(v) for v in np.fromfile(fh, dtype="<u8", count=2))
        V = n * n
        chi = np.fromfile(fh, dtype="<f8", count=2 * m * V * m) \
            .reshape(2, m, V, m)
        A_hat = np.fromfile(fh, dtype="<f8", count=(2 * m) ** 2) \
            .reshape(2, m, 2, m)
        has_phi = int(np.fromfile(fh, dtype="<u8", count=1)[0])
        phi_nodal = None
        if has_phi:
            phi_nodal = np.fromfile(fh, dtype="<f8", count=8 * m * m * V) \
                .reshape(2, 2, 2, m, m, V)
    pmesh = PeriodicMesh(n)
    cset = CorrectorSet(mesh=pmesh, coef_name=coef.name, m=m, chi=chi,
                        grad_chi=_grad_fields(chi, pmesh), A_hat=A_hat,
                        phi_nodal=phi_nodal)
    return cset
