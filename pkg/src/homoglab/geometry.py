"""Polygonal domains, structured triangulations, boundary layers and ball sampling.

Domains are simple polygons with counterclockwise vertices.  The built-in
generators (unit square, L-shape, sawtooth) produce lattice-aligned polygons
whose edges have slope 0, inf or +-1, so the structured triangulations below
conform to the boundary exactly.  Distance-to-boundary queries always use the
true polygon, never the mesh, so weight singularities do not drift with h.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRIANGLE_CAP = 2_000_000


class GeometryError(ValueError):
    pass


def _as_points(x):
    p = np.asarray(x, dtype=float)
    if p.ndim == 1:
        return p[None, :], True
    return p, False


def _segments_intersect(p1, p2, q1, q2):
    """Proper or improper intersection test for closed segments."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < 1e-14:
            return 0
        return 1 if v > 0 else -1

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-14 <= c[0] <= max(a[0], b[0]) + 1e-14
                and min(a[1], b[1]) - 1e-14 <= c[1] <= max(a[1], b[1]) + 1e-14)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


@dataclass(frozen=True)
class PolygonDomain:
    """Simple polygon with CCW vertices and derived geometric data."""

    vertices: np.ndarray
    name: str = "polygon"

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def edges(self):
        """Edge segments as an (n, 2, 2) array of (start, end) pairs."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    @property
    def bounding_box(self):
        v = self.vertices
        return v.min(axis=0), v.max(axis=0)

    @property
    def diameter(self):
        v = self.vertices
        d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(-1)
        return float(np.sqrt(d2.max()))

    @property
    def area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def perimeter(self):
        e = self.edges
        return float(np.linalg.norm(e[:, 1] - e[:, 0], axis=1).sum())

    @property
    def lipschitz_character(self):
        """Max deviation of an interior corner angle from pi (radians)."""
        v = self.vertices
        prev = np.roll(v, 1, axis=0)
        nxt = np.roll(v, -1, axis=0)
        a = prev - v
        b = nxt - v
        cross = b[:, 0] * a[:, 1] - b[:, 1] * a[:, 0]
        ang = np.arctan2(cross, np.einsum("ij,ij->i", a, b)) % (2 * np.pi)
        return float(np.max(np.abs(ang - np.pi)))

    @property
    def inradius(self):
        """Approximate inradius (max distance to boundary over a probe grid)."""
        lo, hi = self.bounding_box
        n = 64
        gx = np.linspace(lo[0], hi[0], n)
        gy = np.linspace(lo[1], hi[1], n)
        pts = np.stack(np.meshgrid(gx, gy), axis=-1).reshape(-1, 2)
        inside = self.contains(pts)
        if not inside.any():
            return 0.0
        return float(self.distance_to_boundary(pts[inside]).max())

    def contains(self, points):
        """Point-in-polygon by crossing number (edge points count as inside)."""
        p, single = _as_points(points)
        v = self.vertices
        x, y = p[:, 0], p[:, 1]
        inside = np.zeros(len(p), dtype=bool)
        n = len(v)
        for i in range(n):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % n]
            cond = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= cond & (x < xint)
        near = self.distance_to_boundary(p) < 1e-12
        out = inside | near
        return out[0] if single else out

    def distance_to_boundary(self, points):
        """Exact min distance to the polygon boundary (point-to-segment)."""
        p, single = _as_points(points)
        e = self.edges
        a, b = e[:, 0], e[:, 1]
        ab = b - a
        denom = (ab ** 2).sum(-1)
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pej,ej->pe", ap, ab) / denom, 0.0, 1.0)
        proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.linalg.norm(p[:, None, :] - proj, axis=-1).min(axis=1)
        return float(d[0]) if single else d


def build_polygon(vertices, name="polygon"):
    """Validate a vertex list and return a PolygonDomain.

    Raises GeometryError when the polygon is degenerate, has repeated
    vertices, is clockwise, or is not simple.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise GeometryError("polygon needs at least 3 planar vertices")
    d = np.linalg.norm(v - np.roll(v, -1, axis=0), axis=1)
    if np.any(d < 1e-14):
        raise GeometryError("not simple: repeated vertex")
    n = len(v)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # adjacent edges share a vertex by design
            if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                raise GeometryError("not simple: self-intersecting edges")
    poly = PolygonDomain(v, name=name)
    if poly.area <= 0:
        raise GeometryError("vertices must be counterclockwise with positive area")
    return poly


def unit_square():
    return build_polygon([(0, 0), (1, 0), (1, 1), (0, 1)], name="square")


def l_shape():
    return build_polygon(
        [(0, 0), (1, 0), (1, 0.5), (0.5, 0.5), (0.5, 1), (0, 1)], name="lshape")


def sawtooth():
    """Unit-width Lipschitz polygon whose top edge zigzags with slopes +-1."""
    top = [(1, 0.75)]
    x = 1.0
    up = True
    while x > 1e-12:
        x -= 0.125
        top.append((x, 0.875 if up else 0.75))
        up = not up
    return build_polygon([(0, 0), (1, 0)] + top, name="sawtooth")


BUILTIN_DOMAINS = {"square": unit_square, "lshape": l_shape, "sawtooth": sawtooth}


def get_domain(name):
    try:
        return BUILTIN_DOMAINS[name]()
    except KeyError:
        raise GeometryError(f"unknown domain '{name}'") from None


@dataclass
class TriMesh:
    """Conforming P1 triangulation with boundary flags and distance data.

    h is the structured lattice spacing (axis-aligned edge length); diagonal
    edges have length h*sqrt(2).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    vertex_dist: np.ndarray
    h: float
    domain: PolygonDomain
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def tri_coords(self):
        return self.vertices[self.triangles]

    def tri_areas(self):
        if "areas" not in self._cache:
            c = self.tri_coords()
            d1 = c[:, 1] - c[:, 0]
            d2 = c[:, 2] - c[:, 0]
            self._cache["areas"] = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        return self._cache["areas"]

    def tri_grads(self):
        """Gradients of the three barycentric basis functions, (T, 3, 2)."""
        if "grads" not in self._cache:
            c = self.tri_coords()
            area2 = 2.0 * self.tri_areas()
            g = np.empty((len(c), 3, 2))
            for a in range(3):
                b, cc = (a + 1) % 3, (a + 2) % 3
                opp = c[:, cc] - c[:, b]
                g[:, a, 0] = -opp[:, 1] / area2
                g[:, a, 1] = opp[:, 0] / area2
            self._cache["grads"] = g
        return self._cache["grads"]

    def centroids(self):
        if "centroids" not in self._cache:
            self._cache["centroids"] = self.tri_coords().mean(axis=1)
        return self._cache["centroids"]

    def edge_midpoints(self):
        """Midpoints of the three edges of each triangle, (T, 3, 2).

        Slot k is the midpoint of the edge opposite vertex k (the classical
        second-order quadrature nodes).
        """
        if "midpoints" not in self._cache:
            c = self.tri_coords()
            mids = np.empty_like(c)
            for k in range(3):
                mids[:, k] = 0.5 * (c[:, (k + 1) % 3] + c[:, (k + 2) % 3])
            self._cache["midpoints"] = mids
        return self._cache["midpoints"]

    def weight_quad_points(self):
        """Edge midpoints with boundary-edge midpoints pulled inward by h/10.

        Keeps weight quadrature off the boundary where distance weights with
        negative exponents are singular.
        """
        if "wquad" not in self._cache:
            mids = self.edge_midpoints().copy()
            cent = self.centroids()
            on_bd = self.domain.distance_to_boundary(
                mids.reshape(-1, 2)).reshape(mids.shape[:2]) < 1e-12
            if on_bd.any():
                ti, ki = np.nonzero(on_bd)
                direc = cent[ti] - mids[ti, ki]
                direc /= np.linalg.norm(direc, axis=1, keepdims=True)
                mids[ti, ki] += (self.h / 10.0) * direc
            self._cache["wquad"] = mids
        return self._cache["wquad"]

    def vertex_areas(self):
        """Lumped (1/3-area-weighted) vertex masses, used for nodal averaging."""
        if "varea" not in self._cache:
            va = np.zeros(self.n_vertices)
            np.add.at(va, self.triangles.ravel(),
                      np.repeat(self.tri_areas() / 3.0, 3))
            self._cache["varea"] = va
        return self._cache["varea"]


def _lattice_n(domain, h):
    """Smallest grid count n with spacing <= ~h putting all vertices on lattice."""
    lo, hi = domain.bounding_box
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    n0 = max(1, int(round(extent / h)))
    if extent / n0 > h * (1 + 1e-9):
        n0 += 1
    for n in range(n0, n0 + 129):
        g = extent / n
        rel = (domain.vertices - lo) / g
        if np.allclose(rel, np.round(rel), atol=1e-9):
            return n, g
    raise GeometryError(
        "vertices not lattice-aligned at this resolution; "
        "built-in generators need edge slopes in {0, inf, +-1}")


def triangulate(domain, h):
    """Structured conforming triangulation with lattice spacing ~h.

    Each lattice cell is split along one diagonal.  The diagonal direction
    follows the (i+j) parity ("union jack") except in cells crossed by a
    slope +-1 boundary edge, where it matches that edge so the mesh conforms.
    """
    if not (0 < h < domain.diameter):
        raise GeometryError("resolution h must lie in (0, diam)")
    lo, hi = domain.bounding_box
    n, g = _lattice_n(domain, h)
    nx = int(round((hi[0] - lo[0]) / g))
    ny = int(round((hi[1] - lo[1]) / g))
    if 2 * nx * ny > TRIANGLE_CAP:
        raise GeometryError("resolution cap exceeded (2e6 triangles)")

    # parity diagonals, overridden where a +-1 boundary edge crosses the cell
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    slope = np.where((ii + jj) % 2 == 0, 1, -1)
    for (a, b) in domain.edges:
        dx, dy = b[0] - a[0], b[1] - a[1]
        if abs(abs(dx) - abs(dy)) > 1e-12 or abs(dx) < 1e-12:
            continue
        s = 1 if dx * dy > 0 else -1
        steps = int(round(abs(dx) / g))
        sx, sy = dx / steps, dy / steps
        for k in range(steps):
            mx = a[0] + (k + 0.5) * sx - lo[0]
            my = a[1] + (k + 0.5) * sy - lo[1]
            slope[int(np.floor(mx / g)), int(np.floor(my / g))] = s

    def gid(i, j):
        return i * (ny + 1) + j

    v00, v10 = gid(ii, jj), gid(ii + 1, jj)
    v01, v11 = gid(ii, jj + 1), gid(ii + 1, jj + 1)
    pos = slope == 1
    # CCW triangle pairs per cell for each diagonal direction
    t1 = np.where(pos[..., None],
                  np.stack([v00, v10, v11], axis=-1),
                  np.stack([v00, v10, v01], axis=-1))
    t2 = np.where(pos[..., None],
                  np.stack([v00, v11, v01], axis=-1),
                  np.stack([v10, v11, v01], axis=-1))
    tris = np.concatenate([t1.reshape(-1, 3), t2.reshape(-1, 3)], axis=0)

    gx = lo[0] + g * np.arange(nx + 1)
    gy = lo[1] + g * np.arange(ny + 1)
    grid = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = domain.contains(grid[tris].mean(axis=1))
    tris = tris[keep]
    if len(tris) == 0:
        raise GeometryError("empty mesh: no triangle centroid inside the domain")

    used, inv = np.unique(tris, return_inverse=True)
    vertices = grid[used]
    triangles = inv.reshape(-1, 3).astype(np.int64)
    order = np.lexsort((triangles[:, 2], triangles[:, 1], triangles[:, 0]))
    triangles = triangles[order]
    dist = domain.distance_to_boundary(vertices)
    boundary = dist < 1e-12
    return TriMesh(vertices, triangles, boundary, dist, g, domain)


def boundary_layer(mesh, t):
    """Indices of triangles whose centroid is within distance t of the boundary."""
    if t <= 0:
        raise GeometryError("layer width must be positive")
    d = mesh.domain.distance_to_boundary(mesh.centroids())
    return np.nonzero(d < t)[0]


def build_cutoff(mesh, eps):
    """Piecewise-linear cutoff: 0 on dist<4eps, 1 on dist>=5eps, linear ramp.

    When 4*eps reaches the inradius the whole domain is boundary layer and
    the cutoff degenerates to zero, which is the honest large-eps limit.
    """
    if mesh.h > eps / 2:
        raise GeometryError("ramp unresolved: need h <= eps/2")
    d = mesh.vertex_dist
    return np.clip((d - 4 * eps) / eps, 0.0, 1.0)


@dataclass(frozen=True)
class BallSpec:
    center: np.ndarray
    radius: float
    kind: str  # "interior" (4B inside the domain) or "boundary" (center on it)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


def sample_balls(domain, kind, count, radius_range, seed=42, c0=0.1):
    """Seeded admissible balls: interior ones satisfy 4B in Omega by rejection,
    boundary ones are centered at uniform random arc-length boundary points."""
    rmin, rmax = radius_range
    cap = c0 * domain.diameter
    if not (0 < rmin <= rmax < cap):
        raise GeometryError(f"radius_range must lie within (0, {cap:.4g})")
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box
    balls = []
    if kind == "interior":
        tries = 0
        while len(balls) < count:
            if tries > 10_000 * max(count, 1):
                raise GeometryError("no admissible ball after rejection budget")
            tries += 1
            c = lo + rng.random(2) * (hi - lo)
            r = np.exp(rng.uniform(np.log(rmin), np.log(rmax)))
            if domain.contains(c) and domain.distance_to_boundary(c) >= 4 * r:
                balls.append(BallSpec(c, float(r), "interior"))
    elif kind == "boundary":
        e = domain.edges
        lens = np.linalg.norm(e[:, 1] - e[:, 0], axis=1)
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        for _ in range(count):
            s = rng.uniform(0, cum[-1])
            k = int(np.searchsorted(cum, s, side="right")) - 1
            k = min(k, len(lens) - 1)
            t = (s - cum[k]) / lens[k]
            c = e[k, 0] + t * (e[k, 1] - e[k, 0])
            r = np.exp(rng.uniform(np.log(rmin), np.log(rmax)))
            balls.append(BallSpec(c, float(r), "boundary"))
    else:
        raise GeometryError(f"unknown ball kind '{kind}'")
    return balls


MESH_MAGIC = b"HLMESH1"


def save_mesh(mesh, path):
    """Versioned binary mesh cache (header, vertices, triangles, flag bitset)."""
    with open(path, "wb") as fh:
        fh.write(MESH_MAGIC)
        np.array([mesh.n_vertices], dtype="<u8").tofile(fh)
        mesh.vertices.astype("<f8").tofile(fh)
        np.array([mesh.n_triangles], dtype="<u8").tofile(fh)
        mesh.triangles.astype("<u4").tofile(fh)
        np.packbits(mesh.boundary.astype(np.uint8)).tofile(fh)
        np.array([mesh.h], dtype="<f8").tofile(fh)


def load_mesh(path, domain):
    with open(path, "rb") as fh:
        magic = fh.read(len(MESH_MAGIC))
        if magic != MESH_MAGIC:
            raise GeometryError("bad mesh cache header")
        nv = int(np.fromfile(fh, dtype="<u8", count=1)[0])
        vertices = np.fromfile(fh, dtype="<f8", count=2 * nv).reshape(nv, 2)
        nt = int(np.fromfile(fh, dtype="<u8", count=1)[0])
        triangles = np.fromfile(fh, dtype="<u4", count=3 * nt).reshape(nt, 3)
        nbytes = (nv + 7) // 8
        bits = np.fromfile(fh, dtype=np.uint8, count=nbytes)
        boundary = np.unpackbits(bits)[:nv].astype(bool)
        h = float(np.fromfile(fh, dtype="<f8", count=1)[0])
    dist = domain.distance_to_boundary(vertices)
    return TriMesh(vertices, triangles.astype(np.int64), boundary, dist, h, domain)
