"""Dyadic cube trees, the stopping-time cube decomposition, and localized
(truncated) maximal operators on uniform grids.

Everything here is grid-exact: open sets are unions of finest-level cells,
cube containment is integer arithmetic, and the decomposition properties are
combinatorial facts checked by cell scans, not tolerances.  The maximal
operators range over a discretized family of sub-balls (centers at cell
centers, radii in a geometric ladder); this under-estimates the continuum
operator by a bounded factor which the tests pin against an exhaustive-radius
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d

MAX_GRID_LEVEL = 14


class DyadicError(ValueError):
    pass


@dataclass(frozen=True)
class DyadicCube:
    """Dyadic subcube of a root cube: side = root_side * 2^-level."""

    level: int
    index: tuple
    root_corner: tuple = (0.0, 0.0)
    root_side: float = 1.0

    @property
    def side(self):
        return self.root_side / (1 << self.level)

    @property
    def corner(self):
        s = self.side
        return (self.root_corner[0] + self.index[0] * s,
                self.root_corner[1] + self.index[1] * s)

    def parent(self):
        if self.level == 0:
            return None
        return DyadicCube(self.level - 1, (self.index[0] // 2, self.index[1] // 2),
                          self.root_corner, self.root_side)

    def children(self):
        i, j = self.index
        return [DyadicCube(self.level + 1, (2 * i + a, 2 * j + b),
                           self.root_corner, self.root_side)
                for a in (0, 1) for b in (0, 1)]

    def cell_slice(self, max_level):
        """Finest-level cell block covered by this cube (integer-exact)."""
        w = 1 << (max_level - self.level)
        i, j = self.index
        return slice(i * w, (i + 1) * w), slice(j * w, (j + 1) * w)


@dataclass
class GridFunction:
    """One real value per cell of a uniform 2^N x 2^N grid over a root cube."""

    values: np.ndarray
    root_corner: tuple = (0.0, 0.0)
    root_side: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.values.shape[0]
        if self.values.ndim != 2 or self.values.shape[1] != n:
            raise DyadicError("grid must be square")
        if n & (n - 1):
            raise DyadicError("grid side must be a power of two")
        if n > (1 << MAX_GRID_LEVEL):
            raise DyadicError(f"grid level exceeds {MAX_GRID_LEVEL}")
        if not np.all(np.isfinite(self.values)):
            raise DyadicError("grid values must be finite")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def cell(self):
        return self.root_side / self.n

    def cell_centers(self):
        if "centers" not in self._cache:
            t = self.root_side * (np.arange(self.n) + 0.5) / self.n
            cx = self.root_corner[0] + t
            cy = self.root_corner[1] + t
            self._cache["centers"] = np.stack(
                np.meshgrid(cx, cy, indexing="ij"), axis=-1)
        return self._cache["centers"]


@dataclass(frozen=True)
class DistributionSet:
    """Cells of Q0 where a (maximal-function) grid exceeds the threshold."""

    threshold: float
    members: np.ndarray  # bool over the finest cells of Q0

    @property
    def measure_cells(self):
        return int(self.members.sum())


def cz_decompose(Q, E, max_level):
    """Maximal dyadic subcubes of Q filling the open cell-set E.

    E is a boolean array over the finest-level cells of Q (shape 2^max_level
    squared).  Requires |E| < 2^-d |Q|.  Output cubes satisfy: (1) each cube
    is contained in E, (2) its dyadic parent is not, (3) their union is E
    exactly; sorted by (level, index).
    """
    E = np.asarray(E, dtype=bool)
    n = 1 << max_level
    if E.shape != (n, n):
        raise DyadicError("E must be given at the finest level of Q")
    total = int(E.sum())
    if total >= n * n // 4:
        raise DyadicError("measure precondition violated: need |E| < 2^-d |Q|")
    if total == 0:
        return []

    # prefix sums make "cube contained in E" an O(1) integer query
    ps = np.zeros((n + 1, n + 1), dtype=np.int64)
    ps[1:, 1:] = E.astype(np.int64).cumsum(0).cumsum(1)

    def count(i0, i1, j0, j1):
        return ps[i1, j1] - ps[i0, j1] - ps[i1, j0] + ps[i0, j0]

    out = []
    stack = [(0, 0, 0)]
    while stack:
        lev, i, j = stack.pop()
        w = 1 << (max_level - lev)
        c = count(i * w, (i + 1) * w, j * w, (j + 1) * w)
        if c == 0:
            continue
        if c == w * w:
            # fully inside E; parent was visited and not fully inside
            out.append(DyadicCube(lev, (i, j), Q.corner, Q.side))
            continue
        if lev < max_level:
            for a in (0, 1):
                for b in (0, 1):
                    stack.append((lev + 1, 2 * i + a, 2 * j + b))
    out.sort(key=lambda q: (q.level, q.index))
    return out


LADDER_FACTOR = 2.0 ** 0.25  # quarter-octave: 2r is always four rungs up


def coarse_radii(cell, radius, factor=LADDER_FACTOR):
    """Geometric radius ladder cell * factor^k capped at the ball radius."""
    if radius < cell:
        return np.array([])
    k = int(np.floor(np.log(radius / cell) / np.log(factor) + 1e-12))
    return cell * factor ** np.arange(k + 1)


def exhaustive_radii(cell, radius):
    """Oracle radius family: every integer multiple of the cell size up to
    the ball radius, joined with the coarse ladder so it contains it."""
    kmax = int(np.floor(radius / cell))
    return np.union1d(cell * np.arange(1, kmax + 1), coarse_radii(cell, radius))


CENTER_SLACK = 0.75  # cells; absorbs rounding of continuum centers to the lattice


def _disk_offsets(rho):
    """Row extents of the integer disk {(di,dj): di^2+dj^2 <= rho^2}."""
    k = int(np.floor(rho))
    rows = []
    for di in range(-k, k + 1):
        w = int(np.floor(np.sqrt(rho * rho - di * di) + 1e-12))
        rows.append((di, w))
    return rows


def _disk_sums(values, rho):
    """Sum of `values` over the integer disk around every cell (cumsum exact).

    Cells whose disk crosses the grid edge get a truncated sum; callers only
    read centers whose disk lies inside the grid.  Also returns the full
    integer-disk cell count.
    """
    n = values.shape[0]
    acc = np.zeros_like(values)
    count = 0
    csum = np.zeros((n, n + 1))
    csum[:, 1:] = np.cumsum(values, axis=1)
    idx = np.arange(n)
    for di, w in _disk_offsets(rho):
        lo = np.clip(idx - w, 0, n)
        hi = np.clip(idx + w + 1, 0, n)
        row_sum = csum[:, hi] - csum[:, lo]
        shifted = np.zeros_like(values)
        if di >= 0:
            shifted[: n - di] = row_sum[di:]
        else:
            shifted[-di:] = row_sum[: n + di]
        acc += shifted
        count += 2 * w + 1
    return acc, count


def _disk_dilate(values, rho):
    """Grayscale dilation by the integer disk via per-row 1d max filters."""
    n = values.shape[0]
    out = np.full_like(values, -np.inf)
    for di, w in _disk_offsets(rho):
        row_max = maximum_filter1d(values, size=2 * w + 1, axis=1,
                                   mode="constant", cval=-np.inf)
        if di >= 0:
            out[: n - di] = np.maximum(out[: n - di], row_max[di:])
        else:
            out[-di:] = np.maximum(out[-di:], row_max[: n + di])
    return out


def _ball_cell_geometry(f, ball):
    center, radius = np.asarray(ball[0], float), float(ball[1])
    cc = f.cell_centers()
    dist2 = ((cc - center) ** 2).sum(-1)
    inside = dist2 <= radius * radius
    if not inside.any():
        raise DyadicError("ball misses the grid")
    return center, radius, dist2, inside


def local_maximal(f, ball, radii=None, min_radius=None):
    """Localized maximal function sup{avg_{B'} |f| : x in B', B' inside B}.

    B' ranges over balls centered at cell centers with radii from the given
    ladder (default: geometric sqrt(2) ladder from the cell size), plus the
    degenerate single-cell value when min_radius allows it, so the result is
    never below |f|.  Returns the value grid (NaN outside B) and the mask.
    """
    center, radius, dist2, inside = _ball_cell_geometry(f, ball)
    cell = f.cell
    n = f.n
    if radii is None:
        radii = coarse_radii(cell, radius)
    radii = np.asarray(radii, dtype=float)
    radii = radii[radii <= radius + 1e-12]
    if min_radius is not None:
        radii = radii[radii >= min_radius - 1e-12]
    absf = np.abs(f.values)
    include_degenerate = min_radius is None or min_radius <= cell / 2 + 1e-12
    best = np.where(inside, absf, -np.inf) if include_degenerate \
        else np.full_like(absf, -np.inf)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    for r in radii:
        # membership radius carries the lattice-rounding slack so that every
        # cell of B is covered by some admissible sub-ball at every radius
        # (no discretization "family gaps" near the rim of B)
        rho = r / cell + CENTER_SLACK
        k = int(np.floor(rho))
        sums, cnt = _disk_sums(absf, rho)
        adm = max(radius - r, 0.0) + CENTER_SLACK * cell
        ok = (dist2 <= adm * adm + 1e-12) \
            & (ii >= k) & (ii < n - k) & (jj >= k) & (jj < n - k)
        if not ok.any():
            continue
        vals = np.where(ok, sums / cnt, -np.inf)
        best = np.maximum(best, _disk_dilate(vals, rho))
    out = np.where(inside & np.isfinite(best), best, np.nan)
    return out, inside


def truncated_maximal(f, ball, eps, radii=None):
    """Localized maximal function restricted to sub-ball radii >= eps."""
    radius = float(ball[1])
    if not (0 < eps < radius):
        raise DyadicError("empty ball family: need 0 < eps < radius(B)")
    return local_maximal(f, ball, radii=radii, min_radius=eps)


def distribution_set(mf, Q0, t):
    """Exact thresholding of a maximal-function grid over the cube Q0."""
    if t <= 0:
        raise DyadicError("threshold must be positive")
    vals = mf.values if isinstance(mf, GridFunction) else np.asarray(mf)
    max_level = int(np.log2(vals.shape[0]))
    sl = Q0.cell_slice(max_level) if Q0 is not None else (slice(None),) * 2
    members = np.zeros(vals.shape, dtype=bool)
    block = vals[sl]
    members[sl] = np.where(np.isnan(block), False, block > t)
    return DistributionSet(threshold=float(t), members=members)


@dataclass(frozen=True)
class MaximalBoundsReport:
    p: float
    weak_ratio: float
    strong_ratio: float
    n_lambdas: int


def verify_weighted_maximal_bounds(f, w, ball, p=2.0, n_lambdas=24):
    """Measured weak/strong-type constants of the localized maximal operator.

    weak:  sup_lambda lambda * w{M_B f > lambda} / int_B |f| w
    strong: int_B (M_B f)^p w / int_B |f|^p w   (needs p > 1)
    """
    if p <= 1:
        raise DyadicError("strong-type check needs p > 1")
    mf, mask = local_maximal(f, ball)
    cc = f.cell_centers()
    wvals = w(cc.reshape(-1, 2)).reshape(cc.shape[:2])
    area = f.cell ** 2
    absf = np.abs(f.values)
    fw = float((absf * wvals)[mask].sum() * area)
    fpw = float((absf ** p * wvals)[mask].sum() * area)
    m = mf[mask]
    wm = wvals[mask]
    weak = 0.0
    pos = m[m > 0]
    if pos.size and fw > 0:
        lams = np.quantile(pos, np.linspace(0.05, 0.999, n_lambdas))
        for lam in np.unique(lams):
            wmeas = float(wm[m > lam].sum() * area)
            weak = max(weak, lam * wmeas / fw)
    strong = float((m ** p * wm).sum() * area / fpw) if fpw > 0 else 0.0
    return MaximalBoundsReport(p=float(p), weak_ratio=weak,
                               strong_ratio=strong, n_lambdas=n_lambdas)
