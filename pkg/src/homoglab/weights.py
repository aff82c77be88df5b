"""Muckenhoupt-type weights and ball-sampled constant estimates.

Weights come in three kinds: constant, distance-power dist(x, bdry)^sigma
(the admissible range is sigma in (-1, 1)), and tabulated grids.  A_p and
reverse Hoelder constants are estimated as suprema over a seeded family of
balls; ball averages use a midpoint tensor grid restricted to the ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class WeightError(ValueError):
    pass


class SingularEvaluationError(WeightError):
    pass


@dataclass(frozen=True)
class Weight:
    """Sampleable positive weight with optional closed form.

    kind is one of "constant", "distance_power", "tabulated".  For the
    distance power, a1_regime records whether sigma <= 0 (A_1 class) or only
    the A_p, p > 1, regime applies.
    """

    kind: str
    c: float = 1.0
    domain: object = None
    sigma: float = 0.0
    grid: np.ndarray = None
    grid_box: tuple = None
    a1_regime: bool = True

    def __call__(self, points):
        return eval_weight(self, points)

    @property
    def label(self):
        if self.kind == "constant":
            return f"const:{self.c:g}"
        if self.kind == "distance_power":
            return f"sigma:{self.sigma:g}"
        return "tabulated"


def constant_weight(c=1.0):
    if c <= 0:
        raise WeightError("invalid weight: constant must be positive")
    return Weight(kind="constant", c=float(c))


def make_distance_weight(domain, sigma):
    """Distance-power weight dist(x, bdry)^sigma on a polygon.

    sigma in (-1, 0] gives an A_1 weight, sigma in (0, 1) only A_2;
    anything outside (-1, 1) is rejected.
    """
    if not (-1.0 < sigma < 1.0):
        raise WeightError("inadmissible exponent: sigma must lie in (-1, 1)")
    return Weight(kind="distance_power", domain=domain, sigma=float(sigma),
                  a1_regime=sigma <= 0)


def tabulated_weight(grid, box):
    """Piecewise-constant weight from a positive cell grid over a box."""
    g = np.asarray(grid, dtype=float)
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise WeightError("invalid weight: tabulated values must be positive")
    return Weight(kind="tabulated", grid=g,
                  grid_box=(np.asarray(box[0], float), np.asarray(box[1], float)))


def eval_weight(w, points):
    """Evaluate the weight; raises on singular boundary evaluation."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    pts = p[None, :] if single else p
    if w.kind == "constant":
        out = np.full(len(pts), w.c)
    elif w.kind == "distance_power":
        if w.sigma == 0.0:
            out = np.ones(len(pts))
        else:
            d = w.domain.distance_to_boundary(pts)
            if w.sigma < 0 and np.any(d == 0.0):
                raise SingularEvaluationError(
                    "singular evaluation: boundary point with negative exponent")
            out = d ** w.sigma
    elif w.kind == "tabulated":
        lo, hi = w.grid_box
        nx, ny = w.grid.shape
        ix = np.clip(((pts[:, 0] - lo[0]) / (hi[0] - lo[0]) * nx).astype(int), 0, nx - 1)
        iy = np.clip(((pts[:, 1] - lo[1]) / (hi[1] - lo[1]) * ny).astype(int), 0, ny - 1)
        out = w.grid[ix, iy]
    else:
        raise WeightError(f"unknown weight kind '{w.kind}'")
    return float(out[0]) if single else out


@dataclass(frozen=True)
class ApEstimate:
    p: float
    constant: float
    n_balls: int
    radius_range: tuple
    worst_ball: tuple  # (center, radius)


@dataclass(frozen=True)
class ReverseHolderProbe:
    exponent: float      # largest passing s
    constant: float      # sup ratio at that s
    table: dict          # s -> sup ratio


@dataclass(frozen=True)
class BallSampling:
    n_balls: int = 200
    radius_range: tuple = (0.01, 0.2)
    quad_n: int = 16
    seed: int = 42

    def __post_init__(self):
        if self.n_balls < 1:
            raise WeightError("sampling needs at least one ball")
        if self.quad_n < 4:
            raise WeightError("quadrature needs >= 4 points per ball diameter")


def sample_ball_family(region, sampling):
    """Seeded (center, radius) family: centers uniform in the region box,
    radii log-uniform in the radius range.

    Ball k is drawn from its own stream keyed by (seed, k), so the family is
    nested when n_balls grows with the seed fixed.
    """
    lo = np.asarray(region[0], dtype=float)
    hi = np.asarray(region[1], dtype=float)
    rmin, rmax = sampling.radius_range
    centers = np.empty((sampling.n_balls, 2))
    radii = np.empty(sampling.n_balls)
    for k in range(sampling.n_balls):
        rng = np.random.default_rng((sampling.seed, k))
        centers[k] = lo + rng.random(2) * (hi - lo)
        radii[k] = np.exp(rng.uniform(np.log(rmin), np.log(rmax)))
    return centers, radii


def ball_quad_nodes(center, radius, quad_n):
    """Midpoint tensor-grid nodes of the ball's bounding box kept inside it."""
    t = (np.arange(quad_n) + 0.5) / quad_n * 2 - 1  # midpoints of [-1, 1]
    gx, gy = np.meshgrid(t, t, indexing="ij")
    pts = np.stack([gx, gy], axis=-1).reshape(-1, 2) * radius + np.asarray(center)
    r2 = ((pts - np.asarray(center)) ** 2).sum(axis=1)
    return pts[r2 < radius * radius]


def ball_values(w, center, radius, quad_n):
    """Weight values at the ball's midpoint quadrature nodes.

    For distance powers the node distance is floored at the midpoint-cell
    scale r/(2n): a node stands for a cell of side 2r/n, and flooring keeps
    the mildly singular averages consistent and stable under refinement
    (a raw point evaluation arbitrarily close to the boundary line would
    otherwise dominate the ball average).
    """
    nodes = ball_quad_nodes(center, radius, quad_n)
    if nodes.size == 0:
        return None
    if w.kind == "distance_power" and w.sigma != 0.0:
        d = w.domain.distance_to_boundary(nodes)
        vals = np.maximum(d, radius / (2.0 * quad_n)) ** w.sigma
    else:
        vals = eval_weight(w, nodes)
    if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        raise WeightError("invalid weight: nonpositive or non-finite sample")
    return vals


def ap_ball_quantity(vals, p):
    """Single-ball A_p quantity from quadrature values (>= 1 by convexity)."""
    if p == 1.0:
        return float(vals.mean() / vals.min())
    return float(vals.mean() * (vals ** (-1.0 / (p - 1.0))).mean() ** (p - 1.0))


def estimate_ap_constant(w, p, region, sampling=BallSampling()):
    """Estimate the A_p constant as a sup over sampled balls.

    Deterministic for a fixed seed; the ball family depends only on
    (region, sampling), so estimates at different p are comparable.
    """
    if p < 1.0:
        raise WeightError("A_p needs p >= 1")
    centers, radii = sample_ball_family(region, sampling)
    best, worst = -np.inf, None
    used = 0
    for c, r in zip(centers, radii):
        vals = ball_values(w, c, r, sampling.quad_n)
        if vals is None:
            continue
        used += 1
        q = ap_ball_quantity(vals, p)
        if q > best:
            best, worst = q, (c.copy(), float(r))
    if used == 0:
        raise WeightError("all sampled balls missed the region")
    return ApEstimate(p=float(p), constant=best, n_balls=used,
                      radius_range=tuple(sampling.radius_range), worst_ball=worst)


RH_LADDER = tuple(round(0.1 * k, 1) for k in range(1, 10))


def probe_reverse_holder(w, region, sampling=BallSampling(), cap=2.0,
                         ladder=RH_LADDER):
    """Largest exponent s with sup_B (avg w^{1+s})^{1/(1+s)} / avg w under cap.

    Returns the per-s table as well; a weight passing larger s has better
    self-improving integrability.
    """
    centers, radii = sample_ball_family(region, sampling)
    fam = []
    for c, r in zip(centers, radii):
        vals = ball_values(w, c, r, sampling.quad_n)
        if vals is not None:
            fam.append(vals)
    if not fam:
        raise WeightError("all sampled balls missed the region")
    table = {}
    for s in ladder:
        sup = 0.0
        for vals in fam:
            ratio = (vals ** (1.0 + s)).mean() ** (1.0 / (1.0 + s)) / vals.mean()
            sup = max(sup, float(ratio))
        table[s] = sup
    passing = [s for s in ladder if table[s] <= cap]
    if not passing:
        return ReverseHolderProbe(exponent=0.0, constant=table[ladder[0]], table=table)
    s_star = max(passing)
    return ReverseHolderProbe(exponent=s_star, constant=table[s_star], table=table)
