"""Dyadic stopping-time cubes and localized maximal operators.

Decomposes a random open set into maximal dyadic cubes, prints the level
census, then exercises the localized and truncated maximal operators and the
weighted strong/weak-type bounds.
"""

import numpy as np

from homoglab import dyadic as dy
from homoglab import geometry as geo
from homoglab import weights as wt

rng = np.random.default_rng(11)

print("=== stopping-time decomposition of a random open set ===")
E = rng.random((64, 64)) < 0.18
print(f"|E| / |Q| = {E.mean():.3f}  (must be < 2^-d = 0.25)")
cubes = dy.cz_decompose(dy.DyadicCube(0, (0, 0)), E, max_level=6)
census = {}
for c in cubes:
    census[c.level] = census.get(c.level, 0) + 1
print(f"{len(cubes)} maximal cubes; level census:",
      {k: census[k] for k in sorted(census)})
cover = np.zeros_like(E, dtype=int)
for c in cubes:
    cover[c.cell_slice(6)] += 1
print("disjoint:", cover.max() <= 1, " union = E exactly:",
      bool(np.array_equal(cover == 1, E)))

print("\n=== localized maximal function on a ball ===")
ball = ((0.5, 0.5), 0.45)
f = dy.GridFunction(rng.random((64, 64)))
m, mask = dy.local_maximal(f, ball)
print(f"range of M_B f on B: [{np.nanmin(m):.3f}, {np.nanmax(m):.3f}]  "
      f"(f itself spans [{f.values[mask].min():.3f}, {f.values[mask].max():.3f}])")
me, _ = dy.local_maximal(f, ball, radii=dy.exhaustive_radii(f.cell, ball[1]))
ratio = me[mask] / m[mask]
print(f"exhaustive-radius oracle / coarse ladder in "
      f"[{np.nanmin(ratio):.3f}, {np.nanmax(ratio):.3f}]")

print("\n=== truncation and the scaling comparison ===")
eps = 2 * f.cell
m1, _ = dy.truncated_maximal(f, ball, eps)
m2, _ = dy.truncated_maximal(f, ball, 2 * eps)
both = np.isfinite(m1) & np.isfinite(m2)
print(f"max of M^eps - 2^d M^(2 eps): {(m1[both] - 4 * m2[both]).max():.3e} "
      "(never positive)")

print("\n=== weighted maximal bounds ===")
w = wt.make_distance_weight(geo.unit_square(), -0.5)
rep = dy.verify_weighted_maximal_bounds(f, w, ball, p=2.0)
print(f"weak-type ratio  {rep.weak_ratio:.3f}")
print(f"strong-type ratio (p=2) {rep.strong_ratio:.3f}")
t = np.nanquantile(m[mask], 0.8)
es = dy.distribution_set(m, dy.DyadicCube(1, (0, 0)), t)
print(f"distribution set at the 80th percentile covers "
      f"{es.measure_cells} cells of the lower-left quarter cube")
