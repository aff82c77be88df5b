"""Local solution probes: Hardy's inequality, the single-weight reverse
Hoelder condition, and the two-function decomposition of global solutions.

All three probes report measured ratios over seeded families; the distance
trial makes the Hardy ratio exactly 1 on the aligned square mesh.
"""

import numpy as np

from homoglab import estimates as est, fem, geometry as geo
from homoglab.weights import constant_weight, make_distance_weight

square = geo.unit_square()
saw = geo.sawtooth()

print("=== Hardy: int u^2 dist^-2 <= C int |grad u|^2 ===")
for dom, h in ((square, 1 / 64), (saw, 1 / 64)):
    ce = est.hardy_check(dom, h=h, n_random=25, seed=0)
    print(f"{dom.name:9s}: sup ratio {ce.constant:.4f} over {ce.n_trials} "
          f"trials (dist trial: {ce.extra['table']['dist']:.6f}, "
          f"worst: {ce.worst_trial})")

print("\n=== reverse Hoelder for local solutions, weight dist^-1/2 ===")
mesh = geo.triangulate(square, 1 / 64)
w = make_distance_weight(square, -0.5)
balls = geo.sample_balls(square, "boundary", 16, (0.03, 0.08), seed=7)
ce = est.check_reverse_holder(square, fem.get_coefficient("identity"), 1.0,
                              w, balls, trials_per_ball=5, seed=0, mesh=mesh)
print(f"sup ratio {ce.constant:.4f} over {ce.n_trials} (ball, trial) pairs; "
      f"worst {ce.worst_trial}")
hi = est.probe_higher_integrability(square, fem.get_coefficient("identity"),
                                    1.0, w, balls, trials_per_ball=3,
                                    seed=0, mesh=mesh)
print(f"largest passing gradient exponent p = {hi.extra['largest_p']:g} "
      f"(table {dict((p, round(v, 2)) for p, v in hi.extra['table'].items())})")

print("\n=== decomposition of a global solution around balls ===")
balls = geo.sample_balls(square, "interior", 10, (0.02, 0.05), seed=2) \
    + geo.sample_balls(square, "boundary", 10, (0.02, 0.05), seed=3)
probe = est.decomposition_probe(square, fem.get_coefficient("checkerboard"),
                                constant_weight(), balls, trials=2, seed=0,
                                h=1 / 64, eps=1 / 8)
n1 = [r["n1_ratio"] for r in probe.records]
rr = [r["r_ratio"] for r in probe.records]
print(f"{len(probe.records)} records over {len(balls)} balls x 2 trials")
print(f"near-field ratios  in [{min(n1):.3f}, {max(n1):.3f}]")
print(f"remainder ratios   in [{min(rr):.3f}, {max(rr):.3f}]")
print(f"pointwise |F| <= F_B + R_B violation: "
      f"{probe.triangle_inequality_violation:.2e}")
