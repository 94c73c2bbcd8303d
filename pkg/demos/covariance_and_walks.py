"""Two-point correlations as occupation times of a walk on the triangle.

The exact correlation field is compared with the Monte Carlo occupation time of
the absorbed walk, both via direct simulation and via the layered coupling walk.

Run: python3 demos/covariance_and_walks.py
"""

import numpy as np

from slowboundary import (ModelParams, covariance_solve, hydrostatics as hs,
                          mean_profile_closed_form)

N, alpha, beta = 20, 0.2, 0.8
start = (5, 10)
rng = np.random.default_rng(7)
for theta in (0.0, 1.0, 2.0):
    p = ModelParams(N, alpha, beta, theta)
    a2 = mean_profile_closed_form(p).a_N ** 2
    phi = covariance_solve(p)
    exact = -phi(*start) / a2
    mc, se = hs.occupation_time_mc(start, p, 4000, rng)
    levels, d = hs.coupling_walk_samples(start, p, 4000, rng)
    print(f"theta={theta:g}: phi{start}={phi(*start):+.3e}  T exact {exact:.3f}  "
          f"direct {mc:.3f}+/-{se:.3f}  coupling {d.mean():.3f}  mean levels {levels.mean():.1f}")
