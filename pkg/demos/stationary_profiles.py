"""Stationary mean profile: exact finite-N line vs the macroscopic limit.

Run: python3 demos/stationary_profiles.py
"""

import numpy as np

from slowboundary import ModelParams, mean_profile_closed_form, stationary_profile

alpha, beta = 0.2, 0.8
for theta in (0.0, 0.5, 1.0, 2.0):
    limit = stationary_profile(theta, alpha, beta)
    print(f"theta = {theta:g}")
    for N in (10, 100, 1000):
        prof = mean_profile_closed_form(ModelParams(N, alpha, beta, theta))
        x = np.arange(1, N)
        gap = np.max(np.abs(prof.values - limit(x / N)))
        print(f"  N={N:5d}  rho(1)={prof.values[0]:.4f}  rho(N-1)={prof.values[-1]:.4f}"
              f"  sup gap to limit {gap:.2e}")
# theta < 1 pins the reservoir values, theta = 1 gives a Robin line and theta > 1 a flat profile.
