"""Replica-averaged density converging to the heat equation as N grows.

Run: python3 demos/hydrodynamic_limit.py   (about 20 s)
"""

from slowboundary import hydrodynamic_experiment

for theta in (0.5, 1.0, 2.0):
    rep = hydrodynamic_experiment([32, 64, 128], [theta], 0.1, 0.9, 0.5, [0.1], replicas=60,
                                  seed=1)
    print(f"theta={theta:g} ({rep.rows[0]['bc']})")
    for row in rep.rows:
        print(f"  N={row['N']:4d}  L1 annealed {row['l1_annealed']:.4f}  "
              f"quenched {row['l1_quenched_mean']:.4f}+/-{row['l1_quenched_se']:.4f}")
