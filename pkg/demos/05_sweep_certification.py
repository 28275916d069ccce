"""Practical-stability certification over an initial-condition sweep.

A lattice of initial plant states inside a ball of radius Delta1 is run
through the observer-based loop; the certificate finds the smallest
ultimate radius Delta2 and a dominating KL envelope, then checks the
combined-system bound with its enlarged radius 4 * Delta2.

This is the scripted version of what ``obpclab sweep`` does from a TOML
file; a short demo lattice keeps it quick (the full 25-point, span-15
sweep is exercised by the acceptance suite).
"""

import numpy as np

from obpclab import (
    Scenario,
    certify_practical_stability,
    lattice_in_ball,
    run_obpc,
    theorem31_bound_check,
    theorem31_constants,
)

DELTA1 = 12.0
NU = 15.0

base = Scenario(plant="example1", span=8.0)
points = lattice_in_ball(DELTA1, side=3)
print(f"running {len(points)} initial states inside the radius-{DELTA1} ball")

results = []
for p in points:
    result = run_obpc(base.with_initial_state(p))
    results.append(result)
    print(f"  x0 = ({p[0]:7.3f}, {p[1]:7.3f})  ->  "
          f"final ||x|| = {result.norm_x[-1]:.2e}")

estimate = certify_practical_stability(results, Delta1=DELTA1)
print()
print(f"certificate: Delta1 = {estimate.delta1:.3f}, "
      f"Delta2 = {estimate.delta2:.2e}, violations = {estimate.violations}")
print(f"dominating envelope: ||x(t)|| <= "
      f"{estimate.fit.c:.3f} * ||x0|| * exp(-{estimate.fit.sigma:.3f} t)"
      f"  (or the Delta2 floor)")

# combined-system bound with the enlarged radii (nu - Delta1, 4 Delta2)
shrunk, enlarged = theorem31_constants(nu=NU, alpha=0.25, Delta1=DELTA1,
                                       Delta2=estimate.delta2)
check = theorem31_bound_check(results, nu=NU, Delta1=DELTA1,
                              Delta2=estimate.delta2, beta_bar=estimate.fit)
print()
print(f"combined-system bound with radii ({shrunk:.2f}, {enlarged:.2e}): "
      f"{'holds' if check.passed else 'violated'} "
      f"(worst margin {check.worst_margin:.2e})")
print()
print("equivalent CLI invocation: obpclab sweep sweep.toml -o outdir")
