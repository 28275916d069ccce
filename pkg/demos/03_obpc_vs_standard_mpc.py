"""The two receding-horizon schemes side by side on both benchmarks.

The observer-based scheme predicts with a time-retarded observer driven
only by stored past outputs, so its optimizer can act from the very first
sampling instant.  The standard scheme forward-simulates the plant from
the current estimate; started from a zero estimate its first optimization
is vacuous and the first applied control is exactly zero.
"""

import numpy as np

from obpclab import Scenario, count_local_maxima, run_obpc, run_standard_mpc


def describe(result, label):
    tail = result.norm_x[result.times >= 10.0]
    peaks = count_local_maxima(result.norm_x, threshold=1e-3)
    print(f"  {label}:")
    print(f"    first applied control    : {result.first_control}")
    print(f"    ||x|| at the end         : {result.norm_x[-1]:.3e}")
    if tail.size:
        print(f"    max ||x|| for t >= 10    : {tail.max():.3e}")
    print(f"    local maxima of ||x||    : {peaks}")
    print(f"    total horizon cost       : {np.sum(result.step_costs):.3f}")
    print(f"    wall clock               : {np.sum(result.wall_times):.1f} s")


# ---------------------------------------------------------------------------
# Benchmark 1: diffusively coupled plant, constant history at (11, 8)
# ---------------------------------------------------------------------------
print("benchmark 1 (coupled plant), span 15:")
describe(run_obpc(Scenario(plant="example1", span=15.0)), "observer-based")
describe(run_standard_mpc(Scenario(plant="example1", scheme="standard_mpc",
                                   span=15.0)), "standard")
print()
print("the observer-based loop acts immediately; the standard loop's first")
print("step is a free fall because its estimate starts at the origin.")
print()

# ---------------------------------------------------------------------------
# Benchmark 2: harmonic oscillator - the swinging trajectory
# ---------------------------------------------------------------------------
print("benchmark 2 (oscillator), span 20:")
obpc2 = run_obpc(Scenario(plant="example2", span=20.0))
mpc2 = run_standard_mpc(Scenario(plant="example2", scheme="standard_mpc",
                                 span=20.0))
describe(obpc2, "observer-based")
describe(mpc2, "standard")
print()
print("the rotational dynamics make the observer-based norm swing through")
print("many local maxima while it spirals in; the standard loop damps the")
print("swing sooner once its estimate catches up.")
