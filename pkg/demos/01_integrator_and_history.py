"""Fixed-step integration core: RK4 accuracy and the delayed-history buffer.

The whole laboratory sits on a deliberately plain numerical base: a
classical RK4 integrator with every input frozen per substep, and a
uniformly sampled history buffer whose grid-time lookups are bit-exact.
This script shows both behaving as advertised.
"""

import numpy as np

from obpclab import (
    HistoryBuffer,
    Trajectory,
    make_time_grid,
    rk4_integrate,
    rk4_step_matrices,
)

# ---------------------------------------------------------------------------
# 1. Fourth-order convergence against an analytic solution
# ---------------------------------------------------------------------------
print("RK4 error vs exp(-t) at t = 1, halving the substep:")
for K in (5, 10, 20, 40, 80):
    grid = make_time_grid(T=0.1, N=5, K=K)
    traj = rk4_integrate(lambda t, x, u: -x, np.array([1.0]), 0.0, 1.0, grid)
    err = abs(traj.states[-1, 0] - np.exp(-1.0))
    print(f"  h = {grid.h:.5f}   error = {err:.3e}")
print("each halving shrinks the error by ~16x, the RK4 signature.\n")

# ---------------------------------------------------------------------------
# 2. The affine fast path reproduces the stage-wise integrator exactly
# ---------------------------------------------------------------------------
# For a linear system x' = A x + c with c frozen over a step, one RK4 step
# collapses to x+ = M x + S c with polynomial matrices M, S.
A = np.array([[-1.0, 1.0], [1.0, -1.0]])
h = 0.005
M, S = rk4_step_matrices(A, h)
grid = make_time_grid(T=0.1, N=5, K=20)
traj = rk4_integrate(lambda t, x, u: A @ x, np.array([11.0, 8.0]), 0.0, 0.1,
                     grid)
x = np.array([11.0, 8.0])
for _ in range(20):
    x = M @ x
print("stage-wise vs matrix-form after one sampling period:")
print(f"  max difference = {np.max(np.abs(x - traj.states[-1])):.3e}  (exact)\n")

# ---------------------------------------------------------------------------
# 3. History buffer: exact grid reads, counted interpolation
# ---------------------------------------------------------------------------
samples = np.column_stack([np.linspace(0.0, 1.0, 11)])
buf = HistoryBuffer(start_time=-0.5, step=0.05, samples=samples)
print("history buffer over [-0.5, 0]:")
print(f"  lookup at a stored grid time: {buf.lookup(-0.25)}  "
      f"(interpolations so far: {buf.interpolation_count})")
print(f"  lookup between grid times:    {buf.lookup(-0.237)}  "
      f"(interpolations so far: {buf.interpolation_count})")
print("nominal closed loops assert that the second kind never happens.\n")

# Appending demands exact contiguity: the segment must start on the stored
# endpoint, value included.
segment = Trajectory(times=np.array([0.0, 0.05, 0.1]),
                     states=np.array([[1.0], [1.1], [1.2]]))
extended = buf.append(segment)
print(f"after append: {len(buf)} -> {len(extended)} samples, "
      f"span [{extended.start_time}, {extended.end_time}]")
