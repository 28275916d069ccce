"""Fixed-step integration of sampled-data systems with exact delayed lookups.

All time bookkeeping is done in integer substep indices on a uniform grid
with step ``h = T / K``.  The delay used by the retarded observer equals the
horizon span ``N * T = N * K * h``, so every delayed lookup of a grid time
lands exactly on a stored sample and never takes the interpolation path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConsistencyError,
    ContiguityError,
    DivergenceError,
    InvalidParameterError,
    OutOfRangeError,
)

# Abort threshold for any state coordinate; unstable forward predictions
# must fail loudly instead of overflowing silently.
DIVERGENCE_LIMIT = 1e12

# Relative slack (in units of the grid step) when snapping a query time to
# an integer substep index.
_GRID_SNAP_TOL = 1e-7


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid: period ``T``, horizon ``N``, ``K`` substeps per period.

    Attributes
    ----------
    T : float
        Sampling period (> 0).
    N : int
        Horizon length in sampling periods (>= 1).
    K : int
        Integration substeps per sampling period (>= 1).
    """

    T: float
    N: int
    K: int

    @property
    def h(self) -> float:
        """Integration step ``T / K``."""
        return self.T / self.K

    @property
    def horizon_span(self) -> float:
        """Length of the prediction horizon and of the observer delay, ``N * T``."""
        return self.N * self.T

    @property
    def horizon_substeps(self) -> int:
        """Number of integration substeps spanning the horizon, ``N * K``."""
        return self.N * self.K


def make_time_grid(T: float, N: int, K: int) -> TimeGrid:
    """Build a :class:`TimeGrid`, validating all parameters.

    Raises
    ------
    InvalidParameterError
        If ``T <= 0`` or ``N < 1`` or ``K < 1``.
    """
    if not np.isfinite(T) or T <= 0.0:
        raise InvalidParameterError(f"sampling period T must be > 0, got {T}")
    if int(N) != N or N < 1:
        raise InvalidParameterError(f"horizon length N must be a count >= 1, got {N}")
    if int(K) != K or K < 1:
        raise InvalidParameterError(f"substep count K must be a count >= 1, got {K}")
    h = T / K
    # Re-derive T from h so that h * K == T holds exactly in float arithmetic
    # (a no-op for every parameter set used here).
    return TimeGrid(T=h * K, N=int(N), K=int(K))


@dataclass(frozen=True)
class ControlSequence:
    """Zero-order-hold control values ``v_0 .. v_{N-1}`` inside a box.

    ``values`` has shape ``(N, m)``; ``lower`` and ``upper`` have shape
    ``(m,)`` and describe the per-coordinate admissible box.
    """

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if values.shape[1] != lower.size or lower.size != upper.size:
            raise InvalidParameterError("control dimension does not match box bounds")
        if np.any(lower > upper):
            raise InvalidParameterError("control box has lower > upper")
        if np.any(values < lower - 1e-12) or np.any(values > upper + 1e-12):
            raise InvalidParameterError("control value outside the admissible box")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled state path with the control applied on each substep.

    ``times`` has shape ``(n_steps + 1,)``, ``states`` ``(n_steps + 1, n)``
    and ``controls`` (optional) ``(n_steps, m)``.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if times.ndim != 1 or times.size != states.shape[0]:
            raise InvalidParameterError("times and states lengths differ")
        if times.size >= 2:
            dt = np.diff(times)
            if np.any(dt <= 0):
                raise InvalidParameterError("trajectory times must be strictly increasing")
            if np.any(np.abs(dt - dt[0]) > _GRID_SNAP_TOL * dt[0]):
                raise InvalidParameterError("trajectory times must be uniformly spaced")

    @property
    def step(self) -> float:
        return self.times[1] - self.times[0] if self.times.size >= 2 else 0.0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


class HistoryBuffer:
    """Uniformly sampled past values of a vector signal with delayed lookup.

    Stores samples at ``start_time + i * step``.  Lookups at stored grid
    times return the stored vector bit-exactly; off-grid queries fall back
    to linear interpolation and bump ``interpolation_count`` so nominal
    loops can assert that the fallback was never taken.  ``max_access_time``
    records the latest time ever queried, which tests use to assert
    causality of the closed loops.
    """

    def __init__(self, start_time: float, step: float, samples: np.ndarray):
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.shape[0] < 1:
            raise InvalidParameterError("history buffer needs at least one sample")
        if not np.isfinite(step) or step <= 0:
            raise InvalidParameterError(f"history step must be > 0, got {step}")
        self.start_time = float(start_time)
        self.step = float(step)
        self.samples = samples
        self.interpolation_count = 0
        self.max_access_time = -np.inf

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def end_time(self) -> float:
        return self.start_time + (len(self) - 1) * self.step

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def index_of(self, t: float) -> int | None:
        """Integer sample index for time ``t``, or None if ``t`` is off-grid."""
        pos = (t - self.start_time) / self.step
        idx = int(round(pos))
        if abs(pos - idx) <= _GRID_SNAP_TOL:
            return idx
        return None

    def lookup(self, t: float) -> np.ndarray:
        """Value at time ``t``; exact at grid times, linear in between.

        Raises
        ------
        OutOfRangeError
            If ``t`` lies before the first or after the last sample.
        """
        self.max_access_time = max(self.max_access_time, t)
        pos = (t - self.start_time) / self.step
        idx = int(round(pos))
        if abs(pos - idx) <= _GRID_SNAP_TOL:
            if idx < 0 or idx >= len(self):
                raise OutOfRangeError(
                    f"lookup at t = {t} outside buffer span "
                    f"[{self.start_time}, {self.end_time}]"
                )
            return self.samples[idx]
        lo = int(np.floor(pos))
        if lo < 0 or lo + 1 >= len(self):
            raise OutOfRangeError(
                f"lookup at t = {t} outside buffer span "
                f"[{self.start_time}, {self.end_time}]"
            )
        self.interpolation_count += 1
        frac = pos - lo
        return (1.0 - frac) * self.samples[lo] + frac * self.samples[lo + 1]

    def append(self, segment: Trajectory) -> "HistoryBuffer":
        """New buffer extending this one with ``segment``.

        The segment must start exactly at the buffer's last time with a
        matching step, and its first value must equal the stored endpoint
        with zero tolerance.
        """
        if segment.times.size < 2:
            raise ContiguityError("segment must contain at least one step")
        seg_step = segment.step
        if abs(seg_step - self.step) > _GRID_SNAP_TOL * self.step:
            raise ContiguityError(
                f"segment step {seg_step} does not match buffer step {self.step}"
            )
        if abs(segment.times[0] - self.end_time) > _GRID_SNAP_TOL * self.step:
            raise ContiguityError(
                f"segment starts at {segment.times[0]}, buffer ends at {self.end_time}"
            )
        if not np.array_equal(segment.states[0], self.samples[-1]):
            raise ConsistencyError("segment disagrees with stored value at the junction")
        merged = np.vstack([self.samples, segment.states[1:]])
        return HistoryBuffer(self.start_time, self.step, merged)

    def tail(self, n_samples: int) -> "HistoryBuffer":
        """New buffer keeping only the last ``n_samples`` samples."""
        if n_samples > len(self):
            raise OutOfRangeError(f"cannot keep {n_samples} of {len(self)} samples")
        start = self.start_time + (len(self) - n_samples) * self.step
        return HistoryBuffer(start, self.step, self.samples[-n_samples:])


def zoh_value(seq: ControlSequence, t: float, grid: TimeGrid, t0: float) -> np.ndarray:
    """Zero-order-hold value ``v_j`` for ``t`` in ``[t0 + j*T, t0 + (j+1)*T)``.

    Raises
    ------
    OutOfRangeError
        If ``t`` lies outside ``[t0, t0 + N*T)``.
    """
    pos = (t - t0) / grid.h
    idx = int(round(pos))
    if abs(pos - idx) > _GRID_SNAP_TOL:
        idx = int(np.floor(pos))
    if idx < 0 or idx >= seq.horizon * grid.K:
        raise OutOfRangeError(f"t = {t} outside the control horizon starting at {t0}")
    return seq.values[idx // grid.K]


def rk4_step(rhs, t: float, x: np.ndarray, h: float, u) -> np.ndarray:
    """One classical Runge-Kutta step of size ``h`` with frozen input ``u``."""
    k1 = rhs(t, x, u)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1, u)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2, u)
    k4 = rhs(t + h, x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(
    rhs,
    x0: np.ndarray,
    t0: float,
    t1: float,
    grid: TimeGrid,
    control: ControlSequence | None = None,
    control_t0: float | None = None,
) -> Trajectory:
    """Fixed-step RK4 over ``[t0, t1]`` with ZOH control frozen per substep.

    The control is sampled once per substep at the step's left endpoint, so
    repeated integration of identical inputs is bit-identical.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, state, control) -> derivative``.
    control : ControlSequence, optional
        ZOH sequence; ``None`` passes ``None`` to ``rhs``.
    control_t0 : float, optional
        Start of the control horizon (defaults to ``t0``).

    Raises
    ------
    InvalidParameterError
        If ``t1 - t0`` is not an integer multiple of the grid step.
    DivergenceError
        When any state coordinate leaves ``[-1e12, 1e12]`` or goes non-finite.
    """
    h = grid.h
    span = t1 - t0
    n_steps_f = span / h
    n_steps = int(round(n_steps_f))
    if n_steps < 0 or abs(n_steps_f - n_steps) > _GRID_SNAP_TOL:
        raise InvalidParameterError(
            f"span {span} is not an integer multiple of the step {h}"
        )
    if control_t0 is None:
        control_t0 = t0
    x = np.asarray(x0, dtype=float).copy()
    times = t0 + np.arange(n_steps + 1) * h
    states = np.empty((n_steps + 1, x.size))
    states[0] = x
    controls = None
    if control is not None:
        controls = np.empty((n_steps, control.dim))
    for i in range(n_steps):
        t = times[i]
        u = None
        if control is not None:
            u = zoh_value(control, t, grid, control_t0)
            controls[i] = u
        x = rk4_step(rhs, t, x, h, u)
        if not np.all(np.isfinite(x)) or np.any(np.abs(x) > DIVERGENCE_LIMIT):
            raise DivergenceError(times[i + 1])
        states[i + 1] = x
    return Trajectory(times=times, states=states, controls=controls)


def history_lookup(buf: HistoryBuffer, t: float) -> np.ndarray:
    """Functional alias for :meth:`HistoryBuffer.lookup`."""
    return buf.lookup(t)


def history_append(buf: HistoryBuffer, segment: Trajectory) -> HistoryBuffer:
    """Functional alias for :meth:`HistoryBuffer.append`."""
    return buf.append(segment)


def rk4_step_matrices(A: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact RK4 one-step maps for the affine system ``x' = A x + c``.

    For ``c`` frozen over the step, one classical RK4 step equals
    ``x+ = M x + S c`` with the degree-4 / degree-3 truncated exponential
    polynomials returned here.  Used as a fast path for linear models; it
    reproduces the stage-wise computation in exact arithmetic.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    eye = np.eye(n)
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    hA4 = hA3 @ hA
    M = eye + hA + hA2 / 2.0 + hA3 / 6.0 + hA4 / 24.0
    S = h * (eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0)
    return M, S
