"""Plant and observer right-hand sides.

Provides the abstract plant/observer contracts, the two benchmark linear
plants, and Luenberger observers in plain and time-retarded form.  The
retarded observer shifts the innovation term by the horizon span, so the
receding-horizon prediction only ever needs stored (past) measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelopes import EnvelopeFit, fit_exponential_envelope
from .errors import (
    ContractViolationError,
    InvalidParameterError,
    PreconditionError,
)
from .ode_core import (
    HistoryBuffer,
    TimeGrid,
    rk4_step,
    rk4_step_matrices,
)


class PlantModel:
    """Abstract plant contract: ``x' = f(x, u)``, ``y = h(x)``.

    ``f`` is assumed locally Lipschitz in the state and ``h(0) = 0``;
    the latter is asserted for every registered instance.
    """

    state_dim: int
    control_dim: int
    output_dim: int

    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def h(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearPlant(PlantModel):
    """Linear plant ``x' = A x + B u``, ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidParameterError(f"system matrix must be square, got {A.shape}")
        if B.shape[0] != n:
            raise InvalidParameterError("input matrix row count does not match state dim")
        if C.shape[1] != n:
            raise InvalidParameterError("output matrix column count does not match state dim")

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def control_dim(self) -> int:
        return self.B.shape[1]

    @property
    def output_dim(self) -> int:
        return self.C.shape[0]

    def f(self, x, u):
        return self.A @ x + self.B @ u

    def h(self, x):
        return self.C @ x


def example1_plant() -> LinearPlant:
    """Diffusively coupled two-state plant with scalar output."""
    return LinearPlant(
        A=np.array([[-1.0, 1.0], [1.0, -1.0]]),
        B=np.eye(2),
        C=np.array([[1.0, 0.0]]),
    )


def example2_plant() -> LinearPlant:
    """Harmonic-oscillator plant (pure rotation) with scalar output."""
    return LinearPlant(
        A=np.array([[0.0, 1.0], [-1.0, 0.0]]),
        B=np.eye(2),
        C=np.array([[1.0, 0.0]]),
    )


def gain_scaling(lam: float, n: int) -> np.ndarray:
    """Diagonal gain-scaling matrix ``diag(lam, lam^2, ..., lam^n)``.

    Raises
    ------
    InvalidParameterError
        If ``lam <= 0``.
    """
    if not np.isfinite(lam) or lam <= 0.0:
        raise InvalidParameterError(f"gain parameter must be > 0, got {lam}")
    return np.diag(lam ** np.arange(1, n + 1, dtype=float))


class ObserverModel:
    """Abstract observer contract.

    ``rhs(xi, xi_delayed, y_delayed, u)`` evaluates the observer vector
    field; a non-retarded instance receives the current state and output
    in the delayed slots.  Uniqueness of observer solutions is assumed,
    not checked.
    """

    delay: float

    def rhs(self, xi, xi_delayed, y_delayed, u) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class LuenbergerObserver(ObserverModel):
    """Luenberger observer with scaled injection gain, optionally retarded.

    The vector field is ``A xi + B u - Lam(lam) K (C xi_d - y_d)`` where
    the delayed slot ``xi_d, y_d`` is the current state/output for the
    plain observer and the values one horizon span in the past for the
    retarded one.
    """

    plant: LinearPlant
    lam: float
    gains: np.ndarray
    retarded: bool
    delay: float = 0.0

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float).reshape(self.plant.state_dim, -1)
        object.__setattr__(self, "gains", gains)
        if self.lam <= 0.0:
            raise InvalidParameterError(f"lam must be > 0, got {self.lam}")
        if gains.shape != (self.plant.state_dim, self.plant.output_dim):
            raise InvalidParameterError("injection gain shape does not match plant")
        if self.retarded and self.delay <= 0.0:
            raise InvalidParameterError("retarded observer needs a positive delay")
        if not self.retarded and self.delay != 0.0:
            raise InvalidParameterError("non-retarded observer must have zero delay")

    @property
    def injection(self) -> np.ndarray:
        """Scaled injection gain ``Lam(lam) K`` of shape (n, p)."""
        return gain_scaling(self.lam, self.plant.state_dim) @ self.gains

    @property
    def closed_loop_matrix(self) -> np.ndarray:
        """Error-dynamics matrix ``A - Lam(lam) K C`` of the plain observer."""
        return self.plant.A - self.injection @ self.plant.C

    def rhs(self, xi, xi_delayed, y_delayed, u):
        innovation = self.plant.C @ xi_delayed - y_delayed
        return self.plant.A @ xi + self.plant.B @ u - self.injection @ innovation


def make_observer(
    plant: LinearPlant,
    lam: float = 1.2,
    gains=(1.0, 0.5),
    retarded: bool = False,
    grid: TimeGrid | None = None,
) -> LuenbergerObserver:
    """Observer factory; a retarded instance takes its delay from the grid."""
    delay = 0.0
    if retarded:
        if grid is None:
            raise InvalidParameterError("retarded observer requires a time grid")
        delay = grid.horizon_span
    return LuenbergerObserver(
        plant=plant, lam=lam, gains=np.asarray(gains, dtype=float),
        retarded=retarded, delay=delay,
    )


def plant_rhs(plant: PlantModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Plant vector field ``f(x, u)``; for a linear plant ``A x + B u``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (plant.state_dim,) or u.shape != (plant.control_dim,):
        raise InvalidParameterError(
            f"expected state dim {plant.state_dim} and control dim {plant.control_dim}"
        )
    return plant.f(x, u)


def plant_output(plant: PlantModel, x: np.ndarray) -> np.ndarray:
    """Measured output ``h(x)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (plant.state_dim,):
        raise InvalidParameterError(f"expected state dim {plant.state_dim}")
    return plant.h(x)


def luenberger_rhs(obs: LuenbergerObserver, xi, y, u) -> np.ndarray:
    """Plain (non-retarded) observer vector field.

    Raises
    ------
    ContractViolationError
        If called on a retarded instance.
    """
    if obs.retarded:
        raise ContractViolationError("plain observer evaluation on a retarded instance")
    return obs.rhs(np.asarray(xi, float), np.asarray(xi, float),
                   np.asarray(y, float), np.asarray(u, float))


def retarded_luenberger_rhs(obs: LuenbergerObserver, xi, xi_delayed, y_delayed, u) -> np.ndarray:
    """Retarded observer vector field with explicitly delayed innovation.

    Raises
    ------
    ContractViolationError
        If called on a non-retarded instance.
    """
    if not obs.retarded:
        raise ContractViolationError("retarded observer evaluation on a plain instance")
    return obs.rhs(np.asarray(xi, float), np.asarray(xi_delayed, float),
                   np.asarray(y_delayed, float), np.asarray(u, float))


def _constant_history(grid: TimeGrid, t0: float, value: np.ndarray) -> HistoryBuffer:
    n = grid.horizon_substeps
    samples = np.tile(np.asarray(value, dtype=float), (n + 1, 1))
    return HistoryBuffer(t0 - grid.horizon_span, grid.h, samples)


def co_simulate(
    plant: PlantModel,
    obs: ObserverModel,
    grid: TimeGrid,
    x_history: HistoryBuffer,
    xi_history: HistoryBuffer,
    controls: np.ndarray,
    span: float,
    t0: float = 0.0,
):
    """Integrate plant and observer side by side under shared ZOH controls.

    ``controls`` holds one control vector per sampling period covering
    ``span``.  Delayed observer inputs are frozen per substep at the
    step's left endpoint and read from the accumulated histories, so all
    delayed lookups are exact grid reads.

    Returns
    -------
    (times, x_states, xi_states) : arrays over the simulated span.
    """
    h = grid.h
    n_steps = int(round(span / h))
    if abs(n_steps * h - span) > 1e-7 * h or n_steps < 1:
        raise InvalidParameterError("span must be a positive multiple of the grid step")
    n_periods = int(np.ceil(n_steps / grid.K))
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if controls.shape[0] < n_periods:
        raise InvalidParameterError(
            f"need {n_periods} control values to cover the span, got {controls.shape[0]}"
        )
    linear = isinstance(plant, LinearPlant) and isinstance(obs, LuenbergerObserver)
    if linear:
        M, S = rk4_step_matrices(plant.A, h)
        Mo, So = rk4_step_matrices(obs.plant.A, h)
    delay_steps = grid.horizon_substeps if getattr(obs, "retarded", False) else 0
    base = len(x_history) - 1
    if delay_steps and (len(x_history) <= delay_steps or len(xi_history) <= delay_steps):
        raise PreconditionError("history does not cover the observer delay")
    x_hist = np.empty((base + 1 + n_steps, x_history.dim))
    xi_hist = np.empty((base + 1 + n_steps, xi_history.dim))
    x_hist[: base + 1] = x_history.samples
    xi_hist[: base + 1] = xi_history.samples
    x = x_hist[base].copy()
    xi = xi_hist[base].copy()
    times = t0 + np.arange(n_steps + 1) * h
    if linear:
        inj = obs.injection
    for i in range(n_steps):
        u = controls[i // grid.K]
        if delay_steps:
            x_d = x_hist[base + i - delay_steps]
            xi_d = xi_hist[base + i - delay_steps]
        else:
            x_d = x
            xi_d = xi
        y_d = plant.h(x_d)
        if linear:
            x = M @ x + S @ (plant.B @ u)
            innovation = obs.plant.C @ xi_d - y_d
            xi = Mo @ xi + So @ (obs.plant.B @ u - inj @ innovation)
        else:
            x = rk4_step(lambda t, s, uu: plant.f(s, uu), times[i], x, h, u)
            xi = rk4_step(
                lambda t, s, uu: obs.rhs(s, xi_d, y_d, uu), times[i], xi, h, u
            )
        x_hist[base + i + 1] = x
        xi_hist[base + i + 1] = xi
    return times, x_hist[base:], xi_hist[base:]


def check_a1_identity(
    plant: PlantModel,
    obs: ObserverModel,
    grid: TimeGrid,
    history,
    controls,
    span: float,
    observer_history=None,
) -> float:
    """Max deviation between observer and plant under matched histories.

    With identical histories the innovation vanishes exactly on the grid,
    so the two trajectories coincide up to integrator round-off.

    Parameters
    ----------
    history : HistoryBuffer or state vector
        Plant history; a bare vector means a constant history.
    observer_history : optional
        Defaults to the plant history.  A mismatch raises
        :class:`PreconditionError`.
    """
    if not isinstance(history, HistoryBuffer):
        history = _constant_history(grid, 0.0, history)
    if observer_history is None:
        observer_history = history
    elif not isinstance(observer_history, HistoryBuffer):
        observer_history = _constant_history(grid, 0.0, observer_history)
    if not np.array_equal(history.samples, observer_history.samples):
        raise PreconditionError("observer history differs from plant history")
    _, xs, xis = co_simulate(plant, obs, grid, history, observer_history, controls, span)
    return float(np.max(np.linalg.norm(xis - xs, axis=1)))


def fit_a2_envelope(times: np.ndarray, error_trajectories) -> EnvelopeFit:
    """Fit a KL envelope ``c * r * exp(-sigma t)`` over estimation errors.

    Parameters
    ----------
    times : array of shape (n_t,)
        Shared sample times starting at 0.
    error_trajectories : sequence of (initial error norm, norm series)
        At least three trajectories with distinct positive initial norms.

    Returns
    -------
    EnvelopeFit
        A fit-failure report (``success=False``) when no decaying
        exponential envelope dominates the data.
    """
    if len(error_trajectories) < 3:
        raise InvalidParameterError("need at least 3 error trajectories")
    scales = [r0 for r0, _ in error_trajectories]
    positive = [r for r in scales if r > 0]
    if len(set(np.round(positive, 12))) < 3:
        zero = all(
            np.all(np.asarray(series) <= 1e-14) for _, series in error_trajectories
        )
        if not zero:
            raise InvalidParameterError(
                "need >= 3 distinct positive initial error norms"
            )
    series = [np.asarray(s, dtype=float) for _, s in error_trajectories]
    return fit_exponential_envelope(np.asarray(times, dtype=float), scales, series)
