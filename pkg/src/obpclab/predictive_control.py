"""Receding-horizon control loops built on observer predictions.

Two closed loops share the same optimizer machinery:

* the observer-based loop, whose horizon prediction integrates the
  retarded observer fed exclusively by stored past outputs, and
* the standard loop, which forward-simulates the plant model from the
  current observer estimate.

Predictions freeze delayed inputs and the ZOH control once per
integration substep at the step's left endpoint, so every delayed read is
an exact grid lookup and repeated runs are deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, minimize

from .errors import (
    DivergenceError,
    InvalidParameterError,
    OptimizationFailureError,
    PreconditionError,
)
from .models import LinearPlant, LuenbergerObserver, ObserverModel, PlantModel
from .ode_core import (
    DIVERGENCE_LIMIT,
    ControlSequence,
    HistoryBuffer,
    TimeGrid,
    Trajectory,
    rk4_step,
    rk4_step_matrices,
)
from .scenario import OptimizerSettings, Scenario


@dataclass(frozen=True)
class CostSpec:
    """Quadratic stage and terminal weights of the horizon cost.

    Stage cost ``l(xi, v) = xi' Q xi + v' R v`` with Q symmetric PSD and
    R symmetric PD; terminal cost ``F(xi) = xi' Pf xi`` with Pf symmetric
    PSD.
    """

    Q: np.ndarray
    R: np.ndarray
    Pf: np.ndarray

    def __post_init__(self):
        for name in ("Q", "R", "Pf"):
            mat = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, mat)
            if mat.shape[0] != mat.shape[1] or not np.allclose(mat, mat.T, atol=1e-12):
                raise InvalidParameterError(f"{name} must be a symmetric square matrix")
        if np.any(np.linalg.eigvalsh(self.Q) < -1e-12):
            raise InvalidParameterError("Q must be positive semidefinite")
        if np.any(np.linalg.eigvalsh(self.Pf) < -1e-12):
            raise InvalidParameterError("Pf must be positive semidefinite")
        if np.any(np.linalg.eigvalsh(self.R) <= 0.0):
            raise InvalidParameterError("R must be positive definite")


@dataclass(frozen=True)
class MpcLoopState:
    """Everything the controller carries from one sampling instant to the next."""

    step_index: int
    t: float
    x: np.ndarray
    xi: np.ndarray
    xi_history: HistoryBuffer
    y_history: HistoryBuffer
    warm: np.ndarray | None = None


@dataclass(frozen=True)
class StepInfo:
    """Per-step diagnostics of a closed-loop iteration."""

    cost: float
    applied: np.ndarray
    predicted_first_segment: np.ndarray
    wall_time: float


@dataclass(frozen=True)
class SimulationResult:
    """Full closed-loop run: shared grid, both trajectories, applied controls."""

    times: np.ndarray
    x_states: np.ndarray
    xi_states: np.ndarray
    outputs: np.ndarray
    controls: np.ndarray
    step_costs: np.ndarray
    wall_times: np.ndarray
    x0: np.ndarray
    xi0: np.ndarray
    scheme: str

    @property
    def norm_x(self) -> np.ndarray:
        return np.linalg.norm(self.x_states, axis=1)

    @property
    def norm_err(self) -> np.ndarray:
        return np.linalg.norm(self.xi_states - self.x_states, axis=1)

    @property
    def first_control(self) -> np.ndarray:
        return self.controls[0]


def simpson_weights(K: int, h: float) -> np.ndarray:
    """Composite Simpson weights on K+1 uniform nodes (K even)."""
    if K % 2 != 0:
        raise InvalidParameterError("Simpson quadrature needs an even substep count")
    w = np.ones(K + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


class _LinearPropagator:
    """Exact-RK4 interval propagation for ``x' = A x + b_i`` with b frozen per substep."""

    def __init__(self, A: np.ndarray, grid: TimeGrid):
        self.M, self.S = rk4_step_matrices(A, grid.h)
        self.grid = grid
        K = grid.K
        n = A.shape[0]
        self.n = n
        powers = [np.eye(n)]
        for _ in range(K):
            powers.append(self.M @ powers[-1])
        self.powers = np.stack(powers)          # (K+1, n, n)
        W = np.zeros((K + 1, K, n, n))
        for i in range(1, K + 1):
            for l in range(i):
                W[i, l] = powers[i - 1 - l] @ self.S
        # Flattened for a single matmul per interval.
        self._W_flat = W.transpose(0, 2, 1, 3).reshape(K + 1, n, K * n)
        self._phi_cache: dict[tuple, np.ndarray] = {}

    def interval(self, x0: np.ndarray, b: np.ndarray) -> np.ndarray:
        """States over one sampling interval; b has shape (K, n)."""
        return np.matmul(self.powers, x0) + self._W_flat @ b.ravel()

    def step(self, x: np.ndarray, b: np.ndarray) -> np.ndarray:
        """One substep ``M x + S b``."""
        return self.M @ x + self.S @ b

    def horizon_free(self, x0: np.ndarray, drift: np.ndarray, N: int) -> np.ndarray:
        """Zero-control horizon response from x0 under per-substep drift."""
        K = self.grid.K
        out = np.empty((N * K + 1, self.n))
        out[0] = x0
        x = np.asarray(x0, dtype=float)
        for j in range(N):
            seg = self.interval(x, drift[j * K:(j + 1) * K])
            out[j * K + 1:(j + 1) * K + 1] = seg[1:]
            x = seg[-1]
        return out

    def control_response(self, B: np.ndarray, N: int) -> np.ndarray:
        """Horizon sensitivity to each ZOH control coordinate, shape (N*K+1, n, N*m).

        The prediction is affine in the controls, so it splits into the
        zero-control response plus this map applied to the flattened
        sequence.  Independent of buffers and initial state; cached.
        """
        key = (N, B.tobytes())
        phi = self._phi_cache.get(key)
        if phi is None:
            K = self.grid.K
            m = B.shape[1]
            zero_drift = np.zeros((N * K, self.n))
            phi = np.empty((N * K + 1, self.n, N * m))
            for j in range(N):
                for c in range(m):
                    drift = zero_drift.copy()
                    drift[j * K:(j + 1) * K] = B[:, c]
                    phi[:, :, j * m + c] = self.horizon_free(
                        np.zeros(self.n), drift, N
                    )
            self._phi_cache[key] = phi
        return phi


def _check_finite(states: np.ndarray, t_end: float):
    if not np.all(np.isfinite(states)) or np.any(np.abs(states) > DIVERGENCE_LIMIT):
        raise DivergenceError(t_end)


class _HorizonPredictor:
    """Integrates the prediction model over one horizon for candidate controls.

    mode 'retarded': the observer with delayed innovation read from the
    stored buffers (all reads lie at or before the current sampling
    instant).  mode 'forward': the plant model from the current estimate,
    with no measurement injection.
    """

    def __init__(self, mode: str, grid: TimeGrid, t0: float, x_init: np.ndarray,
                 obs: ObserverModel | None = None,
                 plant: PlantModel | None = None,
                 xi_history: HistoryBuffer | None = None,
                 y_history: HistoryBuffer | None = None,
                 prop: "_LinearPropagator | None" = None):
        self.mode = mode
        self.grid = grid
        self.t0 = t0
        self.x_init = np.asarray(x_init, dtype=float)
        self.obs = obs
        self.plant = plant
        nk = grid.horizon_substeps
        h = grid.h
        self.times = t0 + np.arange(nk + 1) * h
        if mode == "retarded":
            if not getattr(obs, "retarded", False):
                raise PreconditionError("retarded prediction needs a retarded observer")
            span_needed = grid.horizon_span
            for buf, label in ((xi_history, "observer"), (y_history, "output")):
                if buf is None or len(buf) < nk + 1 or \
                        abs(buf.end_time - t0) > 1e-7 * h:
                    raise PreconditionError(
                        f"{label} buffer does not cover [t - {span_needed}, t]"
                    )
            delay = obs.delay
            self.xi_delayed = np.stack([
                xi_history.lookup(self.times[i] - delay) for i in range(nk)
            ])
            self.y_delayed = np.stack([
                y_history.lookup(self.times[i] - delay) for i in range(nk)
            ])
            model_plant = obs.plant if isinstance(obs, LuenbergerObserver) else None
        else:
            self.xi_delayed = None
            self.y_delayed = None
            model_plant = plant if isinstance(plant, LinearPlant) else None
        self.linear = model_plant is not None
        if self.linear:
            self.A = model_plant.A
            self.B = model_plant.B
            self.prop = prop if prop is not None else _LinearPropagator(self.A, grid)
            if mode == "retarded":
                innovation = (self.xi_delayed @ model_plant.C.T) - self.y_delayed
                self.drift = -(innovation @ obs.injection.T)   # (nk, n)
            else:
                self.drift = np.zeros((nk, model_plant.A.shape[0]))
            # Affine split: zero-control response plus control sensitivity.
            self.base = self.prop.horizon_free(self.x_init, self.drift, grid.N)
            self.phi = self.prop.control_response(self.B, grid.N)

    def states(self, values: np.ndarray) -> np.ndarray:
        """Predicted states on the horizon grid, shape (N*K + 1, n)."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if self.linear:
            out = self.base + self.phi @ values.ravel()
            _check_finite(out, self.times[-1])
            return out
        return self._states_generic(values)

    def _states_generic(self, values: np.ndarray) -> np.ndarray:
        grid = self.grid
        nk = grid.horizon_substeps
        h = grid.h
        out = np.empty((nk + 1, self.x_init.size))
        out[0] = self.x_init
        x = self.x_init.copy()
        for i in range(nk):
            u = values[i // grid.K]
            if self.mode == "retarded":
                xi_d = self.xi_delayed[i]
                y_d = self.y_delayed[i]
                x = rk4_step(
                    lambda t, s, uu: self.obs.rhs(s, xi_d, y_d, uu),
                    self.times[i], x, h, u,
                )
            else:
                x = rk4_step(
                    lambda t, s, uu: self.plant.f(s, uu), self.times[i], x, h, u
                )
            _check_finite(x, self.times[i + 1])
            out[i + 1] = x
        return out


def _horizon_weights(grid: TimeGrid) -> np.ndarray:
    """Combined Simpson weights over the whole horizon (junction nodes doubled)."""
    w = simpson_weights(grid.K, grid.h)
    cw = np.zeros(grid.horizon_substeps + 1)
    for j in range(grid.N):
        cw[j * grid.K:(j + 1) * grid.K + 1] += w
    return cw


def _cost_from_states(states: np.ndarray, values: np.ndarray, cost: CostSpec,
                      grid: TimeGrid, cw: np.ndarray) -> float:
    q = np.einsum("ti,ij,tj->t", states, cost.Q, states)
    stage = float(cw @ q)
    control = grid.T * float(np.einsum("ji,ik,jk->", values, cost.R, values))
    terminal = float(states[-1] @ cost.Pf @ states[-1])
    return stage + control + terminal


def cost_functional(predicted: Trajectory, seq: ControlSequence, cost: CostSpec,
                    grid: TimeGrid) -> float:
    """Horizon cost: summed Simpson stage integrals plus the terminal penalty.

    Raises
    ------
    InvalidParameterError
        If the trajectory does not span exactly the horizon or K is odd.
    """
    expected = grid.horizon_substeps + 1
    if predicted.states.shape[0] != expected:
        raise InvalidParameterError(
            f"predicted trajectory must hold {expected} samples, "
            f"got {predicted.states.shape[0]}"
        )
    if seq.horizon != grid.N:
        raise InvalidParameterError("control sequence length does not match the horizon")
    cw = _horizon_weights(grid)
    return _cost_from_states(predicted.states, seq.values, cost, grid, cw)


def predict_observer(loop_state: MpcLoopState, seq: ControlSequence,
                     obs: ObserverModel, grid: TimeGrid) -> Trajectory:
    """Observer trajectory over the horizon driven only by stored past data."""
    predictor = _HorizonPredictor(
        "retarded", grid, loop_state.t, loop_state.xi, obs=obs,
        xi_history=loop_state.xi_history, y_history=loop_state.y_history,
    )
    return Trajectory(times=predictor.times, states=predictor.states(seq.values))


def _optimize(predictor: _HorizonPredictor, cost: CostSpec, grid: TimeGrid,
              settings: OptimizerSettings, rng: np.random.Generator,
              lower: np.ndarray, upper: np.ndarray,
              warm: np.ndarray | None):
    N = grid.N
    m = lower.size
    cw = _horizon_weights(grid)

    def objective(flat: np.ndarray) -> float:
        values = flat.reshape(N, m)
        try:
            states = predictor.states(values)
        except DivergenceError:
            return np.inf
        return _cost_from_states(states, values, cost, grid, cw)

    lo_t = np.tile(lower, N)
    hi_t = np.tile(upper, N)
    if np.array_equal(lo_t, hi_t):
        # Degenerate box: the feasible set is a single point.
        flat = lo_t.copy()
        return flat.reshape(N, m), objective(flat)

    starts = []
    if warm is not None and settings.warm_start:
        starts.append(np.clip(np.asarray(warm, dtype=float).ravel(), lo_t, hi_t))
    starts.append(np.clip(np.zeros(N * m), lo_t, hi_t))
    finite_box = np.all(np.isfinite(lo_t)) and np.all(np.isfinite(hi_t))
    for _ in range(settings.restarts):
        if finite_box:
            starts.append(rng.uniform(lo_t, hi_t))

    best_flat = None
    best_cost = np.inf
    bounds = Bounds(lo_t, hi_t)
    for start in starts:
        f_start = objective(start)
        if f_start < best_cost:
            best_cost = f_start
            best_flat = start
        if not np.isfinite(f_start):
            continue
        res = minimize(
            objective, start, method="Nelder-Mead", bounds=bounds,
            options={
                "maxfev": settings.max_evals,
                "xatol": settings.xatol,
                "fatol": settings.fatol,
            },
        )
        if np.isfinite(res.fun) and res.fun < best_cost:
            best_cost = float(res.fun)
            best_flat = np.clip(res.x, lo_t, hi_t)
    if best_flat is None or not np.isfinite(best_cost):
        raise OptimizationFailureError("every optimizer start produced a non-finite cost")
    return best_flat.reshape(N, m), float(best_cost)


def optimize_horizon(loop_state: MpcLoopState, obs: ObserverModel, cost: CostSpec,
                     grid: TimeGrid, settings: OptimizerSettings,
                     rng: np.random.Generator, lower, upper,
                     scheme: str = "obpc",
                     plant: PlantModel | None = None,
                     prop: _LinearPropagator | None = None):
    """Best ZOH control sequence over the horizon and its achieved cost.

    Nelder-Mead over the flattened control coordinates, box-clipped, with
    multistart from the warm-started shift of the previous solution, the
    zero sequence and seeded random draws.  Deterministic for a given
    generator.
    """
    lower = np.asarray(lower, dtype=float).ravel()
    upper = np.asarray(upper, dtype=float).ravel()
    if scheme == "obpc":
        predictor = _HorizonPredictor(
            "retarded", grid, loop_state.t, loop_state.xi, obs=obs,
            xi_history=loop_state.xi_history, y_history=loop_state.y_history,
            prop=prop,
        )
    else:
        predictor = _HorizonPredictor(
            "forward", grid, loop_state.t, loop_state.xi, plant=plant, prop=prop,
        )
    values, achieved = _optimize(
        predictor, cost, grid, settings, rng, lower, upper, loop_state.warm
    )
    seq = ControlSequence(values=values, lower=lower, upper=upper)
    return seq, achieved, predictor


def subsample_and_interpolate_outputs(y: Trajectory, That: float,
                                      grid: TimeGrid) -> Trajectory:
    """Keep output samples every ``That`` and rebuild the rest by linear interpolation.

    ``That`` must be a positive integer multiple of the integration step
    and at most the sampling period.  ``That == h`` reproduces the input
    bit-exactly.
    """
    h = grid.h
    ratio = That / h
    if That <= 0 or abs(ratio - round(ratio)) > 1e-9 or That > grid.T * (1 + 1e-12):
        raise InvalidParameterError(
            f"output sampling time {That} must be a multiple of the step {h} "
            f"within (0, {grid.T}]"
        )
    ratio = int(round(ratio))
    n = y.times.size
    kept = np.arange(0, n, ratio)
    if kept[-1] != n - 1:
        kept = np.append(kept, n - 1)
    rebuilt = np.column_stack([
        np.interp(y.times, y.times[kept], y.states[kept, d])
        for d in range(y.states.shape[1])
    ])
    return Trajectory(times=y.times, states=rebuilt, controls=y.controls)


def _advance_plant(plant: PlantModel, grid: TimeGrid, t: float, x: np.ndarray,
                   u: np.ndarray, prop: _LinearPropagator | None) -> np.ndarray:
    """Plant states over one sampling interval under constant control."""
    K = grid.K
    if prop is not None:
        b = np.tile(plant.B @ u, (K, 1))
        seg = prop.interval(x, b)
    else:
        seg = np.empty((K + 1, x.size))
        seg[0] = x
        cur = x.copy()
        for i in range(K):
            cur = rk4_step(lambda tt, s, uu: plant.f(s, uu), t + i * grid.h, cur,
                           grid.h, u)
            seg[i + 1] = cur
    _check_finite(seg, t + grid.T)
    return seg


def _outputs_of(plant: PlantModel, states: np.ndarray) -> np.ndarray:
    if isinstance(plant, LinearPlant):
        return states @ plant.C.T
    return np.stack([np.atleast_1d(plant.h(s)) for s in states])


def obpc_step(loop_state: MpcLoopState, plant: PlantModel, obs: ObserverModel,
              cost: CostSpec, grid: TimeGrid, settings: OptimizerSettings,
              rng: np.random.Generator, lower, upper,
              output_subsampling: float | None = None,
              plant_prop: _LinearPropagator | None = None,
              obs_prop: _LinearPropagator | None = None):
    """One observer-based receding-horizon step.

    Optimizes over the retarded-observer prediction, applies the first
    control to the plant for one period, advances the observer over the
    same interval with the identical stored delayed data (so the realized
    segment reproduces the optimizer's first predicted interval exactly),
    stores the measured outputs and shifts the warm start.
    """
    t_start = time.perf_counter()
    K = grid.K
    seq, achieved, predictor = optimize_horizon(
        loop_state, obs, cost, grid, settings, rng, lower, upper, scheme="obpc",
        prop=obs_prop,
    )
    u0 = seq.values[0]
    predicted = predictor.states(seq.values)
    realized_xi = predicted[:K + 1]

    if plant_prop is None and isinstance(plant, LinearPlant):
        plant_prop = _LinearPropagator(plant.A, grid)
    seg_x = _advance_plant(plant, grid, loop_state.t, loop_state.x, u0, plant_prop)
    seg_times = loop_state.t + np.arange(K + 1) * grid.h
    y_seg = _outputs_of(plant, seg_x)
    y_traj = Trajectory(times=seg_times, states=y_seg)
    if output_subsampling is not None:
        y_traj = subsample_and_interpolate_outputs(y_traj, output_subsampling, grid)

    keep = grid.horizon_substeps + 1
    xi_history = loop_state.xi_history.append(
        Trajectory(times=seg_times, states=realized_xi)
    ).tail(keep)
    y_history = loop_state.y_history.append(y_traj).tail(keep)
    warm = np.vstack([seq.values[1:], np.clip(np.zeros_like(u0), seq.lower, seq.upper)[None, :]])
    new_state = MpcLoopState(
        step_index=loop_state.step_index + 1,
        t=loop_state.t + grid.T,
        x=seg_x[-1],
        xi=realized_xi[-1],
        xi_history=xi_history,
        y_history=y_history,
        warm=warm,
    )
    info = StepInfo(
        cost=achieved, applied=u0, predicted_first_segment=realized_xi,
        wall_time=time.perf_counter() - t_start,
    )
    return u0, new_state, (seg_x, realized_xi, y_seg), info


def standard_mpc_step(loop_state: MpcLoopState, plant: PlantModel,
                      obs: LuenbergerObserver, cost: CostSpec, grid: TimeGrid,
                      settings: OptimizerSettings, rng: np.random.Generator,
                      lower, upper,
                      plant_prop: _LinearPropagator | None = None):
    """One standard receding-horizon step with a plain observer.

    The optimizer forward-simulates the plant model from the current
    estimate; the applied control then drives plant and non-retarded
    observer side by side with the measured output frozen per substep.
    """
    t_start = time.perf_counter()
    if getattr(obs, "retarded", False):
        raise PreconditionError("standard loop requires a non-retarded observer")
    K = grid.K
    linear = isinstance(plant, LinearPlant)
    if linear and plant_prop is None:
        plant_prop = _LinearPropagator(plant.A, grid)
    seq, achieved, predictor = optimize_horizon(
        loop_state, obs, cost, grid, settings, rng, lower, upper,
        scheme="standard_mpc", plant=plant, prop=plant_prop,
    )
    u0 = seq.values[0]
    predicted = predictor.states(seq.values)
    seg_times = loop_state.t + np.arange(K + 1) * grid.h
    seg_x = np.empty((K + 1, loop_state.x.size))
    seg_xi = np.empty((K + 1, loop_state.xi.size))
    seg_x[0] = loop_state.x
    seg_xi[0] = loop_state.xi
    x = loop_state.x
    xi = loop_state.xi
    for i in range(K):
        y_i = np.atleast_1d(plant.h(x))
        if linear:
            x = plant_prop.step(x, plant.B @ u0)
            innovation = obs.plant.C @ xi - y_i
            xi = plant_prop.step(xi, obs.plant.B @ u0 - obs.injection @ innovation)
        else:
            x = rk4_step(lambda tt, s, uu: plant.f(s, uu), seg_times[i], x,
                         grid.h, u0)
            xi = rk4_step(lambda tt, s, uu: obs.rhs(s, s, y_i, uu), seg_times[i],
                          xi, grid.h, u0)
        seg_x[i + 1] = x
        seg_xi[i + 1] = xi
    _check_finite(seg_x, seg_times[-1])
    _check_finite(seg_xi, seg_times[-1])

    y_seg = _outputs_of(plant, seg_x)
    keep = grid.horizon_substeps + 1
    xi_history = loop_state.xi_history.append(
        Trajectory(times=seg_times, states=seg_xi)
    ).tail(keep)
    y_history = loop_state.y_history.append(
        Trajectory(times=seg_times, states=y_seg)
    ).tail(keep)
    warm = np.vstack([seq.values[1:], np.clip(np.zeros_like(u0), seq.lower, seq.upper)[None, :]])
    new_state = MpcLoopState(
        step_index=loop_state.step_index + 1,
        t=loop_state.t + grid.T,
        x=seg_x[-1],
        xi=seg_xi[-1],
        xi_history=xi_history,
        y_history=y_history,
        warm=warm,
    )
    info = StepInfo(
        cost=achieved, applied=u0, predicted_first_segment=predicted[:K + 1],
        wall_time=time.perf_counter() - t_start,
    )
    return u0, new_state, (seg_x, seg_xi, y_seg), info


def initial_loop_state(scenario: Scenario, grid: TimeGrid,
                       plant: PlantModel) -> MpcLoopState:
    """Seed the loop with constant histories: plant at x0, observer at xi0.

    The output buffer holds the plant output along the constant plant
    history.
    """
    nk = grid.horizon_substeps
    x0 = np.asarray(scenario.x0, dtype=float)
    xi0 = np.asarray(scenario.xi0, dtype=float)
    t0 = 0.0
    start = t0 - grid.horizon_span
    xi_samples = np.tile(xi0, (nk + 1, 1))
    y0 = np.atleast_1d(plant.h(x0))
    y_samples = np.tile(y0, (nk + 1, 1))
    return MpcLoopState(
        step_index=0, t=t0, x=x0, xi=xi0,
        xi_history=HistoryBuffer(start, grid.h, xi_samples),
        y_history=HistoryBuffer(start, grid.h, y_samples),
        warm=None,
    )


def _run(scenario: Scenario, scheme: str) -> SimulationResult:
    grid = scenario.grid()
    plant = scenario.plant_model()
    obs = scenario.observer(grid, retarded=(scheme == "obpc"))
    Q, R, Pf = scenario.cost_matrices()
    cost = CostSpec(Q=Q, R=R, Pf=Pf)
    lower, upper = scenario.control_box()
    rng = np.random.default_rng(scenario.seed)
    state = initial_loop_state(scenario, grid, plant)
    plant_prop = _LinearPropagator(plant.A, grid) if isinstance(plant, LinearPlant) else None

    n_steps = int(round(scenario.span / grid.T))
    K = grid.K
    total = n_steps * K
    times = np.arange(total + 1) * grid.h
    xs = np.empty((total + 1, plant.state_dim))
    xis = np.empty((total + 1, plant.state_dim))
    ys = np.empty((total + 1, plant.output_dim))
    controls = np.empty((n_steps, plant.control_dim))
    step_costs = np.empty(n_steps)
    wall = np.empty(n_steps)
    xs[0] = state.x
    xis[0] = state.xi
    ys[0] = np.atleast_1d(plant.h(state.x))
    for j in range(n_steps):
        if scheme == "obpc":
            u0, state, (seg_x, seg_xi, y_seg), info = obpc_step(
                state, plant, obs, cost, grid, scenario.optimizer, rng,
                lower, upper, output_subsampling=scenario.output_subsampling,
                plant_prop=plant_prop, obs_prop=plant_prop,
            )
        else:
            u0, state, (seg_x, seg_xi, y_seg), info = standard_mpc_step(
                state, plant, obs, cost, grid, scenario.optimizer, rng,
                lower, upper, plant_prop=plant_prop,
            )
        sl = slice(j * K + 1, (j + 1) * K + 1)
        xs[sl] = seg_x[1:]
        xis[sl] = seg_xi[1:]
        ys[sl] = y_seg[1:]
        controls[j] = u0
        step_costs[j] = info.cost
        wall[j] = info.wall_time
    return SimulationResult(
        times=times, x_states=xs, xi_states=xis, outputs=ys,
        controls=controls, step_costs=step_costs, wall_times=wall,
        x0=np.asarray(scenario.x0, dtype=float),
        xi0=np.asarray(scenario.xi0, dtype=float),
        scheme=scheme,
    )


def run_obpc(scenario: Scenario) -> SimulationResult:
    """Closed-loop run of the observer-based scheme."""
    return _run(scenario, "obpc")


def run_standard_mpc(scenario: Scenario) -> SimulationResult:
    """Closed-loop run of the standard scheme with a plain observer."""
    return _run(scenario, "standard_mpc")
