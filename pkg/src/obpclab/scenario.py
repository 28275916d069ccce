"""Closed-loop scenario description with benchmark defaults.

A scenario bundles everything one simulation run needs: which plant,
which scheme, grid and cost parameters, the control box, constant initial
histories, observer gains, the simulated span and the optimizer budget.
Defaults reproduce the canonical two-state benchmark (T = 0.1, N = 5,
lam = 1.2, constant plant history at (11, 8), observer started at the
origin).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError
from .models import (
    LinearPlant,
    LuenbergerObserver,
    example1_plant,
    example2_plant,
    make_observer,
)
from .ode_core import TimeGrid, make_time_grid


@dataclass(frozen=True)
class OptimizerSettings:
    """Budget and tolerances of the per-step horizon optimizer."""

    restarts: int = 2
    max_evals: int = 200
    xatol: float = 1e-3
    fatol: float = 1e-9
    warm_start: bool = True

    def __post_init__(self):
        if self.restarts < 0 or self.max_evals < 1:
            raise InvalidParameterError("optimizer budget must be positive")
        if self.xatol <= 0 or self.fatol <= 0:
            raise InvalidParameterError("optimizer tolerances must be positive")


_PLANTS = {
    "example1": example1_plant,
    "example2": example2_plant,
}


@dataclass(frozen=True)
class Scenario:
    """Complete description of one closed-loop run."""

    plant: str = "example1"
    scheme: str = "obpc"
    T: float = 0.1
    N: int = 5
    K: int = 20
    Q: np.ndarray | float = 1.0
    R: np.ndarray | float = 0.01
    Pf: np.ndarray | float = 1.0
    u_lower: np.ndarray | float = -25.0
    u_upper: np.ndarray | float = 25.0
    x0: tuple = (11.0, 8.0)
    xi0: tuple = (0.0, 0.0)
    lam: float = 1.2
    gains: tuple = (1.0, 0.5)
    span: float = 15.0
    output_subsampling: float | None = None
    seed: int = 0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    custom_A: tuple | None = None
    custom_B: tuple | None = None
    custom_C: tuple | None = None

    def __post_init__(self):
        if self.plant not in _PLANTS and self.plant != "custom":
            raise InvalidParameterError(f"unknown plant {self.plant!r}")
        if self.plant == "custom" and (
            self.custom_A is None or self.custom_B is None or self.custom_C is None
        ):
            raise InvalidParameterError("custom plant needs custom_A/custom_B/custom_C")
        if self.scheme not in ("obpc", "standard_mpc"):
            raise InvalidParameterError(f"unknown scheme {self.scheme!r}")
        if self.span <= 0:
            raise InvalidParameterError("span must be positive")
        n_periods = self.span / self.T
        if abs(n_periods - round(n_periods)) > 1e-9:
            raise InvalidParameterError("span must be a multiple of the sampling period")
        if self.output_subsampling is not None:
            that = self.output_subsampling
            if that <= 0 or that > self.T:
                raise InvalidParameterError("output sampling time must lie in (0, T]")

    def grid(self) -> TimeGrid:
        return make_time_grid(self.T, self.N, self.K)

    def plant_model(self) -> LinearPlant:
        if self.plant == "custom":
            return LinearPlant(
                A=np.asarray(self.custom_A, dtype=float),
                B=np.asarray(self.custom_B, dtype=float),
                C=np.asarray(self.custom_C, dtype=float),
            )
        return _PLANTS[self.plant]()

    def observer(self, grid: TimeGrid, retarded: bool) -> LuenbergerObserver:
        return make_observer(
            self.plant_model(), lam=self.lam, gains=self.gains,
            retarded=retarded, grid=grid if retarded else None,
        )

    def _square(self, value, n: int) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            return float(arr) * np.eye(n)
        return np.atleast_2d(arr)

    def cost_matrices(self):
        n = self.plant_model().state_dim
        m = self.plant_model().control_dim
        return (
            self._square(self.Q, n),
            self._square(self.R, m),
            self._square(self.Pf, n),
        )

    def control_box(self):
        m = self.plant_model().control_dim
        lower = np.broadcast_to(np.asarray(self.u_lower, dtype=float), (m,)).copy()
        upper = np.broadcast_to(np.asarray(self.u_upper, dtype=float), (m,)).copy()
        return lower, upper

    def with_initial_state(self, x0) -> "Scenario":
        return replace(self, x0=tuple(float(v) for v in np.asarray(x0).ravel()))
