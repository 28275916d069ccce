"""Observer-based predictive control laboratory.

A numpy/scipy library for sampled-data receding-horizon control where the
horizon prediction runs a time-retarded observer on stored measurements,
together with a standard-MPC baseline and numerical stability
certificates for the observer error dynamics.
"""

from .envelopes import EnvelopeFit, KlFit, fit_exponential_envelope
from .harness import (
    SweepSpec,
    canonical_scenario,
    cmd_reproduce,
    cmd_simulate,
    cmd_stability,
    cmd_sweep,
    count_local_maxima,
    emit_scenario,
    lattice_in_ball,
    load_scenario,
    load_sweep,
    run_summary,
    run_sweep,
    stability_report_text,
    write_trajectory_csv,
)
from .errors import (
    CertificateError,
    ConsistencyError,
    ContiguityError,
    ContractViolationError,
    DivergenceError,
    InvalidParameterError,
    NumericalError,
    ObpcError,
    OptimizationFailureError,
    OutOfRangeError,
    PreconditionError,
)
from .models import (
    LinearPlant,
    LuenbergerObserver,
    ObserverModel,
    PlantModel,
    check_a1_identity,
    co_simulate,
    example1_plant,
    example2_plant,
    fit_a2_envelope,
    gain_scaling,
    luenberger_rhs,
    make_observer,
    plant_output,
    plant_rhs,
    retarded_luenberger_rhs,
)
from .ode_core import (
    ControlSequence,
    HistoryBuffer,
    TimeGrid,
    Trajectory,
    history_append,
    history_lookup,
    make_time_grid,
    rk4_integrate,
    rk4_step_matrices,
    zoh_value,
)
from .predictive_control import (
    CostSpec,
    MpcLoopState,
    SimulationResult,
    StepInfo,
    cost_functional,
    initial_loop_state,
    obpc_step,
    optimize_horizon,
    predict_observer,
    run_obpc,
    run_standard_mpc,
    simpson_weights,
    standard_mpc_step,
    subsample_and_interpolate_outputs,
)
from .scenario import OptimizerSettings, Scenario
from .stability import (
    PracticalStabilityEstimate,
    ScriptA,
    StabilityReport,
    Theorem31Check,
    alpha_bounds,
    build_script_A,
    certify_practical_stability,
    eigenvalues,
    lyapunov_residual,
    lyapunov_value,
    matrix_exp,
    mixed_rho,
    solve_lyapunov,
    stability_report,
    theorem31_bound_check,
    theorem31_constants,
)

__version__ = "0.1.0"
