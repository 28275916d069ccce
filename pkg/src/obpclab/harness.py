"""Scenario files, batch execution, and flat-file data emission.

This module turns TOML scenario descriptions into closed-loop runs and
writes their trajectories as CSV (and gnuplot-ready ``.dat``) files.  It
also drives initial-condition sweeps that aggregate the practical
stability certificates from :mod:`obpclab.stability`.

Exit-status conventions for the command entry points:

* 0 — success,
* 2 — configuration problem (parse or validation),
* 3 — trajectory divergence,
* 4 — optimizer failure.
"""

from __future__ import annotations

import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import (
    DivergenceError,
    InvalidParameterError,
    ObpcError,
    OptimizationFailureError,
)
from .models import gain_scaling
from .predictive_control import SimulationResult, run_obpc, run_standard_mpc
from .scenario import OptimizerSettings, Scenario
from .stability import (
    certify_practical_stability,
    stability_report,
    theorem31_bound_check,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_OPTIMIZER = 4


# ---------------------------------------------------------------------------
# Scenario files


def _require(table: dict, key: str, kind, context: str):
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        raise InvalidParameterError(
            f"{context}.{key}: expected {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _scenario_from_tables(data: dict) -> Scenario:
    """Build a validated scenario from nested TOML tables.

    Recognized layout: top-level ``plant``, ``scheme``, ``span``, ``seed``,
    ``x0``, ``xi0``; tables ``[grid]`` (T, N, K), ``[cost]`` (Q, R, Pf),
    ``[control]`` (lower, upper), ``[observer]`` (lam, gains),
    ``[optimizer]``, ``[emulation]`` (output_subsampling) and ``[custom]``
    (A, B, C matrices for ``plant = "custom"``).  Missing keys keep the
    benchmark defaults.
    """
    known = {"plant", "scheme", "span", "seed", "x0", "xi0",
             "grid", "cost", "control", "observer", "optimizer",
             "emulation", "custom"}
    for key in data:
        if key not in known:
            raise InvalidParameterError(f"unknown key {key!r} in scenario file")

    kwargs: dict = {}
    for key, kind in (("plant", str), ("scheme", str), ("span", float),
                      ("seed", int)):
        if key in data:
            kwargs[key] = _require(data, key, kind, "scenario")
    for key in ("x0", "xi0"):
        if key in data:
            kwargs[key] = tuple(float(v) for v in _require(data, key, list, "scenario"))

    grid = data.get("grid", {})
    for key, kind in (("T", float), ("N", int), ("K", int)):
        if key in grid:
            value = _require(grid, key, kind, "grid")
            if value <= 0:
                raise InvalidParameterError(f"grid.{key} must be positive, got {value}")
            kwargs[key] = value

    cost = data.get("cost", {})
    for key in ("Q", "R", "Pf"):
        if key in cost:
            value = cost[key]
            kwargs[key] = np.asarray(value, dtype=float) if isinstance(value, list) \
                else _require(cost, key, float, "cost")

    control = data.get("control", {})
    if "lower" in control:
        kwargs["u_lower"] = np.asarray(control["lower"], dtype=float)
    if "upper" in control:
        kwargs["u_upper"] = np.asarray(control["upper"], dtype=float)

    observer = data.get("observer", {})
    if "lam" in observer:
        kwargs["lam"] = _require(observer, "lam", float, "observer")
    if "gains" in observer:
        kwargs["gains"] = tuple(
            float(v) for v in _require(observer, "gains", list, "observer")
        )

    if "optimizer" in data:
        fields = {f.name for f in dataclasses.fields(OptimizerSettings)}
        extra = set(data["optimizer"]) - fields
        if extra:
            raise InvalidParameterError(f"unknown optimizer key(s) {sorted(extra)}")
        kwargs["optimizer"] = OptimizerSettings(**data["optimizer"])

    emulation = data.get("emulation", {})
    if "output_subsampling" in emulation:
        kwargs["output_subsampling"] = _require(
            emulation, "output_subsampling", float, "emulation"
        )

    custom = data.get("custom", {})
    for src, dst in (("A", "custom_A"), ("B", "custom_B"), ("C", "custom_C")):
        if src in custom:
            kwargs[dst] = tuple(tuple(float(v) for v in row) for row in custom[src])

    scenario = Scenario(**kwargs)
    scenario.grid()            # surfaces grid validation at load time
    scenario.cost_matrices()   # surfaces dimension mismatches at load time
    return scenario


def load_scenario(path) -> Scenario:
    """Parse and validate a TOML scenario file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise InvalidParameterError(f"scenario file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise InvalidParameterError(f"{path}: {exc}")
    return _scenario_from_tables(data)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return f'"{value}"'
    arr = np.asarray(value)
    if arr.ndim == 1:
        return "[" + ", ".join(_toml_value(v) for v in arr.tolist()) + "]"
    return "[" + ", ".join(_toml_value(row) for row in arr.tolist()) + "]"


def emit_scenario(scenario: Scenario, path) -> None:
    """Write a scenario as TOML so that :func:`load_scenario` round-trips."""
    lines = [
        f"plant = {_toml_value(scenario.plant)}",
        f"scheme = {_toml_value(scenario.scheme)}",
        f"span = {_toml_value(scenario.span)}",
        f"seed = {_toml_value(scenario.seed)}",
        f"x0 = {_toml_value(list(scenario.x0))}",
        f"xi0 = {_toml_value(list(scenario.xi0))}",
        "",
        "[grid]",
        f"T = {_toml_value(scenario.T)}",
        f"N = {_toml_value(scenario.N)}",
        f"K = {_toml_value(scenario.K)}",
        "",
        "[cost]",
        f"Q = {_toml_value(scenario.Q)}",
        f"R = {_toml_value(scenario.R)}",
        f"Pf = {_toml_value(scenario.Pf)}",
        "",
        "[control]",
        f"lower = {_toml_value(scenario.u_lower)}",
        f"upper = {_toml_value(scenario.u_upper)}",
        "",
        "[observer]",
        f"lam = {_toml_value(scenario.lam)}",
        f"gains = {_toml_value(list(scenario.gains))}",
        "",
        "[optimizer]",
    ]
    for f in dataclasses.fields(OptimizerSettings):
        lines.append(f"{f.name} = {_toml_value(getattr(scenario.optimizer, f.name))}")
    if scenario.output_subsampling is not None:
        lines += ["", "[emulation]",
                  f"output_subsampling = {_toml_value(scenario.output_subsampling)}"]
    if scenario.plant == "custom":
        lines += ["", "[custom]",
                  f"A = {_toml_value(scenario.custom_A)}",
                  f"B = {_toml_value(scenario.custom_B)}",
                  f"C = {_toml_value(scenario.custom_C)}"]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepSpec:
    """A base scenario plus a family of initial plant states to sweep."""

    base: Scenario
    initial_states: tuple
    nu: float = 15.0

    def __post_init__(self):
        if len(self.initial_states) == 0:
            raise InvalidParameterError("sweep needs at least one initial state")
        if self.nu <= 0:
            raise InvalidParameterError("nu must be positive")

    @property
    def radius(self) -> float:
        return float(max(np.linalg.norm(np.asarray(p, float)) for p in self.initial_states))

    def scenarios(self) -> list[Scenario]:
        return [self.base.with_initial_state(p) for p in self.initial_states]


def lattice_in_ball(radius: float, side: int) -> list[tuple[float, float]]:
    """``side`` x ``side`` planar lattice inscribed in the radius ball.

    The lattice spans the square of half-width ``radius / sqrt(2)`` so every
    point lies inside the closed ball.
    """
    if radius <= 0 or side < 1:
        raise InvalidParameterError("lattice needs positive radius and side")
    half = radius / math.sqrt(2.0)
    axis = np.linspace(-half, half, side) if side > 1 else np.zeros(1)
    return [(float(a), float(b)) for a in axis for b in axis]


def load_sweep(path) -> SweepSpec:
    """Parse a TOML sweep file: a ``[base]`` scenario plus the point grid.

    The grid is either an explicit ``points`` list of states or a
    ``lattice`` table with ``radius`` and ``side``.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise InvalidParameterError(f"sweep file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise InvalidParameterError(f"{path}: {exc}")
    base = _scenario_from_tables(data.get("base", {}))
    nu = float(data.get("nu", 15.0))
    if "points" in data:
        points = tuple(tuple(float(v) for v in p) for p in data["points"])
    elif "lattice" in data:
        lat = data["lattice"]
        points = tuple(lattice_in_ball(float(lat["radius"]), int(lat["side"])))
    else:
        raise InvalidParameterError("sweep file needs 'points' or a [lattice] table")
    return SweepSpec(base=base, initial_states=points, nu=nu)


# ---------------------------------------------------------------------------
# Data emission


def _format(value: float) -> str:
    return f"{value:.17g}"


def csv_header(result: SimulationResult) -> str:
    n = result.x_states.shape[1]
    m = result.controls.shape[1]
    p = result.outputs.shape[1]
    cols = (["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"xi{i + 1}" for i in range(n)]
            + [f"u{i + 1}" for i in range(m)]
            + (["y"] if p == 1 else [f"y{i + 1}" for i in range(p)])
            + ["norm_x", "norm_err"])
    return ",".join(cols)


def trajectory_rows(result: SimulationResult) -> np.ndarray:
    """Dense per-substep table matching :func:`csv_header` column order.

    The applied control is a zero-order hold: each row repeats the control
    of the sampling period containing its time (last row keeps the final
    period's value).
    """
    total = result.times.size
    substeps_per_period = (total - 1) // result.controls.shape[0]
    period_idx = np.minimum(np.arange(total) // substeps_per_period,
                            result.controls.shape[0] - 1)
    u_rows = result.controls[period_idx]
    norm_x = result.norm_x
    norm_err = np.linalg.norm(result.x_states - result.xi_states, axis=1)
    return np.column_stack([
        result.times, result.x_states, result.xi_states, u_rows,
        result.outputs, norm_x, norm_err,
    ])


def write_trajectory_csv(result: SimulationResult, path) -> None:
    """Write the trajectory as CSV with 17-significant-digit floats."""
    rows = trajectory_rows(result)
    lines = [csv_header(result)]
    for row in rows:
        lines.append(",".join(_format(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectory_dat(result: SimulationResult, path) -> None:
    """Write the same table whitespace-separated for gnuplot."""
    rows = trajectory_rows(result)
    lines = ["# " + " ".join(csv_header(result).split(","))]
    for row in rows:
        lines.append(" ".join(_format(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


_GNUPLOT_TEMPLATE = """\
# Render the state norms of {name}.dat.
set datafile separator whitespace
set xlabel "t"
set ylabel "norm"
plot "{name}.dat" using 1:{norm_col} with lines title "||x||", \\
     "{name}.dat" using 1:{err_col} with lines title "||x - xi||"
pause -1
"""


def write_gnuplot_script(result: SimulationResult, path, name: str) -> None:
    ncols = len(csv_header(result).split(","))
    Path(path).write_text(_GNUPLOT_TEMPLATE.format(
        name=name, norm_col=ncols - 1, err_col=ncols,
    ))


def count_local_maxima(values: np.ndarray, threshold: float = 0.0) -> int:
    """Strict local maxima of a sampled curve above ``threshold``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 3:
        return 0
    interior = v[1:-1]
    peaks = (interior > v[:-2]) & (interior > v[2:]) & (interior > threshold)
    return int(np.count_nonzero(peaks))


def run_summary(result: SimulationResult, flags: dict | None = None) -> str:
    """Human-readable run summary: final norms, cost, wall clock, flags."""
    lines = [
        f"scheme = {result.scheme}",
        f"steps = {result.controls.shape[0]}",
        f"final_time = {_format(result.times[-1])}",
        f"final_norm_x = {_format(result.norm_x[-1])}",
        f"final_norm_err = {_format(float(np.linalg.norm(result.x_states[-1] - result.xi_states[-1])))}",
        f"total_cost = {_format(float(np.sum(result.step_costs)))}",
        f"wall_clock_seconds = {_format(float(np.sum(result.wall_times)))}",
        f"first_control = {np.array2string(result.first_control, precision=17)}",
    ]
    for key, value in (flags or {}).items():
        lines.append(f"{key} = {str(value).lower() if isinstance(value, bool) else value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Command entry points


def _with_seed(scenario: Scenario, seed: int | None) -> Scenario:
    if seed is None:
        return scenario
    return dataclasses.replace(scenario, seed=int(seed))


def _execute(scenario: Scenario) -> SimulationResult:
    runner = run_obpc if scenario.scheme == "obpc" else run_standard_mpc
    return runner(scenario)


def _classify(exc: ObpcError) -> int:
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, OptimizationFailureError):
        return EXIT_OPTIMIZER
    return EXIT_CONFIG


def cmd_simulate(scenario_path, out_dir, seed: int | None = None) -> int:
    """Run the closed loop of one scenario file into ``out_dir``."""
    try:
        scenario = _with_seed(load_scenario(scenario_path), seed)
    except ObpcError as exc:
        print(f"error: {exc}")
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = _execute(scenario)
    except ObpcError as exc:
        print(f"error: {exc}")
        (out / "summary.txt").write_text(f"failed: {exc}\n")
        return _classify(exc)
    write_trajectory_csv(result, out / "trajectory.csv")
    (out / "summary.txt").write_text(run_summary(result))
    print(f"wrote {out / 'trajectory.csv'}")
    return EXIT_OK


def canonical_scenario(example: int, scheme: str, span: float | None = None) -> Scenario:
    """The benchmark scenario for the given example and scheme."""
    if example not in (1, 2):
        raise InvalidParameterError(f"example must be 1 or 2, got {example}")
    scheme_key = {"obpc": "obpc", "mpc": "standard_mpc",
                  "standard_mpc": "standard_mpc"}.get(scheme)
    if scheme_key is None:
        raise InvalidParameterError(f"scheme must be obpc or mpc, got {scheme!r}")
    if span is None:
        span = 15.0 if example == 1 else 20.0
    return Scenario(plant=f"example{example}", scheme=scheme_key, span=span)


def cmd_reproduce(example: int, scheme: str, out_dir, seed: int | None = None) -> int:
    """Re-run a canonical benchmark scenario and emit CSV + gnuplot data."""
    try:
        scenario = _with_seed(canonical_scenario(example, scheme), seed)
    except ObpcError as exc:
        print(f"error: {exc}")
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = _execute(scenario)
    except ObpcError as exc:
        print(f"error: {exc}")
        (out / "summary.txt").write_text(f"failed: {exc}\n")
        return _classify(exc)
    name = f"example{example}_{scenario.scheme}"
    write_trajectory_csv(result, out / f"{name}.csv")
    write_trajectory_dat(result, out / f"{name}.dat")
    write_gnuplot_script(result, out / f"{name}.gp", name)

    tail = result.norm_x[result.times >= 10.0]
    flags = {
        "first_control_zero": bool(np.all(result.first_control == 0.0)),
        "converged": bool(tail.size and float(tail.max()) <= 0.5),
        "local_maxima_of_norm": count_local_maxima(result.norm_x, threshold=1e-3),
    }
    flags["oscillatory"] = flags["local_maxima_of_norm"] >= 2
    (out / "summary.txt").write_text(run_summary(result, flags))
    print(f"wrote {out / (name + '.csv')}")
    return EXIT_OK


def stability_report_text(example: int) -> str:
    """Structured-text stability certificates for one benchmark example."""
    scenario = canonical_scenario(example, "obpc")
    plant = scenario.plant_model()
    grid = scenario.grid()
    report = stability_report(
        plant.A, gain_scaling(scenario.lam, plant.state_dim),
        np.asarray(scenario.gains, float), plant.C,
        grid.horizon_span, scenario.lam,
    )
    lines = [
        f"example = {example}",
        f"closed_loop_matrix = {report.closed_loop_matrix.tolist()}",
        f"closed_loop_eigenvalues = {[complex(v) for v in report.closed_loop_eigenvalues]}",
        f"hurwitz = {str(report.hurwitz).lower()}",
    ]
    if report.lyapunov_matrix is not None:
        lines += [
            f"lyapunov_matrix = {report.lyapunov_matrix.tolist()}",
            f"lyapunov_residual = {_format(report.lyapunov_residual)}",
            f"alpha1_coefficient = {_format(report.alpha1_coefficient)}",
            f"alpha2_coefficient = {_format(report.alpha2_coefficient)}",
        ]
    if report.script_A is not None:
        lines += [
            f"singular_inverse = {str(report.script_A.singular_inverse).lower()}",
            f"script_A_eigenvalues = {[complex(v) for v in report.script_A.eigenvalues]}",
        ]
    for note in report.notes:
        lines.append(f"note = {note}")
    return "\n".join(lines) + "\n"


def cmd_stability(example: int, out_path) -> int:
    """Write the stability certificate report for one example."""
    try:
        text = stability_report_text(example)
    except ObpcError as exc:
        print(f"error: {exc}")
        return EXIT_CONFIG
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text(text)
    print(f"wrote {out_path}")
    return EXIT_OK


def _sweep_one(scenario: Scenario) -> SimulationResult:
    return _execute(scenario)


def run_sweep(spec: SweepSpec, workers: int = 1):
    """Run every sweep scenario; returns ordered (scenario, result-or-error).

    Results come back in the order of ``spec.initial_states`` regardless of
    worker count, so downstream aggregation is deterministic.
    """
    scenarios = spec.scenarios()
    outcomes: list = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for scenario, outcome in zip(scenarios,
                                         pool.map(_sweep_one, scenarios)):
                outcomes.append((scenario, outcome))
    else:
        for scenario in scenarios:
            try:
                outcomes.append((scenario, _sweep_one(scenario)))
            except ObpcError as exc:
                outcomes.append((scenario, exc))
    return outcomes


def cmd_sweep(sweep_path, out_dir, seed: int | None = None,
              workers: int = 1) -> int:
    """Run an initial-condition sweep and aggregate stability certificates."""
    try:
        spec = load_sweep(sweep_path)
        if seed is not None:
            spec = dataclasses.replace(spec, base=_with_seed(spec.base, seed))
    except ObpcError as exc:
        print(f"error: {exc}")
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    t_start = time.perf_counter()
    outcomes = run_sweep(spec, workers=workers)
    results = []
    report_lines = [f"runs = {len(outcomes)}"]
    for idx, (scenario, outcome) in enumerate(outcomes):
        tag = f"run{idx:03d}"
        if isinstance(outcome, Exception):
            (out / f"{tag}.txt").write_text(f"failed: {outcome}\n")
            report_lines.append(f"{tag} x0={list(scenario.x0)} failed: {outcome}")
            continue
        write_trajectory_csv(outcome, out / f"{tag}.csv")
        results.append(outcome)
        report_lines.append(
            f"{tag} x0={list(scenario.x0)} final_norm_x={_format(outcome.norm_x[-1])}"
        )
    if not results:
        (out / "aggregate.txt").write_text("\n".join(report_lines) + "\nall runs failed\n")
        print("error: all sweep runs failed")
        return EXIT_DIVERGENCE

    delta1 = spec.radius
    estimate = certify_practical_stability(results, Delta1=delta1)
    report_lines += [
        f"delta1 = {_format(estimate.delta1)}",
        f"delta2 = {_format(estimate.delta2)}",
        f"violations = {estimate.violations}",
    ]
    if estimate.fit is not None:
        report_lines += [
            f"envelope_c = {_format(estimate.fit.c)}",
            f"envelope_sigma = {_format(estimate.fit.sigma)}",
        ]
        check = theorem31_bound_check(results, nu=spec.nu, Delta1=delta1,
                                      Delta2=estimate.delta2,
                                      beta_bar=estimate.fit)
        report_lines += [
            f"combined_bound_passed = {str(check.passed).lower()}",
            f"combined_bound_worst_margin = {_format(check.worst_margin)}",
        ]
    report_lines.append(
        f"wall_clock_seconds = {_format(time.perf_counter() - t_start)}"
    )
    (out / "aggregate.txt").write_text("\n".join(report_lines) + "\n")
    print(f"wrote {out / 'aggregate.txt'}")
    return EXIT_OK
