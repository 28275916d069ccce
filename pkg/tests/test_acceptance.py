"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Expensive closed-loop runs are computed once per session and shared.
"""

import time

import numpy as np
import pytest

from obpclab import (
    CostSpec,
    OptimizerSettings,
    Scenario,
    build_script_A,
    certify_practical_stability,
    check_a1_identity,
    co_simulate,
    count_local_maxima,
    eigenvalues,
    example1_plant,
    example2_plant,
    fit_a2_envelope,
    gain_scaling,
    initial_loop_state,
    lattice_in_ball,
    lyapunov_residual,
    make_observer,
    make_time_grid,
    obpc_step,
    optimize_horizon,
    predict_observer,
    run_obpc,
    run_standard_mpc,
    simpson_weights,
    solve_lyapunov,
    theorem31_bound_check,
    theorem31_constants,
)
from obpclab.models import _constant_history
from obpclab.ode_core import rk4_integrate

GAINS = np.array([1.0, 0.5])
LAM = 1.2


def report(number: int, title: str, ok: bool, detail: str = ""):
    verdict = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {number:2d} [{title}]: {verdict}{suffix}")
    assert ok, f"acceptance criterion {number} failed: {title}{suffix}"


def closed_loop_matrix(plant):
    return plant.A - gain_scaling(LAM, 2) @ GAINS.reshape(2, 1) @ plant.C


def best_time(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


@pytest.fixture(scope="session")
def ex1_obpc():
    t0 = time.perf_counter()
    result = run_obpc(Scenario(plant="example1", span=15.0))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def ex1_mpc():
    t0 = time.perf_counter()
    result = run_standard_mpc(Scenario(plant="example1",
                                       scheme="standard_mpc", span=15.0))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def ex2_obpc():
    t0 = time.perf_counter()
    result = run_obpc(Scenario(plant="example2", span=20.0))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def ex2_mpc():
    t0 = time.perf_counter()
    result = run_standard_mpc(Scenario(plant="example2",
                                       scheme="standard_mpc", span=20.0))
    return result, time.perf_counter() - t0


def test_criterion_01_eigenvalue_oracle():
    A_cl = closed_loop_matrix(example1_plant())
    eigs, elapsed = best_time(lambda: eigenvalues(A_cl))
    # independent quadratic-formula oracle from trace -3.2, det 1.92
    tr, det = -3.2, 1.92
    disc = np.sqrt(tr * tr - 4.0 * det)
    oracle = sorted([(tr - disc) / 2.0, (tr + disc) / 2.0])
    ok = (np.allclose(sorted(eigs.real), oracle, atol=1e-9)
          and np.allclose(sorted(eigs.real), [-2.4, -0.8], atol=1e-9)
          and np.allclose(eigs.imag, 0.0, atol=1e-9)
          and elapsed < 1e-3)
    report(1, "closed-loop eigenvalues {-0.8, -2.4}", ok,
           f"eigs={np.sort(eigs.real)}, {elapsed * 1e6:.0f} us")


def test_criterion_02_lyapunov_certificate():
    ok = True
    details = []
    for plant_fn in (example1_plant, example2_plant):
        A_cl = closed_loop_matrix(plant_fn())
        P, elapsed = best_time(lambda: solve_lyapunov(A_cl))
        res = lyapunov_residual(P, A_cl)
        pd = bool(np.all(np.linalg.eigvalsh(P) > 0))
        ok = ok and res <= 1e-10 and pd and elapsed < 1e-3
        details.append(f"res={res:.1e}, {elapsed * 1e6:.0f} us")
    report(2, "Lyapunov residual <= 1e-10, P > 0, both examples", ok,
           "; ".join(details))


def test_criterion_03_singular_inverse_detected():
    p = example1_plant()
    out = build_script_A(p.A, gain_scaling(LAM, 2), GAINS, p.C, 0.5)
    report(3, "rank-1 injection makes I - exp(Lam K C NT) singular",
           out.singular_inverse is True)


def test_criterion_04_matched_history_identity():
    grid = make_time_grid(0.1, 5, 20)
    controls = np.tile([0.3, -0.2], (100, 1))
    ok = True
    details = []
    t0 = time.perf_counter()
    for plant_fn in (example1_plant, example2_plant):
        plant = plant_fn()
        for retarded in (False, True):
            obs = make_observer(plant, retarded=retarded,
                                grid=grid if retarded else None)
            dev = check_a1_identity(plant, obs, grid, np.array([11.0, 8.0]),
                                    controls, span=10.0)
            ok = ok and dev <= 1e-9
            details.append(f"{dev:.1e}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1.0
    report(4, "matched-history identity <= 1e-9 over 10 units", ok,
           f"devs={details}, {elapsed:.2f} s")


def test_criterion_05_error_envelope_sigma():
    grid = make_time_grid(0.1, 5, 20)
    plant = example1_plant()
    obs = make_observer(plant)
    rng = np.random.default_rng(12)
    controls = np.zeros((100, 2))
    errs = []
    times = None
    for _ in range(100):
        direction = rng.standard_normal(2)
        direction /= np.linalg.norm(direction)
        err0 = direction * rng.uniform(1e-3, 10.0)
        x0 = np.array([3.0, -1.0])
        xh = _constant_history(grid, 0.0, x0)
        xih = _constant_history(grid, 0.0, x0 + err0)
        times, xs, xis = co_simulate(plant, obs, grid, xh, xih, controls, 10.0)
        errs.append((float(np.linalg.norm(err0)),
                     np.linalg.norm(xis - xs, axis=1)))
    fit = fit_a2_envelope(times, errs)
    ok = fit.success and fit.fit.sigma >= 0.7
    report(5, "estimation-error envelope sigma >= 0.7 over 100 errors", ok,
           f"sigma={fit.fit.sigma:.3f}, c={fit.fit.c:.3f}" if fit.success
           else fit.message)


def test_criterion_06_example1_reproduction(ex1_obpc, ex1_mpc):
    obpc, t_obpc = ex1_obpc
    mpc, t_mpc = ex1_mpc
    tail = obpc.norm_x[obpc.times >= 10.0]
    converged = bool(tail.size and float(tail.max()) <= 0.5)
    first_zero = bool(np.array_equal(mpc.first_control, np.zeros(2)))
    ok = converged and first_zero and t_obpc < 30.0 and t_mpc < 30.0
    report(6, "example 1: converged and first standard control exactly 0", ok,
           f"max|x| t>=10: {tail.max():.2e}, first u={mpc.first_control}, "
           f"walls {t_obpc:.1f}/{t_mpc:.1f} s")


def test_criterion_07_example2_oscillation(ex2_obpc, ex2_mpc):
    obpc, t_obpc = ex2_obpc
    mpc, t_mpc = ex2_mpc
    n_obpc = count_local_maxima(obpc.norm_x, threshold=1e-3)
    n_mpc = count_local_maxima(mpc.norm_x, threshold=1e-3)
    ok = n_obpc >= 2 and n_mpc < n_obpc and t_obpc < 30.0 and t_mpc < 30.0
    report(7, "example 2: swinging trajectory, standard loop swings less", ok,
           f"maxima {n_obpc} vs {n_mpc}, walls {t_obpc:.1f}/{t_mpc:.1f} s")


def test_criterion_08_prediction_consistency():
    scenario = Scenario(plant="example1", span=15.0)
    grid = scenario.grid()
    plant = scenario.plant_model()
    obs = scenario.observer(grid, retarded=True)
    cost = CostSpec(*scenario.cost_matrices())
    lower, upper = scenario.control_box()
    state = initial_loop_state(scenario, grid, plant)
    rng_probe = np.random.default_rng(scenario.seed)
    rng_loop = np.random.default_rng(scenario.seed)
    worst = 0.0
    for _ in range(int(round(scenario.span / grid.T))):
        seq, _, _ = optimize_horizon(state, obs, cost, grid,
                                     scenario.optimizer, rng_probe,
                                     lower, upper)
        expected = predict_observer(state, seq, obs, grid).states
        _, state, (_, realized_xi, _), _ = obpc_step(
            state, plant, obs, cost, grid, scenario.optimizer, rng_loop,
            lower, upper,
        )
        worst = max(worst, float(np.max(np.abs(
            realized_xi - expected[:grid.K + 1]))))
    ok = worst <= 1e-12
    report(8, "realized segment equals optimizer prediction <= 1e-12", ok,
           f"worst={worst:.1e}")


def test_criterion_09_optimizer_grid_oracle():
    scenario = Scenario(
        plant="custom", custom_A=((-1.0,),), custom_B=((1.0,),),
        custom_C=((1.0,),), x0=(2.0,), xi0=(2.0,), gains=(1.0,),
        N=1, span=1.0, scheme="standard_mpc",
        optimizer=OptimizerSettings(xatol=1e-7, fatol=1e-14, max_evals=500),
    )
    grid = scenario.grid()
    plant = scenario.plant_model()
    obs = scenario.observer(grid, retarded=False)
    cost = CostSpec(*scenario.cost_matrices())
    lower, upper = scenario.control_box()
    state = initial_loop_state(scenario, grid, plant)
    seq, achieved, predictor = optimize_horizon(
        state, obs, cost, grid, scenario.optimizer,
        np.random.default_rng(0), lower, upper,
        scheme="standard_mpc", plant=plant,
    )
    u_star = float(seq.values[0, 0])

    # 10^6-point brute force through the affine prediction
    s0 = predictor.states(np.array([[0.0]]))[:, 0]
    phi = predictor.states(np.array([[1.0]]))[:, 0] - s0
    w = simpson_weights(grid.K, grid.h)
    cand = np.linspace(lower[0], upper[0], 1_000_001)
    worst_gap = np.inf
    best_u, best_j = None, np.inf
    for chunk in np.array_split(cand, 20):
        X = s0[None, :] + chunk[:, None] * phi[None, :]
        J = (X**2) @ w + grid.T * 0.01 * chunk**2 + X[:, -1] ** 2
        i = int(np.argmin(J))
        if J[i] < best_j:
            best_j, best_u = float(J[i]), float(chunk[i])
    gap = abs(u_star - best_u)
    ok = gap <= 1e-4
    report(9, "scalar surrogate argmin matches 1e6-point grid", ok,
           f"|gap|={gap:.2e}")


def test_criterion_10_practical_stability_sweep():
    t0 = time.perf_counter()
    base = Scenario(plant="example1", span=15.0)
    points = lattice_in_ball(12.0, 5)
    results = [run_obpc(base.with_initial_state(p)) for p in points]
    estimate = certify_practical_stability(results, Delta1=12.0)
    elapsed = time.perf_counter() - t0
    ok = (len(results) == 25 and estimate.violations == 0
          and estimate.delta2 <= 0.5 and estimate.fit is not None
          and elapsed < 600.0)
    if ok:
        _, enlarged = theorem31_constants(nu=15.0, alpha=0.25, Delta1=12.0,
                                          Delta2=estimate.delta2)
        check = theorem31_bound_check(results, nu=15.0, Delta1=12.0,
                                      Delta2=estimate.delta2,
                                      beta_bar=estimate.fit)
        ok = check.passed and enlarged == 4.0 * estimate.delta2
        detail = (f"delta2={estimate.delta2:.2e}, sigma={estimate.fit.sigma:.2f}, "
                  f"margin={check.worst_margin:.2e}, {elapsed:.0f} s")
    else:
        detail = f"violations={estimate.violations}, {elapsed:.0f} s"
    report(10, "25-point sweep certifies practical stability (nu=15)", ok, detail)


def test_criterion_11_emulation_monotonicity():
    span = 3.0
    grid = make_time_grid(0.1, 5, 20)
    base = run_obpc(Scenario(plant="example1", span=span))
    runs = {
        that: run_obpc(Scenario(plant="example1", span=span,
                                output_subsampling=that))
        for that in (4 * grid.h, 2 * grid.h, grid.h)
    }
    dev = {that: float(np.max(np.linalg.norm(
        r.x_states - base.x_states, axis=1))) for that, r in runs.items()}
    exact = bool(np.array_equal(runs[grid.h].x_states, base.x_states)
                 and np.array_equal(runs[grid.h].controls, base.controls))
    ok = dev[4 * grid.h] > dev[2 * grid.h] > 0.0 and exact
    report(11, "coarser output sampling deviates more; That=h is exact", ok,
           f"dev(4h)={dev[4 * grid.h]:.2e}, dev(2h)={dev[2 * grid.h]:.2e}")


def test_criterion_12_integrator_order():
    errors = []
    for K in (10, 20, 40):
        grid = make_time_grid(0.1, 5, K)
        traj = rk4_integrate(lambda t, x, u: -x, np.array([1.0]), 0.0, 1.0,
                             grid)
        errors.append(abs(traj.states[-1, 0] - np.exp(-1.0)))
    ratios = [errors[i] / errors[i + 1] for i in range(2)]
    ok = all(r >= 8.0 for r in ratios)
    report(12, "integration error shrinks >= 8x when h halves", ok,
           f"ratios={[f'{r:.1f}' for r in ratios]}")
