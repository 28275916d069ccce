"""Unit tests for the numerical stability-certificate toolkit."""

import numpy as np
import pytest

from obpclab import (
    CertificateError,
    InvalidParameterError,
    KlFit,
    alpha_bounds,
    build_script_A,
    certify_practical_stability,
    eigenvalues,
    example1_plant,
    example2_plant,
    gain_scaling,
    lyapunov_residual,
    lyapunov_value,
    matrix_exp,
    mixed_rho,
    solve_lyapunov,
    stability_report,
    theorem31_bound_check,
    theorem31_constants,
)
from obpclab.errors import PreconditionError
from obpclab.stability import is_hurwitz


GAINS = np.array([1.0, 0.5])
LAM = 1.2


def closed_loop(plant):
    return plant.A - gain_scaling(LAM, 2) @ GAINS.reshape(2, 1) @ plant.C


class TestEigenvalues:
    def test_example1_quadratic_oracle(self):
        A_cl = closed_loop(example1_plant())
        eigs = eigenvalues(A_cl)
        np.testing.assert_allclose(sorted(eigs.real), [-2.4, -0.8], atol=1e-9)
        np.testing.assert_allclose(eigs.imag, 0.0, atol=1e-12)
        # trace and determinant match the quadratic-formula oracle
        assert np.trace(A_cl) == pytest.approx(-3.2)
        assert np.linalg.det(A_cl) == pytest.approx(1.92)

    def test_example2_complex_pair(self):
        eigs = eigenvalues(closed_loop(example2_plant()))
        np.testing.assert_allclose(eigs.real, [-0.6, -0.6], atol=1e-9)
        assert eigs.imag[0] == pytest.approx(-eigs.imag[1])
        assert abs(eigs.imag[0]) > 1.0

    def test_methods_agree_on_random_matrices(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            A = rng.standard_normal((2, 2))
            a = eigenvalues(A, method="quadratic")
            b = eigenvalues(A, method="qr")
            np.testing.assert_allclose(a, b, atol=1e-9)

    def test_dimension_cap(self):
        with pytest.raises(InvalidParameterError):
            eigenvalues(np.eye(9))

    def test_hurwitz_predicate(self):
        assert is_hurwitz(closed_loop(example1_plant()))
        assert not is_hurwitz(np.array([[0.0, 1.0], [-1.0, 0.0]]))


class TestLyapunov:
    @pytest.mark.parametrize("plant_fn", [example1_plant, example2_plant])
    def test_residual_and_definiteness(self, plant_fn):
        A_cl = closed_loop(plant_fn())
        P = solve_lyapunov(A_cl)
        assert lyapunov_residual(P, A_cl) <= 1e-10
        assert np.all(np.linalg.eigvalsh(P) > 0)
        np.testing.assert_allclose(P, P.T)

    def test_diagonal_hurwitz_closed_form(self):
        # PA + A'P = -I for A = diag(-a, -b) gives P = diag(1/2a, 1/2b)
        A = np.diag([-2.0, -5.0])
        P = solve_lyapunov(A)
        np.testing.assert_allclose(P, np.diag([0.25, 0.1]), atol=1e-12)

    def test_non_hurwitz_rejected(self):
        with pytest.raises(CertificateError):
            solve_lyapunov(np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def test_candidate_value_and_alpha_sandwich(self):
        A_cl = closed_loop(example1_plant())
        P = solve_lyapunov(A_cl)
        Lam = gain_scaling(LAM, 2)
        rng = np.random.default_rng(3)
        for _ in range(50):
            eta = rng.standard_normal(2) * rng.uniform(0.1, 10.0)
            r = float(np.linalg.norm(eta))
            v = lyapunov_value(P, Lam, eta)
            a1, a2 = alpha_bounds(P, LAM, 2, r)
            assert a1 - 1e-12 <= v <= a2 + 1e-12


class TestMatrixExp:
    def test_rank_one_closed_form(self):
        # exp of the rank-1 matrix [[a, 0], [b, 0]]:
        # first column ((e^a - 1)/a * (a, b)) + e1 adjustments
        M = np.array([[0.6, 0.0], [0.36, 0.0]])
        expected = np.array([
            [np.exp(0.6), 0.0],
            [0.36 * (np.exp(0.6) - 1.0) / 0.6, 1.0],
        ])
        np.testing.assert_allclose(matrix_exp(M), expected, atol=1e-12)

    def test_matches_eigendecomposition(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            A = rng.standard_normal((3, 3))
            w, V = np.linalg.eig(A)
            ref = (V @ np.diag(np.exp(w)) @ np.linalg.inv(V)).real
            np.testing.assert_allclose(matrix_exp(A), ref, atol=1e-9)


class TestScriptA:
    def test_example1_singular_inverse(self):
        p = example1_plant()
        out = build_script_A(p.A, gain_scaling(LAM, 2), GAINS, p.C, 0.5)
        assert out.singular_inverse is True

    def test_example2_singular_inverse(self):
        p = example2_plant()
        out = build_script_A(p.A, gain_scaling(LAM, 2), GAINS, p.C, 0.5)
        # same structural rank-1 Lam K C, hence the same singularity
        assert out.singular_inverse is True

    def test_full_rank_injection_is_regular(self):
        out = build_script_A(np.diag([-1.0, -2.0]), np.eye(2),
                             np.eye(2), np.eye(2), 0.5)
        assert out.singular_inverse is False


class TestPracticalStability:
    class FakeResult:
        def __init__(self, times, x_states, x0, xi_states=None, xi0=None):
            self.times = times
            self.x_states = x_states
            self.x0 = x0
            self.xi_states = xi_states if xi_states is not None else x_states
            self.xi0 = xi0 if xi0 is not None else x0

    def _decaying(self, x0, sigma=1.0):
        times = np.linspace(0.0, 10.0, 201)
        x0 = np.asarray(x0, float)
        states = x0[None, :] * np.exp(-sigma * times)[:, None]
        return self.FakeResult(times, states, x0, xi0=np.zeros_like(x0))

    def test_clean_decay_certifies_with_zero_violations(self):
        results = [self._decaying([r, 0.5 * r]) for r in (2.0, 5.0, 8.0)]
        est = certify_practical_stability(results, Delta1=12.0)
        assert est.violations == 0
        assert est.delta2 <= 0.5
        assert est.fit is not None and est.fit.sigma > 0.5

    def test_initial_state_outside_ball_rejected(self):
        results = [self._decaying([20.0, 0.0])]
        with pytest.raises(PreconditionError):
            certify_practical_stability(results, Delta1=12.0)

    def test_empty_input_rejected(self):
        with pytest.raises(InvalidParameterError):
            certify_practical_stability([], Delta1=12.0)

    def test_theorem_constants(self):
        assert theorem31_constants(nu=15.0, alpha=0.25, Delta1=12.0,
                                   Delta2=0.3) == (3.0, 1.2)
        with pytest.raises(PreconditionError):
            theorem31_constants(nu=10.0, alpha=0.25, Delta1=12.0, Delta2=0.3)

    def test_mixed_rho(self):
        assert mixed_rho(np.array([3.0, 4.0]), np.array([0.0, 0.0])) == 5.0
        assert mixed_rho(np.array([3.0, 4.0]), np.array([5.0, 12.0])) == 18.0

    def test_combined_bound_check(self):
        results = [self._decaying([r, 0.0]) for r in (2.0, 5.0, 8.0)]
        fit = KlFit(c=1.5, sigma=0.5)
        check = theorem31_bound_check(results, nu=15.0, Delta1=12.0,
                                      Delta2=0.1, beta_bar=fit)
        assert check.passed
        tight = KlFit(c=1.0, sigma=10.0)
        check = theorem31_bound_check(results, nu=15.0, Delta1=12.0,
                                      Delta2=1e-6, beta_bar=tight)
        assert not check.passed


class TestReport:
    def test_example1_bundle(self):
        p = example1_plant()
        rep = stability_report(p.A, gain_scaling(LAM, 2), GAINS, p.C, 0.5, LAM)
        assert rep.hurwitz
        np.testing.assert_allclose(sorted(rep.closed_loop_eigenvalues.real),
                                   [-2.4, -0.8], atol=1e-9)
        assert rep.lyapunov_residual <= 1e-10
        assert rep.script_A.singular_inverse is True
        assert rep.alpha1_coefficient < rep.alpha2_coefficient

    def test_non_hurwitz_design_reports_instead_of_raising(self):
        rep = stability_report(np.array([[1.0, 0.0], [0.0, 1.0]]),
                               np.eye(2), np.zeros((2, 1)),
                               np.array([[1.0, 0.0]]), 0.5, 1.0)
        assert not rep.hurwitz
        assert rep.lyapunov_matrix is None
        assert rep.notes
