"""Numerical stability certificates for the observer error dynamics.

Small dense linear algebra (eigenvalues, Lyapunov solves, matrix
exponentials) plus the practical-stability machinery: KL envelope fits
over simulated sweeps and the combined-system bound with its enlarged
ultimate radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelopes import EnvelopeFit, KlFit, fit_exponential_envelope
from .errors import (
    CertificateError,
    InvalidParameterError,
    NumericalError,
    PreconditionError,
)

_MAX_DIM = 8
_SINGULARITY_RTOL = 1e-8
_LYAPUNOV_RESIDUAL_TOL = 1e-10


def eigenvalues(M: np.ndarray, method: str = "auto") -> np.ndarray:
    """Eigenvalues of a small dense matrix, sorted by real part.

    ``method='quadratic'`` forces the closed-form route (n <= 2) used as
    an independent oracle for the QR-based route (``method='qr'``).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    if M.shape != (n, n) or n > _MAX_DIM:
        raise InvalidParameterError(f"need a square matrix of dim <= {_MAX_DIM}")
    if method == "auto":
        method = "quadratic" if n <= 2 else "qr"
    if method == "quadratic":
        if n > 2:
            raise InvalidParameterError("closed-form eigenvalues only for n <= 2")
        if n == 1:
            vals = np.array([M[0, 0]], dtype=complex)
        else:
            tr = M[0, 0] + M[1, 1]
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            disc = complex(tr * tr - 4.0 * det) ** 0.5
            vals = np.array([(tr - disc) / 2.0, (tr + disc) / 2.0])
    elif method == "qr":
        try:
            vals = np.linalg.eigvals(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    else:
        raise InvalidParameterError(f"unknown eigenvalue method {method!r}")
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def is_hurwitz(M: np.ndarray, margin: float = 0.0) -> bool:
    return bool(np.all(eigenvalues(M).real < -margin))


def solve_lyapunov(A_cl: np.ndarray) -> np.ndarray:
    """Solve ``P A_cl + A_cl' P = -I`` for symmetric positive definite P.

    Vectorizes the equation into an ``n^2 x n^2`` linear system solved by
    Gaussian elimination with partial pivoting, then symmetrizes.

    Raises
    ------
    CertificateError
        If ``A_cl`` is not Hurwitz (the equation has no PD solution).
    NumericalError
        On a singular system or a residual above 1e-10.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    n = A_cl.shape[0]
    if not is_hurwitz(A_cl):
        raise CertificateError("closed-loop matrix is not Hurwitz")
    eye = np.eye(n)
    system = np.kron(A_cl.T, eye) + np.kron(eye, A_cl.T)
    try:
        vec_p = np.linalg.solve(system, (-eye).flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular Lyapunov system: {exc}") from exc
    P = vec_p.reshape((n, n), order="F")
    P = 0.5 * (P + P.T)
    if lyapunov_residual(P, A_cl) > _LYAPUNOV_RESIDUAL_TOL:
        raise NumericalError("Lyapunov residual above tolerance")
    return P


def lyapunov_residual(P: np.ndarray, A_cl: np.ndarray) -> float:
    """Frobenius norm of ``P A_cl + A_cl' P + I``."""
    n = A_cl.shape[0]
    return float(np.linalg.norm(P @ A_cl + A_cl.T @ P + np.eye(n), ord="fro"))


def matrix_exp(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a degree-16 Taylor series."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise InvalidParameterError("matrix exponential of a non-finite matrix")
    norm = np.linalg.norm(M, ord=np.inf)
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
    A = M / (2.0 ** s)
    n = M.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 17):
        term = term @ A / k
        result = result + term
    for _ in range(s):
        result = result @ result
    return result


@dataclass(frozen=True)
class ScriptA:
    """The error-decay matrix of the retarded construction, with diagnostics."""

    matrix: np.ndarray
    singular_inverse: bool
    eigenvalues: np.ndarray


def build_script_A(A, Lambda, K, C, NT: float) -> ScriptA:
    """Form ``A - Lam K C (I - e^{Lam K C NT})^{-1} (I + e^{-A NT})``.

    When ``I - e^{Lam K C NT}`` is numerically singular (which happens
    structurally whenever ``Lam K C`` is rank deficient, since the
    exponential then has eigenvalue 1), the Moore-Penrose pseudoinverse is
    substituted and ``singular_inverse`` is set; singularity is reported,
    never raised.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if n > _MAX_DIM:
        raise InvalidParameterError(f"dimension above {_MAX_DIM}")
    LKC = np.atleast_2d(np.asarray(Lambda, float)) @ np.asarray(K, float).reshape(n, -1) \
        @ np.atleast_2d(np.asarray(C, float))
    gap = np.eye(n) - matrix_exp(LKC * NT)
    u, s, vt = np.linalg.svd(gap)
    singular = bool(s.min() < _SINGULARITY_RTOL * max(s.max(), 1e-300))
    if singular:
        keep = s > _SINGULARITY_RTOL * max(s.max(), 1e-300)
        s_inv = np.zeros_like(s)
        s_inv[keep] = 1.0 / s[keep]
        gap_inv = vt.T @ np.diag(s_inv) @ u.T
    else:
        gap_inv = np.linalg.solve(gap, np.eye(n))
    matrix = A - LKC @ gap_inv @ (np.eye(n) + matrix_exp(-A * NT))
    return ScriptA(matrix=matrix, singular_inverse=singular,
                   eigenvalues=eigenvalues(matrix, method="qr" if n > 2 else "auto"))


def lyapunov_value(P: np.ndarray, Lambda: np.ndarray, eta: np.ndarray) -> float:
    """Quadratic Lyapunov candidate ``eta' Lam^{-1} P Lam^{-1} eta / 2``."""
    Lam_inv = np.linalg.inv(np.atleast_2d(np.asarray(Lambda, float)))
    eta = np.asarray(eta, dtype=float)
    v = Lam_inv @ eta
    return float(0.5 * v @ np.atleast_2d(np.asarray(P, float)) @ v)


def alpha_bounds(P: np.ndarray, lam: float, n: int, r: float) -> tuple[float, float]:
    """Quadratic comparison bounds ``(alpha1(r), alpha2(r))`` for the candidate.

    As printed, ``alpha2 = lmax(P) / (2 lam^2) r^2`` and
    ``alpha1 = lmin(P) / (2 lam^{2n}) r^2``; the pair only sandwiches the
    candidate for ``lam >= 1``.
    """
    evals = np.linalg.eigvalsh(np.atleast_2d(np.asarray(P, float)))
    alpha1 = evals.min() / (2.0 * lam ** (2 * n)) * r * r
    alpha2 = evals.max() / (2.0 * lam ** 2) * r * r
    return float(alpha1), float(alpha2)


def mixed_rho(x: np.ndarray, xi: np.ndarray) -> float:
    """Combined magnitude ``||x|| + ||xi|`` of the plant/observer pair."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape != xi.shape:
        raise InvalidParameterError("state dimensions differ")
    return float(np.linalg.norm(x) + np.linalg.norm(xi))


def theorem31_constants(nu: float, alpha: float, Delta1: float, Delta2: float):
    """Enlarged radii ``(nu - Delta1, 4 Delta2)`` for the combined system.

    Requires ``alpha > 0`` and ``nu >= (1 + alpha) * Delta1``.
    """
    if alpha <= 0.0:
        raise InvalidParameterError(f"alpha must be > 0, got {alpha}")
    if nu < (1.0 + alpha) * Delta1:
        raise PreconditionError(
            f"need nu >= (1 + alpha) * Delta1 = {(1 + alpha) * Delta1}, got {nu}"
        )
    return nu - Delta1, 4.0 * Delta2


@dataclass(frozen=True)
class PracticalStabilityEstimate:
    """Certified ``(Delta1, Delta2)`` radii with the fitted KL envelope."""

    delta1: float
    delta2: float
    fit: KlFit | None
    violations: int
    zero_data: bool = False


DELTA2_FLOOR = 1e-6


def certify_practical_stability(results, Delta1: float, floor: float = DELTA2_FLOOR) -> PracticalStabilityEstimate:
    """Smallest ultimate radius and dominating KL envelope over a sweep.

    Each result must expose ``times``, ``x_states`` and ``x0`` (initial
    state).  The certificate asserts
    ``||x(t)|| <= max(c ||x0|| e^{-sigma t}, Delta2)`` over every sample;
    ``violations`` recounts offending samples and is 0 in a passing
    report.

    Raises
    ------
    InvalidParameterError
        On empty input.
    PreconditionError
        If an initial state lies outside the Delta1 ball.
    """
    results = list(results)
    if not results:
        raise InvalidParameterError("empty result list")
    times = np.asarray(results[0].times, dtype=float)
    rel = times - times[0]
    norms = []
    scales = []
    for res in results:
        if np.asarray(res.times).shape != times.shape or not np.allclose(res.times, times):
            raise InvalidParameterError("sweep results must share one time grid")
        x0_norm = float(np.linalg.norm(np.asarray(res.x0, dtype=float)))
        if x0_norm > Delta1 * (1.0 + 1e-9):
            raise PreconditionError(
                f"initial state norm {x0_norm} outside the Delta1 = {Delta1} ball"
            )
        scales.append(x0_norm)
        norms.append(np.linalg.norm(np.asarray(res.x_states, dtype=float), axis=1))
    peak = max(float(series.max()) for series in norms)
    if peak <= floor:
        return PracticalStabilityEstimate(
            delta1=Delta1, delta2=floor,
            fit=KlFit(1.0, 16.0), violations=0, zero_data=True,
        )
    candidates = np.unique(np.concatenate([
        [floor], np.geomspace(floor, peak, 40),
    ]))
    for delta2 in candidates:
        env = fit_exponential_envelope(rel, scales, norms, offset=float(delta2))
        if env.success:
            violations = _count_violations(rel, scales, norms, env.fit, float(delta2))
            if violations == 0:
                return PracticalStabilityEstimate(
                    delta1=Delta1, delta2=float(delta2),
                    fit=env.fit, violations=0, zero_data=env.zero_data,
                )
    env = fit_exponential_envelope(rel, scales, norms, offset=peak)
    fit = env.fit if env.success else None
    return PracticalStabilityEstimate(
        delta1=Delta1, delta2=peak, fit=fit,
        violations=_count_violations(rel, scales, norms, fit, peak),
    )


def _count_violations(rel_times, scales, norms, fit: KlFit | None, delta2: float) -> int:
    count = 0
    for r0, series in zip(scales, norms):
        bound = np.full_like(series, delta2)
        if fit is not None:
            bound = np.maximum(bound, fit.beta(r0, rel_times))
        count += int(np.sum(series > bound * (1.0 + 1e-12) + 1e-15))
    return count


@dataclass(frozen=True)
class Theorem31Check:
    """Pointwise verdict for the combined-system practical-stability bound."""

    passed: bool
    worst_margin: float


def theorem31_bound_check(results, nu: float, Delta1: float, Delta2: float,
                          beta_bar: KlFit) -> Theorem31Check:
    """Check ``||x(t)|| <= max(beta_bar(rho(t0), t), 4 Delta2)`` pointwise.

    Each result must expose ``times``, ``x_states``, ``xi_states``, ``x0``
    and ``xi0``.  Preconditions: the initial estimation error is at most
    ``nu`` and the observer initial state lies in the Delta1 ball.
    """
    results = list(results)
    if not results:
        raise InvalidParameterError("empty result list")
    bound_const = 4.0 * Delta2
    worst = np.inf
    for res in results:
        x0 = np.asarray(res.x0, dtype=float)
        xi0 = np.asarray(res.xi0, dtype=float)
        if float(np.linalg.norm(x0 - xi0)) > nu * (1.0 + 1e-9):
            raise InvalidParameterError(
                "initial estimation error exceeds nu on the initial histories"
            )
        if float(np.linalg.norm(xi0)) > Delta1 * (1.0 + 1e-9):
            raise InvalidParameterError(
                "observer initial state outside the Delta1 ball"
            )
        rho0 = mixed_rho(x0, xi0)
        rel = np.asarray(res.times, dtype=float)
        rel = rel - rel[0]
        norms = np.linalg.norm(np.asarray(res.x_states, dtype=float), axis=1)
        bound = np.maximum(beta_bar.beta(rho0, rel), bound_const)
        worst = min(worst, float(np.min(bound - norms)))
    return Theorem31Check(passed=bool(worst >= -1e-9), worst_margin=worst)


@dataclass(frozen=True)
class StabilityReport:
    """Certificate bundle for one observer design."""

    closed_loop_matrix: np.ndarray
    lyapunov_matrix: np.ndarray | None
    lyapunov_residual: float | None
    closed_loop_eigenvalues: np.ndarray
    script_A: ScriptA | None
    error_decay_eigenvalues: np.ndarray | None
    alpha1_coefficient: float | None
    alpha2_coefficient: float | None
    hurwitz: bool
    notes: tuple[str, ...] = ()


def stability_report(A, Lambda, K, C, NT: float, lam: float) -> StabilityReport:
    """Assemble every certificate for one linear observer design.

    Inapplicable certificates are reported as ``None`` with a note rather
    than raised, since reporting is the product.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    A_cl = A - np.atleast_2d(np.asarray(Lambda, float)) @ np.asarray(K, float).reshape(n, -1) \
        @ np.atleast_2d(np.asarray(C, float))
    eigs = eigenvalues(A_cl)
    notes = []
    hurwitz = bool(np.all(eigs.real < 0))
    P = residual = a1 = a2 = None
    if hurwitz:
        P = solve_lyapunov(A_cl)
        residual = lyapunov_residual(P, A_cl)
        a1, a2 = alpha_bounds(P, lam, n, 1.0)
    else:
        notes.append("closed-loop matrix not Hurwitz; Lyapunov certificate inapplicable")
    script = build_script_A(A, Lambda, K, C, NT)
    if script.singular_inverse:
        notes.append(
            "I - exp(Lam K C * NT) is numerically singular; pseudoinverse used"
        )
    decay_eigs = None
    if P is not None:
        Lam_inv = np.linalg.inv(np.atleast_2d(np.asarray(Lambda, float)))
        W = Lam_inv @ P @ Lam_inv
        decay_eigs = eigenvalues(W @ script.matrix, method="qr" if n > 2 else "auto")
    return StabilityReport(
        closed_loop_matrix=A_cl,
        lyapunov_matrix=P,
        lyapunov_residual=residual,
        closed_loop_eigenvalues=eigs,
        script_A=script,
        error_decay_eigenvalues=decay_eigs,
        alpha1_coefficient=a1,
        alpha2_coefficient=a2,
        hurwitz=hurwitz,
        notes=tuple(notes),
    )
