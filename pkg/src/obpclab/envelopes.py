"""Exponential comparison-function envelopes for decay-rate certificates.

The envelope family is ``beta(r, t) = c * r * exp(-sigma * t)`` with
``c >= 1`` and ``sigma > 0``, which is a KL function and the natural fit
for linear error dynamics.  Fitting works on the worst-case normalized
log-magnitude curve: take the pointwise maximum of ``ln(|e(t)| / r0)``
over all supplied trajectories, regress its slope, then push the offset
up until the envelope dominates every sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

SIGMA_MAX = 16.0
C_CAP = 1e6
_VALUE_FLOOR = 1e-14


@dataclass(frozen=True)
class KlFit:
    """Parameters of the envelope ``beta(r, t) = c * r * exp(-sigma * t)``."""

    c: float
    sigma: float

    def __post_init__(self):
        if self.c < 1.0 or self.sigma <= 0.0:
            raise InvalidParameterError(
                f"KL envelope needs c >= 1 and sigma > 0, got ({self.c}, {self.sigma})"
            )

    def beta(self, r, t):
        return self.c * np.asarray(r) * np.exp(-self.sigma * np.asarray(t))


@dataclass(frozen=True)
class EnvelopeFit:
    """Outcome of an envelope fit: parameters on success, diagnosis otherwise."""

    fit: KlFit | None
    success: bool
    zero_data: bool = False
    message: str = ""


def _max_offset_needed(log_points_t, log_points_w, sigma):
    return float(np.max(log_points_w + sigma * log_points_t))


def fit_exponential_envelope(
    times: np.ndarray,
    scales,
    series,
    offset: float = 0.0,
    sigma_max: float = SIGMA_MAX,
    c_cap: float = C_CAP,
) -> EnvelopeFit:
    """Fit the tightest ``c * r * exp(-sigma t)`` envelope over sampled norms.

    Parameters
    ----------
    times : array of shape (n_t,)
        Sample times shared by all trajectories, starting at 0.
    scales : sequence of float
        Per-trajectory normalization ``r0`` (initial magnitude).
    series : sequence of arrays of shape (n_t,)
        Per-trajectory magnitude samples.
    offset : float
        Samples at or below this level are considered covered by the
        constant part of a ``max(beta, offset)`` bound and do not
        constrain the envelope.

    Returns
    -------
    EnvelopeFit
        ``success=False`` when no decaying envelope (``sigma > 0`` with
        ``c <= c_cap``) dominates the data; ``zero_data=True`` when every
        sample is negligible and any envelope works.
    """
    times = np.asarray(times, dtype=float)
    t_pts = []
    w_pts = []
    for r0, vals in zip(scales, series):
        vals = np.asarray(vals, dtype=float)
        if vals.shape != times.shape:
            raise InvalidParameterError("trajectory length does not match times")
        if r0 <= 0.0:
            if np.any(vals > max(offset, _VALUE_FLOOR)):
                return EnvelopeFit(
                    None, success=False,
                    message="nonzero error from zero initial magnitude",
                )
            continue
        mask = vals > max(offset, _VALUE_FLOOR * r0)
        if not np.any(mask):
            continue
        t_pts.append(times[mask])
        w_pts.append(np.log(vals[mask] / r0))
    if not t_pts:
        return EnvelopeFit(
            KlFit(1.0, sigma_max), success=True, zero_data=True,
            message="all samples negligible; degenerate envelope",
        )
    t_all = np.concatenate(t_pts)
    w_all = np.concatenate(w_pts)

    # Worst-case curve: pointwise max of the normalized log magnitudes.
    order = np.argsort(t_all)
    t_sorted = t_all[order]
    w_sorted = w_all[order]
    t_unique, inverse = np.unique(t_sorted, return_inverse=True)
    w_max = np.full(t_unique.shape, -np.inf)
    np.maximum.at(w_max, inverse, w_sorted)

    if t_unique.size < 2 or np.ptp(t_unique) == 0.0:
        return EnvelopeFit(None, success=False, message="too few distinct sample times")

    slope = np.polyfit(t_unique, w_max, 1)[0]
    sigma = min(-slope, sigma_max)
    if sigma <= 0.0:
        return EnvelopeFit(
            None, success=False,
            message=f"worst-case magnitude does not decay (slope {slope:.3g})",
        )
    c = np.exp(_max_offset_needed(t_all, w_all, sigma))
    if c > c_cap:
        # Trade decay rate for offset until the envelope fits under the cap.
        lo, hi = 0.0, sigma
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid <= 0.0:
                break
            if np.exp(_max_offset_needed(t_all, w_all, mid)) <= c_cap:
                lo = mid
            else:
                hi = mid
        sigma = lo
        if sigma <= 0.0:
            return EnvelopeFit(
                None, success=False,
                message="no exponential envelope fits under the scale cap",
            )
        c = np.exp(_max_offset_needed(t_all, w_all, sigma))
    return EnvelopeFit(KlFit(max(float(c), 1.0), float(sigma)), success=True)
