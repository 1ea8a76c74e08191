"""Femtocell exclusion region and tier-selection thinning."""

from __future__ import annotations

import math

import numpy as np

from .stable import DomainError


def exclusion_H(y, R_exc: float, Q_f: float, moments):
    """Dominant-interferer area function ``H(y)`` (clamped at 0).

    ``pi * eta_f * H(y)`` is the mean number of femtocells outside the
    exclusion disk able to push the interference above ``y`` on their own.
    """
    y = np.asarray(y, float)
    if np.any(y <= 0):
        raise DomainError("y must be > 0")
    if R_exc < 0:
        raise DomainError("R_exc must be >= 0")
    d = moments.delta
    scale = (Q_f / y) ** d
    if R_exc == 0:
        return scale * moments.moment
    u = (y / Q_f) * R_exc ** (2.0 / d)
    tail_moment = moments.moment - moments.partial_moment(u)
    H = scale * tail_moment - moments.ccdf(u) * R_exc**2
    return np.maximum(H, 0.0)


def exclusion_ccdf_lb(y, R_exc: float, eta_f: float, Q_f: float, moments):
    """Lower bound ``1 - exp(-pi eta_f H(y))`` on the ccdf of I_c,f."""
    H = exclusion_H(y, R_exc, Q_f, moments)
    return -np.expm1(-math.pi * eta_f * H)


def exclusion_cdf_ub(y, R_exc: float, eta_f: float, Q_f: float, moments):
    """Companion upper bound on the cdf, used in place of the stable cdf."""
    y = np.asarray(y, float)
    out = np.zeros(y.shape)
    pos = y > 0
    if np.any(pos):
        out[pos] = np.exp(-math.pi * eta_f * exclusion_H(y[pos], R_exc, Q_f, moments))
    return out


def no_exclusion_ccdf_lb(y, eta_f: float, Q_f: float, moments):
    """No-exclusion bound ``1 - exp(-pi eta_f Q_f^d E[Psi^d] y^-d)``."""
    y = np.asarray(y, float)
    d = moments.delta
    return -np.expm1(-math.pi * eta_f * Q_f**d * moments.moment * y ** (-d))


def tier_selection_factor(lambda_f: float, R_f: float) -> float:
    """Void probability of femtocells within ``R_f`` of a point."""
    return math.exp(-lambda_f * math.pi * R_f**2)


def tier_selection_intensity(lambda_c: float, lambda_f: float, R_f: float,
                             R_exc: float, r):
    """Tier-1 intensity at distance ``r`` from the macro BS after handoff."""
    r = np.asarray(r, float)
    if np.any(r < 0):
        raise DomainError("r must be >= 0")
    out = np.where(r <= R_exc, lambda_c, lambda_c * tier_selection_factor(lambda_f, R_f))
    return float(out) if out.ndim == 0 else out


def tier_selected_mean(N_c: float, N_f: float, area: float, R_f: float, R_exc: float) -> float:
    """Mean tier-1 count in a cell after handoff (exclusion disk untouched)."""
    lam_c, lam_f = N_c / area, N_f / area
    disk = math.pi * R_exc**2
    return lam_c * (disk + (area - disk) * tier_selection_factor(lam_f, R_f))
