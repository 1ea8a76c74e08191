"""Truncated-Gaussian model for out-of-cell macrocell interference."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import log_ndtr


class InsufficientSamples(ValueError):
    pass


MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class TruncGaussian:
    """Normal ``(mu, sigma)`` restricted to ``y >= 0`` and renormalised.

    ``sigma == 0`` is a point mass at ``max(mu, 0)``.
    """

    mu: float
    sigma: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def degenerate(self) -> bool:
        return self.sigma <= 0.0

    @property
    def _log_norm(self) -> float:
        # log P(X > 0) for the untruncated normal; stays finite deep in the tail
        return float(log_ndtr(self.mu / self.sigma))

    def pdf(self, y):
        y = np.asarray(y, float)
        if self.degenerate:
            return np.zeros_like(y)
        z = (y - self.mu) / self.sigma
        log_dens = -0.5 * z * z - math.log(math.sqrt(2 * math.pi) * self.sigma) - self._log_norm
        return np.where(y >= 0, np.exp(log_dens), 0.0)

    def cdf(self, y):
        y = np.asarray(y, float)
        if self.degenerate:
            return np.where(y >= max(self.mu, 0.0), 1.0, 0.0)
        # 1 - P(X > y) / P(X > 0), with the ratio taken in log space
        yy = np.maximum(y, 0.0)
        sf = np.exp(log_ndtr((self.mu - yy) / self.sigma) - self._log_norm)
        return np.clip(np.where(y >= 0, 1.0 - sf, 0.0), 0.0, 1.0)

    def mean(self) -> float:
        if self.degenerate:
            return max(self.mu, 0.0)
        return float(self._frozen().mean())

    def var(self) -> float:
        if self.degenerate:
            return 0.0
        return float(self._frozen().var())

    def _frozen(self):
        return stats.truncnorm(-self.mu / self.sigma, np.inf, loc=self.mu, scale=self.sigma)

    def sample(self, n: int, rng: np.random.Generator):
        if self.degenerate:
            return np.full(n, max(self.mu, 0.0))
        return self._frozen().rvs(n, random_state=rng)

    def support_window(self, width: float = 12.0):
        """Interval carrying all but ~1e-30 of the mass."""
        if self.degenerate:
            m = max(self.mu, 0.0)
            return m, m
        return max(0.0, self.mu - width * self.sigma), self.mu + width * self.sigma


def _moments_of(mu, sigma):
    d = stats.truncnorm(-mu / sigma, np.inf, loc=mu, scale=sigma)
    return d.mean(), d.var()


def _match_moments(m: float, v: float):
    s = math.sqrt(v)
    if m / s > 8.0:
        return m, s

    def resid(p):
        mu_, ls = p
        mm, vv = _moments_of(mu_, math.exp(ls))
        return [(mm - m) / s, (vv - v) / v]

    sol = optimize.least_squares(resid, x0=[m, math.log(s)], method="lm",
                                 xtol=1e-12, ftol=1e-12)
    if not (sol.success and np.max(np.abs(sol.fun)) < 1e-6):
        # the truncated family cannot reach this (mean, var) pair; fall back
        # to the untruncated match
        return m, s
    return float(sol.x[0]), math.exp(float(sol.x[1]))


def fit_from_moments(mean: float, var: float) -> TruncGaussian:
    """Truncated Gaussian with the given mean and variance."""
    if mean < 0 or var < 0:
        raise ValueError("mean and variance must be >= 0")
    if mean == 0.0 or var <= (1e-12 * mean) ** 2:
        return TruncGaussian(mean, 0.0, {"degenerate": True})
    mu, sigma = _match_moments(mean, var)
    return TruncGaussian(mu, sigma, {"degenerate": False})


def thinned_fit(fit: TruncGaussian, factor: float) -> TruncGaussian:
    """Fit for the same interferer field independently thinned by ``factor``.

    Shot-noise cumulants are linear in the intensity, so mean and variance
    both scale by ``factor``.
    """
    if not 0.0 <= factor <= 1.0:
        raise ValueError("factor must lie in [0, 1]")
    return fit_from_moments(factor * fit.mean(), factor * fit.var())


def fit_out_of_cell(samples, min_samples: int = MIN_SAMPLES) -> TruncGaussian:
    """Moment-matched truncated Gaussian; KS distance kept in diagnostics."""
    x = np.asarray(samples, float)
    if x.size < min_samples:
        raise InsufficientSamples(f"need >= {min_samples} samples, got {x.size}")
    if np.any(x < 0):
        raise ValueError("interference samples must be non-negative")
    m, v = float(x.mean()), float(x.var())
    if v <= (1e-12 * max(m, 1e-300)) ** 2 or m == 0.0:
        return TruncGaussian(m, 0.0, {"degenerate": True, "ks": 0.0, "n": x.size,
                                      "sample_mean": m, "sample_var": v})
    mu, sigma = _match_moments(m, v)
    fit = TruncGaussian(mu, sigma)
    ks = stats.kstest(x, fit.cdf).statistic
    return TruncGaussian(mu, sigma, {"degenerate": False, "ks": float(ks), "n": x.size,
                                     "sample_mean": m, "sample_var": v})
