"""One-sided stable law of planar Poisson shot noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import erf, erfc, gamma

from ..geometry import effective_intensities
from ..params import SystemParams


class UnsupportedExponent(ValueError):
    pass


class QuadratureFailure(RuntimeError):
    pass


class DomainError(ValueError):
    pass


def kappa_f(eta_f: float, Q_f: float, moment_half: float) -> float:
    """Scale ``eta_f^2 pi^3 Q_f E[Psi^1/2]^2 / 4`` of the shot-noise law."""
    if eta_f <= 0 or Q_f <= 0 or moment_half <= 0:
        raise DomainError("kappa_f needs strictly positive inputs")
    return eta_f**2 * math.pi**3 * Q_f * moment_half**2 / 4.0


@dataclass(frozen=True)
class LevyStable:
    """Levy law ``F(y) = erfc(sqrt(kappa / y))``.

    ``kappa == 0`` is accepted as the no-interferer limit (point mass at 0).
    """

    kappa: float
    delta: float = 0.5

    def __post_init__(self):
        if not math.isclose(self.delta, 0.5, rel_tol=0, abs_tol=1e-12):
            raise UnsupportedExponent(
                f"closed form needs delta = 1/2 (alpha = 4), got {self.delta}")
        if self.kappa < 0:
            raise DomainError("kappa must be >= 0")

    @property
    def degenerate(self) -> bool:
        return self.kappa == 0.0

    def cdf(self, y):
        y = np.asarray(y, float)
        if self.degenerate:
            return np.where(y > 0, 1.0, 0.0)
        with np.errstate(divide="ignore"):
            return np.where(y > 0, erfc(np.sqrt(self.kappa / np.where(y > 0, y, 1.0))), 0.0)

    def ccdf(self, y):
        y = np.asarray(y, float)
        if self.degenerate:
            return np.where(y > 0, 0.0, 1.0)
        return np.where(y > 0, erf(np.sqrt(self.kappa / np.where(y > 0, y, 1.0))), 1.0)

    def pdf(self, y):
        y = np.asarray(y, float)
        if self.degenerate:
            return np.zeros_like(y)
        yy = np.where(y > 0, y, 1.0)
        val = math.sqrt(self.kappa / math.pi) * yy**-1.5 * np.exp(-self.kappa / yy)
        return np.where(y > 0, val, 0.0)

    def sample(self, n: int, rng: np.random.Generator):
        if self.degenerate:
            return np.zeros(n)
        z = rng.standard_normal(n)
        return 2.0 * self.kappa / (z * z)

    def convolve(self, g, t: float, *, epsabs: float = 1e-9) -> float:
        """``int_0^t f(x) g(t - x) dx`` for a bounded, smooth ``g`` on (0, t].

        Uses ``x = kappa / s^2`` which maps the density to the weight
        ``2/sqrt(pi) exp(-s^2)`` on ``[sqrt(kappa/t), inf)``.
        """
        if t <= 0:
            return 0.0
        if self.degenerate:
            return float(g(t))
        from scipy.integrate import quad
        s0 = math.sqrt(self.kappa / t)
        s1 = s0 + 9.0  # exp(-81) is below double precision relative to the body

        def integrand(s):
            return math.exp(-s * s) * g(t - self.kappa / (s * s))

        val, err = quad(integrand, s0, s1, epsabs=epsabs, epsrel=1e-10, limit=200)
        if not math.isfinite(val) or err > 1e-6:
            raise QuadratureFailure(f"stable convolution err={err:.2e} at t={t}")
        return 2.0 / math.sqrt(math.pi) * val


# panel edges (offsets from the lower limit) for the fixed rule; dense near
# the lower limit where g(t - kappa/s^2) varies on a log scale
_PANEL_OFFSETS = np.array([0.0, 1e-3, 4e-3, 0.015, 0.04, 0.1, 0.2, 0.35, 0.55, 0.8,
                           1.1, 1.5, 2.0, 2.7, 3.5, 4.5, 6.0, 9.0])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _fixed_nodes():
    a, b = _PANEL_OFFSETS[:-1, None], _PANEL_OFFSETS[1:, None]
    x = (0.5 * (b - a) * _GL_X + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * _GL_W).ravel()
    return x, w


_FIX_X, _FIX_W = _fixed_nodes()


def convolve_fixed(law: LevyStable, g_vec, t) -> np.ndarray:
    """Vectorised ``int_0^t f(x) g(t - x) dx`` for an array of ``t``.

    Same substitution as :meth:`LevyStable.convolve` with a composite
    Gauss-Legendre rule; ``g_vec`` must accept arrays. All thresholds are
    evaluated with a single call to ``g_vec``.
    """
    t = np.atleast_1d(np.asarray(t, float))
    out = np.zeros(t.shape)
    pos = t > 0
    if not np.any(pos):
        return out
    if law.degenerate:
        out[pos] = g_vec(t[pos])
        return out
    tp = t[pos][:, None]
    s0 = np.sqrt(law.kappa / tp)
    s = s0 + _FIX_X[None, :]
    v = tp - law.kappa / (s * s)
    vals = np.asarray(g_vec(np.maximum(v, 1e-300).ravel()), float).reshape(v.shape)
    out[pos] = 2.0 / math.sqrt(math.pi) * np.sum(_FIX_W * np.exp(-s * s) * vals, axis=1)
    return out


def levy_cdf(y, law: LevyStable):
    return law.cdf(y)


def levy_pdf(y, law: LevyStable):
    return law.pdf(y)


def femto_levy(params: SystemParams, N_f: float, moments, n_sec: int | None = None,
               hopping_mode: str | None = None) -> LevyStable:
    """Femtocell shot-noise law at one antenna sector for mean ``N_f`` per cell."""
    if not math.isclose(params.alpha, 4.0):
        raise UnsupportedExponent("closed-form outage needs alpha = 4")
    eta_f = effective_intensities(params, 0.0, N_f, n_sec, hopping_mode).eta_f
    if eta_f == 0:
        return LevyStable(0.0)
    return LevyStable(kappa_f(eta_f, params.Q_f, moments.moment))


def stable_char_fn(s, delta: float, eta_f: float, Q_f: float, moment_delta: float):
    """Laplace functional ``exp[-pi eta_f Gamma(1-delta) E[Psi^delta] (Q_f s)^delta]``.

    Accepts real ``s >= 0`` (numpy) or a complex mpmath value (for inversion).
    """
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if eta_f < 0 or Q_f <= 0 or moment_delta < 0:
        raise DomainError("invalid shot-noise parameters")
    c = math.pi * eta_f * float(gamma(1.0 - delta)) * moment_delta
    if isinstance(s, (mpmath.mpc, mpmath.mpf, complex)):
        return mpmath.exp(-c * (Q_f * s) ** delta)
    s = np.asarray(s, float)
    if np.any(s < 0):
        raise DomainError("s must be >= 0")
    return np.exp(-c * (Q_f * s) ** delta)


def cf_inversion_cdf(y, delta: float, eta_f: float, Q_f: float, moment_delta: float,
                     dps: int = 30):
    """CDF by numerical Laplace inversion (Talbot) of ``Q_Y(s) / s``."""
    ys = np.atleast_1d(np.asarray(y, float))
    out = np.empty(ys.shape)
    with mpmath.workdps(dps):
        fn = lambda s: stable_char_fn(s, delta, eta_f, Q_f, moment_delta) / s  # noqa: E731
        for i, yi in enumerate(ys):
            out[i] = float(mpmath.invertlaplace(fn, yi, method="talbot"))
    return out if np.ndim(y) else float(out[0])
