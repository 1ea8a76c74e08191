"""Propagation gains, uplink power control and composite-shadowing statistics."""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

from .params import SystemParams
from .rng import stream, zt_poisson

LN10_OVER_10 = math.log(10.0) / 10.0
GRID_POINTS = 512
DEFAULT_MOMENT_SAMPLES = 1_000_000


class DomainError(ValueError):
    pass


def outdoor_gain(params: SystemParams, distance, shadow=1.0):
    """``K_c (d_0c / d)^alpha * shadow``."""
    d = np.asarray(distance, float)
    if np.any(d <= 0):
        raise DomainError("distance must be > 0")
    out = params.K_c * (params.d_0c / d) ** params.alpha * shadow
    return float(out) if out.ndim == 0 else out


def indoor_gain(params: SystemParams, distance, shadow=1.0):
    """``K_f (d_0f / d)^beta * shadow``."""
    d = np.asarray(distance, float)
    if np.any(d <= 0):
        raise DomainError("distance must be > 0")
    out = params.K_f * (params.d_0f / d) ** params.beta * shadow
    return float(out) if out.ndim == 0 else out


def uplink_tx_power(receive_target, gain):
    """Power-controlled transmit power hitting ``receive_target`` exactly."""
    g = np.asarray(gain, float)
    if np.any(g <= 0):
        raise DomainError("gain must be > 0")
    out = receive_target / g
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ShadowLaw:
    """Lognormal shadowing; ``ratio`` is the quotient of two independent
    lognormals and therefore carries twice the dB variance."""

    sigma_dB: float
    variance_mode: str = "ratio"

    @property
    def std_dB(self) -> float:
        return self.sigma_dB * (math.sqrt(2.0) if self.variance_mode == "ratio" else 1.0)

    @property
    def variance_dB(self) -> float:
        return (2.0 if self.variance_mode == "ratio" else 1.0) * self.sigma_dB**2

    @property
    def s_ln(self) -> float:
        """Standard deviation of the natural log of the gain."""
        return self.std_dB * LN10_OVER_10

    @classmethod
    def for_params(cls, params: SystemParams, mode: str | None = None) -> "ShadowLaw":
        return cls(params.sigma_dB, mode or params.shadow_variance_mode)


def draw_shadow(law: ShadowLaw, rng: np.random.Generator, size=None):
    """Linear gain ``10^(Z/10)``, ``Z ~ N(0, law.variance_dB)``."""
    if law.std_dB == 0:
        return 1.0 if size is None else np.ones(size)
    return 10.0 ** (rng.normal(0.0, law.std_dB, size) / 10.0)


@dataclass(frozen=True)
class ShadowMoments:
    """Monte Carlo functionals of ``Psi = sum_{j<=U} Psi_j``, ``U ~ Poisson | >= 1``.

    ``grid`` is log-spaced; ``cdf_grid[i] = P(Psi <= grid[i])`` and
    ``partial_grid[i] = E[Psi^delta 1{Psi <= grid[i]}]``.
    """

    delta: float
    moment: float
    mean_psi: float
    grid: np.ndarray
    cdf_grid: np.ndarray
    partial_grid: np.ndarray
    sample_count: int
    seed: int
    mean_users: float
    law: ShadowLaw

    @property
    def moment_half(self) -> float:
        return self.moment

    def cdf(self, u):
        u = np.asarray(u, float)
        with np.errstate(divide="ignore"):
            lu = np.log(u)
        return np.interp(lu, np.log(self.grid), self.cdf_grid, left=0.0, right=1.0)

    def ccdf(self, u):
        return 1.0 - self.cdf(u)

    def partial_moment(self, u):
        """``E[Psi^delta ; Psi <= u]`` = F(u) E[Psi^delta | Psi <= u]."""
        u = np.asarray(u, float)
        with np.errstate(divide="ignore"):
            lu = np.log(u)
        return np.interp(lu, np.log(self.grid), self.partial_grid,
                         left=0.0, right=self.moment)

    def cond_moment(self, u):
        F = self.cdf(u)
        P = self.partial_moment(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(F > 0, P / np.where(F > 0, F, 1.0), 0.0)


def _sample_psi(mean_users: float, law: ShadowLaw, n: int, seed: int,
                block: int = 250_000) -> np.ndarray:
    out = np.empty(n)
    s = law.std_dB
    from . import _kernels
    for b, start in enumerate(range(0, n, block)):
        m = min(block, n - start)
        rng = stream(seed, "shadow-moments", b)
        U = zt_poisson(mean_users, m, rng)
        if s == 0:
            out[start:start + m] = U
        else:
            z = rng.normal(0.0, s, int(U.sum()))
            out[start:start + m] = _kernels.group_lognormal_sum(z, U)
    return out


def moments_from_samples(psi: np.ndarray, delta: float, *, seed=0, mean_users=0.0,
                         law: ShadowLaw | None = None) -> ShadowMoments:
    psi = np.sort(np.asarray(psi, float))
    n = psi.size
    pw = psi**delta
    cum = np.cumsum(pw) / n
    lo, hi = np.quantile(psi, [1e-6, 1.0 - 1e-6])
    if hi <= lo:
        # degenerate (e.g. Psi == 1): widen to a tiny bracket around the atom
        lo, hi = lo * (1 - 1e-9), hi * (1 + 1e-9)
    grid = np.geomspace(lo, hi, GRID_POINTS)
    idx = np.searchsorted(psi, grid, side="right")
    cdf = idx / n
    partial = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    return ShadowMoments(delta=delta, moment=float(cum[-1]), mean_psi=float(psi.mean()),
                         grid=grid, cdf_grid=cdf, partial_grid=partial,
                         sample_count=n, seed=seed, mean_users=mean_users,
                         law=law or ShadowLaw(0.0))


_CACHE: dict = {}


def _cache_key(mean_users, law, delta, n, seed):
    return (round(float(mean_users), 12), float(law.sigma_dB), law.variance_mode,
            round(float(delta), 12), int(n), int(seed))


def estimate_shadow_moments(params: SystemParams, law: ShadowLaw | None = None,
                            n_samples: int = DEFAULT_MOMENT_SAMPLES, seed: int = 0,
                            mean_users: float | None = None,
                            cache_dir: str | os.PathLike | None = None) -> ShadowMoments:
    """Estimate the femtocell composite-shadowing functionals.

    ``mean_users`` is the Poisson mean of users per transmitting femtocell
    before zero-truncation: ``U_f`` for joint hopping, ``U_f / N_hop`` for
    independent hopping (picked automatically when omitted).
    """
    law = law or ShadowLaw.for_params(params)
    if mean_users is None:
        mean_users = params.U_f if params.hopping_mode == "joint" else params.U_f / params.N_hop
    key = _cache_key(mean_users, law, params.delta, n_samples, seed)
    if key in _CACHE:
        return _CACHE[key]
    path = None
    if cache_dir is not None:
        tag = hashlib.sha256(repr(key).encode()).hexdigest()[:16]
        path = os.path.join(os.fspath(cache_dir), f"moments-{tag}.npz")
        if os.path.exists(path):
            m = load_moments(path, law)
            _CACHE[key] = m
            return m
    psi = _sample_psi(mean_users, law, n_samples, seed)
    m = moments_from_samples(psi, params.delta, seed=seed, mean_users=mean_users, law=law)
    _CACHE[key] = m
    if path is not None:
        os.makedirs(os.path.dirname(path), exist_ok=True)
        save_moments(path, m)
    return m


def save_moments(path, m: ShadowMoments) -> None:
    np.savez(path, delta=m.delta, moment=m.moment, mean_psi=m.mean_psi, grid=m.grid,
             cdf_grid=m.cdf_grid, partial_grid=m.partial_grid,
             sample_count=m.sample_count, seed=m.seed, mean_users=m.mean_users,
             sigma_dB=m.law.sigma_dB, variance_mode=m.law.variance_mode)


def load_moments(path, law: ShadowLaw | None = None) -> ShadowMoments:
    z = np.load(path)
    law = law or ShadowLaw(float(z["sigma_dB"]), str(z["variance_mode"]))
    return ShadowMoments(delta=float(z["delta"]), moment=float(z["moment"]),
                         mean_psi=float(z["mean_psi"]), grid=z["grid"],
                         cdf_grid=z["cdf_grid"], partial_grid=z["partial_grid"],
                         sample_count=int(z["sample_count"]), seed=int(z["seed"]),
                         mean_users=float(z["mean_users"]), law=law)
