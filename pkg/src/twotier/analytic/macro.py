"""Macrocell uplink outage with Poisson in-cell, Gaussian out-of-cell and
stable femtocell interference."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import poisson

from ..geometry import effective_intensities
from ..params import SystemParams
from .exclusion import exclusion_cdf_ub, tier_selected_mean, tier_selection_factor
from .outofcell import TruncGaussian, thinned_fit
from .stable import QuadratureFailure, UnsupportedExponent, femto_levy

QUAD_TOL = 1e-6


@dataclass
class OutageResult:
    p_out: float
    terms: dict = field(default_factory=dict)
    method: str = "analytic"
    flags: set = field(default_factory=set)

    def __post_init__(self):
        if not 0.0 <= self.p_out <= 1.0:
            raise ValueError(f"p_out={self.p_out} outside [0, 1]")


def max_in_sector_users(G: float, gamma: float, N_hop: int) -> int:
    """Largest number of co-slot users m with ``(m - 1) P_r < rho``."""
    return int(math.floor(G / (gamma * N_hop) + 1e-9))


def truncated_poisson_weights(mean: float, M: int) -> np.ndarray:
    """``P(N = m | N >= 1)`` for m = 1..M, with the ``mean -> 0`` limit."""
    if M < 1:
        return np.zeros(0)
    if mean <= 0:
        w = np.zeros(M)
        w[0] = 1.0
        return w
    m = np.arange(1, M + 1)
    return poisson.pmf(m, mean) / -math.expm1(-mean)


def convolve_cdf(out_of_cell: TruncGaussian, femto_cdf, t: float) -> float:
    """``P(I_out + I_cf <= t)`` for independent terms."""
    if t <= 0:
        return 0.0
    if out_of_cell.degenerate:
        return float(femto_cdf(t - out_of_cell.mean())) if t > out_of_cell.mean() else 0.0
    lo, hi = out_of_cell.support_window()
    hi = min(hi, t)
    if hi <= lo:
        return 0.0
    mu = out_of_cell.mu

    def integrand(x):
        return float(out_of_cell.pdf(x)) * float(femto_cdf(t - x))

    pts = [p for p in (mu,) if lo < p < hi]
    val, err = quad(integrand, lo, hi, points=pts or None, epsabs=1e-10, epsrel=1e-10,
                    limit=200)
    if err > QUAD_TOL:
        raise QuadratureFailure(f"G_c quadrature error {err:.2e} at t={t}")
    return min(max(val, 0.0), 1.0)


def macro_outage(params: SystemParams, N_f: float, N_c: float, fit: TruncGaussian,
                 moments, *, exclusion_radius: float | None = None,
                 tier_selection: bool | None = None) -> OutageResult:
    """Outage probability at a macrocell antenna sector (alpha = 4).

    ``fit`` describes out-of-cell interference without handoff. Under tier
    selection it is thinned here by the femtocell void probability (the
    exclusion disks around neighbouring sites contribute negligibly).
    """
    if not math.isclose(params.alpha, 4.0):
        raise UnsupportedExponent("macro outage closed form needs alpha = 4")
    R_exc = params.R_f_exc if exclusion_radius is None else exclusion_radius
    ts = params.tier_selection if tier_selection is None else tier_selection
    eff = effective_intensities(params, N_c, N_f)
    nh, ns = params.N_hop, params.N_sec
    if ts:
        count_mean = tier_selected_mean(N_c, N_f, params.area_H, params.R_f, R_exc) / (nh * ns)
        fit = thinned_fit(fit, tier_selection_factor(N_f / params.area_H, params.R_f))
    else:
        count_mean = eff.eta_c * params.area_H
    rho = params.rho(params.P_r_c)
    M = max_in_sector_users(params.G, params.gamma, nh)
    w = truncated_poisson_weights(count_mean, M)

    levy = femto_levy(params, N_f, moments)
    if R_exc > 0 and eff.eta_f > 0:
        def femto_cdf(y, _e=eff.eta_f):
            return float(exclusion_cdf_ub(np.array([y]), R_exc, _e, params.Q_f, moments)[0])
        femto_model = "exclusion_bound"
    else:
        def femto_cdf(y):
            return float(levy.cdf(y))
        femto_model = "levy"

    survive = 0.0
    G_vals = []
    for m, wm in enumerate(w, start=1):
        if wm < 1e-16 and m > 1:
            G_vals.append(float("nan"))
            continue
        g = convolve_cdf(fit, femto_cdf, rho - (m - 1) * params.P_r_c)
        G_vals.append(g)
        survive += wm * g
    p = min(max(1.0 - survive, 0.0), 1.0)
    terms = {
        "eta_c": eff.eta_c, "eta_f": eff.eta_f, "kappa_f": levy.kappa,
        "in_sector_mean": count_mean, "rho_c": rho, "M": M,
        "femto_model": femto_model, "out_of_cell": (fit.mu, fit.sigma),
        "G_c": G_vals,
    }
    return OutageResult(p, terms, "analytic")
