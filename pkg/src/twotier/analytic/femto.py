"""Femtocell-side results: dominant-interferer bound on cellular interference
and the femtocell outage lower bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .. import _kernels
from ..channel import ShadowLaw
from ..geometry import SectorSpec, effective_intensities, ray_hex_exit
from ..params import SystemParams
from .exclusion import tier_selection_factor
from .macro import OutageResult, max_in_sector_users, truncated_poisson_weights
from .stable import (DomainError, QuadratureFailure, UnsupportedExponent, convolve_fixed,
                     femto_levy)

TWO_PI = 2.0 * math.pi
# Taylor value may exceed the untruncated bound by this much before it is flagged
STRAIN_TOL = 0.01


@dataclass(frozen=True)
class FemtoObserver:
    """Femtocell BS on the hexagonal axis at ``(R_0, 0)``.

    ``sectors == 1`` is an omnidirectional antenna. ``corner`` is implied by
    ``R_0 == R_c``.
    """

    R_0: float
    theta: float = 2.0 * math.pi / 3.0
    sectors: int = 3

    @property
    def sector(self) -> SectorSpec:
        return SectorSpec(self.theta, TWO_PI / self.sectors, (self.R_0, 0.0))

    @property
    def omni(self) -> bool:
        return self.sectors == 1

    def is_corner(self, R_c: float) -> bool:
        return math.isclose(self.R_0, R_c, rel_tol=1e-12)


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panel_nodes(edges, n):
    """Composite Gauss-Legendre nodes/weights over consecutive ``edges``."""
    x, w = _gauss_legendre(n)
    a = edges[..., :-1, None]
    b = edges[..., 1:, None]
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    weights = half * w
    shape = nodes.shape[:-2] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _quadratic_roots(k, R0, cphi):
    """Positive roots in r of ``(1-k^2) r^2 - 2 k^2 R0 cos(phi) r - k^2 R0^2 = 0``.

    These are the distances along a ray from the femtocell where a user's
    path-loss-only interference ``(d_macro / r)^alpha`` equals ``1/k^alpha``.
    Returns two arrays (nan where absent).
    """
    a = 1.0 - k * k
    b = -2.0 * k * k * R0 * cphi
    c = -k * k * R0 * R0
    out1 = np.full(np.broadcast(k, cphi).shape, np.nan)
    out2 = out1.copy()
    lin = np.abs(a) < 1e-14
    with np.errstate(invalid="ignore", divide="ignore"):
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        r1 = (-b - sq) / (2 * a)
        r2 = (-b + sq) / (2 * a)
        rl = -c / b
    out1 = np.where(lin, rl, r1)
    out2 = np.where(lin, np.nan, r2)
    out1 = np.where(out1 > 0, out1, np.nan)
    out2 = np.where(out2 > 0, out2, np.nan)
    return out1, out2


@dataclass
class CellularBound:
    """Dominant-interferer area ``A(y) = iint_{H_sec} S(r, phi; y) r dr dphi``.

    ``A`` does not depend on the tier-1 density, so one table serves every
    ``N_c``. With a femtocell exclusion radius ``R_exc`` the area is split
    into the part inside the exclusion disk (no handoff thinning) and the
    rest, so tier-selection thinning can be applied per ``N_f``.
    """

    y_grid: np.ndarray
    area_in: np.ndarray
    area_out: np.ndarray
    multiplicity: int
    region_area: float
    richardson_gap: float
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        ly = np.log(self.y_grid)
        total = self.area_in + self.area_out
        self._tot = PchipInterpolator(ly, np.log(np.maximum(total, 1e-300)))
        self._frac_in = PchipInterpolator(
            ly, np.where(total > 0, self.area_in / np.maximum(total, 1e-300), 0.0))
        # large-y power-law tail from the last two grid points
        self._slope = (math.log(max(total[-1], 1e-300)) - math.log(max(total[-2], 1e-300))) / (
            ly[-1] - ly[-2])

    def area(self, y, thin_out: float = 1.0):
        """Weighted area; points outside the exclusion disk are scaled by
        ``thin_out``."""
        y = np.asarray(y, float)
        ly = np.log(np.maximum(y, 1e-300))
        lo, hi = math.log(self.y_grid[0]), math.log(self.y_grid[-1])
        lyc = np.clip(ly, lo, hi)
        tot = np.exp(self._tot(lyc))
        tot = np.where(ly > hi, tot * np.exp(self._slope * (ly - hi)), tot)
        tot = np.where(ly < lo, self.area_in[0] + self.area_out[0], tot)
        fin = np.clip(self._frac_in(lyc), 0.0, 1.0)
        return self.multiplicity * tot * (fin + (1.0 - fin) * thin_out)

    def log_F(self, y, lambda_c: float, N_hop: int, thin_out: float = 1.0):
        """``ln F^lb(y) = -(lambda_c / N_hop) * A(y)``."""
        return -(lambda_c / N_hop) * self.area(y, thin_out)

    def ccdf_lb(self, y, lambda_c: float, N_hop: int, thin_out: float = 1.0):
        return -np.expm1(self.log_F(y, lambda_c, N_hop, thin_out))


def _angular_edges(obs: FemtoObserver, R_c: float, n_panels_min=8):
    """Angular breakpoints: sector edges plus directions of hexagon vertices."""
    sec = obs.sector
    if sec.is_omni:
        lo, hi = 0.0, TWO_PI
    else:
        lo, hi = obs.theta, obs.theta + sec.width
    verts = np.arange(6) * math.pi / 3
    vx, vy = R_c * np.cos(verts) - obs.R_0, R_c * np.sin(verts)
    dist = np.hypot(vx, vy)
    ang = np.arctan2(vy[dist > 1e-9], vx[dist > 1e-9])
    cuts = [lo, hi]
    for a in ang:
        for base in (a - TWO_PI, a, a + TWO_PI, a + 2 * TWO_PI):
            if lo < base < hi:
                cuts.append(base)
    cuts = np.unique(np.array(cuts))
    # subdivide long panels
    edges = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        k = max(1, int(math.ceil((b - a) / (TWO_PI / n_panels_min))))
        edges.extend(np.linspace(a, b, k + 1)[1:])
    return np.array(edges)


def _dominance_area(y_over_P, obs: FemtoObserver, params: SystemParams, s_ln: float,
                    R_exc: float, n_ang: int, n_rad: int):
    """Return (area_in, area_out) arrays for each value of ``y / P_r^c``."""
    R_c, R0, alpha = params.R_c, obs.R_0, params.alpha
    ang_edges = _angular_edges(obs, R_c)
    phi, wphi = _panel_nodes(ang_edges, n_ang)
    rmax = ray_hex_exit(R0, 0.0, phi, R_c)
    cphi = np.cos(phi)
    res_in = np.zeros(len(y_over_P))
    res_out = np.zeros(len(y_over_P))
    spread = [0.0] if s_ln <= 0 else [-3.0, -1.5, 0.0, 1.5, 3.0]
    for i, yp in enumerate(y_over_P):
        # breakpoints where path-loss-only interference crosses y, widened by
        # the shadowing spread in log-domain
        pts = [np.zeros_like(phi), rmax]
        for j in spread:
            k = (1.0 / yp) ** (1.0 / alpha) * math.exp(j * s_ln / alpha)
            r1, r2 = _quadratic_roots(k, R0, cphi)
            for r in (r1, r2):
                pts.append(np.clip(np.nan_to_num(r, nan=0.0), 0.0, rmax))
        edges = np.sort(np.stack(pts, axis=-1), axis=-1)
        r, wr = _panel_nodes(edges, n_rad)
        ux = R0 + r * cphi[:, None]
        uy = r * np.sin(phi)[:, None]
        d2 = ux * ux + uy * uy
        with np.errstate(divide="ignore", invalid="ignore"):
            x = yp * (r * r / np.maximum(d2, 1e-300)) ** (0.5 * alpha)
        S = _kernels.lognormal_ccdf(x, s_ln)
        integrand = S * r * wr
        if R_exc > 0:
            inside = d2 <= R_exc * R_exc
            a_in = np.sum(np.where(inside, integrand, 0.0), axis=1)
            a_all = np.sum(integrand, axis=1)
            res_in[i] = np.dot(wphi, a_in)
            res_out[i] = np.dot(wphi, a_all - a_in)
        else:
            res_out[i] = np.dot(wphi, np.sum(integrand, axis=1))
    return res_in, res_out


def _hsec_area(obs: FemtoObserver, params: SystemParams, n_ang=64):
    edges = _angular_edges(obs, params.R_c)
    phi, w = _panel_nodes(edges, n_ang)
    rmax = ray_hex_exit(obs.R_0, 0.0, phi, params.R_c)
    return float(np.dot(w, 0.5 * rmax**2))


@lru_cache(maxsize=64)
def _cellular_bound_cached(R_c, alpha, P_r_c, s_ln, R_exc, R_0, theta, sectors,
                           n_ang, n_rad, y_lo, y_hi, n_y):
    params = SystemParams(R_c=R_c, alpha=alpha, P_r_c=P_r_c, R_f=min(20.0, R_c / 2),
                          d_0c=max(100.0, 1.0), d_0f=5.0)
    obs = FemtoObserver(R_0, theta, sectors)
    y_grid = np.geomspace(y_lo, y_hi, n_y)
    a_in, a_out = _dominance_area(y_grid / P_r_c, obs, params, s_ln, R_exc, n_ang, n_rad)
    # Richardson-style check at a few grid points with halved resolution
    probe = y_grid[:: max(1, n_y // 8)]
    c_in, c_out = _dominance_area(probe / P_r_c, obs, params, s_ln, R_exc,
                                  max(4, n_ang // 2), max(4, n_rad // 2))
    fine = (a_in + a_out)[:: max(1, n_y // 8)]
    coarse = c_in + c_out
    gap = float(np.max(np.abs(fine - coarse) / np.maximum(fine, 1e-12)))
    corner_omni = obs.omni and math.isclose(R_0, R_c)
    return (y_grid, a_in, a_out, 3 if corner_omni else 1, _hsec_area(obs, params), gap)


def cellular_bound(params: SystemParams, observer: FemtoObserver,
                   law: ShadowLaw | None = None, *, exclusion_radius: float | None = None,
                   n_ang: int = 32, n_rad: int = 24, y_range=(1e-4, 1e7),
                   n_y: int = 141) -> CellularBound:
    """Tabulate the dominant-interferer area for a femtocell observer.

    Cellular shadowing is the ratio of two lognormals (double dB variance)
    regardless of the femtocell-mark convention. ``sigma_dB == 0`` selects the
    path-loss-only indicator kernel, integrated exactly between its
    boundary roots.
    """
    if not 0 < observer.R_0 <= params.R_c * (1 + 1e-12):
        raise DomainError(f"R_0={observer.R_0} outside (0, R_c]")
    law = law or ShadowLaw(params.sigma_dB, "ratio")
    R_exc = params.R_f_exc if exclusion_radius is None else exclusion_radius
    y_lo, y_hi = y_range[0] * params.P_r_c, y_range[1] * params.P_r_c
    res = _cellular_bound_cached(params.R_c, params.alpha, params.P_r_c, law.s_ln,
                                 float(R_exc), float(observer.R_0), float(observer.theta),
                                 int(observer.sectors), n_ang, n_rad, y_lo, y_hi, n_y)
    y_grid, a_in, a_out, mult, hsec, gap = res
    return CellularBound(y_grid, a_in, a_out, mult, hsec, gap,
                         {"kernel": "indicator" if law.s_ln == 0 else "lognormal",
                          "s_ln": law.s_ln})


def femto_cellular_ccdf_lb(y, observer: FemtoObserver, params: SystemParams, N_c: float,
                           law: ShadowLaw | None = None, *, N_f: float = 0.0,
                           tier_selection: bool | None = None,
                           exclusion_radius: float | None = None):
    """Lower bound on the ccdf of tier-1 interference at a femtocell sector."""
    y = np.asarray(y, float)
    if np.any(y <= 0):
        raise DomainError("y must be > 0")
    cb = cellular_bound(params, observer, law, exclusion_radius=exclusion_radius)
    ts = params.tier_selection if tier_selection is None else tier_selection
    thin = tier_selection_factor(N_f / params.area_H, params.R_f) if ts else 1.0
    return cb.ccdf_lb(y, N_c / params.area_H, params.N_hop, thin)


def femto_outage_lb(params: SystemParams, N_f: float, N_c: float, observer: FemtoObserver,
                    moments, *, law: ShadowLaw | None = None,
                    tier_selection: bool | None = None,
                    exclusion_radius: float | None = None) -> OutageResult:
    """Femtocell outage lower bound (alpha = 4, small tier-1 density).

    The first-order ``e^x ~ 1 + x`` step overshoots for heavy tier-1 load
    and can push the raw value above one. The result is clamped and flagged
    ``approximation_strained`` whenever it leaves [0, 1] or exceeds the
    untruncated convolution bound by more than ``STRAIN_TOL``. That bound
    (no Taylor step, always a valid lower bound) is reported in
    ``terms['no_taylor']``.
    """
    if not math.isclose(params.alpha, 4.0):
        raise UnsupportedExponent("femtocell outage closed form needs alpha = 4")
    ts = params.tier_selection if tier_selection is None else tier_selection
    n_sec = observer.sectors
    mode = params.hopping_mode
    levy = femto_levy(params, N_f, moments, n_sec=n_sec)
    cb = cellular_bound(params, observer, law, exclusion_radius=exclusion_radius)
    lam_c = N_c / params.area_H
    thin = tier_selection_factor(N_f / params.area_H, params.R_f) if ts else 1.0

    load = params.U_f / n_sec if mode == "joint" else params.U_f / (n_sec * params.N_hop)
    M = max_in_sector_users(params.G, params.gamma, params.N_hop)
    w = truncated_poisson_weights(load, M)
    rho = params.rho(params.P_r_f)

    keep = np.nonzero((w >= 1e-16) | (np.arange(w.size) == 0))[0]
    t = rho - keep * params.P_r_f
    wk = w[keep]
    if lam_c > 0:
        def log_F(y):
            return cb.log_F(np.maximum(y, 1e-300), lam_c, params.N_hop, thin)
    else:
        def log_F(y):
            return np.zeros(np.shape(y))

    if levy.degenerate:
        lf = np.where(t > 0, log_F(np.maximum(t, 1e-300)), -np.inf)
        g_taylor, g_exact = 1.0 + lf, np.exp(lf)
        g_taylor = np.where(t > 0, g_taylor, 0.0)
    else:
        F_ff = levy.cdf(t)
        if lam_c > 0:
            conv = convolve_fixed(levy, log_F, t)
            g_exact = convolve_fixed(levy, lambda v: np.exp(log_F(v)), t)
        else:
            conv, g_exact = np.zeros(t.shape), F_ff
        g_taylor = F_ff + conv
    strained = bool(np.any(g_taylor < 0))
    G_vals = [float(g) for g in g_taylor]
    survive_taylor = float(np.sum(wk * g_taylor))
    survive_exact = float(np.sum(wk * g_exact))
    raw = 1.0 - survive_taylor
    if raw > 1.0 or raw < 0.0 or raw - (1.0 - survive_exact) > STRAIN_TOL:
        strained = True
    p = min(max(raw, 0.0), 1.0)
    flags = {"approximation_strained"} if strained else set()
    terms = {
        "kappa_f": levy.kappa, "in_sector_load": load, "rho_f": rho, "M": M,
        "raw": raw, "no_taylor": min(max(1.0 - survive_exact, 0.0), 1.0),
        "G_f": G_vals, "lambda_c": lam_c, "tier_thinning": thin,
        "richardson_gap": cb.richardson_gap, "multiplicity": cb.multiplicity,
    }
    if not math.isfinite(p):
        raise QuadratureFailure("non-finite femtocell outage")
    return OutageResult(p, terms, "lower_bound", flags)
