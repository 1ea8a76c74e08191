"""Spatial Monte Carlo oracle for both tiers.

Each replication draws tier-1 users and femtocells over a 19-site hexagonal
layout (reference cell plus two rings), applies time-hopping, sectoring,
exclusion and tier selection, and evaluates the interference terms seen by
one observer antenna sector. Replications are processed in fixed-size
blocks, each on its own counter-based stream, so estimates are identical for
any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .analytic.femto import FemtoObserver
from .analytic.outofcell import TruncGaussian, fit_out_of_cell
from .geometry import SectorSpec, corner_cells, hex_centers, uniform_in_hex
from .params import SystemParams
from .rng import stream, zt_poisson

TWO_PI = 2.0 * math.pi
Z95 = 1.959963984540054
COMPONENTS = ("c_in", "c_out", "c_f", "f_in", "f_f", "f_c")


class DegenerateScenario(RuntimeError):
    pass


@dataclass(frozen=True)
class MacroObserver:
    """Reference macrocell BS at the origin, sector ``[theta, theta + 2pi/N_sec)``."""

    theta: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    params: SystemParams
    N_c: float
    N_f: float
    observer: MacroObserver | FemtoObserver = MacroObserver()
    replications: int = 20_000
    seed: int = 0
    block_size: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.N_c < 0 or self.N_f < 0:
            raise ValueError("N_c and N_f must be >= 0")
        if isinstance(self.observer, FemtoObserver):
            if not 0 < self.observer.R_0 <= self.params.R_c * (1 + 1e-12):
                raise ValueError("femto observer needs R_0 in (0, R_c]")

    @property
    def is_macro(self) -> bool:
        return isinstance(self.observer, MacroObserver)

    @property
    def features(self) -> dict:
        p = self.params
        return {"exclusion": p.R_f_exc, "tier_selection": p.tier_selection,
                "hopping_mode": p.hopping_mode}

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


@dataclass
class OutageEstimate:
    p_hat: float
    ci_halfwidth: float
    n_effective: int
    outages: int
    component_means: dict = field(default_factory=dict)

    @property
    def ci(self):
        lo, hi = wilson_interval(self.outages, self.n_effective)
        return lo, hi


def wilson_interval(k: int, n: int, z: float = Z95):
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z / den * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, centre - half), min(1.0, centre + half)


# -----------------------------------------------------------------------------
# per-block sampling
# -----------------------------------------------------------------------------

def _cell_points(lam_per_cell_mean: float, centers: np.ndarray, B: int, R: float,
                 rng: np.random.Generator):
    """Poisson points in each listed cell for B replications.

    Returns (xy, rep, cell) flat arrays.
    """
    nc = centers.shape[0]
    if lam_per_cell_mean <= 0:
        return np.empty((0, 2)), np.empty(0, np.int64), np.empty(0, np.int64)
    counts = rng.poisson(lam_per_cell_mean, size=(B, nc)).ravel()
    rep = np.repeat(np.repeat(np.arange(B), nc), counts)
    cell = np.repeat(np.tile(np.arange(nc), B), counts)
    xy = uniform_in_hex(int(counts.sum()), R, rng) + centers[cell]
    return xy, rep, cell


def _in_sector(xy, spec: SectorSpec):
    if spec.is_omni:
        return np.ones(xy.shape[0], dtype=bool)
    return spec.contains(xy[:, 0], xy[:, 1])


def _handoff_mask(user_xy, user_rep, femto_xy, femto_rep, R_f: float):
    """True for tier-1 users within ``R_f`` of any femtocell of their replication."""
    if user_xy.shape[0] == 0 or femto_xy.shape[0] == 0:
        return np.zeros(user_xy.shape[0], dtype=bool)
    # stack replications far apart along x so one tree serves the block
    gap = 1e6
    tree = cKDTree(np.column_stack([femto_xy[:, 0] + gap * femto_rep, femto_xy[:, 1]]))
    d, _ = tree.query(np.column_stack([user_xy[:, 0] + gap * user_rep, user_xy[:, 1]]),
                      k=1, distance_upper_bound=R_f)
    return np.isfinite(d)


@dataclass
class _Femtocells:
    xy: np.ndarray
    rep: np.ndarray
    cell: np.ndarray


def _femtocells(params: SystemParams, N_f: float, centers, B, rng) -> _Femtocells:
    xy, rep, cell = _cell_points(N_f, centers, B, params.R_c, rng)
    if params.R_f_exc > 0 and xy.shape[0]:
        d2 = np.sum((xy - centers[cell]) ** 2, axis=1)
        keep = d2 > params.R_f_exc**2
        xy, rep, cell = xy[keep], rep[keep], cell[keep]
    return _Femtocells(xy, rep, cell)


def _femto_interference(params: SystemParams, fem: _Femtocells, obs_xy, spec: SectorSpec,
                        B: int, rng: np.random.Generator):
    """Shot noise ``sum Q_f Psi_i |X_i|^-alpha`` from co-slot active femtocells
    inside the observing sector. Also returns the per-replication count."""
    if fem.xy.shape[0] == 0:
        return np.zeros(B), np.zeros(B)
    sel = _in_sector(fem.xy, spec)
    xy, rep = fem.xy[sel], fem.rep[sel]
    n = xy.shape[0]
    if params.hopping_mode == "joint":
        users = rng.poisson(params.U_f, n)
        on = (users >= 1) & (rng.random(n) * params.N_hop < 1.0)
    else:
        users = rng.poisson(params.U_f / params.N_hop, n)
        on = users >= 1
    xy, rep, users = xy[on], rep[on], users[on]
    std = params.sigma_dB * (math.sqrt(2.0) if params.shadow_variance_mode == "ratio" else 1.0)
    z = rng.normal(0.0, std, int(users.sum())) if std > 0 else np.zeros(int(users.sum()))
    psi = _kernels.group_lognormal_sum(z, users)
    d2 = np.sum((xy - obs_xy) ** 2, axis=1)
    total = _kernels.power_law_sum(params.Q_f * psi, d2, rep, B, params.alpha)
    count = np.bincount(rep, minlength=B)[:B].astype(float)
    return total, count


def _cellular_terms(params: SystemParams, xy, rep, own_xy, obs_xy, B, rng):
    """Per-user received power at ``obs_xy`` of power-controlled tier-1 users."""
    std = params.sigma_dB * math.sqrt(2.0)
    z = rng.normal(0.0, std, xy.shape[0]) if std > 0 else np.zeros(xy.shape[0])
    d_own2 = np.sum((xy - own_xy) ** 2, axis=1)
    d_obs2 = np.sum((xy - obs_xy) ** 2, axis=1)
    return params.P_r_c * 10.0 ** (z / 10.0) * (d_own2 / d_obs2) ** (0.5 * params.alpha)


def _block(cfg: ScenarioConfig, b: int, B: int, want: frozenset):
    """Simulate B replications of block ``b``; returns per-replication arrays."""
    p = cfg.params
    centers = hex_centers(p.R_c, 2)
    area = p.area_H
    lam_c_cell = cfg.N_c / p.N_hop  # mean co-slot tier-1 users per cell
    rng_m = stream(cfg.seed, "macro", b)
    rng_f = stream(cfg.seed, "femto", b)
    rng_s = stream(cfg.seed, "shadow", b)
    rng_i = stream(cfg.seed, "inner", b)
    out: dict = {"valid": np.ones(B, dtype=bool)}

    need_fem = any(c in want for c in ("c_f", "f_f")) or p.tier_selection
    fem = _femtocells(p, cfg.N_f, centers, B, rng_f) if need_fem else None

    if cfg.is_macro:
        spec = SectorSpec.from_sectors(p.N_sec, cfg.observer.theta)
        origin = np.zeros(2)
        if "c_in" in want:
            if p.tier_selection:
                xy, rep, _ = _cell_points(lam_c_cell, centers[:1], B, p.R_c, rng_m)
                keep = _in_sector(xy, spec)
                xy, rep = xy[keep], rep[keep]
                gone = _handoff_mask(xy, rep, fem.xy, fem.rep, p.R_f)
                xy, rep = xy[~gone], rep[~gone]
                N = np.bincount(rep, minlength=B)[:B]
                out["valid"] = N >= 1
            else:
                N = zt_poisson(lam_c_cell / p.N_sec, B, rng_m)
            out["c_in"] = np.maximum(N - 1, 0) * p.P_r_c
            out["n_in"] = N
        if "c_out" in want:
            xy, rep, cell = _cell_points(lam_c_cell, centers[1:], B, p.R_c, rng_m)
            keep = _in_sector(xy, spec)
            xy, rep, cell = xy[keep], rep[keep], cell[keep] + 1
            if p.tier_selection:
                gone = _handoff_mask(xy, rep, fem.xy, fem.rep, p.R_f)
                xy, rep, cell = xy[~gone], rep[~gone], cell[~gone]
            pw = _cellular_terms(p, xy, rep, centers[cell], origin, B, rng_s)
            out["c_out"] = _kernels.segment_sum(pw, rep, B)
        if "c_f" in want:
            out["c_f"], out["n_f"] = _femto_interference(p, fem, origin, spec, B, rng_s)
        total = sum(out.get(k, 0.0) for k in ("c_in", "c_out", "c_f"))
        out["outage"] = total >= p.rho(p.P_r_c)
        return out

    obs = cfg.observer
    obs_xy = np.array([obs.R_0, 0.0])
    spec = obs.sector
    if "f_in" in want:
        load = p.U_f / obs.sectors
        if p.hopping_mode != "joint":
            load /= p.N_hop
        U = zt_poisson(load, B, rng_i)
        out["f_in"] = (U - 1) * p.P_r_f
    if "f_f" in want:
        out["f_f"], out["n_f"] = _femto_interference(p, fem, obs_xy, spec, B, rng_s)
    if "f_c" in want or "f_c_max" in want:
        cells = corner_cells(p.R_c) if obs.is_corner(p.R_c) else centers[:1]
        xy, rep, cell = _cell_points(lam_c_cell, cells, B, p.R_c, rng_m)
        keep = _in_sector(xy, spec)
        xy, rep, cell = xy[keep], rep[keep], cell[keep]
        if p.tier_selection:
            gone = _handoff_mask(xy, rep, fem.xy, fem.rep, p.R_f)
            xy, rep, cell = xy[~gone], rep[~gone], cell[~gone]
        pw = _cellular_terms(p, xy, rep, cells[cell], obs_xy, B, rng_s)
        out["f_c"] = _kernels.segment_sum(pw, rep, B)
        out["f_c_max"] = _kernels.segment_max(pw, rep, B)
        out["n_c"] = np.bincount(rep, minlength=B)[:B]
    total = sum(out.get(k, 0.0) for k in ("f_in", "f_f", "f_c"))
    out["outage"] = total >= p.rho(p.P_r_f)
    return out


def _run_blocks(cfg: ScenarioConfig, n: int, want) -> dict:
    want = frozenset(want)
    sizes = [min(cfg.block_size, n - s) for s in range(0, n, cfg.block_size)]

    def job(b):
        return _block(cfg, b, sizes[b], want)

    if cfg.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]
    keys = parts[0].keys()
    return {k: np.concatenate([np.atleast_1d(pt[k]) for pt in parts]) for k in keys}


def _all_terms(cfg: ScenarioConfig):
    if cfg.is_macro:
        return ("c_in", "c_out", "c_f")
    return ("f_in", "f_f", "f_c")


def simulate_outage(cfg: ScenarioConfig) -> OutageEstimate:
    """Empirical outage probability at the observer, conditioned on the
    observer having a user of interest."""
    res = _run_blocks(cfg, cfg.replications, _all_terms(cfg))
    valid = res["valid"]
    n = int(valid.sum())
    if n == 0:
        raise DegenerateScenario("conditioning event never occurred")
    k = int(np.count_nonzero(res["outage"] & valid))
    lo, hi = wilson_interval(k, n)
    means = {c: float(res[c][valid].mean()) for c in _all_terms(cfg)}
    return OutageEstimate(k / n, 0.5 * (hi - lo), n, k, means)


def sample_interference(cfg: ScenarioConfig, component: str, n: int) -> np.ndarray:
    """``n`` iid realisations of one interference component at the observer."""
    if component not in ("c_out", "c_f", "f_f", "f_c"):
        raise ValueError(f"unknown component {component!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    macro_side = component.startswith("c_")
    if macro_side != cfg.is_macro:
        raise ValueError(f"component {component} needs a "
                         f"{'macro' if macro_side else 'femto'} observer")
    return _run_blocks(cfg, n, (component,))[component]


def brute_force_dominant_check(cfg: ScenarioConfig, y: float, n: int):
    """Per replication: does one tier-1 interferer alone reach ``y``, and does
    the tier-1 sum reach ``y``? Returns both empirical probabilities."""
    if cfg.is_macro:
        raise ValueError("dominant check needs a femtocell observer")
    res = _run_blocks(cfg, n, ("f_c", "f_c_max"))
    return float(np.mean(res["f_c_max"] >= y)), float(np.mean(res["f_c"] >= y))


def empirical_ccdf(samples, y):
    """P(X > y) and its binomial standard error."""
    s = np.sort(np.asarray(samples, float))
    y = np.asarray(y, float)
    p = 1.0 - np.searchsorted(s, y, side="right") / s.size
    return p, np.sqrt(np.maximum(p * (1 - p), 0.0) / s.size)


def fit_for(params: SystemParams, N_c: float, *, n: int = 10_000, seed: int = 0,
            workers: int = 1, theta: float = 0.0) -> TruncGaussian:
    """Truncated-Gaussian fit of out-of-cell interference at the macro sector."""
    if N_c <= 0:
        return TruncGaussian(0.0, 0.0, {"degenerate": True, "ks": 0.0, "n": 0})
    cfg = ScenarioConfig(params, N_c, 0.0, MacroObserver(theta), replications=n,
                         seed=seed, workers=workers)
    return fit_out_of_cell(sample_interference(cfg, "c_out", n))


def void_fraction(params: SystemParams, N_c: float, n: int, seed: int = 0) -> float:
    """Fraction of replications whose reference macro sector holds no co-slot
    tier-1 user, sampled spatially (no conditioning)."""
    centers = hex_centers(params.R_c, 0)
    spec = SectorSpec.from_sectors(params.N_sec)
    zero = 0
    for b, s in enumerate(range(0, n, 1000)):
        B = min(1000, n - s)
        rng = stream(seed, "void", b)
        xy, rep, _ = _cell_points(N_c / params.N_hop, centers, B, params.R_c, rng)
        keep = _in_sector(xy, spec)
        counts = np.bincount(rep[keep], minlength=B)[:B]
        zero += int(np.count_nonzero(counts == 0))
    return zero / n


def tier_selection_factor_mc(params: SystemParams, N_c: float, N_f: float, n: int,
                             seed: int = 0, block: int = 500):
    """Empirical fraction of tier-1 users in the reference cell (outside the
    exclusion radius) that stay on tier 1 after handoff.

    Returns (ratio estimate, standard error) with the error from the spread
    of per-block ratios.
    """
    centers = hex_centers(params.R_c, 2)
    ratios, weights = [], []
    for b, s in enumerate(range(0, n, block)):
        B = min(block, n - s)
        rng_m = stream(seed, "ts-macro", b)
        rng_f = stream(seed, "ts-femto", b)
        fem = _femtocells(params, N_f, centers, B, rng_f)
        xy, rep, _ = _cell_points(N_c, centers[:1], B, params.R_c, rng_m)
        keep = np.sum(xy**2, axis=1) > params.R_f_exc**2
        xy, rep = xy[keep], rep[keep]
        gone = _handoff_mask(xy, rep, fem.xy, fem.rep, params.R_f)
        if xy.shape[0]:
            ratios.append(1.0 - gone.mean())
            weights.append(xy.shape[0])
    r = np.asarray(ratios)
    w = np.asarray(weights, float)
    est = float(np.sum(r * w) / np.sum(w))
    # weighted standard error of the ratio estimator across blocks
    k = r.size
    var = np.sum((w / w.mean()) ** 2 * (r - est) ** 2) / (k * (k - 1)) if k > 1 else np.nan
    return est, float(math.sqrt(var))
