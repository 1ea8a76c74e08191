"""Operating contours: largest sustainable femtocell count per tier-1 load.

For each ``N_c`` on a grid, the largest integer ``N_f`` such that both the
macrocell and the femtocell outage stay at or below ``epsilon`` is found by
bisection (outage is nondecreasing in ``N_f``). The resulting points form a
staircase that is nonincreasing in ``N_c``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import FemtoObserver, fit_out_of_cell, femto_outage_lb, macro_outage
from .analytic.outofcell import TruncGaussian
from .channel import estimate_shadow_moments
from .montecarlo import MacroObserver, ScenarioConfig, sample_interference, simulate_outage
from .params import SystemParams

SPLIT_CONVENTION = (
    "split spectrum baseline: each tier keeps half the band (processing gain G/2), "
    "no cross-tier interference, omnidirectional femtocells, N_hop=1, macro keeps its sectors"
)
CSV_HEADER = ["scenario", "N_c", "N_f", "p_out_c", "p_out_f", "binding", "method"]
DEFAULT_GRID = tuple(range(0, 61, 3))


class NonMonotoneOutage(RuntimeError):
    """Outage decreased when ``N_f`` grew; carries the offending triple."""

    def __init__(self, scenario, N_c, N_f_pair, values):
        self.scenario, self.N_c, self.N_f_pair, self.values = scenario, N_c, N_f_pair, values
        super().__init__(f"{scenario}: outage not monotone in N_f at N_c={N_c}: "
                         f"N_f={N_f_pair} gave {values}")


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """What is evaluated: system parameters, femtocell observer, and whether
    the tiers share the band (``split=False``) or are split."""

    name: str
    params: SystemParams
    observer: FemtoObserver
    split: bool = False
    macro_theta: float = 0.0

    def describe(self) -> dict:
        p = self.params
        d = {"name": self.name, "R_0": self.observer.R_0, "theta": self.observer.theta,
             "sectors": self.observer.sectors, "split": self.split,
             "P_ratio": p.P_r_f / p.P_r_c, "N_hop": p.N_hop, "N_sec": p.N_sec,
             "R_exc": p.R_f_exc, "tier_selection": p.tier_selection,
             "hopping_mode": p.hopping_mode, "params_hash": p.digest()}
        if self.split:
            d["convention"] = SPLIT_CONVENTION
        return d


def interior_observer(params: SystemParams, sectors: int = 3) -> FemtoObserver:
    return FemtoObserver(0.5 * params.R_c, 2.0 * math.pi / 3.0, sectors)


def corner_observer(params: SystemParams, sectors: int = 3) -> FemtoObserver:
    return FemtoObserver(params.R_c, 2.0 * math.pi / 3.0, sectors)


def baseline_scenario(params: SystemParams, observer: FemtoObserver,
                      name: str = "split") -> Scenario:
    bp = params.replace(G=params.G / 2.0, N_hop=1, R_f_exc=0.0, tier_selection=False)
    return Scenario(name, bp, FemtoObserver(observer.R_0, observer.theta, 1), split=True)


@dataclass
class PointEval:
    p_c: float
    p_f: float
    ci_c: float = 0.0
    ci_f: float = 0.0
    flags: frozenset = frozenset()


@dataclass(frozen=True)
class ContourPoint:
    N_c: float
    N_f: int
    p_out_c: float
    p_out_f: float
    binding: tuple
    method: str
    flags: frozenset = frozenset()


@dataclass
class OperatingContour:
    scenario: dict
    epsilon: float
    method: str
    grid: tuple
    points: list
    scan: dict = field(default_factory=dict)  # N_c -> largest feasible N_f (-1: none)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in self.points:
            for b in self.points:
                if b.N_c > a.N_c and b.N_f > a.N_f:
                    raise ValueError(f"point {a} is dominated by {b}")

    @property
    def name(self) -> str:
        return self.scenario.get("name", "")

    def n_f(self, N_c) -> int:
        return self.scan[float(N_c)]

    def max_N_c(self) -> float:
        ok = [c for c, n in self.scan.items() if n >= 0]
        return max(ok) if ok else float("nan")

    def rows(self):
        for p in self.points:
            yield [self.name, _fmt(p.N_c), str(p.N_f), _fmt(p.p_out_c), _fmt(p.p_out_f),
                   "+".join(p.binding), p.method]


def _fmt(x) -> str:
    return f"{float(x):.10g}"


class Evaluator:
    """Outage pair at ``(N_c, N_f)`` for a scenario, with cached shadow
    moments and out-of-cell fits."""

    def __init__(self, scenario: Scenario, method: str = "analytic", *, reps: int = 20_000,
                 fit_reps: int = 10_000, seed: int = 0, workers: int = 1,
                 moments_cache=None):
        if method not in ("analytic", "montecarlo"):
            raise ValueError(f"unknown method {method!r}")
        self.scenario = scenario
        self.method = method
        self.reps, self.fit_reps, self.seed, self.workers = reps, fit_reps, seed, workers
        self.moments_cache = moments_cache
        self._fits: dict = {}
        self._moments = None

    @property
    def moments(self):
        if self._moments is None:
            self._moments = estimate_shadow_moments(self.scenario.params, seed=self.seed,
                                                    cache_dir=self.moments_cache)
        return self._moments

    def fit(self, N_c: float) -> TruncGaussian:
        key = float(N_c)
        if key not in self._fits:
            sc = self.scenario
            if N_c <= 0:
                f = TruncGaussian(0.0, 0.0, {"degenerate": True})
            else:
                cfg = ScenarioConfig(sc.params.replace(tier_selection=False), N_c, 0.0,
                                     MacroObserver(sc.macro_theta), replications=self.fit_reps,
                                     seed=self.seed, workers=self.workers)
                f = fit_out_of_cell(sample_interference(cfg, "c_out", self.fit_reps))
            self._fits[key] = f
        return self._fits[key]

    def __call__(self, N_c: float, N_f: float) -> PointEval:
        if self.method == "analytic":
            return self._analytic(N_c, N_f)
        return self._montecarlo(N_c, N_f)

    def _analytic(self, N_c, N_f) -> PointEval:
        sc = self.scenario
        p = sc.params
        nf_macro = 0.0 if sc.split else N_f
        nc_femto = 0.0 if sc.split else N_c
        rc = macro_outage(p, nf_macro, N_c, self.fit(N_c), self.moments)
        rf = femto_outage_lb(p, N_f, nc_femto, sc.observer, self.moments)
        return PointEval(rc.p_out, rf.p_out, flags=frozenset(rc.flags | rf.flags))

    def _montecarlo(self, N_c, N_f) -> PointEval:
        sc = self.scenario
        p = sc.params
        nf_macro = 0.0 if sc.split else N_f
        nc_femto = 0.0 if sc.split else N_c
        base = dict(replications=self.reps, seed=self.seed, workers=self.workers)
        ec = simulate_outage(ScenarioConfig(p, N_c, nf_macro, MacroObserver(sc.macro_theta),
                                            **base))
        ef = simulate_outage(ScenarioConfig(p, nc_femto, N_f, sc.observer, **base))
        return PointEval(ec.p_hat, ef.p_hat, ec.ci_halfwidth, ef.ci_halfwidth)


def _feasible(e: PointEval, eps: float) -> bool:
    return e.p_c <= eps and e.p_f <= eps


def _check_monotone(name, N_c, evals: dict, tol_abs: float, statistical: bool):
    ks = sorted(evals)
    for a, b in zip(ks, ks[1:]):
        ea, eb = evals[a], evals[b]
        for va, vb, ca, cb in ((ea.p_c, eb.p_c, ea.ci_c, eb.ci_c),
                               (ea.p_f, eb.p_f, ea.ci_f, eb.ci_f)):
            tol = tol_abs + (1.5 * (ca + cb) if statistical else 0.0)
            if vb < va - tol:
                raise NonMonotoneOutage(name, N_c, (a, b), (va, vb))


def largest_feasible(evalf, N_c: float, eps: float, N_f_max: int, *, hi: int | None = None,
                     name: str = "", statistical: bool = False):
    """Largest integer ``N_f`` in ``[0, N_f_max]`` meeting both constraints.

    Returns ``(N_f, evals)`` with ``N_f = -1`` when even ``N_f = 0`` fails.
    ``hi``, if given, is a value already known to be infeasible.
    """
    evals: dict = {}

    def ev(n):
        if n not in evals:
            evals[n] = evalf(N_c, float(n))
        return evals[n]

    if not _feasible(ev(0), eps):
        return -1, evals
    top = N_f_max if hi is None else min(hi, N_f_max)
    if hi is None or hi > N_f_max:
        if _feasible(ev(top), eps):
            _check_monotone(name, N_c, evals, 1e-6, statistical)
            return top, evals
    lo = 0
    while top - lo > 1:
        mid = (lo + top) // 2
        if _feasible(ev(mid), eps):
            lo = mid
        else:
            top = mid
    _check_monotone(name, N_c, evals, 1e-6, statistical)
    return lo, evals


def _binding(evalf, N_c, n, evals, eps, N_f_max):
    if n >= N_f_max:
        return ("cap",)
    nxt = evals.get(n + 1)
    if nxt is None:
        nxt = evals[n + 1] = evalf(N_c, float(n + 1))
    out = []
    if nxt.p_c > eps:
        out.append("macro")
    if nxt.p_f > eps:
        out.append("femto")
    return tuple(out) or ("none",)


def pareto_prune(points):
    """Drop points beaten in both coordinates by another point."""
    keep = []
    for a in points:
        if not any(b.N_c > a.N_c and b.N_f > a.N_f for b in points):
            keep.append(a)
    return keep


def compute_oc(scenario: Scenario, epsilon: float, grid=DEFAULT_GRID,
               method: str = "analytic", *, N_f_max: int = 500, warm_start: bool = True,
               evaluator: Evaluator | None = None, **eval_kw) -> OperatingContour:
    """Operating contour of ``scenario`` at outage target ``epsilon``.

    With ``warm_start`` the search at each ``N_c`` starts from the previous
    grid point's infeasible bound, which is valid because outage is also
    nondecreasing in ``N_c``.
    """
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    ev = evaluator or Evaluator(scenario, method, **eval_kw)
    statistical = ev.method == "montecarlo"
    scan, pts = {}, []
    hi = None
    for N_c in grid:
        n, evals = largest_feasible(ev, N_c, epsilon, N_f_max, hi=hi, name=scenario.name,
                                    statistical=statistical)
        scan[N_c] = n
        if n < 0:
            hi = 0 if warm_start else None
            continue
        binding = _binding(ev, N_c, n, evals, epsilon, N_f_max)
        e = evals[n]
        pts.append(ContourPoint(N_c, n, e.p_c, e.p_f, binding, ev.method, e.flags))
        hi = (n + 1) if warm_start else None
    meta = {
        "scenario": scenario.describe(), "epsilon": epsilon, "method": ev.method,
        "grid": list(grid), "N_f_max": N_f_max, "seed": ev.seed,
        "replications": ev.reps if statistical else None, "fit_replications": ev.fit_reps,
        "shadow_variance_mode": scenario.params.shadow_variance_mode,
        "baseline_convention": SPLIT_CONVENTION,
        "unbounded": any(p.binding == ("cap",) for p in pts),
    }
    return OperatingContour(scenario.describe(), epsilon, ev.method, grid, pareto_prune(pts),
                            scan, meta)


def exhaustive_oc(scenario: Scenario, epsilon: float, grid, evaluator: Evaluator,
                  N_f_max: int) -> dict:
    """Reference scan: every ``N_f`` in ``0..N_f_max`` at every grid point."""
    out = {}
    for N_c in grid:
        best = -1
        for n in range(N_f_max + 1):
            if _feasible(evaluator(float(N_c), float(n)), epsilon):
                best = n
        out[float(N_c)] = best
    return out


def split_spectrum_baseline(params: SystemParams, epsilon: float, grid=DEFAULT_GRID,
                            observer: FemtoObserver | None = None, method: str = "analytic",
                            **kw) -> OperatingContour:
    """Contour of the split-spectrum network (see ``SPLIT_CONVENTION``)."""
    obs = observer or corner_observer(params)
    return compute_oc(baseline_scenario(params, obs), epsilon, grid, method, **kw)


@dataclass
class Comparison:
    grid: tuple
    names: list
    baseline: str
    table: dict  # N_c -> {name: N_f}
    ratios: dict  # N_c -> {name: N_f / baseline N_f}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N_c"] + [f"N_f[{n}]" for n in self.names]
                   + [f"ratio[{n}]" for n in self.names])
        for c in self.grid:
            w.writerow([_fmt(c)] + [str(self.table[c][n]) for n in self.names]
                       + [_fmt(self.ratios[c][n]) for n in self.names])
        return buf.getvalue()


def compare_scenarios(contours, baseline: int = 0) -> Comparison:
    """Align contours on their shared grid; ratios are taken against
    ``contours[baseline]``."""
    contours = list(contours)
    if not contours:
        raise GridMismatch("no contours to compare")
    g0, e0 = contours[0].grid, contours[0].epsilon
    for c in contours[1:]:
        if c.grid != g0:
            raise GridMismatch(f"grid of {c.name!r} differs")
        if c.epsilon != e0:
            raise GridMismatch(f"epsilon of {c.name!r} differs")
    names = []
    for i, c in enumerate(contours):
        nm = c.name or f"s{i}"
        names.append(nm if nm not in names else f"{nm}#{i}")
    table, ratios = {}, {}
    for N_c in g0:
        row = {n: c.scan[N_c] for n, c in zip(names, contours)}
        b = row[names[baseline]]
        table[N_c] = row
        ratios[N_c] = {n: _ratio(v, b) for n, v in row.items()}
    return Comparison(g0, names, names[baseline], table, ratios)


def _ratio(v: int, b: int) -> float:
    # -1 marks an infeasible grid point (no N_f works)
    v, b = max(v, 0), max(b, 0)
    if b > 0:
        return v / b
    return 1.0 if v == 0 else math.inf


def contours_to_csv(contours) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in contours:
        for r in c.rows():
            w.writerow(r)
    return buf.getvalue()


def contour_metadata_json(contours, **extra) -> str:
    return json.dumps({"contours": [c.metadata for c in contours], **extra},
                      indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(type(o).__name__)
